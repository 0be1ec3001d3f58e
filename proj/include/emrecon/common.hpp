#ifndef EMRECON_COMMON_HPP
#define EMRECON_COMMON_HPP

#include <Eigen/Core>
#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace emrecon {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::Vector3d;
using Eigen::VectorXd;
using Eigen::VectorXi;

// Thrown for invalid configuration, geometry or file contents. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a solve produces non-finite values or a scheme constraint is
// violated at run time. Maps to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, long step = -1)
      : std::runtime_error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

// Axis-aligned box; coordinates beyond `dim` are ignored (kept at zero).
struct Box {
  Vector3d lo = Vector3d::Zero();
  Vector3d hi = Vector3d::Zero();

  static Box make2d(double x0, double y0, double x1, double y1) {
    Box b;
    b.lo << x0, y0, 0.0;
    b.hi << x1, y1, 0.0;
    return b;
  }
  static Box make3d(double x0, double y0, double z0, double x1, double y1, double z1) {
    Box b;
    b.lo << x0, y0, z0;
    b.hi << x1, y1, z1;
    return b;
  }
  bool contains(const Vector3d& p, int dim, double tol = 0.0) const {
    for (int a = 0; a < dim; ++a)
      if (p[a] < lo[a] - tol || p[a] > hi[a] + tol) return false;
    return true;
  }
};

}  // namespace emrecon

#endif  // EMRECON_COMMON_HPP
