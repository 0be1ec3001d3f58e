#ifndef EMRECON_MEDIA_HPP
#define EMRECON_MEDIA_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "emrecon/common.hpp"
#include "emrecon/mesh.hpp"

namespace emrecon::media {

// One row of the tissue table: media number label, tissue name and the
// (already rescaled, dimensionless) dielectric properties.
struct MediaRow {
  double media = 0.0;
  std::string tissue;
  double eps_r = 1.0;
  double sigma = 0.0;
};

struct MediaTable {
  std::vector<MediaRow> rows;

  // Tissue table used in the numerical experiments (breast-phantom set).
  static MediaTable reference();

  const MediaRow* find(double media_number) const;

  static MediaTable load_csv(const std::string& path);
  void save_csv(const std::string& path) const;
};

// Voxel phantom with per-voxel media numbers, row-major (x fastest).
struct VoxelPhantom {
  int dim = 2;
  std::array<int, 3> dims{1, 1, 1};  // voxel counts; z = 1 in 2D
  double spacing = 1.0;
  Vector3d origin = Vector3d::Zero();
  std::vector<double> media;

  int num_voxels() const { return dims[0] * dims[1] * dims[2]; }
  int index(int i, int j, int k = 0) const { return i + dims[0] * (j + dims[1] * k); }
  // voxel containing p, clamped to the phantom; false if p is outside
  bool locate(const Vector3d& p, std::array<int, 3>& c) const;

  static VoxelPhantom load(const std::string& path);
  void save(const std::string& path) const;
};

// The unknowns of the inverse problem: nodal relative permittivity and
// rescaled conductivity on the FEM mesh, with their admissible bounds.
struct CoefficientField {
  VectorXd eps;
  VectorXd sigma;
  double eps_max = 10.0;
  double sigma_max = 2.0;
};

struct ShapeSpec {
  enum class Kind { Ball, BoxShape } kind = Kind::Ball;
  Vector3d center = Vector3d::Zero();  // ball
  double radius = 0.0;                 // ball
  Box box;                             // box
  double media = -1.0;
};

// Per-voxel (eps, sigma) from media numbers: eps_r / weight clamped below at 1
// and sigma / weight. Unknown media numbers are a hard error naming the voxel.
void map_media(const VoxelPhantom& phantom, const MediaTable& table, double weight,
               VectorXd& eps, VectorXd& sigma);

// Piecewise-constant sampling of a voxel field at mesh nodes after coarsening
// the voxel grid with the given stride. Each coarse block takes the value of
// its lowest-index fine voxel. Nodes outside the phantom get `background` and
// are counted in `outside` when non-null.
VectorXd sample_voxels_to_nodes(const VectorXd& voxel_values, const VoxelPhantom& geometry,
                                const mesh::SimplicialMesh& fem_mesh, int stride,
                                double background, int* outside = nullptr);

// Full phantom -> CoefficientField pipeline (sampling plus bound projection).
CoefficientField sample_to_mesh(const VectorXd& eps_voxels, const VectorXd& sigma_voxels,
                                const VoxelPhantom& geometry, const mesh::HybridMesh& hm,
                                int stride, double eps_max, double sigma_max,
                                int* outside = nullptr);

// Clamp eps into [1, eps_max] and sigma into [0, sigma_max]; idempotent.
CoefficientField project_bounds(CoefficientField field);

// Rasterizes a shape list into a phantom; later shapes overwrite earlier ones,
// background media number is -1.
VoxelPhantom synthesize_phantom(const std::vector<ShapeSpec>& shapes, const std::array<int, 3>& dims,
                                double spacing, int dim, const Vector3d& origin = Vector3d::Zero());

}  // namespace emrecon::media

#endif  // EMRECON_MEDIA_HPP
