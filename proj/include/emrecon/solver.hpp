#ifndef EMRECON_SOLVER_HPP
#define EMRECON_SOLVER_HPP

#include <Eigen/SparseCore>
#include <functional>
#include <string>
#include <vector>

#include "emrecon/common.hpp"
#include "emrecon/media.hpp"
#include "emrecon/mesh.hpp"

namespace emrecon::solver {

struct TimeGrid {
  double T = 0.0;
  double dt = 0.0;
  int steps = 0;
  double time(int n) const { return n * dt; }
};

// Largest dt <= dt_max with an integer number of steps covering [0, T].
TimeGrid make_time_grid(double T, double dt_max);

// CFL-stable step: safety * h_min / sqrt(d), where h_min is the smaller of the
// FD spacing and the shortest FEM edge.
double cfl_dt(const mesh::HybridMesh& m, double safety);

// Initial data E(.,0) = f0, dE/dt(.,0) = f1 on both discretizations, plus an
// optional volumetric forcing hook used by manufactured-solution tests.
struct SourcePulse {
  MatrixXd f0_grid, f1_grid;  // grid nodes x d
  MatrixXd f0_fem, f1_fem;    // fem nodes x d
  std::function<Vector3d(const Vector3d&, double)> forcing;  // zero when empty

  static SourcePulse zero(const mesh::HybridMesh& m);
  static SourcePulse from_functions(const mesh::HybridMesh& m,
                                    const std::function<Vector3d(const Vector3d&)>& f0,
                                    const std::function<Vector3d(const Vector3d&)>& f1);
};

// Vector field sampled at every node and time level (steps+1 snapshots).
struct FieldHistory {
  TimeGrid tg;
  std::vector<MatrixXd> snaps;
};

// E restricted to the outer boundary Gamma at every time level.
struct BoundaryTrace {
  TimeGrid tg;
  std::vector<int> nodes;        // grid indices of Gamma nodes, ascending
  std::vector<MatrixXd> samples;  // steps+1 entries, (#nodes x d)

  // Linear-in-time resampling onto another grid covering the same [0, T].
  BoundaryTrace resampled(const TimeGrid& to) const;

  void save_csv(const std::string& path, const mesh::StructuredGrid& g,
                const std::string& header_note = "") const;
  static BoundaryTrace load_csv(const std::string& path, const mesh::HybridMesh& m);
};

// Assembled P1 operators on the FEM mesh: scalar stiffness, the div-div
// stabilization blocks (element-constant eps-1 weight), and the lumped mass
// and damping diagonals (vertex-quadrature lumping with nodal coefficients).
struct FemOperators {
  int dim = 2;
  Eigen::SparseMatrix<double> K;
  std::vector<Eigen::SparseMatrix<double>> S;  // d*d blocks, index a*d+b
  VectorXd lumped;                             // integral of each hat function
  VectorXd mass_eps;                           // eps_i * lumped_i
  VectorXd damp_sigma;                         // sigma_i * lumped_i

  struct ElementGeom {
    double vol = 0.0;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> gradphi;  // (d+1) x d
  };
  std::vector<ElementGeom> geom;

  // (K + S) applied to a nodal vector field (nodes x d).
  MatrixXd apply_A(const MatrixXd& E) const;
};

FemOperators assemble_fem_operators(const mesh::SimplicialMesh& m,
                                    const media::CoefficientField& coeffs);

// Element matrices (exposed for verification against hand integration).
MatrixXd element_stiffness(const MatrixXd& coords);  // (d+1) x (d+1)
MatrixXd element_divdiv(const MatrixXd& coords);     // ((d+1)d)^2, index i*d+a

// Two-array state of the hybrid solve.
struct HybridState {
  MatrixXd grid;  // grid nodes x d
  MatrixXd fem;   // fem nodes x d
};

// One FD leapfrog step (with Mur updates on Gamma). `curr`/`prev` span all
// grid nodes; interface slots must already mirror the FE solution. Returns
// values at fd-active and Gamma nodes (other rows are copied through).
MatrixXd step_fdm(const mesh::HybridMesh& m, double dt, const MatrixXd& prev,
                  const MatrixXd& curr, const MatrixXd* forcing = nullptr,
                  const MatrixXd* gamma_source = nullptr);

// One explicit lumped-P1 step. `curr`/`prev` span all FEM nodes; boundary
// slots must already hold the FD values. Boundary rows are copied through.
MatrixXd step_fem(const FemOperators& ops, const mesh::HybridMesh& m, double dt,
                  const MatrixXd& prev, const MatrixXd& curr,
                  const MatrixXd* forcing = nullptr);

struct ForwardOptions {
  bool record_fem = true;
  bool record_grid = false;
  // Optional boundary source g in dnE = -dtE + g, sampled at half steps
  // (size = steps, each #Gamma x d). Test hook; zero in production runs.
  const std::vector<MatrixXd>* gamma_source = nullptr;
};

struct ForwardResult {
  FieldHistory fem;   // on FEM nodes
  BoundaryTrace trace;
  FieldHistory grid;  // full grid history when requested
};

// Explicit hybrid solve of the stabilized forward system.
ForwardResult solve_forward(const mesh::HybridMesh& m, const media::CoefficientField& coeffs,
                            const SourcePulse& pulse, const TimeGrid& tg,
                            const ForwardOptions& opt = {});

// Reference solve ignoring the FEM subdomain: plain leapfrog + Mur everywhere
// (valid for eps == 1, sigma == 0 globally).
ForwardResult solve_forward_pure_fd(const mesh::HybridMesh& m, const SourcePulse& pulse,
                                    const TimeGrid& tg, bool record_grid = true);

// Backward-in-time adjoint solve driven by the weighted boundary residual
// (E - E_obs) on Gamma. Constructed as the exact discrete transpose of the
// forward scheme, which realizes the continuous adjoint problem (terminal
// conditions, flipped damping sign, transposed stabilization, and the
// absorbing condition with the residual source). z holds the per-level
// compatibility weights. Returns the multiplier history on FEM nodes; the
// entry at level 0 duplicates level 1 (the discrete system determines
// multipliers for levels >= 1).
FieldHistory solve_adjoint(const mesh::HybridMesh& m, const media::CoefficientField& coeffs,
                           const BoundaryTrace& residual, const VectorXd& z, const TimeGrid& tg);

// Leapfrog-conserved energy of a state pair: 0.5 |(u1-u0)/dt|_M^2 plus the
// symmetrized stiffness pairing 0.5 <A u1, u0>. Exactly conserved for
// sigma == 0 while nothing reaches Gamma.
double discrete_energy(const mesh::HybridMesh& m, const media::CoefficientField& coeffs,
                       const HybridState& s0, const HybridState& s1, double dt);

// Global symmetric spatial operator over the union of grid and FEM dofs
// (rows at leapfrog/FEM-updated nodes only), with the lumped mass and damping
// diagonals. Used by the energy monitor and the operator-symmetry tests.
struct GlobalOperator {
  Eigen::SparseMatrix<double> A;  // (ndof*d)^2, component-blocked: dof*d+comp
  VectorXd mass;                  // per dof (component-independent)
  VectorXd damp;
  std::vector<int> fem_dof;   // fem node -> dof
  std::vector<int> grid_dof;  // grid node -> dof (-1 for covered duplicates)
  int ndof = 0;
  std::vector<std::uint8_t> is_row;  // dof has an interior equation
};

GlobalOperator assemble_global_operator(const mesh::HybridMesh& m,
                                        const media::CoefficientField& coeffs);

}  // namespace emrecon::solver

#endif  // EMRECON_SOLVER_HPP
