#ifndef EMRECON_MESH_HPP
#define EMRECON_MESH_HPP

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "emrecon/common.hpp"

namespace emrecon::mesh {

// Classification of structured-grid nodes. Exactly one class per node:
//   OuterBoundary  on the boundary of the computational domain (Mur update),
//   Interior       updated by the FD leapfrog (includes the FEM-box boundary layer),
//   Interface      the two node layers just inside the FEM box; values mirrored
//                  from the FE solution each step,
//   CoveredByFem   deeper inside the FEM box; never touched by the FD scheme.
enum class NodeClass : std::uint8_t { OuterBoundary, Interior, Interface, CoveredByFem };

struct StructuredGrid {
  int dim = 2;
  Vector3d origin = Vector3d::Zero();
  std::array<int, 3> extents{1, 1, 1};  // node counts per axis; z count 1 in 2D
  double spacing = 1.0;
  std::vector<NodeClass> node_class;

  int num_nodes() const { return extents[0] * extents[1] * extents[2]; }
  int index(int i, int j, int k = 0) const { return i + extents[0] * (j + extents[1] * k); }
  std::array<int, 3> coords(int idx) const {
    std::array<int, 3> c;
    c[0] = idx % extents[0];
    c[1] = (idx / extents[0]) % extents[1];
    c[2] = idx / (extents[0] * extents[1]);
    return c;
  }
  Vector3d node(int idx) const {
    const auto c = coords(idx);
    Vector3d p = origin;
    for (int a = 0; a < 3; ++a) p[a] += spacing * c[a];
    if (dim == 2) p[2] = 0.0;
    return p;
  }
};

// Conforming simplicial mesh (triangles in 2D, tetrahedra in 3D).
// Refinement appends nodes and replaces elements; existing node ids are stable.
struct SimplicialMesh {
  int dim = 2;
  MatrixXd nodes;             // N x dim
  MatrixXi elements;          // M x (dim+1), positively oriented
  MatrixXi boundary_faces;    // F x dim
  MatrixXd boundary_normals;  // F x dim, outward
  VectorXi generation;        // refinement level per element

  // 2D red/green bookkeeping: green closures are upgraded to red when refined.
  std::vector<std::uint8_t> green;
  // 3D bisection bookkeeping: per-element vertex order and tag for Maubach's rule.
  MatrixXi bisect_order;  // M x 4 (3D only)
  VectorXi bisect_tag;    // M (3D only)

  double min_angle_floor_deg = 20.0;

  int num_nodes() const { return static_cast<int>(nodes.rows()); }
  int num_elements() const { return static_cast<int>(elements.rows()); }

  double element_volume(int e) const;    // signed
  double element_diameter(int e) const;  // longest edge
  // Smallest interior angle over all triangles (2D) or smallest dihedral
  // angle over all tetrahedra (3D), in degrees.
  double min_angle_deg() const;

  void rebuild_boundary();  // recompute boundary_faces/normals from incidence
};

// Interpolation links between the two discretizations on the overlap.
struct WeightedLink {
  int target = -1;                               // node index on the receiving side
  std::vector<std::pair<int, double>> sources;   // (node on the sending side, weight)
};

struct OverlapMap {
  // Coinciding node pairs on the FEM-box boundary layer (fem node, fd node).
  std::vector<std::pair<int, int>> fem_to_fd;
  // Every FE boundary node receives FD data; refined boundary nodes interpolate.
  std::vector<WeightedLink> fem_boundary_from_fd;
  // FD interface nodes mirror the FE solution (always a coinciding node).
  std::vector<std::pair<int, int>> fd_to_fem;
};

struct HybridMesh {
  int dim = 2;
  StructuredGrid fdm_grid;
  SimplicialMesh fem_mesh;
  OverlapMap overlap;
  double h_fdm = 0.0;
  std::vector<int> outer_boundary_nodes;  // grid indices of Gamma, ascending

  Box domain_box, fem_box;

  std::vector<int> grid_to_fem;   // -1 where no coinciding FEM node
  std::vector<int> fem_to_grid;   // -1 for nodes added by refinement
  std::vector<int> fem_interior;  // FEM nodes advanced by the FE step
  std::vector<int> fem_boundary;  // FEM nodes on the FEM-box boundary
  // Coefficient freeze band: the two outermost FEM node layers. Keeping the
  // coefficients at background there makes the coupled FD/FE operator
  // symmetric across the interface.
  std::vector<std::uint8_t> fem_frozen;

  std::vector<int> fd_active;  // grid nodes advanced by the FD leapfrog

  // Absorbing-boundary data: inward neighbor and the number of axes on which
  // the node sits at an extreme (1 = face, 2 = edge/corner, 3 = 3D corner).
  struct MurNode {
    int node = -1;
    int neighbor = -1;
    int naxes = 1;
  };
  std::vector<MurNode> mur;

  int num_grid_nodes() const { return fdm_grid.num_nodes(); }
  int num_fem_nodes() const { return fem_mesh.num_nodes(); }

  // Rebuild the FE-side bookkeeping around a refined mesh; the FD grid and its
  // classification are unchanged.
  HybridMesh with_refined_fem(SimplicialMesh refined) const;
};

// Builds the hybrid decomposition: an FD grid over `domain_box` and a
// simplicial mesh over `fem_box` obtained by splitting grid cells (2 triangles
// per square, 6 tetrahedra per cube), so that interface nodes coincide.
// Requires box sides to be integer multiples of h and a margin of at least 2h
// between the FEM box and the domain boundary.
HybridMesh build_hybrid_mesh(const Box& domain_box, const Box& fem_box, double h, int dim);

// Subdivides every marked element. 2D: red refinement with green closure
// (greens are upgraded to red when they would be refined again or when a green
// closure would fall below the angle floor). 3D: Maubach bisection with
// conformity closure. The result is conforming and respects the angle floor.
SimplicialMesh refine_elements(const SimplicialMesh& m, const std::vector<int>& marked);

// Per-element mesh function h(x)|_K = diam(K).
VectorXd mesh_h(const SimplicialMesh& m);

// Linear interpolation of nodal values from one mesh onto another covering the
// same region. Values at coinciding nodes are preserved exactly; target nodes
// outside the source hull are clamped to the nearest element (the number of
// clamped nodes is reported through `clamped` when non-null).
VectorXd transfer_field(const VectorXd& values, const SimplicialMesh& from,
                        const SimplicialMesh& to, int* clamped = nullptr);

}  // namespace emrecon::mesh

#endif  // EMRECON_MESH_HPP
