#include "emrecon/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace emrecon::mesh {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool nearly_integer(double v, double tol = 1e-6) { return std::abs(v - std::round(v)) <= tol; }

using Edge = std::pair<int, int>;
Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

double triangle_min_angle_deg(const Vector3d& a, const Vector3d& b, const Vector3d& c) {
  auto angle = [](const Vector3d& u, const Vector3d& v) {
    double cosv = u.dot(v) / (u.norm() * v.norm());
    cosv = std::clamp(cosv, -1.0, 1.0);
    return std::acos(cosv) * 180.0 / kPi;
  };
  double a0 = angle(b - a, c - a);
  double a1 = angle(a - b, c - b);
  double a2 = 180.0 - a0 - a1;
  return std::min({a0, a1, a2});
}

double tet_min_dihedral_deg(const Vector3d& v0, const Vector3d& v1, const Vector3d& v2,
                            const Vector3d& v3) {
  const std::array<Vector3d, 4> v{v0, v1, v2, v3};
  static const int edges[6][4] = {// edge endpoints, opposite pair
                                  {0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2},
                                  {1, 2, 0, 3}, {1, 3, 0, 2}, {2, 3, 0, 1}};
  double best = 180.0;
  for (const auto& e : edges) {
    const Vector3d a = v[e[0]], b = v[e[1]];
    Vector3d u = (b - a).normalized();
    Vector3d w1 = (v[e[2]] - a) - ((v[e[2]] - a).dot(u)) * u;
    Vector3d w2 = (v[e[3]] - a) - ((v[e[3]] - a).dot(u)) * u;
    double cosv = w1.dot(w2) / (w1.norm() * w2.norm());
    cosv = std::clamp(cosv, -1.0, 1.0);
    best = std::min(best, std::acos(cosv) * 180.0 / kPi);
  }
  return best;
}

Vector3d mesh_point(const SimplicialMesh& m, int n) {
  Vector3d p = Vector3d::Zero();
  for (int a = 0; a < m.dim; ++a) p[a] = m.nodes(n, a);
  return p;
}

}  // namespace

double SimplicialMesh::element_volume(int e) const {
  if (dim == 2) {
    Eigen::Matrix2d J;
    for (int a = 0; a < 2; ++a) {
      J(a, 0) = nodes(elements(e, 1), a) - nodes(elements(e, 0), a);
      J(a, 1) = nodes(elements(e, 2), a) - nodes(elements(e, 0), a);
    }
    return 0.5 * J.determinant();
  }
  Eigen::Matrix3d J;
  for (int a = 0; a < 3; ++a)
    for (int k = 0; k < 3; ++k) J(a, k) = nodes(elements(e, k + 1), a) - nodes(elements(e, 0), a);
  return J.determinant() / 6.0;
}

double SimplicialMesh::element_diameter(int e) const {
  double d = 0.0;
  const int nv = dim + 1;
  for (int i = 0; i < nv; ++i)
    for (int j = i + 1; j < nv; ++j) {
      double l = (nodes.row(elements(e, i)) - nodes.row(elements(e, j))).norm();
      d = std::max(d, l);
    }
  return d;
}

double SimplicialMesh::min_angle_deg() const {
  double best = 180.0;
  for (int e = 0; e < num_elements(); ++e) {
    if (dim == 2) {
      best = std::min(best, triangle_min_angle_deg(mesh_point(*this, elements(e, 0)),
                                                   mesh_point(*this, elements(e, 1)),
                                                   mesh_point(*this, elements(e, 2))));
    } else {
      best = std::min(best, tet_min_dihedral_deg(mesh_point(*this, elements(e, 0)),
                                                 mesh_point(*this, elements(e, 1)),
                                                 mesh_point(*this, elements(e, 2)),
                                                 mesh_point(*this, elements(e, 3))));
    }
  }
  return best;
}

void SimplicialMesh::rebuild_boundary() {
  if (dim == 2) {
    std::map<Edge, std::pair<int, int>> count;  // edge -> (count, owner element)
    for (int e = 0; e < num_elements(); ++e)
      for (int k = 0; k < 3; ++k) {
        Edge ed = make_edge(elements(e, k), elements(e, (k + 1) % 3));
        auto& c = count[ed];
        c.first++;
        c.second = e;
      }
    std::vector<std::array<int, 2>> faces;
    std::vector<int> owner;
    for (const auto& [ed, c] : count)
      if (c.first == 1) {
        faces.push_back({ed.first, ed.second});
        owner.push_back(c.second);
      }
    boundary_faces.resize(static_cast<int>(faces.size()), 2);
    boundary_normals.resize(static_cast<int>(faces.size()), 2);
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
      boundary_faces(f, 0) = faces[f][0];
      boundary_faces(f, 1) = faces[f][1];
      Vector3d a = mesh_point(*this, faces[f][0]), b = mesh_point(*this, faces[f][1]);
      Eigen::Vector2d t(b[0] - a[0], b[1] - a[1]);
      Eigen::Vector2d n(t[1], -t[0]);
      n.normalize();
      // orient away from the owning element's centroid
      const int e = owner[f];
      Eigen::Vector2d cen(0, 0);
      for (int k = 0; k < 3; ++k)
        cen += Eigen::Vector2d(nodes(elements(e, k), 0), nodes(elements(e, k), 1));
      cen /= 3.0;
      Eigen::Vector2d mid = 0.5 * Eigen::Vector2d(a[0] + b[0], a[1] + b[1]);
      if (n.dot(cen - mid) > 0) n = -n;
      boundary_normals.row(f) << n[0], n[1];
    }
  } else {
    std::map<std::array<int, 3>, std::pair<int, int>> count;
    static const int ftab[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    for (int e = 0; e < num_elements(); ++e)
      for (const auto& fv : ftab) {
        std::array<int, 3> f{elements(e, fv[0]), elements(e, fv[1]), elements(e, fv[2])};
        std::sort(f.begin(), f.end());
        auto& c = count[f];
        c.first++;
        c.second = e;
      }
    std::vector<std::array<int, 3>> faces;
    std::vector<int> owner;
    for (const auto& [f, c] : count)
      if (c.first == 1) {
        faces.push_back(f);
        owner.push_back(c.second);
      }
    boundary_faces.resize(static_cast<int>(faces.size()), 3);
    boundary_normals.resize(static_cast<int>(faces.size()), 3);
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
      for (int k = 0; k < 3; ++k) boundary_faces(f, k) = faces[f][k];
      Vector3d a = mesh_point(*this, faces[f][0]);
      Vector3d n = (mesh_point(*this, faces[f][1]) - a).cross(mesh_point(*this, faces[f][2]) - a);
      n.normalize();
      const int e = owner[f];
      Vector3d cen = Vector3d::Zero();
      for (int k = 0; k < 4; ++k) cen += mesh_point(*this, elements(e, k));
      cen /= 4.0;
      if (n.dot(cen - a) > 0) n = -n;
      boundary_normals.row(f) << n[0], n[1], n[2];
    }
  }
}

// ---------------------------------------------------------------------------
// build_hybrid_mesh
// ---------------------------------------------------------------------------

HybridMesh build_hybrid_mesh(const Box& domain_box, const Box& fem_box, double h, int dim) {
  if (dim != 2 && dim != 3) throw ConfigError("build_hybrid_mesh: dim must be 2 or 3");
  if (!(h > 0)) throw ConfigError("build_hybrid_mesh: h must be positive");

  std::array<int, 3> n_cells{0, 0, 0}, f_lo{0, 0, 0}, f_hi{0, 0, 0};
  for (int a = 0; a < dim; ++a) {
    const double len = domain_box.hi[a] - domain_box.lo[a];
    if (!nearly_integer(len / h)) {
      std::ostringstream os;
      os << "build_hybrid_mesh: domain side " << len << " on axis " << a
         << " is not an integer multiple of h=" << h;
      throw ConfigError(os.str());
    }
    n_cells[a] = static_cast<int>(std::round(len / h));
    const double lo_off = (fem_box.lo[a] - domain_box.lo[a]) / h;
    const double hi_off = (fem_box.hi[a] - domain_box.lo[a]) / h;
    if (!nearly_integer(lo_off) || !nearly_integer(hi_off)) {
      std::ostringstream os;
      os << "build_hybrid_mesh: fem_box corner on axis " << a
         << " does not lie on the h-grid (offsets " << lo_off << ", " << hi_off << ")";
      throw ConfigError(os.str());
    }
    f_lo[a] = static_cast<int>(std::round(lo_off));
    f_hi[a] = static_cast<int>(std::round(hi_off));
    if (f_lo[a] < 1 || f_hi[a] > n_cells[a] - 1) {
      std::ostringstream os;
      os << "build_hybrid_mesh: fem_box must keep a margin of at least one FD layer "
            "to the domain boundary (axis "
         << a << ")";
      throw ConfigError(os.str());
    }
    if (f_hi[a] - f_lo[a] < 2)
      throw ConfigError("build_hybrid_mesh: fem_box must span at least 2 cells per axis");
  }

  HybridMesh hm;
  hm.dim = dim;
  hm.h_fdm = h;
  hm.domain_box = domain_box;
  hm.fem_box = fem_box;

  StructuredGrid& g = hm.fdm_grid;
  g.dim = dim;
  g.origin = domain_box.lo;
  g.spacing = h;
  for (int a = 0; a < 3; ++a) g.extents[a] = (a < dim) ? n_cells[a] + 1 : 1;

  const int ng = g.num_nodes();
  g.node_class.assign(ng, NodeClass::Interior);
  hm.grid_to_fem.assign(ng, -1);

  auto fem_depth = [&](const std::array<int, 3>& c) -> int {
    // node-layer depth inside the fem box; negative when outside
    int depth = std::numeric_limits<int>::max();
    for (int a = 0; a < dim; ++a) {
      if (c[a] < f_lo[a] || c[a] > f_hi[a]) return -1;
      depth = std::min(depth, std::min(c[a] - f_lo[a], f_hi[a] - c[a]));
    }
    return depth;
  };

  for (int idx = 0; idx < ng; ++idx) {
    const auto c = g.coords(idx);
    bool on_gamma = false;
    for (int a = 0; a < dim; ++a)
      if (c[a] == 0 || c[a] == g.extents[a] - 1) on_gamma = true;
    if (on_gamma) {
      g.node_class[idx] = NodeClass::OuterBoundary;
      continue;
    }
    const int depth = fem_depth(c);
    if (depth < 0 || depth == 0)
      g.node_class[idx] = NodeClass::Interior;
    else if (depth <= 2)
      g.node_class[idx] = NodeClass::Interface;
    else
      g.node_class[idx] = NodeClass::CoveredByFem;
  }

  // FEM nodes: the grid nodes inside the fem box, swept in index order.
  SimplicialMesh& fm = hm.fem_mesh;
  fm.dim = dim;
  std::vector<int> fem_nodes_grid;
  for (int k = (dim == 3 ? f_lo[2] : 0); k <= (dim == 3 ? f_hi[2] : 0); ++k)
    for (int j = f_lo[1]; j <= f_hi[1]; ++j)
      for (int i = f_lo[0]; i <= f_hi[0]; ++i) {
        const int idx = g.index(i, j, k);
        hm.grid_to_fem[idx] = static_cast<int>(fem_nodes_grid.size());
        fem_nodes_grid.push_back(idx);
      }
  fm.nodes.resize(static_cast<int>(fem_nodes_grid.size()), dim);
  for (int n = 0; n < fm.num_nodes(); ++n) {
    const Vector3d p = g.node(fem_nodes_grid[n]);
    for (int a = 0; a < dim; ++a) fm.nodes(n, a) = p[a];
  }
  hm.fem_to_grid = fem_nodes_grid;

  // Elements by splitting cells.
  if (dim == 2) {
    const int ncellx = f_hi[0] - f_lo[0], ncelly = f_hi[1] - f_lo[1];
    fm.elements.resize(2 * ncellx * ncelly, 3);
    int e = 0;
    for (int j = f_lo[1]; j < f_hi[1]; ++j)
      for (int i = f_lo[0]; i < f_hi[0]; ++i) {
        const int n00 = hm.grid_to_fem[g.index(i, j)];
        const int n10 = hm.grid_to_fem[g.index(i + 1, j)];
        const int n01 = hm.grid_to_fem[g.index(i, j + 1)];
        const int n11 = hm.grid_to_fem[g.index(i + 1, j + 1)];
        fm.elements.row(e++) << n00, n10, n11;
        fm.elements.row(e++) << n00, n11, n01;
      }
    fm.green.assign(fm.num_elements(), 0);
  } else {
    const int ncellx = f_hi[0] - f_lo[0], ncelly = f_hi[1] - f_lo[1], ncellz = f_hi[2] - f_lo[2];
    static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    fm.elements.resize(6 * ncellx * ncelly * ncellz, 4);
    fm.bisect_order.resize(fm.elements.rows(), 4);
    fm.bisect_tag.resize(fm.elements.rows());
    int e = 0;
    for (int k = f_lo[2]; k < f_hi[2]; ++k)
      for (int j = f_lo[1]; j < f_hi[1]; ++j)
        for (int i = f_lo[0]; i < f_hi[0]; ++i)
          for (const auto& p : perms) {
            std::array<int, 3> c{i, j, k};
            std::array<int, 4> path;
            path[0] = hm.grid_to_fem[g.index(c[0], c[1], c[2])];
            for (int s = 0; s < 3; ++s) {
              c[p[s]] += 1;
              path[s + 1] = hm.grid_to_fem[g.index(c[0], c[1], c[2])];
            }
            fm.bisect_order.row(e) << path[0], path[1], path[2], path[3];
            fm.bisect_tag[e] = 3;
            fm.elements.row(e) << path[0], path[1], path[2], path[3];
            if (fm.element_volume(e) < 0) std::swap(fm.elements(e, 2), fm.elements(e, 3));
            ++e;
          }
  }
  fm.generation = VectorXi::Zero(fm.num_elements());
  fm.rebuild_boundary();

  // Node sets and overlap.
  for (int idx = 0; idx < ng; ++idx) {
    const auto c = g.coords(idx);
    if (g.node_class[idx] == NodeClass::OuterBoundary) hm.outer_boundary_nodes.push_back(idx);
    if (g.node_class[idx] == NodeClass::Interior) hm.fd_active.push_back(idx);
    const int fn = hm.grid_to_fem[idx];
    if (fn >= 0) {
      const int depth = fem_depth(c);
      if (depth == 0) {
        hm.fem_boundary.push_back(fn);
        hm.overlap.fem_to_fd.emplace_back(fn, idx);
        hm.overlap.fem_boundary_from_fd.push_back({fn, {{idx, 1.0}}});
      } else {
        hm.fem_interior.push_back(fn);
      }
      if (g.node_class[idx] == NodeClass::Interface) hm.overlap.fd_to_fem.emplace_back(idx, fn);
    }
  }
  hm.fem_frozen.assign(fm.num_nodes(), 0);
  for (int n = 0; n < fm.num_nodes(); ++n) {
    double dist = std::numeric_limits<double>::max();
    for (int a = 0; a < dim; ++a)
      dist = std::min({dist, fm.nodes(n, a) - fem_box.lo[a], fem_box.hi[a] - fm.nodes(n, a)});
    if (dist < 2.0 * h - 1e-9 * h) hm.fem_frozen[n] = 1;
  }

  // Absorbing boundary bookkeeping.
  for (int idx : hm.outer_boundary_nodes) {
    auto c = g.coords(idx);
    HybridMesh::MurNode mn;
    mn.node = idx;
    mn.naxes = 0;
    for (int a = 0; a < dim; ++a) {
      if (c[a] == 0) {
        c[a] += 1;
        mn.naxes++;
      } else if (c[a] == g.extents[a] - 1) {
        c[a] -= 1;
        mn.naxes++;
      }
    }
    mn.neighbor = g.index(c[0], c[1], c[2]);
    hm.mur.push_back(mn);
  }
  return hm;
}

HybridMesh HybridMesh::with_refined_fem(SimplicialMesh refined) const {
  HybridMesh hm = *this;
  hm.fem_mesh = std::move(refined);
  const SimplicialMesh& fm = hm.fem_mesh;
  const double h = hm.h_fdm;
  const double tol = 1e-9 * h;

  hm.fem_boundary.clear();
  hm.fem_interior.clear();
  hm.overlap.fem_to_fd.clear();
  hm.overlap.fem_boundary_from_fd.clear();
  hm.fem_frozen.assign(fm.num_nodes(), 0);
  hm.fem_to_grid.resize(fm.num_nodes(), -1);  // refinement appends nodes

  const StructuredGrid& g = hm.fdm_grid;
  for (int n = 0; n < fm.num_nodes(); ++n) {
    double dist = std::numeric_limits<double>::max();
    for (int a = 0; a < dim; ++a)
      dist = std::min({dist, fm.nodes(n, a) - fem_box.lo[a], fem_box.hi[a] - fm.nodes(n, a)});
    if (dist < 2.0 * h - tol) hm.fem_frozen[n] = 1;
    if (dist > tol) {
      hm.fem_interior.push_back(n);
      continue;
    }
    hm.fem_boundary.push_back(n);
    // Multilinear interpolation weights from the grid nodes of the face cell.
    std::array<int, 3> base{0, 0, 0};
    std::array<double, 3> frac{0, 0, 0};
    bool exact = true;
    for (int a = 0; a < dim; ++a) {
      const double u = (fm.nodes(n, a) - g.origin[a]) / g.spacing;
      base[a] = static_cast<int>(std::floor(u + 1e-9));
      base[a] = std::clamp(base[a], 0, g.extents[a] - 1);
      frac[a] = u - base[a];
      if (frac[a] > 1e-9) exact = false;
    }
    WeightedLink link;
    link.target = n;
    if (exact) {
      const int gi = g.index(base[0], base[1], base[2]);
      link.sources = {{gi, 1.0}};
      hm.overlap.fem_to_fd.emplace_back(n, gi);
    } else {
      const int corners = 1 << dim;
      for (int m = 0; m < corners; ++m) {
        double w = 1.0;
        std::array<int, 3> c = base;
        for (int a = 0; a < dim; ++a) {
          if (m & (1 << a)) {
            c[a] += 1;
            w *= frac[a];
          } else {
            w *= 1.0 - frac[a];
          }
        }
        if (w > 1e-14) link.sources.emplace_back(g.index(c[0], c[1], c[2]), w);
      }
    }
    hm.overlap.fem_boundary_from_fd.push_back(std::move(link));
  }
  return hm;
}

// ---------------------------------------------------------------------------
// refinement
// ---------------------------------------------------------------------------

namespace {

SimplicialMesh refine_red_green_2d(const SimplicialMesh& m, const std::vector<int>& marked) {
  const int ne = m.num_elements();
  std::vector<char> red(ne, 0);
  for (int idx : marked) {
    if (idx < 0 || idx >= ne) throw ConfigError("refine_elements: marked index out of range");
    red[idx] = 1;
  }

  std::map<Edge, int> split;  // edge -> future midpoint node (assigned later)
  auto mark_edges = [&](int e) {
    for (int k = 0; k < 3; ++k) split[make_edge(m.elements(e, k), m.elements(e, (k + 1) % 3))] = -1;
  };
  for (int e = 0; e < ne; ++e)
    if (red[e]) mark_edges(e);

  auto point = [&](int n) { return mesh_point(m, n); };
  auto mid_of = [&](int a, int b) { return Vector3d(0.5 * (point(a) + point(b))); };

  // Fixpoint: promote elements to red when a green closure is impossible.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int e = 0; e < ne; ++e) {
      if (red[e]) continue;
      int cnt = 0, hang = -1;
      for (int k = 0; k < 3; ++k)
        if (split.count(make_edge(m.elements(e, k), m.elements(e, (k + 1) % 3)))) {
          ++cnt;
          hang = k;
        }
      if (cnt == 0) continue;
      bool promote = cnt >= 2 || (!m.green.empty() && m.green[e]);
      if (!promote) {
        // probe the two green children against the angle floor
        const int a = m.elements(e, hang), b = m.elements(e, (hang + 1) % 3),
                  c = m.elements(e, (hang + 2) % 3);
        const Vector3d mp = mid_of(a, b);
        const double q = std::min(triangle_min_angle_deg(point(a), mp, point(c)),
                                  triangle_min_angle_deg(mp, point(b), point(c)));
        if (q < m.min_angle_floor_deg) promote = true;
      }
      if (promote) {
        red[e] = 1;
        mark_edges(e);
        changed = true;
      }
    }
  }

  SimplicialMesh out;
  out.dim = 2;
  out.min_angle_floor_deg = m.min_angle_floor_deg;
  int nn = m.num_nodes();
  for (auto& [edge, id] : split) id = nn++;
  out.nodes.resize(nn, 2);
  out.nodes.topRows(m.num_nodes()) = m.nodes;
  for (const auto& [edge, id] : split) {
    const Vector3d p = mid_of(edge.first, edge.second);
    out.nodes.row(id) << p[0], p[1];
  }

  std::vector<std::array<int, 3>> tris;
  std::vector<int> gen;
  std::vector<std::uint8_t> green;
  auto push = [&](int a, int b, int c, int g, bool gr) {
    tris.push_back({a, b, c});
    gen.push_back(g);
    green.push_back(gr ? 1 : 0);
  };
  for (int e = 0; e < ne; ++e) {
    const int v0 = m.elements(e, 0), v1 = m.elements(e, 1), v2 = m.elements(e, 2);
    const int g = m.generation[e];
    if (red[e]) {
      const int m01 = split.at(make_edge(v0, v1));
      const int m12 = split.at(make_edge(v1, v2));
      const int m02 = split.at(make_edge(v0, v2));
      push(v0, m01, m02, g + 1, false);
      push(m01, v1, m12, g + 1, false);
      push(m02, m12, v2, g + 1, false);
      push(m01, m12, m02, g + 1, false);
      continue;
    }
    int cnt = 0, hang = -1;
    for (int k = 0; k < 3; ++k)
      if (split.count(make_edge(m.elements(e, k), m.elements(e, (k + 1) % 3)))) {
        ++cnt;
        hang = k;
      }
    if (cnt == 0) {
      push(v0, v1, v2, g, !m.green.empty() && m.green[e]);
    } else {
      const int a = m.elements(e, hang), b = m.elements(e, (hang + 1) % 3),
                c = m.elements(e, (hang + 2) % 3);
      const int mp = split.at(make_edge(a, b));
      push(a, mp, c, g + 1, true);
      push(mp, b, c, g + 1, true);
    }
  }

  out.elements.resize(static_cast<int>(tris.size()), 3);
  out.generation.resize(static_cast<int>(tris.size()));
  for (int e = 0; e < out.num_elements(); ++e) {
    out.elements.row(e) << tris[e][0], tris[e][1], tris[e][2];
    out.generation[e] = gen[e];
  }
  out.green = std::move(green);
  out.rebuild_boundary();
  if (out.min_angle_deg() < out.min_angle_floor_deg - 1e-9)
    throw NumericalError("refine_elements: angle floor violated after closure");
  return out;
}

struct WorkTet {
  std::array<int, 4> order;
  int tag = 3;
  int gen = 0;
};

SimplicialMesh refine_bisect_3d(const SimplicialMesh& m, const std::vector<int>& marked) {
  const int ne = m.num_elements();
  if (m.bisect_order.rows() != ne)
    throw ConfigError("refine_elements: 3D mesh lacks bisection ordering data");

  std::vector<WorkTet> work(ne);
  for (int e = 0; e < ne; ++e) {
    for (int k = 0; k < 4; ++k) work[e].order[k] = m.bisect_order(e, k);
    work[e].tag = m.bisect_tag[e];
    work[e].gen = m.generation[e];
  }
  std::vector<Vector3d> pts(m.num_nodes());
  for (int n = 0; n < m.num_nodes(); ++n) pts[n] = mesh_point(m, n);

  std::map<Edge, int> midpoint;
  auto get_midpoint = [&](int a, int b) {
    const Edge e = make_edge(a, b);
    auto it = midpoint.find(e);
    if (it != midpoint.end()) return it->second;
    const int id = static_cast<int>(pts.size());
    pts.push_back(0.5 * (pts[a] + pts[b]));
    midpoint.emplace(e, id);
    return id;
  };

  auto bisect = [&](const WorkTet& t, WorkTet& c1, WorkTet& c2) {
    const int k = t.tag;
    const int z = get_midpoint(t.order[0], t.order[k]);
    c1.order = t.order;
    c1.order[k] = z;
    for (int i = 0; i < k; ++i) c2.order[i] = t.order[i + 1];
    c2.order[k] = z;
    for (int i = k + 1; i < 4; ++i) c2.order[i] = t.order[i];
    c1.tag = c2.tag = (k == 1) ? 3 : k - 1;
    c1.gen = c2.gen = t.gen + 1;
  };

  std::vector<char> do_bisect(ne, 0);
  for (int idx : marked) {
    if (idx < 0 || idx >= ne) throw ConfigError("refine_elements: marked index out of range");
    do_bisect[idx] = 1;
  }

  std::vector<WorkTet> cur;
  for (int e = 0; e < ne; ++e) {
    if (!do_bisect[e]) {
      cur.push_back(work[e]);
      continue;
    }
    WorkTet c1, c2;
    bisect(work[e], c1, c2);
    cur.push_back(c1);
    cur.push_back(c2);
  }

  // Conformity closure: bisect any tet containing a split edge.
  for (int sweep = 0; sweep < 200; ++sweep) {
    bool dirty = false;
    std::vector<WorkTet> next;
    next.reserve(cur.size());
    for (const auto& t : cur) {
      bool has_split = false;
      for (int i = 0; i < 4 && !has_split; ++i)
        for (int j = i + 1; j < 4; ++j)
          if (midpoint.count(make_edge(t.order[i], t.order[j]))) {
            has_split = true;
            break;
          }
      if (!has_split) {
        next.push_back(t);
        continue;
      }
      WorkTet c1, c2;
      bisect(t, c1, c2);
      next.push_back(c1);
      next.push_back(c2);
      dirty = true;
    }
    cur.swap(next);
    if (!dirty) break;
    if (sweep == 199) throw NumericalError("refine_elements: 3D closure did not terminate");
  }

  SimplicialMesh out;
  out.dim = 3;
  out.min_angle_floor_deg = m.min_angle_floor_deg;
  out.nodes.resize(static_cast<int>(pts.size()), 3);
  for (int n = 0; n < static_cast<int>(pts.size()); ++n) out.nodes.row(n) = pts[n].transpose();
  out.elements.resize(static_cast<int>(cur.size()), 4);
  out.bisect_order.resize(static_cast<int>(cur.size()), 4);
  out.bisect_tag.resize(static_cast<int>(cur.size()));
  out.generation.resize(static_cast<int>(cur.size()));
  for (int e = 0; e < out.num_elements(); ++e) {
    for (int k = 0; k < 4; ++k) {
      out.bisect_order(e, k) = cur[e].order[k];
      out.elements(e, k) = cur[e].order[k];
    }
    out.bisect_tag[e] = cur[e].tag;
    out.generation[e] = cur[e].gen;
    if (out.element_volume(e) < 0) std::swap(out.elements(e, 2), out.elements(e, 3));
  }
  out.rebuild_boundary();
  if (out.min_angle_deg() < out.min_angle_floor_deg - 1e-9)
    throw NumericalError("refine_elements: dihedral angle floor violated");
  return out;
}

}  // namespace

SimplicialMesh refine_elements(const SimplicialMesh& m, const std::vector<int>& marked) {
  if (marked.empty()) return m;
  return m.dim == 2 ? refine_red_green_2d(m, marked) : refine_bisect_3d(m, marked);
}

VectorXd mesh_h(const SimplicialMesh& m) {
  VectorXd h(m.num_elements());
  for (int e = 0; e < m.num_elements(); ++e) h[e] = m.element_diameter(e);
  return h;
}

// ---------------------------------------------------------------------------
// transfer_field
// ---------------------------------------------------------------------------

namespace {

// Barycentric coordinates of p within element e; returns the smallest one.
double barycentric(const SimplicialMesh& m, int e, const Vector3d& p, VectorXd& lam) {
  const int d = m.dim;
  lam.resize(d + 1);
  if (d == 2) {
    Eigen::Matrix2d A;
    Eigen::Vector2d rhs;
    for (int a = 0; a < 2; ++a) {
      A(a, 0) = m.nodes(m.elements(e, 1), a) - m.nodes(m.elements(e, 0), a);
      A(a, 1) = m.nodes(m.elements(e, 2), a) - m.nodes(m.elements(e, 0), a);
      rhs[a] = p[a] - m.nodes(m.elements(e, 0), a);
    }
    Eigen::Vector2d x = A.inverse() * rhs;
    lam << 1.0 - x[0] - x[1], x[0], x[1];
  } else {
    Eigen::Matrix3d A;
    Eigen::Vector3d rhs;
    for (int a = 0; a < 3; ++a) {
      for (int k = 0; k < 3; ++k)
        A(a, k) = m.nodes(m.elements(e, k + 1), a) - m.nodes(m.elements(e, 0), a);
      rhs[a] = p[a] - m.nodes(m.elements(e, 0), a);
    }
    Eigen::Vector3d x = A.inverse() * rhs;
    lam << 1.0 - x.sum(), x[0], x[1], x[2];
  }
  return lam.minCoeff();
}

}  // namespace

VectorXd transfer_field(const VectorXd& values, const SimplicialMesh& from,
                        const SimplicialMesh& to, int* clamped) {
  if (values.size() != from.num_nodes())
    throw ConfigError("transfer_field: value count does not match source mesh");
  const int d = from.dim;
  VectorXd out(to.num_nodes());
  int nclamped = 0;

  // element bounding boxes for the containment pass
  MatrixXd blo(from.num_elements(), d), bhi(from.num_elements(), d);
  for (int e = 0; e < from.num_elements(); ++e)
    for (int a = 0; a < d; ++a) {
      double lo = std::numeric_limits<double>::max(), hi = -lo;
      for (int k = 0; k <= d; ++k) {
        lo = std::min(lo, from.nodes(from.elements(e, k), a));
        hi = std::max(hi, from.nodes(from.elements(e, k), a));
      }
      blo(e, a) = lo;
      bhi(e, a) = hi;
    }
  const double slack = 1e-9 * (bhi.maxCoeff() - blo.minCoeff() + 1.0);

  VectorXd lam;
  for (int n = 0; n < to.num_nodes(); ++n) {
    Vector3d p = Vector3d::Zero();
    for (int a = 0; a < d; ++a) p[a] = to.nodes(n, a);

    int best_e = -1;
    double best_min = -std::numeric_limits<double>::max();
    VectorXd best_lam;
    for (int e = 0; e < from.num_elements(); ++e) {
      bool inside_bb = true;
      for (int a = 0; a < d && inside_bb; ++a)
        inside_bb = p[a] >= blo(e, a) - slack && p[a] <= bhi(e, a) + slack;
      if (!inside_bb) continue;
      const double mn = barycentric(from, e, p, lam);
      if (mn > best_min) {
        best_min = mn;
        best_e = e;
        best_lam = lam;
      }
      if (mn >= -1e-12) break;
    }
    if (best_e < 0 || best_min < -1e-9) {
      // outside the hull (or no bbox hit): full scan, then clamp
      for (int e = 0; e < from.num_elements(); ++e) {
        const double mn = barycentric(from, e, p, lam);
        if (mn > best_min) {
          best_min = mn;
          best_e = e;
          best_lam = lam;
        }
      }
      if (best_min < -1e-9) ++nclamped;
    }
    // snap to vertices so coinciding nodes are preserved exactly
    int snap = -1;
    for (int k = 0; k <= d; ++k)
      if (best_lam[k] >= 1.0 - 1e-12) snap = k;
    if (snap >= 0) {
      out[n] = values[from.elements(best_e, snap)];
      continue;
    }
    for (int k = 0; k <= d; ++k) best_lam[k] = std::max(best_lam[k], 0.0);
    best_lam /= best_lam.sum();
    double v = 0.0;
    for (int k = 0; k <= d; ++k) v += best_lam[k] * values[from.elements(best_e, k)];
    out[n] = v;
  }
  if (clamped) *clamped = nclamped;
  return out;
}

}  // namespace emrecon::mesh
