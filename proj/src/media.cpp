#include "emrecon/media.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace emrecon::media {

namespace {
constexpr double kMediaTol = 1e-6;
}

MediaTable MediaTable::reference() {
  MediaTable t;
  t.rows = {
      {-1.0, "Immersion medium", 5.0, 0.0},
      {-2.0, "Skin", 5.0, 0.0},
      {-4.0, "Muscle", 5.0, 0.0},
      {1.1, "Fibroconnective/glandular 1", 45.0, 6.0},
      {1.2, "Fibroconnective/glandular 2", 40.0, 5.0},
      {1.3, "Fibroconnective/glandular 3", 40.0, 5.0},
      {2.0, "Transitional", 5.0, 0.0},
      {3.1, "Fatty-1", 5.0, 0.0},
      {3.2, "Fatty-2", 5.0, 0.0},
      {3.3, "Fatty-3", 5.0, 0.0},
  };
  return t;
}

const MediaRow* MediaTable::find(double media_number) const {
  for (const auto& r : rows)
    if (std::abs(r.media - media_number) < kMediaTol) return &r;
  return nullptr;
}

MediaTable MediaTable::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("media table: cannot open " + path);
  MediaTable t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("media table: empty file " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    MediaRow r;
    if (!std::getline(ls, field, ',')) continue;
    r.media = std::stod(field);
    if (!std::getline(ls, r.tissue, ',')) throw ConfigError("media table: bad row: " + line);
    if (!std::getline(ls, field, ',')) throw ConfigError("media table: bad row: " + line);
    r.eps_r = std::stod(field);
    if (!std::getline(ls, field, ',')) throw ConfigError("media table: bad row: " + line);
    r.sigma = std::stod(field);
    if (r.eps_r < 1.0 || r.sigma < 0.0)
      throw ConfigError("media table: eps must be >= 1 and sigma >= 0: " + line);
    if (t.find(r.media)) throw ConfigError("media table: duplicate media number: " + line);
    t.rows.push_back(r);
  }
  return t;
}

void MediaTable::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("media table: cannot write " + path);
  out << "media,tissue,eps,sigma\n";
  for (const auto& r : rows)
    out << r.media << ',' << r.tissue << ',' << r.eps_r << ',' << r.sigma << '\n';
}

bool VoxelPhantom::locate(const Vector3d& p, std::array<int, 3>& c) const {
  bool inside = true;
  for (int a = 0; a < 3; ++a) {
    if (a >= dim) {
      c[a] = 0;
      continue;
    }
    const double u = (p[a] - origin[a]) / spacing;
    int i = static_cast<int>(std::floor(u));
    if (u < -1e-9 || u > dims[a] + 1e-9) inside = false;
    c[a] = std::clamp(i, 0, dims[a] - 1);
  }
  return inside;
}

VoxelPhantom VoxelPhantom::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("phantom: cannot open " + path);
  VoxelPhantom p;
  std::string key;
  in >> key;
  if (key != "dims") throw ConfigError("phantom: expected 'dims' header in " + path);
  std::vector<int> d;
  std::string rest;
  std::getline(in, rest);
  std::istringstream ds(rest);
  int v;
  while (ds >> v) d.push_back(v);
  if (d.size() != 2 && d.size() != 3) throw ConfigError("phantom: dims must list 2 or 3 counts");
  p.dim = static_cast<int>(d.size());
  for (int a = 0; a < 3; ++a) p.dims[a] = a < p.dim ? d[a] : 1;
  in >> key >> p.spacing;
  if (key != "spacing") throw ConfigError("phantom: expected 'spacing' header in " + path);
  p.media.resize(p.num_voxels());
  for (int i = 0; i < p.num_voxels(); ++i)
    if (!(in >> p.media[i])) throw ConfigError("phantom: truncated voxel data in " + path);
  return p;
}

void VoxelPhantom::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("phantom: cannot write " + path);
  out << "dims";
  for (int a = 0; a < dim; ++a) out << ' ' << dims[a];
  out << "\nspacing " << spacing << '\n';
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) out << media[index(i, j, k)] << (i + 1 < dims[0] ? ' ' : '\n');
    }
}

void map_media(const VoxelPhantom& phantom, const MediaTable& table, double weight,
               VectorXd& eps, VectorXd& sigma) {
  if (!(weight > 0)) throw ConfigError("map_media: weight must be positive");
  const int n = phantom.num_voxels();
  eps.resize(n);
  sigma.resize(n);
  for (int i = 0; i < n; ++i) {
    const MediaRow* r = table.find(phantom.media[i]);
    if (!r) {
      std::ostringstream os;
      os << "map_media: unknown media number " << phantom.media[i] << " at voxel " << i;
      throw ConfigError(os.str());
    }
    eps[i] = std::max(r->eps_r / weight, 1.0);
    sigma[i] = r->sigma / weight;
  }
}

VectorXd sample_voxels_to_nodes(const VectorXd& voxel_values, const VoxelPhantom& geometry,
                                const mesh::SimplicialMesh& fem_mesh, int stride,
                                double background, int* outside) {
  if (stride < 1) throw ConfigError("sample_to_mesh: stride must be a positive integer");
  if (voxel_values.size() != geometry.num_voxels())
    throw ConfigError("sample_to_mesh: voxel value count mismatch");
  VectorXd out(fem_mesh.num_nodes());
  int missed = 0;
  for (int n = 0; n < fem_mesh.num_nodes(); ++n) {
    Vector3d p = Vector3d::Zero();
    for (int a = 0; a < fem_mesh.dim; ++a) p[a] = fem_mesh.nodes(n, a);
    std::array<int, 3> c{0, 0, 0};
    if (!geometry.locate(p, c)) {
      out[n] = background;
      ++missed;
      continue;
    }
    // representative fine voxel of the coarse block
    for (int a = 0; a < geometry.dim; ++a) c[a] = (c[a] / stride) * stride;
    out[n] = voxel_values[geometry.index(c[0], c[1], c[2])];
  }
  if (outside) *outside = missed;
  return out;
}

CoefficientField sample_to_mesh(const VectorXd& eps_voxels, const VectorXd& sigma_voxels,
                                const VoxelPhantom& geometry, const mesh::HybridMesh& hm,
                                int stride, double eps_max, double sigma_max, int* outside) {
  CoefficientField f;
  f.eps_max = eps_max;
  f.sigma_max = sigma_max;
  int miss_e = 0, miss_s = 0;
  f.eps = sample_voxels_to_nodes(eps_voxels, geometry, hm.fem_mesh, stride, 1.0, &miss_e);
  f.sigma = sample_voxels_to_nodes(sigma_voxels, geometry, hm.fem_mesh, stride, 0.0, &miss_s);
  if (outside) *outside = std::max(miss_e, miss_s);
  return project_bounds(std::move(f));
}

CoefficientField project_bounds(CoefficientField field) {
  if (!(field.eps_max >= 1.0) || !(field.sigma_max >= 0.0) || !std::isfinite(field.eps_max) ||
      !std::isfinite(field.sigma_max))
    throw ConfigError("project_bounds: bounds must be finite with eps_max >= 1, sigma_max >= 0");
  field.eps = field.eps.cwiseMax(1.0).cwiseMin(field.eps_max);
  field.sigma = field.sigma.cwiseMax(0.0).cwiseMin(field.sigma_max);
  return field;
}

VoxelPhantom synthesize_phantom(const std::vector<ShapeSpec>& shapes, const std::array<int, 3>& dims,
                                double spacing, int dim, const Vector3d& origin) {
  if (dim != 2 && dim != 3) throw ConfigError("synthesize_phantom: dim must be 2 or 3");
  VoxelPhantom p;
  p.dim = dim;
  for (int a = 0; a < 3; ++a) p.dims[a] = a < dim ? dims[a] : 1;
  p.spacing = spacing;
  p.origin = origin;
  p.media.assign(p.num_voxels(), -1.0);
  for (const auto& s : shapes) {
    for (int k = 0; k < p.dims[2]; ++k)
      for (int j = 0; j < p.dims[1]; ++j)
        for (int i = 0; i < p.dims[0]; ++i) {
          Vector3d c = origin;
          c[0] += (i + 0.5) * spacing;
          c[1] += (j + 0.5) * spacing;
          if (dim == 3) c[2] += (k + 0.5) * spacing;
          bool inside = false;
          if (s.kind == ShapeSpec::Kind::Ball) {
            Vector3d r = c - s.center;
            if (dim == 2) r[2] = 0.0;
            inside = r.norm() <= s.radius;
          } else {
            inside = s.box.contains(c, dim);
          }
          if (inside) p.media[p.index(i, j, k)] = s.media;
        }
  }
  return p;
}

}  // namespace emrecon::media
