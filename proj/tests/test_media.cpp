#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "emrecon/media.hpp"

using namespace emrecon;
using namespace emrecon::media;

namespace {

VoxelPhantom single_voxel(double media_number) {
  VoxelPhantom p;
  p.dim = 2;
  p.dims = {1, 1, 1};
  p.spacing = 1.0;
  p.media = {media_number};
  return p;
}

}  // namespace

TEST_CASE("map_media: reference table values") {
  MediaTable t = MediaTable::reference();
  VectorXd eps, sigma;

  SUBCASE("fibroconnective/glandular 1 at weight 5") {
    map_media(single_voxel(1.1), t, 5.0, eps, sigma);
    CHECK(eps[0] == doctest::Approx(9.0).epsilon(1e-15));
    CHECK(sigma[0] == doctest::Approx(1.2).epsilon(1e-15));
  }
  SUBCASE("immersion medium at weight 5") {
    map_media(single_voxel(-1.0), t, 5.0, eps, sigma);
    CHECK(eps[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(sigma[0] == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("transitional at weight 1") {
    map_media(single_voxel(2.0), t, 1.0, eps, sigma);
    CHECK(eps[0] == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(sigma[0] == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("unknown media number is a hard error naming the voxel") {
    CHECK_THROWS_WITH_AS(map_media(single_voxel(4.2), t, 1.0, eps, sigma),
                         doctest::Contains("voxel 0"), ConfigError);
  }
}

TEST_CASE("map_media: all 10 reference rows round-trip at weights 1 and 5") {
  MediaTable t = MediaTable::reference();
  REQUIRE(t.rows.size() == 10);
  VectorXd eps, sigma;
  for (const auto& row : t.rows) {
    map_media(single_voxel(row.media), t, 1.0, eps, sigma);
    CHECK(eps[0] == doctest::Approx(row.eps_r).epsilon(1e-15));
    CHECK(sigma[0] == doctest::Approx(row.sigma).epsilon(1e-15));
    map_media(single_voxel(row.media), t, 5.0, eps, sigma);
    CHECK(eps[0] == doctest::Approx(std::max(row.eps_r / 5.0, 1.0)).epsilon(1e-15));
    CHECK(sigma[0] == doctest::Approx(row.sigma / 5.0).epsilon(1e-15));
  }
}

TEST_CASE("map_media: weight scaling recovers table values where no clamp fired") {
  MediaTable t = MediaTable::reference();
  VoxelPhantom p;
  p.dim = 2;
  p.dims = {static_cast<int>(t.rows.size()), 1, 1};
  p.spacing = 1.0;
  for (const auto& r : t.rows) p.media.push_back(r.media);
  const double w = 2.5;
  VectorXd eps, sigma, eps1, sigma1;
  map_media(p, t, w, eps, sigma);
  map_media(p, t, 1.0, eps1, sigma1);
  for (int i = 0; i < eps.size(); ++i) {
    if (eps[i] > 1.0) CHECK(eps[i] * w == doctest::Approx(eps1[i]).epsilon(1e-14));
    CHECK(sigma[i] * w == doctest::Approx(sigma1[i]).epsilon(1e-14));
  }
}

TEST_CASE("project_bounds clamps and is idempotent") {
  CoefficientField f;
  f.eps.resize(3);
  f.eps << 0.3, 12.0, 5.0;
  f.sigma.resize(3);
  f.sigma << -0.2, 0.5, 3.0;
  f.eps_max = 10.0;
  f.sigma_max = 2.0;
  CoefficientField g = project_bounds(f);
  CHECK(g.eps[0] == 1.0);
  CHECK(g.eps[1] == 10.0);
  CHECK(g.eps[2] == 5.0);
  CHECK(g.sigma[0] == 0.0);
  CHECK(g.sigma[1] == 0.5);
  CHECK(g.sigma[2] == 2.0);
  CoefficientField gg = project_bounds(g);
  CHECK((gg.eps - g.eps).cwiseAbs().maxCoeff() == 0.0);
  CHECK((gg.sigma - g.sigma).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("synthesize_phantom") {
  SUBCASE("empty spec: all voxels background") {
    VoxelPhantom p = synthesize_phantom({}, {8, 8, 1}, 0.125, 2);
    for (double m : p.media) CHECK(m == -1.0);
  }
  SUBCASE("centered ball voxel count matches analytic area") {
    const double r = 0.2, sp = 0.005;
    const int n = 200;
    ShapeSpec ball;
    ball.kind = ShapeSpec::Kind::Ball;
    ball.center << 0.5, 0.5, 0.0;
    ball.radius = r;
    ball.media = 1.1;
    VoxelPhantom p = synthesize_phantom({ball}, {n, n, 1}, sp, 2);
    int inside = 0;
    for (double m : p.media)
      if (std::abs(m - 1.1) < 1e-9) ++inside;
    const double area = inside * sp * sp;
    const double exact = M_PI * r * r;
    const double shell = 2 * M_PI * r * sp;  // one voxel-shell tolerance
    CHECK(std::abs(area - exact) <= shell);
  }
  SUBCASE("3D ball voxel count matches analytic volume") {
    const double r = 0.2, sp = 0.02;
    const int n = 50;
    ShapeSpec ball;
    ball.kind = ShapeSpec::Kind::Ball;
    ball.center << 0.5, 0.5, 0.5;
    ball.radius = r;
    ball.media = 1.1;
    VoxelPhantom p = synthesize_phantom({ball}, {n, n, n}, sp, 3);
    int inside = 0;
    for (double m : p.media)
      if (std::abs(m - 1.1) < 1e-9) ++inside;
    const double vol = inside * sp * sp * sp;
    const double exact = 4.0 / 3.0 * M_PI * r * r * r;
    const double shell = 4 * M_PI * r * r * sp;
    CHECK(std::abs(vol - exact) <= shell);
  }
  SUBCASE("later shapes overwrite earlier ones") {
    ShapeSpec b1, b2;
    b1.kind = b2.kind = ShapeSpec::Kind::BoxShape;
    b1.box = Box::make2d(0.0, 0.0, 0.6, 1.0);
    b1.media = 1.1;
    b2.box = Box::make2d(0.4, 0.0, 1.0, 1.0);
    b2.media = 3.2;
    VoxelPhantom p = synthesize_phantom({b1, b2}, {10, 10, 1}, 0.1, 2);
    // overlap column x in (0.4,0.6) carries the second media number
    CHECK(p.media[p.index(5, 5)] == 3.2);
    CHECK(p.media[p.index(2, 5)] == 1.1);
    CHECK(p.media[p.index(8, 5)] == 3.2);
  }
}

TEST_CASE("sample_voxels_to_nodes") {
  mesh::HybridMesh hm = mesh::build_hybrid_mesh(Box::make2d(0, 0, 1, 1),
                                                Box::make2d(0.25, 0.25, 0.75, 0.75), 0.0625, 2);
  SUBCASE("constant phantom: all nodes constant, any stride") {
    VoxelPhantom p = synthesize_phantom({}, {16, 16, 1}, 1.0 / 16, 2);
    VectorXd v = VectorXd::Constant(p.num_voxels(), 9.0);
    for (int stride : {1, 2, 8}) {
      VectorXd out = sample_voxels_to_nodes(v, p, hm.fem_mesh, stride, 1.0);
      for (int n = 0; n < out.size(); ++n) CHECK(out[n] == 9.0);
    }
  }
  SUBCASE("stride 1 on aligned phantom is exact voxel lookup") {
    VoxelPhantom p = synthesize_phantom({}, {16, 16, 1}, 1.0 / 16, 2);
    VectorXd v(p.num_voxels());
    for (int i = 0; i < v.size(); ++i) v[i] = i;
    VectorXd out = sample_voxels_to_nodes(v, p, hm.fem_mesh, 1, -1.0);
    for (int n = 0; n < hm.fem_mesh.num_nodes(); ++n) {
      Vector3d pos = Vector3d::Zero();
      pos[0] = hm.fem_mesh.nodes(n, 0);
      pos[1] = hm.fem_mesh.nodes(n, 1);
      std::array<int, 3> c;
      REQUIRE(p.locate(pos, c));
      CHECK(out[n] == v[p.index(c[0], c[1], c[2])]);
    }
  }
  SUBCASE("checkerboard with stride 2 takes the surviving coarse voxel") {
    VoxelPhantom p = synthesize_phantom({}, {16, 16, 1}, 1.0 / 16, 2);
    VectorXd v(p.num_voxels());
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) v[p.index(i, j)] = ((i + j) % 2 == 0) ? 4.0 : 7.0;
    VectorXd out = sample_voxels_to_nodes(v, p, hm.fem_mesh, 2, -1.0);
    // brute-force oracle: locate node voxel, snap indices down to even, look up
    for (int n = 0; n < hm.fem_mesh.num_nodes(); ++n) {
      Vector3d pos = Vector3d::Zero();
      pos[0] = hm.fem_mesh.nodes(n, 0);
      pos[1] = hm.fem_mesh.nodes(n, 1);
      std::array<int, 3> c;
      REQUIRE(p.locate(pos, c));
      int ci = (c[0] / 2) * 2, cj = (c[1] / 2) * 2;
      CHECK(out[n] == v[p.index(ci, cj)]);
      CHECK(out[n] == 4.0);  // surviving voxels have even i+j
    }
  }
  SUBCASE("nodes outside the phantom get background and are counted") {
    VoxelPhantom p = synthesize_phantom({}, {4, 4, 1}, 0.1, 2);  // covers [0,0.4]^2 only
    VectorXd v = VectorXd::Constant(p.num_voxels(), 9.0);
    int outside = 0;
    VectorXd out = sample_voxels_to_nodes(v, p, hm.fem_mesh, 1, 1.0, &outside);
    CHECK(outside > 0);
    int bg = 0;
    for (int n = 0; n < out.size(); ++n)
      if (out[n] == 1.0) ++bg;
    CHECK(bg == outside);
  }
}

TEST_CASE("sample_to_mesh output satisfies coefficient bounds") {
  mesh::HybridMesh hm = mesh::build_hybrid_mesh(Box::make2d(0, 0, 1, 1),
                                                Box::make2d(0.25, 0.25, 0.75, 0.75), 0.0625, 2);
  ShapeSpec ball;
  ball.kind = ShapeSpec::Kind::Ball;
  ball.center << 0.5, 0.5, 0.0;
  ball.radius = 0.15;
  ball.media = 1.1;
  VoxelPhantom p = synthesize_phantom({ball}, {64, 64, 1}, 1.0 / 64, 2);
  MediaTable t = MediaTable::reference();
  VectorXd eps_v, sigma_v;
  map_media(p, t, 5.0, eps_v, sigma_v);
  CoefficientField f = sample_to_mesh(eps_v, sigma_v, p, hm, 1, 8.0, 1.0);
  CHECK(f.eps.minCoeff() >= 1.0);
  CHECK(f.eps.maxCoeff() <= 8.0);  // inclusion value 9 clipped by the bound
  CHECK(f.sigma.minCoeff() >= 0.0);
  CHECK(f.sigma.maxCoeff() <= 1.0);
  CHECK(f.eps.maxCoeff() == 8.0);
}

TEST_CASE("phantom and media table file round-trip") {
  ShapeSpec ball;
  ball.kind = ShapeSpec::Kind::Ball;
  ball.center << 0.5, 0.5, 0.0;
  ball.radius = 0.2;
  ball.media = 1.2;
  VoxelPhantom p = synthesize_phantom({ball}, {12, 10, 1}, 0.1, 2);
  const std::string path = "test_phantom_tmp.txt";
  p.save(path);
  VoxelPhantom q = VoxelPhantom::load(path);
  CHECK(q.dim == 2);
  CHECK(q.dims == p.dims);
  CHECK(q.spacing == doctest::Approx(p.spacing));
  for (int i = 0; i < p.num_voxels(); ++i) CHECK(q.media[i] == p.media[i]);
  std::remove(path.c_str());

  MediaTable t = MediaTable::reference();
  const std::string tpath = "test_media_tmp.csv";
  t.save_csv(tpath);
  MediaTable u = MediaTable::load_csv(tpath);
  REQUIRE(u.rows.size() == t.rows.size());
  for (size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(u.rows[i].media == doctest::Approx(t.rows[i].media));
    CHECK(u.rows[i].eps_r == t.rows[i].eps_r);
    CHECK(u.rows[i].sigma == t.rows[i].sigma);
    CHECK(u.rows[i].tissue == t.rows[i].tissue);
  }
  std::remove(tpath.c_str());
}
