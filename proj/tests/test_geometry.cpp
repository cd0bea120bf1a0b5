#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ltraj/geometry.hpp"
#include "ltraj/rng.hpp"

using namespace ltraj;

namespace {
CameraIntrinsics test_cam() {
  CameraIntrinsics k;
  k.fx = 500.0;
  k.fy = 500.0;
  k.cx = 319.5;
  k.cy = 239.5;
  return k;
}
}  // namespace

TEST_CASE("back_project principal ray") {
  auto k = test_cam();
  auto q = back_project({k.cx, k.cy, 2.0}, k);
  CHECK(q.X == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.Y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.Z == doctest::Approx(2.0));
}

TEST_CASE("back_project off-axis scalar cases") {
  auto k = test_cam();
  // independent evaluation: (x-cx)*D/fx = 100*2/500 = 0.4
  auto q = back_project({k.cx + 100.0, k.cy, 2.0}, k);
  CHECK(q.X == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(q.Y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.Z == doctest::Approx(2.0));
  // (y-cy)*D/fy = -50*1/500 = -0.1
  auto r = back_project({k.cx, k.cy - 50.0, 1.0}, k);
  CHECK(r.X == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.Y == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(r.Z == doctest::Approx(1.0));
}

TEST_CASE("back_project rejects non-positive depth") {
  auto k = test_cam();
  CHECK_THROWS_AS(back_project({10, 10, 0.0}, k), std::invalid_argument);
  CHECK_THROWS_AS(back_project({10, 10, -1.0}, k), std::invalid_argument);
}

TEST_CASE("project inverts back_project") {
  auto k = test_cam();
  auto p = project({0.0, 0.0, 2.0}, k);
  CHECK(p.x == doctest::Approx(k.cx));
  CHECK(p.y == doctest::Approx(k.cy));
  CHECK(p.D == doctest::Approx(2.0));

  auto p2 = project({0.4, 0.0, 2.0}, k);
  CHECK(p2.x == doctest::Approx(k.cx + 100.0));
  CHECK(p2.y == doctest::Approx(k.cy));

  auto q = back_project(project({0.4, 0.0, 2.0}, k), k);
  CHECK(q.X == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(q.Y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.Z == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("project rejects points behind camera") {
  auto k = test_cam();
  CHECK_THROWS_AS(project({0.1, 0.1, 0.0}, k), std::invalid_argument);
  CHECK_THROWS_AS(project({0.1, 0.1, -2.0}, k), std::invalid_argument);
}

TEST_CASE("round trip property over random points") {
  auto k = test_cam();
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    Point3 q{rng.uniform(-3.0, 3.0), rng.uniform(-2.0, 2.0),
             rng.uniform(0.3, 8.0)};
    auto r = back_project(project(q, k), k);
    CHECK(std::abs(r.X - q.X) <= 1e-9 * std::max(1.0, std::abs(q.X)));
    CHECK(std::abs(r.Y - q.Y) <= 1e-9 * std::max(1.0, std::abs(q.Y)));
    CHECK(std::abs(r.Z - q.Z) <= 1e-9 * std::max(1.0, std::abs(q.Z)));
  }
}

TEST_CASE("scene flow mapping: zero and principal-ray cases") {
  auto k = test_cam();
  Point3 q{0.0, 0.0, 2.0};
  auto z = scene_flow_from_motion_field({0, 0, 0}, q, k);
  CHECK(z.x == 0.0);
  CHECK(z.y == 0.0);
  CHECK(z.z == 0.0);

  auto w = scene_flow_from_motion_field({0, 0, 0.1}, q, k);
  CHECK(w.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w.z == doctest::Approx(0.1));

  // (Z/fx)*u = 2/500*10 = 0.04
  auto u = scene_flow_from_motion_field({10, 0, 0}, q, k);
  CHECK(u.x == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(u.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(u.z == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("scene flow mapping matches independent matrix product") {
  auto k = test_cam();
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    Point3 q{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
             rng.uniform(0.5, 5.0)};
    Vec3 s{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0),
           rng.uniform(-0.2, 0.2)};
    // explicit 3x3 multiply as the oracle
    double m[3][3] = {{q.Z / k.fx, 0.0, q.X / q.Z},
                      {0.0, q.Z / k.fy, q.Y / q.Z},
                      {0.0, 0.0, 1.0}};
    double ox = m[0][0] * s.x + m[0][1] * s.y + m[0][2] * s.z;
    double oy = m[1][0] * s.x + m[1][1] * s.y + m[1][2] * s.z;
    double oz = m[2][0] * s.x + m[2][1] * s.y + m[2][2] * s.z;
    auto d = scene_flow_from_motion_field(s, q, k);
    CHECK(d.x == doctest::Approx(ox).epsilon(1e-12));
    CHECK(d.y == doctest::Approx(oy).epsilon(1e-12));
    CHECK(d.z == doctest::Approx(oz).epsilon(1e-12));
  }
}

TEST_CASE("scene flow mapping is linear in the motion sample") {
  auto k = test_cam();
  Point3 q{0.3, -0.2, 1.7};
  Vec3 s1{2.0, -1.0, 0.05}, s2{-0.5, 3.0, -0.02};
  double a = 1.75, b = -0.4;
  Vec3 combined{a * s1.x + b * s2.x, a * s1.y + b * s2.y, a * s1.z + b * s2.z};
  auto lhs = scene_flow_from_motion_field(combined, q, k);
  auto r1 = scene_flow_from_motion_field(s1, q, k);
  auto r2 = scene_flow_from_motion_field(s2, q, k);
  CHECK(lhs.x == doctest::Approx(a * r1.x + b * r2.x).epsilon(1e-9));
  CHECK(lhs.y == doctest::Approx(a * r1.y + b * r2.y).epsilon(1e-9));
  CHECK(lhs.z == doctest::Approx(a * r1.z + b * r2.z).epsilon(1e-9));
}

TEST_CASE("scene flow mapping rejects Z <= 0") {
  auto k = test_cam();
  CHECK_THROWS_AS(scene_flow_from_motion_field({1, 1, 0.1}, {0, 0, 0}, k),
                  std::invalid_argument);
}

TEST_CASE("intrinsics json round trip") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "ltraj_geom_test";
  fs::create_directories(dir);
  auto path = dir / "cam.json";
  CameraIntrinsics k;
  k.fx = 333.25;
  k.fy = 512.5;
  k.cx = 79.5;
  k.cy = 59.25;
  save_intrinsics(path, k);
  auto r = load_intrinsics(path);
  CHECK(r.fx == doctest::Approx(k.fx));
  CHECK(r.fy == doctest::Approx(k.fy));
  CHECK(r.cx == doctest::Approx(k.cx));
  CHECK(r.cy == doctest::Approx(k.cy));
  fs::remove_all(dir);
}

TEST_CASE("default intrinsics center the principal point") {
  auto k = CameraIntrinsics::defaults_for(160, 120);
  CHECK(k.fx == doctest::Approx(525.0));
  CHECK(k.fy == doctest::Approx(525.0));
  CHECK(k.cx == doctest::Approx(79.5));
  CHECK(k.cy == doctest::Approx(59.5));
}
