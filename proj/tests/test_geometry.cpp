#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "cbct/error.hpp"
#include "cbct/geometry.hpp"
#include "support.hpp"

using namespace cbct;
using std::numbers::pi;

namespace {

ScannerSpec small_scanner() {
  ScannerSpec s;
  s.det_nu = 64;
  s.det_nv = 48;
  s.pitch_u_mm = 1.2;
  s.pitch_v_mm = 0.9;
  return s;
}

Eigen::Matrix3d rot_z(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix(); }

}  // namespace

TEST_CASE("four projections are a quarter turn apart") {
  const auto g = make_circular_trajectory(4, ScannerSpec{});
  REQUIRE(g.n_angles() == 4);
  CHECK(g.angles()[0] == 0.0);
  CHECK(g.angles()[1] == doctest::Approx(pi / 2).epsilon(1e-15));
  CHECK(g.angles()[2] == doctest::Approx(pi).epsilon(1e-15));
  CHECK(g.angles()[3] == doctest::Approx(3 * pi / 2).epsilon(1e-15));
}

TEST_CASE("490 projections have a 360/490 degree gap") {
  const auto g = make_circular_trajectory(490, ScannerSpec{});
  const double gap_deg = (g.angles()[1] - g.angles()[0]) * 180.0 / pi;
  CHECK(gap_deg == doctest::Approx(360.0 / 490.0).epsilon(1e-12));
  CHECK(gap_deg == doctest::Approx(0.73469).epsilon(1e-5));
  for (std::size_t k = 0; k < g.n_angles(); ++k) CHECK(g.angles()[k] == 2 * pi * double(k) / 490.0);
}

TEST_CASE("a single projection sits at angle zero") {
  const auto g = make_circular_trajectory(1, ScannerSpec{});
  REQUIRE(g.n_angles() == 1);
  CHECK(g.angles()[0] == 0.0);
}

TEST_CASE("invalid geometries are rejected") {
  ScannerSpec s;
  s.sdd_mm = s.sad_mm;
  CHECK_THROWS_AS(make_circular_trajectory(4, s), GeometryError);
  s = ScannerSpec{};
  s.sad_mm = 0.0;
  CHECK_THROWS_AS(make_circular_trajectory(4, s), GeometryError);
  s = ScannerSpec{};
  s.pitch_v_mm = 0.0;
  CHECK_THROWS_AS(make_circular_trajectory(4, s), GeometryError);
  s = ScannerSpec{};
  s.det_nu = 0;
  CHECK_THROWS_AS(make_circular_trajectory(4, s), GeometryError);
  CHECK_THROWS_AS(make_circular_trajectory(0, ScannerSpec{}), GeometryError);
  CHECK_THROWS_AS(ConeBeamGeometry(ScannerSpec{}, {0.0, 0.0}), GeometryError);
  CHECK_THROWS_AS(ConeBeamGeometry(ScannerSpec{}, {0.5, 0.1}), GeometryError);
  CHECK_THROWS_AS(ConeBeamGeometry(ScannerSpec{}, {2 * pi}), GeometryError);
  CHECK_THROWS_AS(ConeBeamGeometry(ScannerSpec{}, {-0.1}), GeometryError);
}

TEST_CASE("principal ray at angle zero points through the axis") {
  const auto g = make_circular_trajectory(8, small_scanner());
  const Ray r = ray_for_pixel(g, 0, 0.0, 0.0);
  CHECK((r.source - Eigen::Vector3d(785.0, 0, 0)).norm() < 1e-12);
  CHECK((r.direction - Eigen::Vector3d(-1, 0, 0)).norm() < 1e-12);
  CHECK(r.direction.z() == 0.0);
}

TEST_CASE("half a turn negates the source and reverses the principal ray") {
  const auto g = make_circular_trajectory(2, small_scanner());
  const Ray a = ray_for_pixel(g, 0, 0.0, 0.0);
  const Ray b = ray_for_pixel(g, 1, 0.0, 0.0);
  CHECK((b.source.head<2>() + a.source.head<2>()).norm() < 1e-9);
  CHECK((b.direction + a.direction).norm() < 1e-12);
}

TEST_CASE("one pitch along u tilts the ray by atan(pitch / sdd)") {
  const ScannerSpec s = small_scanner();
  const auto g = make_circular_trajectory(8, s);
  const Ray c = ray_for_pixel(g, 0, 0.0, 0.0);
  const Ray r = ray_for_pixel(g, 0, 1.0, 0.0);
  const double angle = std::acos(std::clamp(c.direction.dot(r.direction), -1.0, 1.0));
  CHECK(angle == doctest::Approx(std::atan(s.pitch_u_mm / s.sdd_mm)).epsilon(1e-9));
  CHECK(r.direction.z() == 0.0);
  // u grows along (-sin b, cos b, 0), which is +y at angle 0
  CHECK(r.direction.y() > 0.0);
  const Ray v = ray_for_pixel(g, 0, 0.0, 1.0);
  CHECK(std::atan2(v.direction.z(), -v.direction.x()) == doctest::Approx(std::atan(s.pitch_v_mm / s.sdd_mm)));
}

TEST_CASE("rays are unit length and the pixel distance is at least sdd") {
  ScannerSpec s = small_scanner();
  s.offset_u_mm = 3.0;
  s.offset_v_mm = -1.5;
  s.isocenter = {10.0, -20.0, 5.0};
  const auto g = make_circular_trajectory(7, s);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t a = static_cast<std::size_t>(trial % 7);
    const double pu = u(rng), pv = u(rng);
    const Ray r = ray_for_pixel(g, a, pu, pv);
    CHECK(std::abs(r.direction.norm() - 1.0) < 1e-9);
    const double d = (g.detector_position(a, pu, pv) - g.source_position(a)).norm();
    CHECK(d >= s.sdd_mm - 1e-9);
  }
  // equality at the principal ray, which the offset moves off the centre pixel
  const double pu = -s.offset_u_mm / s.pitch_u_mm, pv = -s.offset_v_mm / s.pitch_v_mm;
  CHECK((g.detector_position(3, pu, pv) - g.source_position(3)).norm() == doctest::Approx(s.sdd_mm).epsilon(1e-14));
}

TEST_CASE("advancing the angle rotates source and pixels about z") {
  ScannerSpec s = small_scanner();
  s.offset_u_mm = 0.7;
  const std::vector<double> angles{0.1, 0.1 + 0.9, 0.1 + 2.3};
  const ConeBeamGeometry g(s, angles);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (std::size_t k = 1; k < angles.size(); ++k) {
    const Eigen::Matrix3d R = rot_z(angles[k] - angles[0]);
    CHECK((g.source_position(k) - R * g.source_position(0)).norm() < 1e-9);
    for (int trial = 0; trial < 50; ++trial) {
      const double pu = u(rng), pv = u(rng);
      CHECK((g.detector_position(k, pu, pv) - R * g.detector_position(0, pu, pv)).norm() < 1e-9);
    }
  }
}

TEST_CASE("sources lie on a circle of radius sad at the axis height") {
  ScannerSpec s = small_scanner();
  s.isocenter = {-4.0, 9.0, 12.5};
  const auto g = make_circular_trajectory(37, s);
  for (std::size_t k = 0; k < g.n_angles(); ++k) {
    const Eigen::Vector3d p = g.source_position(k) - s.isocenter;
    CHECK(p.z() == 0.0);
    CHECK(p.norm() == doctest::Approx(s.sad_mm).epsilon(1e-14));
  }
}

TEST_CASE("angle index out of range throws") {
  const auto g = make_circular_trajectory(3, small_scanner());
  CHECK_THROWS_AS(ray_for_pixel(g, 3, 0.0, 0.0), IndexError);
}

TEST_CASE("geometry key-value round trip") {
  ScannerSpec s = small_scanner();
  s.sad_mm = 600.125;
  s.offset_u_mm = 0.1;
  s.isocenter = {1.0 / 3.0, -2.5, 7.0};
  const auto g = make_circular_trajectory(256, s);
  std::ostringstream out;
  to_key_values(g).write(out);
  for (const char* key : {"sad_mm", "sdd_mm", "det_nu", "det_nv", "pitch_u_mm", "pitch_v_mm", "n_projections",
                          "offset_u_mm", "offset_v_mm"}) {
    CHECK_MESSAGE(out.str().find(key) != std::string::npos, key);
  }
  std::istringstream in(out.str());
  const auto back = geometry_from_key_values(KeyValueMap::parse(in));
  CHECK(back.angles() == g.angles());
  CHECK(back.scanner().sad_mm == s.sad_mm);
  CHECK(back.scanner().isocenter == s.isocenter);
  CHECK(back.nu() == 64);
  CHECK(back.scanner().offset_u_mm == 0.1);
}
