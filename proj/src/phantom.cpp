#include "cbct/phantom.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cbct/error.hpp"
#include "cbct/keyvalue.hpp"

namespace cbct {
namespace {

// Rotates a world offset from the ellipsoid centre into its body frame.
Eigen::Vector3d to_body_frame(const EllipsoidSpec& e, const Eigen::Vector3d& offset) {
  const double c = std::cos(e.z_rotation);
  const double s = std::sin(e.z_rotation);
  return {c * offset.x() + s * offset.y(), -s * offset.x() + c * offset.y(), offset.z()};
}

constexpr double kDegree = std::numbers::pi / 180.0;

}  // namespace

bool EllipsoidSpec::contains(const Eigen::Vector3d& point) const {
  const Eigen::Vector3d q = to_body_frame(*this, point - center).cwiseQuotient(semi_axes);
  return q.squaredNorm() <= 1.0;
}

Volume3 rasterize(std::span<const EllipsoidSpec> specs, const Grid& grid, double background) {
  Volume3 out(grid);
  for (std::size_t k = 0; k < grid.dims[2]; ++k) {
    for (std::size_t j = 0; j < grid.dims[1]; ++j) {
      for (std::size_t i = 0; i < grid.dims[0]; ++i) {
        const Eigen::Vector3d p = grid.index_to_world(
            Eigen::Vector3d(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)));
        double value = background;
        for (const EllipsoidSpec& e : specs) {
          if (e.contains(p)) value += e.density;
        }
        out(i, j, k) = static_cast<float>(value);
      }
    }
  }
  return out;
}

double analytic_line_integral(std::span<const EllipsoidSpec> specs, const Ray& ray) {
  double total = 0.0;
  const double speed = ray.direction.norm();
  if (!(speed > 0.0)) return 0.0;
  for (const EllipsoidSpec& e : specs) {
    // unit-sphere frame: |o + t d|^2 = 1
    const Eigen::Vector3d o = to_body_frame(e, ray.source - e.center).cwiseQuotient(e.semi_axes);
    const Eigen::Vector3d d = to_body_frame(e, ray.direction).cwiseQuotient(e.semi_axes);
    const double a = d.squaredNorm();
    const double b = 2.0 * o.dot(d);
    const double c = o.squaredNorm() - 1.0;
    const double discriminant = b * b - 4.0 * a * c;
    if (!(discriminant > 0.0)) continue;
    const double chord_t = std::sqrt(discriminant) / a;  // t2 - t1
    total += e.density * chord_t * speed;
  }
  return total;
}

std::vector<EllipsoidSpec> shepp_logan_3d(double radius_mm, double density_scale) {
  // density, semi-axes (a, b, c), centre (x, y, z), z rotation in degrees
  struct Row {
    double density, a, b, c, x, y, z, phi;
  };
  static constexpr Row kTable[] = {
      {1.0, 0.6900, 0.920, 0.810, 0.00, 0.0000, 0.00, 0.0},
      {-0.8, 0.6624, 0.874, 0.780, 0.00, -0.0184, 0.00, 0.0},
      {-0.2, 0.1100, 0.310, 0.220, 0.22, 0.0000, 0.00, -18.0},
      {-0.2, 0.1600, 0.410, 0.280, -0.22, 0.0000, 0.00, 18.0},
      {0.1, 0.2100, 0.250, 0.410, 0.00, 0.3500, -0.15, 0.0},
      {0.1, 0.0460, 0.046, 0.050, 0.00, 0.1000, 0.25, 0.0},
      {0.1, 0.0460, 0.046, 0.050, 0.00, -0.1000, 0.25, 0.0},
      {0.1, 0.0460, 0.023, 0.050, -0.08, -0.6050, 0.00, 0.0},
      {0.1, 0.0230, 0.023, 0.020, 0.00, -0.6060, 0.00, 0.0},
      {0.1, 0.0230, 0.046, 0.020, 0.06, -0.6050, 0.00, 0.0},
  };
  if (!(radius_mm > 0.0)) throw ParameterError("phantom radius must be positive");
  std::vector<EllipsoidSpec> specs;
  specs.reserve(std::size(kTable));
  for (const Row& row : kTable) {
    EllipsoidSpec e;
    e.center = radius_mm * Eigen::Vector3d(row.x, row.y, row.z);
    e.semi_axes = radius_mm * Eigen::Vector3d(row.a, row.b, row.c);
    e.z_rotation = row.phi * kDegree;
    e.density = row.density * density_scale;
    specs.push_back(e);
  }
  return specs;
}

LiverPhantom liver_phantom(double radius_mm) {
  if (!(radius_mm > 0.0)) throw ParameterError("phantom radius must be positive");
  const double r = radius_mm;
  auto make = [r](Eigen::Vector3d c, Eigen::Vector3d axes, double rot_deg, double hu) {
    EllipsoidSpec e;
    e.center = r * c;
    e.semi_axes = r * axes;
    e.z_rotation = rot_deg * kDegree;
    e.density = hu;
    return e;
  };
  LiverPhantom p;
  p.liver = make({-0.35, 0.10, 0.05}, {0.40, 0.35, 0.30}, 20.0, 60.0);
  p.tumor = make({-0.45, 0.15, 0.05}, {0.10, 0.08, 0.09}, 0.0, -40.0);
  p.hu_components = {
      make({0.0, 0.0, 0.0}, {1.00, 0.70, 0.90}, 0.0, 1000.0),   // water body
      make({0.0, -0.45, 0.0}, {0.12, 0.12, 0.85}, 0.0, 700.0),  // spine
      p.liver,
      p.tumor,
  };
  return p;
}

Volume3 LiverPhantom::rasterize_hu(const Grid& grid) const { return rasterize(hu_components, grid, background_hu); }

std::vector<EllipsoidSpec> LiverPhantom::attenuation_components(double mu_water) const {
  if (background_hu != -1000.0) throw ParameterError("attenuation form needs an air background");
  std::vector<EllipsoidSpec> out = hu_components;
  for (EllipsoidSpec& e : out) e.density = mu_water * e.density / 1000.0;
  return out;
}

Volume3 LiverPhantom::rasterize_attenuation(const Grid& grid, double mu_water) const {
  return rasterize(attenuation_components(mu_water), grid, 0.0);
}

LabelVolume LiverPhantom::rasterize_labels(const Grid& grid) const {
  LabelVolume out(grid);
  for (std::size_t k = 0; k < grid.dims[2]; ++k) {
    for (std::size_t j = 0; j < grid.dims[1]; ++j) {
      for (std::size_t i = 0; i < grid.dims[0]; ++i) {
        const Eigen::Vector3d p = grid.index_to_world(
            Eigen::Vector3d(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)));
        if (tumor.contains(p)) {
          out(i, j, k) = kTumorLabel;
        } else if (liver.contains(p)) {
          out(i, j, k) = kLiverLabel;
        }
      }
    }
  }
  return out;
}

void write_phantom_specs(std::span<const EllipsoidSpec> specs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# cx cy cz ax ay az rot_deg density\n";
  for (const EllipsoidSpec& e : specs) {
    out << format_double(e.center.x()) << ' ' << format_double(e.center.y()) << ' ' << format_double(e.center.z())
        << ' ' << format_double(e.semi_axes.x()) << ' ' << format_double(e.semi_axes.y()) << ' '
        << format_double(e.semi_axes.z()) << ' ' << format_double(e.z_rotation / kDegree) << ' '
        << format_double(e.density) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<EllipsoidSpec> read_phantom_specs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<EllipsoidSpec> specs;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    EllipsoidSpec e;
    double rot_deg = 0.0;
    if (!(fields >> e.center.x() >> e.center.y() >> e.center.z() >> e.semi_axes.x() >> e.semi_axes.y() >>
          e.semi_axes.z() >> rot_deg >> e.density)) {
      throw FormatError(path.string() + ":" + std::to_string(line_number) + ": expected 8 numbers");
    }
    if (!(e.semi_axes.minCoeff() > 0.0)) {
      throw FormatError(path.string() + ":" + std::to_string(line_number) + ": semi-axes must be positive");
    }
    e.z_rotation = rot_deg * kDegree;
    specs.push_back(e);
  }
  return specs;
}

}  // namespace cbct
