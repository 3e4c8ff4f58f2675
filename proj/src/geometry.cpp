#include "cbct/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cbct/error.hpp"

namespace cbct {

void ScannerSpec::validate() const {
  if (!(sad_mm > 0.0) || !(sdd_mm > sad_mm) || !std::isfinite(sdd_mm)) {
    throw GeometryError("cone-beam geometry needs 0 < sad < sdd (sad=" + std::to_string(sad_mm) +
                        ", sdd=" + std::to_string(sdd_mm) + ")");
  }
  if (det_nu < 1 || det_nv < 1) throw GeometryError("detector needs at least one pixel per axis");
  if (!(pitch_u_mm > 0.0) || !(pitch_v_mm > 0.0)) throw GeometryError("detector pitch must be positive");
  if (!std::isfinite(offset_u_mm) || !std::isfinite(offset_v_mm) || !isocenter.allFinite()) {
    throw GeometryError("detector offset and isocenter must be finite");
  }
}

ConeBeamGeometry::ConeBeamGeometry(ScannerSpec scanner, std::vector<double> angles)
    : scanner_(std::move(scanner)), angles_(std::move(angles)) {
  scanner_.validate();
  if (angles_.empty()) throw GeometryError("trajectory has no angles");
  for (std::size_t k = 0; k < angles_.size(); ++k) {
    const double a = angles_[k];
    if (!(a >= 0.0) || !(a < 2.0 * std::numbers::pi)) throw GeometryError("angles must lie in [0, 2 pi)");
    if (k > 0 && !(a > angles_[k - 1])) throw GeometryError("angles must be strictly increasing");
  }
}

void ConeBeamGeometry::check_index(std::size_t angle_index) const {
  if (angle_index >= angles_.size()) {
    throw IndexError("angle index " + std::to_string(angle_index) + " out of range (" +
                     std::to_string(angles_.size()) + " angles)");
  }
}

Eigen::Vector3d ConeBeamGeometry::source_direction(std::size_t angle_index) const {
  check_index(angle_index);
  const double beta = angles_[angle_index];
  return {std::cos(beta), std::sin(beta), 0.0};
}

Eigen::Vector3d ConeBeamGeometry::u_axis(std::size_t angle_index) const {
  check_index(angle_index);
  const double beta = angles_[angle_index];
  return {-std::sin(beta), std::cos(beta), 0.0};
}

Eigen::Vector3d ConeBeamGeometry::source_position(std::size_t angle_index) const {
  return scanner_.isocenter + scanner_.sad_mm * source_direction(angle_index);
}

Eigen::Vector3d ConeBeamGeometry::detector_position(std::size_t angle_index, double u, double v) const {
  const Eigen::Vector3d s_hat = source_direction(angle_index);
  const Eigen::Vector3d detector_center = scanner_.isocenter + (scanner_.sad_mm - scanner_.sdd_mm) * s_hat;
  const double u_mm = u * scanner_.pitch_u_mm + scanner_.offset_u_mm;
  const double v_mm = v * scanner_.pitch_v_mm + scanner_.offset_v_mm;
  return detector_center + u_mm * u_axis(angle_index) + v_mm * Eigen::Vector3d::UnitZ();
}

ConeBeamGeometry make_circular_trajectory(std::size_t n_projections, const ScannerSpec& scanner) {
  if (n_projections < 1) throw GeometryError("need at least one projection");
  std::vector<double> angles(n_projections);
  for (std::size_t k = 0; k < n_projections; ++k) {
    angles[k] = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_projections);
  }
  return ConeBeamGeometry(scanner, std::move(angles));
}

Ray ray_for_pixel(const ConeBeamGeometry& geometry, std::size_t angle_index, double u, double v) {
  Ray ray;
  ray.source = geometry.source_position(angle_index);
  ray.direction = (geometry.detector_position(angle_index, u, v) - ray.source).normalized();
  return ray;
}

KeyValueMap to_key_values(const ConeBeamGeometry& geometry) {
  const ScannerSpec& s = geometry.scanner();
  KeyValueMap map;
  map.set("sad_mm", s.sad_mm);
  map.set("sdd_mm", s.sdd_mm);
  map.set("det_nu", static_cast<long long>(s.det_nu));
  map.set("det_nv", static_cast<long long>(s.det_nv));
  map.set("pitch_u_mm", s.pitch_u_mm);
  map.set("pitch_v_mm", s.pitch_v_mm);
  map.set("offset_u_mm", s.offset_u_mm);
  map.set("offset_v_mm", s.offset_v_mm);
  map.set("n_projections", static_cast<long long>(geometry.n_angles()));
  map.set("iso_x_mm", s.isocenter.x());
  map.set("iso_y_mm", s.isocenter.y());
  map.set("iso_z_mm", s.isocenter.z());
  return map;
}

ScannerSpec scanner_from_key_values(const KeyValueMap& map, ScannerSpec s) {
  auto positive_count = [&](const char* key, std::size_t& field) {
    if (auto v = map.find_int(key)) {
      if (*v < 1) throw ConfigError(std::string(key) + " must be >= 1");
      field = static_cast<std::size_t>(*v);
    }
  };
  if (auto v = map.find_double("sad_mm")) s.sad_mm = *v;
  if (auto v = map.find_double("sdd_mm")) s.sdd_mm = *v;
  positive_count("det_nu", s.det_nu);
  positive_count("det_nv", s.det_nv);
  if (auto v = map.find_double("pitch_u_mm")) s.pitch_u_mm = *v;
  if (auto v = map.find_double("pitch_v_mm")) s.pitch_v_mm = *v;
  if (auto v = map.find_double("offset_u_mm")) s.offset_u_mm = *v;
  if (auto v = map.find_double("offset_v_mm")) s.offset_v_mm = *v;
  if (auto v = map.find_double("iso_x_mm")) s.isocenter.x() = *v;
  if (auto v = map.find_double("iso_y_mm")) s.isocenter.y() = *v;
  if (auto v = map.find_double("iso_z_mm")) s.isocenter.z() = *v;
  return s;
}

ConeBeamGeometry geometry_from_key_values(const KeyValueMap& map) {
  const long long n = map.get_int("n_projections");
  if (n < 1) throw ConfigError("n_projections must be >= 1");
  const ScannerSpec scanner = scanner_from_key_values(map);
  return make_circular_trajectory(static_cast<std::size_t>(n), scanner);
}

}  // namespace cbct
