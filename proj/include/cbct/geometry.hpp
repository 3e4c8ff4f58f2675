#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "cbct/keyvalue.hpp"

namespace cbct {

/// Fixed scanner hardware: distances, flat panel and rotation axis.
///
/// Conventions: the rotation axis is parallel to world z and passes through
/// `isocenter`. Angle 0 puts the source on the +x side of the axis; angles
/// grow counter-clockwise seen from +z. The detector u axis is the in-plane
/// tangent (-sin b, cos b, 0), the v axis is +z.
struct ScannerSpec {
  double sad_mm = 785.0;
  double sdd_mm = 1300.0;
  std::size_t det_nu = 512;
  std::size_t det_nv = 512;
  double pitch_u_mm = 0.75;
  double pitch_v_mm = 0.75;
  double offset_u_mm = 0.0;
  double offset_v_mm = 0.0;
  Eigen::Vector3d isocenter = Eigen::Vector3d::Zero();

  void validate() const;
};

struct Ray {
  Eigen::Vector3d source = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitX();
};

class ConeBeamGeometry {
 public:
  ConeBeamGeometry(ScannerSpec scanner, std::vector<double> angles);

  const ScannerSpec& scanner() const { return scanner_; }
  const std::vector<double>& angles() const { return angles_; }
  std::size_t n_angles() const { return angles_.size(); }
  std::size_t nu() const { return scanner_.det_nu; }
  std::size_t nv() const { return scanner_.det_nv; }

  /// Pixel coordinate of the detector centre along u and v, (n - 1) / 2.
  double u_center() const { return 0.5 * static_cast<double>(scanner_.det_nu - 1); }
  double v_center() const { return 0.5 * static_cast<double>(scanner_.det_nv - 1); }

  Eigen::Vector3d source_position(std::size_t angle_index) const;

  /// Unit vector from the isocenter towards the source.
  Eigen::Vector3d source_direction(std::size_t angle_index) const;
  Eigen::Vector3d u_axis(std::size_t angle_index) const;

  /// World position of detector point (u, v), given in pixels from the
  /// detector centre.
  Eigen::Vector3d detector_position(std::size_t angle_index, double u, double v) const;

 private:
  void check_index(std::size_t angle_index) const;

  ScannerSpec scanner_;
  std::vector<double> angles_;
};

/// Equidistant full turn: angles[k] = 2 pi k / n_projections.
ConeBeamGeometry make_circular_trajectory(std::size_t n_projections, const ScannerSpec& scanner);

/// Ray from the source through detector point (u, v), pixels from centre.
Ray ray_for_pixel(const ConeBeamGeometry& geometry, std::size_t angle_index, double u, double v);

/// Keys: sad_mm sdd_mm det_nu det_nv pitch_u_mm pitch_v_mm n_projections
/// offset_u_mm offset_v_mm, plus optional iso_x_mm iso_y_mm iso_z_mm.
KeyValueMap to_key_values(const ConeBeamGeometry& geometry);
ScannerSpec scanner_from_key_values(const KeyValueMap& map, ScannerSpec defaults = {});
ConeBeamGeometry geometry_from_key_values(const KeyValueMap& map);

}  // namespace cbct
