#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cbct/geometry.hpp"
#include "cbct/volume.hpp"

namespace cbct {

/// Ellipsoid rotated about the z axis through its centre. Densities add up
/// where ellipsoids overlap.
struct EllipsoidSpec {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d semi_axes = Eigen::Vector3d::Ones();
  double z_rotation = 0.0;  // radians
  double density = 0.0;

  bool contains(const Eigen::Vector3d& point) const;
};

/// Sum of densities of the ellipsoids containing each voxel centre, plus
/// `background`.
Volume3 rasterize(std::span<const EllipsoidSpec> specs, const Grid& grid, double background = 0.0);

/// Integral of the phantom along the whole line through `ray`. The ray
/// direction need not be unit length.
double analytic_line_integral(std::span<const EllipsoidSpec> specs, const Ray& ray);

/// Modified 3D Shepp-Logan head, ten ellipsoids, unit table coordinates
/// scaled by `radius_mm` and densities by `density_scale`. See
/// docs/phantoms.md for the table.
std::vector<EllipsoidSpec> shepp_logan_3d(double radius_mm, double density_scale = 1.0);

/// Abdomen-like test object in Hounsfield units: air background, water body,
/// spine, an off-centre liver and a tumour inside the liver.
struct LiverPhantom {
  double background_hu = -1000.0;
  std::vector<EllipsoidSpec> hu_components;
  EllipsoidSpec liver;
  EllipsoidSpec tumor;

  Volume3 rasterize_hu(const Grid& grid) const;
  Volume3 rasterize_attenuation(const Grid& grid, double mu_water) const;
  /// 1 inside the liver, 2 inside the tumour, else 0.
  LabelVolume rasterize_labels(const Grid& grid) const;
  /// Same object in attenuation units (mm^-1), zero outside the body.
  std::vector<EllipsoidSpec> attenuation_components(double mu_water) const;
};

/// `radius_mm` is the half-width of the body along x.
LiverPhantom liver_phantom(double radius_mm);

/// One ellipsoid per line: cx cy cz ax ay az rot_deg density.
void write_phantom_specs(std::span<const EllipsoidSpec> specs, const std::filesystem::path& path);
std::vector<EllipsoidSpec> read_phantom_specs(const std::filesystem::path& path);

}  // namespace cbct
