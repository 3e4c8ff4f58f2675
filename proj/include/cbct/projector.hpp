#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "cbct/geometry.hpp"
#include "cbct/volume.hpp"

namespace cbct {

inline constexpr double kDefaultMuWater = 0.02;  // mm^-1

/// Per-angle detector images of attenuation line integrals (dimensionless),
/// laid out [angle][v][u].
struct ProjectionStack {
  explicit ProjectionStack(ConeBeamGeometry geometry);
  ProjectionStack(ConeBeamGeometry geometry, std::vector<float> data);

  ConeBeamGeometry geometry;
  std::vector<float> data;

  std::size_t offset(std::size_t angle, std::size_t v, std::size_t u) const {
    return (angle * geometry.nv() + v) * geometry.nu() + u;
  }
  float& at(std::size_t angle, std::size_t v, std::size_t u) { return data[offset(angle, v, u)]; }
  float at(std::size_t angle, std::size_t v, std::size_t u) const { return data[offset(angle, v, u)]; }
};

/// mu = mu_water * (1 + HU / 1000), clamped below at zero.
Volume3 hu_to_attenuation(const Volume3& ct, double mu_water = kDefaultMuWater);

/// Inverse of the linear model (no clamping): HU = 1000 (mu / mu_water - 1).
Volume3 attenuation_to_hu(const Volume3& mu, double mu_water = kDefaultMuWater);

/// Exact radiological path along the full line through `ray`: the sum over
/// crossed voxels of mu times intersection length. Voxels are half-open
/// [lo, hi) along every axis, so a line lying on a voxel face is credited to
/// the voxel with the larger index. Requires an identity direction matrix.
double siddon_trace(const Ray& ray, const Volume3& volume);

struct ProjectOptions {
  unsigned threads = 0;
};

/// DRR line integrals at every pixel centre of every view.
ProjectionStack forward_project(const Volume3& attenuation, const ConeBeamGeometry& geometry,
                                const ProjectOptions& options = {});

/// Beer-Lambert intensities I = i0 exp(-p) in the same layout.
std::vector<float> to_intensity(const ProjectionStack& stack, double i0);

/// p = -ln(I / i0); inverse of to_intensity.
ProjectionStack from_intensity(const ConeBeamGeometry& geometry, const std::vector<float>& intensity,
                               double i0);

/// Writes the stack as a NIfTI volume of dims (nu, nv, n_angles) and a
/// geometry sidecar next to it; see projection_sidecar_path.
void write_projections(const ProjectionStack& stack, const std::filesystem::path& path, bool gzip);
ProjectionStack read_projections(const std::filesystem::path& path);

/// "<stem>.geom" beside the NIfTI file (".nii"/".nii.gz" stripped).
std::filesystem::path projection_sidecar_path(const std::filesystem::path& nifti_path);

}  // namespace cbct
