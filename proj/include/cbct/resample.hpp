#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cbct/volume.hpp"

namespace cbct {

/// Homogeneous world-space (mm) map, last row (0, 0, 0, 1).
class AffineTransform {
 public:
  AffineTransform() = default;
  explicit AffineTransform(const Eigen::Matrix4d& matrix);

  static AffineTransform identity() { return AffineTransform(); }
  static AffineTransform translation(const Eigen::Vector3d& offset);

  const Eigen::Matrix4d& matrix() const { return matrix_; }
  Eigen::Vector3d apply(const Eigen::Vector3d& point) const;

  /// Throws TransformError when the linear part is singular.
  AffineTransform inverse() const;

  /// (this * first)(x) = this(first(x)).
  AffineTransform operator*(const AffineTransform& first) const;
  bool operator==(const AffineTransform& other) const { return matrix_ == other.matrix_; }

 private:
  Eigen::Matrix4d matrix_ = Eigen::Matrix4d::Identity();
};

/// 16 whitespace-separated decimals, row-major.
void write_transform(const AffineTransform& transform, const std::filesystem::path& path);
AffineTransform read_transform(const std::filesystem::path& path);

/// Trilinear control-point displacement field spanning a volume. Control
/// points are spread evenly from the first to the last voxel centre of
/// `extent`; the field is zero outside that box.
class DisplacementField {
 public:
  DisplacementField(Grid extent, Index3 control_dims, std::vector<Eigen::Vector3d> displacements);

  /// All-zero field with the given control lattice.
  static DisplacementField zero(Grid extent, Index3 control_dims);

  const Grid& extent() const { return extent_; }
  const Index3& control_dims() const { return control_dims_; }
  const std::vector<Eigen::Vector3d>& displacements() const { return displacements_; }
  const Eigen::Vector3d& control(std::size_t i, std::size_t j, std::size_t k) const;

  /// World position of control point (i, j, k).
  Eigen::Vector3d control_position(std::size_t i, std::size_t j, std::size_t k) const;

  Eigen::Vector3d at(const Eigen::Vector3d& world) const;

  /// Largest absolute displacement component over all control points.
  double max_abs_component() const;

 private:
  Grid extent_;
  Index3 control_dims_;
  std::vector<Eigen::Vector3d> displacements_;
};

/// Control displacements as a vector NIfTI (dims cx, cy, cz, 1, 3) plus a
/// key-value sidecar describing the spanned volume grid.
void write_displacement_field(const DisplacementField& field, const std::filesystem::path& path);
DisplacementField read_displacement_field(const std::filesystem::path& path);

struct ResampleOptions {
  /// Value for samples outside the source; defaults to min(src).
  std::optional<float> fill;
  unsigned threads = 0;
};

/// out(x) = src(t^-1(x)) with trilinear interpolation.
Volume3 resample_linear(const Volume3& src, const Grid& target, const AffineTransform& t,
                        const ResampleOptions& options = {});

/// out(x) = src(t^-1(x)) with nearest-neighbour lookup, 0 outside.
LabelVolume resample_nearest(const LabelVolume& src, const Grid& target, const AffineTransform& t,
                             unsigned threads = 0);

/// Resamples CT (linear) and mask (nearest) onto `target` with the identity
/// world transform.
std::pair<Volume3, LabelVolume> align_to_grid(const Volume3& ct, const LabelVolume& mask,
                                              const Grid& target, unsigned threads = 0);

/// Strength bounds at alpha = 1.
struct MisalignmentBounds {
  double max_scale = 0.10;          // fraction
  double max_rotation_deg = 10.0;   // per axis
  double max_translation_mm = 10.0; // per axis
  double max_displacement_mm = 10.0;
  Index3 control_dims{5, 5, 5};
};

struct AffineSample {
  Eigen::Vector3d scale = Eigen::Vector3d::Ones();
  Eigen::Vector3d rotation_deg = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation_mm = Eigen::Vector3d::Zero();
  AffineTransform transform;
};

/// Uniform per-axis scale, rotation (x, then y, then z) and translation,
/// each bounded by alpha times its maximum, composed about `center`:
///   x -> center + translation + R * S * (x - center).
/// Deterministic in `seed` on every platform.
AffineSample random_affine(double alpha, const MisalignmentBounds& bounds,
                           const Eigen::Vector3d& center, std::uint64_t seed);

/// Each interior control displacement component ~ U(-alpha max, alpha max);
/// boundary control points stay at zero so the field vanishes on the faces.
DisplacementField random_elastic(double alpha, double max_displacement_mm, const Index3& control_dims,
                                 const Grid& extent, std::uint64_t seed);

/// Resamples on the source grid at t^-1(x) + field(x).
Volume3 warp(const Volume3& src, const DisplacementField& field, const AffineTransform& t,
             const ResampleOptions& options = {});
LabelVolume warp(const LabelVolume& src, const DisplacementField& field, const AffineTransform& t,
                 unsigned threads = 0);

/// Axis-aligned grid covering an oblique grid's extent, spacing permuted to
/// the world axes.
Grid axis_aligned_cover(const Grid& grid);

}  // namespace cbct
