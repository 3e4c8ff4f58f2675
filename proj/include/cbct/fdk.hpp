#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cbct/projector.hpp"
#include "cbct/volume.hpp"

namespace cbct {

/// Band-limited Ram-Lak kernel sampled at the detector pitch tau:
///   h(0) = 1 / (4 tau^2), h(n even) = 0, h(n odd) = -1 / (pi^2 n^2 tau^2).
class RampKernel {
 public:
  RampKernel(double pitch_mm, std::size_t half_width);

  double pitch() const { return pitch_; }
  std::size_t half_width() const { return half_width_; }
  std::size_t center() const { return half_width_; }

  /// Odd-length tap array, taps()[center() + n] = h(n).
  const std::vector<double>& taps() const { return taps_; }

  /// h(n) for |n| <= half_width, 0 beyond.
  double at(long n) const;

 private:
  double pitch_;
  std::size_t half_width_;
  std::vector<double> taps_;
};

enum class FilterMethod {
  spatial,  // direct linear convolution with the taps
  fft,      // same convolution through zero-padded FFTs
  automatic,
};

/// Multiplies every pixel by sdd / sqrt(sdd^2 + u^2 + v^2), u and v in mm
/// from the principal-ray intersection.
ProjectionStack cosine_weight(const ProjectionStack& stack);

/// Convolves each detector row with the kernel (zero padded, truncated to
/// the row length) and scales by the pitch. The kernel pitch must equal the
/// detector u pitch.
ProjectionStack ramp_filter_rows(const ProjectionStack& stack, const RampKernel& kernel,
                                 FilterMethod method = FilterMethod::automatic,
                                 unsigned threads = 0);

/// Overall scale applied after accumulation: (pi / n_angles) * (sdd / sad).
/// The first factor is the angular quadrature over a full turn with the
/// 1/2 redundancy weight; the second rescales the detector-pitch ramp
/// filter to the isocenter plane.
double backprojection_normalization(const ConeBeamGeometry& geometry);

/// Voxel-driven distance-weighted cone-beam backprojection with bilinear
/// detector interpolation. Views where a voxel falls off the detector add 0.
Volume3 backproject(const ProjectionStack& filtered, const Grid& grid, unsigned threads = 0);

struct FdkOptions {
  FilterMethod filter = FilterMethod::automatic;
  unsigned threads = 0;
};

/// cosine_weight -> ramp_filter_rows -> backproject.
Volume3 fdk_reconstruct(const ProjectionStack& stack, const Grid& grid, const FdkOptions& options = {});

/// Axis-aligned grid with dims = round(extent / voxel) centred on `center`.
Grid reconstruction_grid(const Eigen::Vector3d& extent_mm, const Eigen::Vector3d& voxel_mm,
                         const Eigen::Vector3d& center);

struct ReconstructionReport {
  std::size_t n_projections = 0;
  Index3 dims{};
  Eigen::Vector3d spacing = Eigen::Vector3d::Zero();
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  std::string kernel = "ram-lak";
  std::string filter_method;
  double normalization = 0.0;
};

ReconstructionReport make_report(const ProjectionStack& stack, const Grid& grid, FilterMethod method);
void write_report(const ReconstructionReport& report, const std::filesystem::path& path);

}  // namespace cbct
