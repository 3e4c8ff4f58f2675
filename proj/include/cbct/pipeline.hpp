#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

#include "cbct/fdk.hpp"
#include "cbct/geometry.hpp"
#include "cbct/keyvalue.hpp"
#include "cbct/projector.hpp"
#include "cbct/resample.hpp"
#include "cbct/volume.hpp"

namespace cbct {

inline constexpr const char* kSoftwareName = "cbctsim";
inline constexpr const char* kSoftwareVersion = "0.1.0";

enum class CenteringMode { liver_cog, volume_center };
enum class OutputUnits { hu, attenuation };

const char* to_string(CenteringMode mode);
const char* to_string(OutputUnits units);
CenteringMode parse_centering(const std::string& text);
OutputUnits parse_output_units(const std::string& text);
const char* to_string(FilterMethod method);
FilterMethod parse_filter(const std::string& text);

struct PipelineConfig {
  std::vector<std::size_t> quality_levels{490, 256, 128, 64, 32};
  Eigen::Vector3d extent_mm{252.0, 246.0, 250.0};
  Eigen::Vector3d voxel_mm{0.688, 1.032, 0.688};
  ScannerSpec scanner;
  double mu_water = kDefaultMuWater;
  CenteringMode centering = CenteringMode::liver_cog;
  OutputUnits output_units = OutputUnits::hu;
  FilterMethod filter = FilterMethod::automatic;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool gzip = true;

  /// Throws ConfigError.
  void validate() const;

  /// Overrides fields present in `map`; geometry keys follow the geometry
  /// sidecar names, pipeline keys are quality_levels, extent_mm, voxel_mm,
  /// mu_water, centering, output_units, seed, threads, gzip.
  void apply(const KeyValueMap& map);

  nlohmann::json to_json() const;
};

/// liver_cog: centre of gravity of label 1; volume_center: grid centre.
/// Throws ConfigError when liver_cog has no mask, EmptyMaskError when the
/// mask has no liver voxels.
Eigen::Vector3d compute_center(const Volume3& ct, const LabelVolume* mask, CenteringMode mode);

/// CT in HU (any orientation) -> axis-aligned attenuation volume.
Volume3 prepare_attenuation(const Volume3& ct_hu, double mu_water, unsigned threads = 0);

/// Geometry for one quality level with the rotation axis through `center`.
ConeBeamGeometry level_geometry(const PipelineConfig& config, std::size_t n_projections,
                                const Eigen::Vector3d& center);

/// FDK onto `grid`, converted to the configured output units.
Volume3 reconstruct_level(const ProjectionStack& stack, const Grid& grid, const PipelineConfig& config);

/// Views 0, stride, 2 stride, ... of `stack` with their original angles.
ProjectionStack subset_views(const ProjectionStack& stack, std::size_t stride);

/// Stride into the largest level's views that yields `n_projections`
/// equidistant views, or 0 when `n_projections` does not divide it.
std::size_t reuse_stride(std::size_t n_projections, std::size_t largest);

std::string cbct_file_name(std::size_t n_projections, bool gzip);

struct VolumeResult {
  bool ok = false;
  std::string error;
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> files;  // includes the manifest
};

/// Full generation for one CT (+ optional mask) into `output_dir`:
/// cbct_<n>.nii[.gz] per quality level, ct_aligned, mask_aligned (when a
/// mask is given) and manifest.json. Errors are caught and reported in the
/// result.
VolumeResult run_pipeline(const std::filesystem::path& ct_path,
                          const std::optional<std::filesystem::path>& mask_path,
                          const PipelineConfig& config, const std::filesystem::path& output_dir);

struct BatchEntry {
  std::filesystem::path ct;
  std::optional<std::filesystem::path> mask;
};

/// Lines of "ct_path [mask_path]"; '#' comments allowed.
std::vector<BatchEntry> read_batch_list(const std::filesystem::path& path);

/// One subdirectory per entry named after the CT file stem (a numeric
/// suffix separates repeated stems). Entries are independent; a failure does
/// not stop the batch. With parallel_volumes > 1 that many volumes run at
/// once, each single-threaded; outputs are identical either way.
std::vector<VolumeResult> run_batch(const std::vector<BatchEntry>& entries, const PipelineConfig& config,
                                    const std::filesystem::path& output_root, unsigned parallel_volumes = 1);

enum class MisalignMode { affine, elastic };
MisalignMode parse_misalign_mode(const std::string& text);

struct MisalignResult {
  std::filesystem::path ct;
  std::filesystem::path mask;
  std::filesystem::path transform;
  std::optional<std::filesystem::path> field;
};

/// Writes ct_misaligned, mask_misaligned, transform.txt and, in elastic
/// mode, field.nii(.gz) + sidecar into `output_dir`.
MisalignResult run_misalign(const std::filesystem::path& ct_path, const std::filesystem::path& mask_path,
                            double alpha, MisalignMode mode, std::uint64_t seed,
                            const MisalignmentBounds& bounds, const std::filesystem::path& output_dir,
                            bool gzip = true, unsigned threads = 0);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Strips ".nii" / ".nii.gz" from a file name.
std::string nifti_stem(const std::filesystem::path& path);

}  // namespace cbct
