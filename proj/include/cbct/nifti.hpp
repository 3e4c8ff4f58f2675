#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cbct/volume.hpp"

namespace cbct {

/// Subset of NIfTI-1 datatype codes we read and write.
enum class NiftiDatatype : std::int16_t {
  uint8 = 2,
  int16 = 4,
  int32 = 8,
  float32 = 16,
  float64 = 64,
};

enum class OrientationSource { sform, qform, pixdim };

const char* to_string(NiftiDatatype type);
const char* to_string(OrientationSource source);

/// What read_nifti found on disk.
struct LoadReport {
  NiftiDatatype datatype = NiftiDatatype::float32;
  OrientationSource orientation = OrientationSource::pixdim;
  bool gzipped = false;
  bool scaled = false;  // scl_slope/scl_inter were applied
  double scl_slope = 0.0;
  double scl_inter = 0.0;
};

struct NiftiWriteOptions {
  bool gzip = false;
  /// On-disk type; defaults to float32 for Volume3 and uint8 for labels.
  /// Integer types require integral, in-range values.
  std::optional<NiftiDatatype> datatype;
  std::string description;
};

/// Reads a 3D NIfTI-1 file (.nii or .nii.gz) into the float carrier.
Volume3 read_nifti(const std::filesystem::path& path, LoadReport* report = nullptr);

/// Reads a 3D NIfTI-1 label file; every value must be one of {0, 1, 2}.
LabelVolume read_nifti_labels(const std::filesystem::path& path, LoadReport* report = nullptr);

void write_nifti(const Volume3& volume, const std::filesystem::path& path,
                 const NiftiWriteOptions& options = {});
void write_nifti(const LabelVolume& labels, const std::filesystem::path& path,
                 const NiftiWriteOptions& options = {});

/// 3-component vector image stored with intent NIFTI_INTENT_VECTOR and
/// dims (nx, ny, nz, 1, 3). `components` is planar: all x, then y, then z.
void write_nifti_vector(const Grid& grid, const std::vector<float>& components,
                        const std::filesystem::path& path, bool gzip = false);
std::vector<float> read_nifti_vector(const std::filesystem::path& path, Grid* grid = nullptr);

/// True when the path ends in ".gz".
bool has_gzip_suffix(const std::filesystem::path& path);

}  // namespace cbct
