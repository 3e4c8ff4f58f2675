#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "cbct/volume.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "cbct");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::vector<unsigned char> read_bytes(const std::filesystem::path& path);
bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b);

cbct::Volume3 random_volume(const cbct::Grid& grid, std::mt19937_64& rng, double lo, double hi);
cbct::Grid unit_grid(std::size_t nx, std::size_t ny, std::size_t nz);

/// Raw NIfTI-1 single file assembled byte by byte from the published header
/// layout, independent of the library's writer.
struct RawNifti {
  std::int16_t dims[8] = {3, 1, 1, 1, 1, 1, 1, 1};
  std::int16_t datatype = 16;
  std::int16_t bitpix = 32;
  float pixdim[8] = {1, 1, 1, 1, 1, 1, 1, 1};
  float vox_offset = 352.0f;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::int16_t intent_code = 0;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float quatern[3] = {0, 0, 0};
  float qoffset[3] = {0, 0, 0};
  float srow[3][4] = {{0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}};
  std::int32_t sizeof_hdr = 348;
  char magic[4] = {'n', '+', '1', '\0'};
  std::vector<unsigned char> payload;

  std::vector<unsigned char> bytes() const;
  void write(const std::filesystem::path& path, bool gzip = false) const;
};

template <typename T>
std::vector<unsigned char> pack(const std::vector<T>& values) {
  std::vector<unsigned char> out(values.size() * sizeof(T));
  std::memcpy(out.data(), values.data(), out.size());
  return out;
}

/// Integral of the volume along the whole line through source, dir by
/// midpoint marching with the given step (mm).
double march_line_integral(const cbct::Volume3& volume, const Eigen::Vector3d& source,
                           const Eigen::Vector3d& direction, double step_mm);

/// out[i] = sum_j h[j] x[i - j + c], zero padded, for odd-length taps h with
/// centre c. Plain O(n m) reference.
std::vector<double> direct_convolution(const std::vector<double>& x, const std::vector<double>& h);

}  // namespace testing
