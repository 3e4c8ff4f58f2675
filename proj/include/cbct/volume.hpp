#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cbct/error.hpp"

namespace cbct {

using Index3 = std::array<std::size_t, 3>;

/// Voxel lattice placed in world space (mm). Voxel (0,0,0) is centred on
/// `origin`; the world position of a fractional index i is
/// origin + direction * (i .* spacing).
struct Grid {
  Index3 dims{1, 1, 1};
  Eigen::Vector3d spacing = Eigen::Vector3d::Ones();
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Matrix3d direction = Eigen::Matrix3d::Identity();

  std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

  std::size_t offset(std::size_t i, std::size_t j, std::size_t k) const {
    return i + dims[0] * (j + dims[1] * k);
  }

  Eigen::Vector3d index_to_world(const Eigen::Vector3d& index) const;
  Eigen::Vector3d world_to_index(const Eigen::Vector3d& world) const;

  /// World position of the geometric centre, i.e. index (dims - 1) / 2.
  Eigen::Vector3d center() const;

  /// True when `direction` is the identity to within `tol` per element.
  bool is_axis_aligned(double tol = 1e-9) const;

  /// Throws ShapeError / GeometryError when an invariant does not hold.
  void validate() const;

  /// Axis-aligned grid whose centre lands exactly on `center`.
  static Grid centered(const Index3& dims, const Eigen::Vector3d& spacing,
                       const Eigen::Vector3d& center);

  /// Exact equality of every field.
  bool operator==(const Grid& other) const;
};

/// Same lattice up to `tol` (mm for origin/spacing, unitless for direction).
bool same_geometry(const Grid& a, const Grid& b, double tol = 1e-9);

/// Dense scalar image in x-fastest order.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;

  explicit Image(Grid grid, T fill = T{}) : grid_(std::move(grid)) {
    grid_.validate();
    data_.assign(grid_.voxel_count(), fill);
  }

  Image(Grid grid, std::vector<T> data) : grid_(std::move(grid)), data_(std::move(data)) {
    grid_.validate();
    if (data_.size() != grid_.voxel_count()) {
      throw ShapeError("image data length " + std::to_string(data_.size()) +
                       " does not match grid voxel count " +
                       std::to_string(grid_.voxel_count()));
    }
  }

  const Grid& grid() const { return grid_; }
  const Index3& dims() const { return grid_.dims; }
  std::size_t size() const { return data_.size(); }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }

  T& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[grid_.offset(i, j, k)]; }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[grid_.offset(i, j, k)];
  }

  T& operator[](std::size_t n) { return data_[n]; }
  const T& operator[](std::size_t n) const { return data_[n]; }

 private:
  Grid grid_;
  std::vector<T> data_;
};

using Volume3 = Image<float>;

/// Labels: 0 background, 1 liver, 2 tumour.
using LabelVolume = Image<std::uint8_t>;

inline constexpr std::uint8_t kBackgroundLabel = 0;
inline constexpr std::uint8_t kLiverLabel = 1;
inline constexpr std::uint8_t kTumorLabel = 2;
inline constexpr std::uint8_t kMaxLabel = 2;

/// Throws FormatError if any label lies outside {0, 1, 2}.
void validate_labels(const LabelVolume& labels);

inline Eigen::Vector3d voxel_to_world(const Grid& grid, const Eigen::Vector3d& index) {
  return grid.index_to_world(index);
}

template <typename T>
Eigen::Vector3d voxel_to_world(const Image<T>& image, const Eigen::Vector3d& index) {
  return image.grid().index_to_world(index);
}

/// Unweighted mean world position of every voxel equal to `label`.
/// Throws EmptyMaskError when the label does not occur.
Eigen::Vector3d center_of_gravity(const LabelVolume& mask, std::uint8_t label);

float min_value(const Volume3& volume);
float max_value(const Volume3& volume);

}  // namespace cbct
