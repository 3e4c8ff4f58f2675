#include "cbct/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cbct {

Eigen::Vector3d Grid::index_to_world(const Eigen::Vector3d& index) const {
  return origin + direction * index.cwiseProduct(spacing);
}

Eigen::Vector3d Grid::world_to_index(const Eigen::Vector3d& world) const {
  // direction is orthonormal, so its inverse is its transpose
  return (direction.transpose() * (world - origin)).cwiseQuotient(spacing);
}

Eigen::Vector3d Grid::center() const {
  const Eigen::Vector3d mid(0.5 * static_cast<double>(dims[0] - 1), 0.5 * static_cast<double>(dims[1] - 1),
                            0.5 * static_cast<double>(dims[2] - 1));
  return index_to_world(mid);
}

bool Grid::is_axis_aligned(double tol) const {
  return (direction - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol;
}

void Grid::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw ShapeError("grid dimension " + std::to_string(a) + " must be >= 1");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw GeometryError("grid spacing " + std::to_string(a) + " must be positive");
    }
    if (!std::isfinite(origin[a])) throw GeometryError("grid origin must be finite");
  }
  const Eigen::Matrix3d gram = direction.transpose() * direction;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() >= 1e-6) {
    throw GeometryError("grid direction matrix is not orthonormal");
  }
}

Grid Grid::centered(const Index3& dims, const Eigen::Vector3d& spacing, const Eigen::Vector3d& center) {
  Grid grid;
  grid.dims = dims;
  grid.spacing = spacing;
  for (int a = 0; a < 3; ++a) {
    grid.origin[a] = center[a] - 0.5 * static_cast<double>(dims[a] - 1) * spacing[a];
  }
  grid.validate();
  return grid;
}

bool Grid::operator==(const Grid& other) const {
  return dims == other.dims && spacing == other.spacing && origin == other.origin &&
         direction == other.direction;
}

bool same_geometry(const Grid& a, const Grid& b, double tol) {
  return a.dims == b.dims && (a.spacing - b.spacing).cwiseAbs().maxCoeff() <= tol &&
         (a.origin - b.origin).cwiseAbs().maxCoeff() <= tol &&
         (a.direction - b.direction).cwiseAbs().maxCoeff() <= tol;
}

void validate_labels(const LabelVolume& labels) {
  for (std::uint8_t value : labels.data()) {
    if (value > kMaxLabel) {
      throw FormatError("label value " + std::to_string(value) + " outside {0, 1, 2}");
    }
  }
}

Eigen::Vector3d center_of_gravity(const LabelVolume& mask, std::uint8_t label) {
  const Grid& grid = mask.grid();
  Eigen::Vector3d index_sum = Eigen::Vector3d::Zero();
  std::size_t count = 0;
  for (std::size_t k = 0; k < grid.dims[2]; ++k) {
    for (std::size_t j = 0; j < grid.dims[1]; ++j) {
      for (std::size_t i = 0; i < grid.dims[0]; ++i) {
        if (mask(i, j, k) != label) continue;
        index_sum += Eigen::Vector3d(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k));
        ++count;
      }
    }
  }
  if (count == 0) {
    throw EmptyMaskError("label " + std::to_string(label) + " does not occur in the mask");
  }
  // the index->world map is affine, so the mean of world positions is the
  // world position of the mean index
  return grid.index_to_world(index_sum / static_cast<double>(count));
}

float min_value(const Volume3& volume) {
  const auto data = volume.data();
  return *std::min_element(data.begin(), data.end());
}

float max_value(const Volume3& volume) {
  const auto data = volume.data();
  return *std::max_element(data.begin(), data.end());
}

}  // namespace cbct
