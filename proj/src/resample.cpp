#include "cbct/resample.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "cbct/error.hpp"
#include "cbct/keyvalue.hpp"
#include "cbct/nifti.hpp"
#include "cbct/parallel.hpp"

namespace cbct {

AffineTransform::AffineTransform(const Eigen::Matrix4d& matrix) : matrix_(matrix) {
  if (matrix_.row(3) != Eigen::RowVector4d(0, 0, 0, 1)) {
    throw TransformError("affine transform must have last row (0, 0, 0, 1)");
  }
  if (!matrix_.allFinite()) throw TransformError("affine transform has non-finite entries");
}

AffineTransform AffineTransform::translation(const Eigen::Vector3d& offset) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 1>(0, 3) = offset;
  return AffineTransform(m);
}

Eigen::Vector3d AffineTransform::apply(const Eigen::Vector3d& point) const {
  return matrix_.block<3, 3>(0, 0) * point + matrix_.block<3, 1>(0, 3);
}

AffineTransform AffineTransform::inverse() const {
  const Eigen::Matrix3d linear = matrix_.block<3, 3>(0, 0);
  if (!(std::abs(linear.determinant()) > 1e-12)) throw TransformError("affine transform is singular");
  if (matrix_ == Eigen::Matrix4d::Identity()) return {};
  const Eigen::Matrix3d inv = linear.inverse();
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = inv;
  m.block<3, 1>(0, 3) = -inv * matrix_.block<3, 1>(0, 3);
  return AffineTransform(m);
}

AffineTransform AffineTransform::operator*(const AffineTransform& first) const {
  return AffineTransform(matrix_ * first.matrix_);
}

void write_transform(const AffineTransform& transform, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out << format_double(transform.matrix()(r, c)) << (c == 3 ? '\n' : ' ');
  }
  if (!out) throw IoError("write failed for " + path.string());
}

AffineTransform read_transform(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Eigen::Matrix4d m;
  for (int n = 0; n < 16; ++n) {
    if (!(in >> m(n / 4, n % 4))) throw FormatError("transform file needs 16 numbers: " + path.string());
  }
  std::string extra;
  if (in >> extra) throw FormatError("transform file has more than 16 numbers: " + path.string());
  return AffineTransform(m);
}

// --- displacement field -----------------------------------------------------

DisplacementField::DisplacementField(Grid extent, Index3 control_dims, std::vector<Eigen::Vector3d> displacements)
    : extent_(std::move(extent)), control_dims_(control_dims), displacements_(std::move(displacements)) {
  extent_.validate();
  for (std::size_t n : control_dims_) {
    if (n < 2) throw ParameterError("displacement control grid needs at least 2 points per axis");
  }
  if (displacements_.size() != control_dims_[0] * control_dims_[1] * control_dims_[2]) {
    throw ShapeError("displacement count does not match the control grid");
  }
}

DisplacementField DisplacementField::zero(Grid extent, Index3 control_dims) {
  const std::size_t n = control_dims[0] * control_dims[1] * control_dims[2];
  return DisplacementField(std::move(extent), control_dims, std::vector<Eigen::Vector3d>(n, Eigen::Vector3d::Zero()));
}

const Eigen::Vector3d& DisplacementField::control(std::size_t i, std::size_t j, std::size_t k) const {
  return displacements_[i + control_dims_[0] * (j + control_dims_[1] * k)];
}

namespace {

// Continuous control-lattice coordinate of a voxel index along one axis.
double control_coordinate(double index, std::size_t voxels, std::size_t controls) {
  if (voxels <= 1) return 0.0;
  return index / static_cast<double>(voxels - 1) * static_cast<double>(controls - 1);
}

}  // namespace

Eigen::Vector3d DisplacementField::control_position(std::size_t i, std::size_t j, std::size_t k) const {
  const std::size_t c[3] = {i, j, k};
  Eigen::Vector3d index;
  for (int a = 0; a < 3; ++a) {
    index[a] = static_cast<double>(c[a]) / static_cast<double>(control_dims_[a] - 1) *
               static_cast<double>(extent_.dims[a] - 1);
  }
  return extent_.index_to_world(index);
}

Eigen::Vector3d DisplacementField::at(const Eigen::Vector3d& world) const {
  const Eigen::Vector3d index = extent_.world_to_index(world);
  std::size_t base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double upper = static_cast<double>(extent_.dims[a] - 1);
    if (index[a] < 0.0 || index[a] > upper) return Eigen::Vector3d::Zero();
    const double c = control_coordinate(index[a], extent_.dims[a], control_dims_[a]);
    const std::size_t cell = std::min(static_cast<std::size_t>(c), control_dims_[a] - 2);
    base[a] = cell;
    frac[a] = c - static_cast<double>(cell);
  }
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    std::size_t idx[3];
    for (int a = 0; a < 3; ++a) {
      const bool high = (corner >> a) & 1;
      w *= high ? frac[a] : 1.0 - frac[a];
      idx[a] = base[a] + (high ? 1 : 0);
    }
    if (w == 0.0) continue;
    out += w * control(idx[0], idx[1], idx[2]);
  }
  return out;
}

double DisplacementField::max_abs_component() const {
  double m = 0.0;
  for (const auto& d : displacements_) m = std::max(m, d.cwiseAbs().maxCoeff());
  return m;
}

void write_displacement_field(const DisplacementField& field, const std::filesystem::path& path) {
  const Index3& cd = field.control_dims();
  Grid control_grid;
  control_grid.dims = cd;
  control_grid.direction = field.extent().direction;
  control_grid.origin = field.control_position(0, 0, 0);
  for (int a = 0; a < 3; ++a) {
    control_grid.spacing[a] = static_cast<double>(field.extent().dims[a] - 1) * field.extent().spacing[a] /
                              static_cast<double>(cd[a] - 1);
    // a single-voxel extent collapses the control lattice; keep the header valid
    if (!(control_grid.spacing[a] > 0.0)) control_grid.spacing[a] = 1.0;
  }
  const std::size_t n = field.displacements().size();
  std::vector<float> planar(3 * n);
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < 3; ++c) planar[c * n + p] = static_cast<float>(field.displacements()[p][c]);
  }
  write_nifti_vector(control_grid, planar, path, has_gzip_suffix(path));

  const Grid& e = field.extent();
  KeyValueMap sidecar;
  sidecar.set("extent_dims", std::to_string(e.dims[0]) + " " + std::to_string(e.dims[1]) + " " +
                                 std::to_string(e.dims[2]));
  sidecar.set("extent_spacing_mm", format_double(e.spacing[0]) + " " + format_double(e.spacing[1]) + " " +
                                       format_double(e.spacing[2]));
  sidecar.set("extent_origin_mm", format_double(e.origin[0]) + " " + format_double(e.origin[1]) + " " +
                                      format_double(e.origin[2]));
  std::string direction;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) direction += (direction.empty() ? "" : " ") + format_double(e.direction(r, c));
  }
  sidecar.set("extent_direction", direction);
  sidecar.set("control_dims", std::to_string(cd[0]) + " " + std::to_string(cd[1]) + " " + std::to_string(cd[2]));
  sidecar.save(path.string() + ".txt");
}

DisplacementField read_displacement_field(const std::filesystem::path& path) {
  const KeyValueMap sidecar = KeyValueMap::load(path.string() + ".txt");
  auto triple = [&](const char* key) {
    const auto v = sidecar.get_doubles(key);
    if (v.size() != 3) throw FormatError(std::string(key) + " needs 3 values");
    return v;
  };
  Grid extent;
  const auto dims = triple("extent_dims");
  const auto spacing = triple("extent_spacing_mm");
  const auto origin = triple("extent_origin_mm");
  const auto control = triple("control_dims");
  const auto direction = sidecar.get_doubles("extent_direction");
  if (direction.size() != 9) throw FormatError("extent_direction needs 9 values");
  Index3 control_dims{};
  for (int a = 0; a < 3; ++a) {
    extent.dims[a] = static_cast<std::size_t>(dims[a]);
    extent.spacing[a] = spacing[a];
    extent.origin[a] = origin[a];
    control_dims[a] = static_cast<std::size_t>(control[a]);
    for (int c = 0; c < 3; ++c) extent.direction(a, c) = direction[3 * a + c];
  }
  Grid stored;
  const std::vector<float> planar = read_nifti_vector(path, &stored);
  if (stored.dims != control_dims) throw ShapeError("field image dims do not match control_dims");
  const std::size_t n = planar.size() / 3;
  std::vector<Eigen::Vector3d> displacements(n);
  for (std::size_t p = 0; p < n; ++p) {
    displacements[p] = Eigen::Vector3d(planar[p], planar[n + p], planar[2 * n + p]);
  }
  return DisplacementField(extent, control_dims, std::move(displacements));
}

// --- resampling ---------------------------------------------------------------

namespace {

// Indices within this distance of an integer are snapped to it so that
// lattice-aligned maps (identity, whole-voxel shifts) copy values exactly.
constexpr double kSnapTolerance = 1e-6;

double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) <= kSnapTolerance ? r : x;
}

// Trilinear sample at a continuous source index; nullopt outside the lattice.
std::optional<double> sample_linear(const Volume3& src, const Eigen::Vector3d& raw_index) {
  const Index3& dims = src.dims();
  std::size_t base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double x = snap(raw_index[a]);
    const double upper = static_cast<double>(dims[a] - 1);
    if (!(x >= 0.0 && x <= upper)) return std::nullopt;
    base[a] = std::min(static_cast<std::size_t>(x), dims[a] - 1);
    frac[a] = x - static_cast<double>(base[a]);
  }
  double value = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    std::size_t idx[3];
    for (int a = 0; a < 3; ++a) {
      const bool high = (corner >> a) & 1;
      w *= high ? frac[a] : 1.0 - frac[a];
      idx[a] = base[a] + (high ? 1 : 0);
    }
    if (w == 0.0) continue;
    value += w * static_cast<double>(src(idx[0], idx[1], idx[2]));
  }
  return value;
}

std::uint8_t sample_nearest(const LabelVolume& src, const Eigen::Vector3d& raw_index) {
  const Index3& dims = src.dims();
  std::size_t idx[3];
  for (int a = 0; a < 3; ++a) {
    // ties round up, matching the half-open voxel convention of the projector
    const double r = std::floor(raw_index[a] + 0.5);
    if (!(r >= 0.0 && r < static_cast<double>(dims[a]))) return kBackgroundLabel;
    idx[a] = static_cast<std::size_t>(r);
  }
  return src(idx[0], idx[1], idx[2]);
}

// Maps target voxel index -> source world position (before src world->index).
template <typename Sampler>
void for_each_target(const Grid& target, const AffineTransform& inverse, const DisplacementField* field,
                     unsigned threads, Sampler&& sampler) {
  parallel_for(target.dims[1] * target.dims[2], threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t row = begin; row < end; ++row) {
      const std::size_t j = row % target.dims[1];
      const std::size_t k = row / target.dims[1];
      for (std::size_t i = 0; i < target.dims[0]; ++i) {
        const Eigen::Vector3d x = target.index_to_world(
            Eigen::Vector3d(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)));
        Eigen::Vector3d y = inverse.apply(x);
        if (field != nullptr) y += field->at(x);
        sampler(target.offset(i, j, k), y);
      }
    }
  });
}

Volume3 resample_linear_impl(const Volume3& src, const Grid& target, const AffineTransform& t,
                             const DisplacementField* field, const ResampleOptions& options) {
  target.validate();
  const AffineTransform inverse = t.inverse();
  const float fill = options.fill.value_or(min_value(src));
  Volume3 out(target);
  auto dst = out.data();
  for_each_target(target, inverse, field, options.threads, [&](std::size_t n, const Eigen::Vector3d& y) {
    const auto value = sample_linear(src, src.grid().world_to_index(y));
    dst[n] = value ? static_cast<float>(*value) : fill;
  });
  return out;
}

LabelVolume resample_nearest_impl(const LabelVolume& src, const Grid& target, const AffineTransform& t,
                                  const DisplacementField* field, unsigned threads) {
  target.validate();
  const AffineTransform inverse = t.inverse();
  LabelVolume out(target);
  auto dst = out.data();
  for_each_target(target, inverse, field, threads, [&](std::size_t n, const Eigen::Vector3d& y) {
    dst[n] = sample_nearest(src, src.grid().world_to_index(y));
  });
  return out;
}

// Uniform double in [0, 1) from the top 53 bits of one generator output.
double uniform01(std::mt19937_64& engine) { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }

double uniform_symmetric(std::mt19937_64& engine, double bound) {
  return bound * (2.0 * uniform01(engine) - 1.0) + 0.0;  // + 0.0 turns -0 into +0
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in [0, 1]");
}

}  // namespace

Volume3 resample_linear(const Volume3& src, const Grid& target, const AffineTransform& t,
                        const ResampleOptions& options) {
  return resample_linear_impl(src, target, t, nullptr, options);
}

LabelVolume resample_nearest(const LabelVolume& src, const Grid& target, const AffineTransform& t, unsigned threads) {
  return resample_nearest_impl(src, target, t, nullptr, threads);
}

std::pair<Volume3, LabelVolume> align_to_grid(const Volume3& ct, const LabelVolume& mask, const Grid& target,
                                              unsigned threads) {
  if (!same_geometry(ct.grid(), mask.grid(), 1e-6)) throw ShapeError("CT and mask must share a grid");
  ResampleOptions options;
  options.threads = threads;
  return {resample_linear(ct, target, AffineTransform::identity(), options),
          resample_nearest(mask, target, AffineTransform::identity(), threads)};
}

AffineSample random_affine(double alpha, const MisalignmentBounds& bounds, const Eigen::Vector3d& center,
                           std::uint64_t seed) {
  check_alpha(alpha);
  std::mt19937_64 engine(seed);
  AffineSample sample;
  for (int a = 0; a < 3; ++a) sample.scale[a] = 1.0 + uniform_symmetric(engine, alpha * bounds.max_scale);
  for (int a = 0; a < 3; ++a) sample.rotation_deg[a] = uniform_symmetric(engine, alpha * bounds.max_rotation_deg);
  for (int a = 0; a < 3; ++a) {
    sample.translation_mm[a] = uniform_symmetric(engine, alpha * bounds.max_translation_mm);
  }
  const Eigen::Vector3d radians = sample.rotation_deg * (std::numbers::pi / 180.0);
  const Eigen::Matrix3d rotation = (Eigen::AngleAxisd(radians.z(), Eigen::Vector3d::UnitZ()) *
                                    Eigen::AngleAxisd(radians.y(), Eigen::Vector3d::UnitY()) *
                                    Eigen::AngleAxisd(radians.x(), Eigen::Vector3d::UnitX()))
                                       .toRotationMatrix();
  const Eigen::Matrix3d linear = rotation * sample.scale.asDiagonal();
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = linear;
  m.block<3, 1>(0, 3) = center + sample.translation_mm - linear * center;
  sample.transform = AffineTransform(m);
  return sample;
}

DisplacementField random_elastic(double alpha, double max_displacement_mm, const Index3& control_dims,
                                 const Grid& extent, std::uint64_t seed) {
  check_alpha(alpha);
  if (!(max_displacement_mm >= 0.0)) throw ParameterError("max displacement must be >= 0");
  DisplacementField zero = DisplacementField::zero(extent, control_dims);
  std::vector<Eigen::Vector3d> displacements = zero.displacements();
  std::mt19937_64 engine(seed);
  const double bound = alpha * max_displacement_mm;
  for (std::size_t k = 0; k < control_dims[2]; ++k) {
    for (std::size_t j = 0; j < control_dims[1]; ++j) {
      for (std::size_t i = 0; i < control_dims[0]; ++i) {
        const bool boundary = i == 0 || j == 0 || k == 0 || i + 1 == control_dims[0] ||
                              j + 1 == control_dims[1] || k + 1 == control_dims[2];
        if (boundary) continue;
        Eigen::Vector3d& d = displacements[i + control_dims[0] * (j + control_dims[1] * k)];
        for (int c = 0; c < 3; ++c) d[c] = uniform_symmetric(engine, bound);
      }
    }
  }
  return DisplacementField(extent, control_dims, std::move(displacements));
}

Volume3 warp(const Volume3& src, const DisplacementField& field, const AffineTransform& t,
             const ResampleOptions& options) {
  return resample_linear_impl(src, src.grid(), t, &field, options);
}

LabelVolume warp(const LabelVolume& src, const DisplacementField& field, const AffineTransform& t, unsigned threads) {
  return resample_nearest_impl(src, src.grid(), t, &field, threads);
}

Grid axis_aligned_cover(const Grid& grid) {
  grid.validate();
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (int corner = 0; corner < 8; ++corner) {
    Eigen::Vector3d index;
    for (int a = 0; a < 3; ++a) index[a] = ((corner >> a) & 1) ? static_cast<double>(grid.dims[a] - 1) : 0.0;
    const Eigen::Vector3d p = grid.index_to_world(index);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  // spacing along each world axis, exact for permutation/flip directions
  const Eigen::Vector3d spacing = grid.direction.cwiseAbs() * grid.spacing;
  Grid out;
  for (int a = 0; a < 3; ++a) {
    out.spacing[a] = spacing[a];
    out.dims[a] = static_cast<std::size_t>(std::ceil((hi[a] - lo[a]) / spacing[a] - 1e-6)) + 1;
  }
  out.origin = lo;
  out.validate();
  return out;
}

}  // namespace cbct
