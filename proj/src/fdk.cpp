#include "cbct/fdk.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "cbct/error.hpp"
#include "cbct/keyvalue.hpp"
#include "cbct/parallel.hpp"

namespace cbct {

RampKernel::RampKernel(double pitch_mm, std::size_t half_width) : pitch_(pitch_mm), half_width_(half_width) {
  if (!(pitch_mm > 0.0)) throw ParameterError("ramp kernel pitch must be positive");
  taps_.assign(2 * half_width + 1, 0.0);
  const double tau2 = pitch_mm * pitch_mm;
  taps_[half_width] = 1.0 / (4.0 * tau2);
  for (std::size_t n = 1; n <= half_width; n += 2) {
    const double value = -1.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(n * n) * tau2);
    taps_[half_width + n] = value;
    taps_[half_width - n] = value;
  }
}

double RampKernel::at(long n) const {
  const std::size_t magnitude = static_cast<std::size_t>(n < 0 ? -n : n);
  if (magnitude > half_width_) return 0.0;
  return taps_[half_width_ + static_cast<std::size_t>(n)];
}

ProjectionStack cosine_weight(const ProjectionStack& stack) {
  const ConeBeamGeometry& g = stack.geometry;
  const ScannerSpec& s = g.scanner();
  ProjectionStack out(stack);
  const double sdd2 = s.sdd_mm * s.sdd_mm;
  for (std::size_t iv = 0; iv < g.nv(); ++iv) {
    const double v = (static_cast<double>(iv) - g.v_center()) * s.pitch_v_mm + s.offset_v_mm;
    for (std::size_t iu = 0; iu < g.nu(); ++iu) {
      const double u = (static_cast<double>(iu) - g.u_center()) * s.pitch_u_mm + s.offset_u_mm;
      const double weight = s.sdd_mm / std::sqrt(sdd2 + u * u + v * v);
      for (std::size_t a = 0; a < g.n_angles(); ++a) {
        float& p = out.at(a, iv, iu);
        p = static_cast<float>(static_cast<double>(p) * weight);
      }
    }
  }
  return out;
}

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& fftw_planner_mutex() {
  static std::mutex mutex;
  return mutex;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : real(fftw_alloc_real(n)), spectrum(fftw_alloc_complex(n / 2 + 1)) {}
  ~FftwBuffer() {
    fftw_free(real);
    fftw_free(spectrum);
  }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  double* real;
  fftw_complex* spectrum;
};

void filter_rows_spatial(ProjectionStack& out, const ProjectionStack& in, const RampKernel& kernel,
                         unsigned threads) {
  const std::size_t nu = in.geometry.nu();
  const std::size_t rows = in.geometry.n_angles() * in.geometry.nv();
  const double tau = kernel.pitch();
  const long reach = static_cast<long>(std::min(kernel.half_width(), nu - 1));
  parallel_for(rows, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t row = begin; row < end; ++row) {
      const float* src = in.data.data() + row * nu;
      float* dst = out.data.data() + row * nu;
      for (long i = 0; i < static_cast<long>(nu); ++i) {
        double acc = kernel.at(0) * src[i];
        // even offsets are zero taps
        for (long n = 1; n <= reach; n += 2) {
          const double h = kernel.at(n);
          if (i - n >= 0) acc += h * src[i - n];
          if (i + n < static_cast<long>(nu)) acc += h * src[i + n];
        }
        dst[i] = static_cast<float>(tau * acc);
      }
    }
  });
}

void filter_rows_fft(ProjectionStack& out, const ProjectionStack& in, const RampKernel& kernel, unsigned threads) {
  const std::size_t nu = in.geometry.nu();
  const std::size_t rows = in.geometry.n_angles() * in.geometry.nv();
  // linear convolution of an nu-row with taps in [-(nu-1), nu-1]
  std::size_t length = 1;
  while (length < 2 * nu) length <<= 1;
  const std::size_t bins = length / 2 + 1;

  FftwBuffer kernel_buffer(length);
  fftw_plan forward;
  fftw_plan backward;
  {
    std::lock_guard lock(fftw_planner_mutex());
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(length), kernel_buffer.real, kernel_buffer.spectrum,
                                   FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(static_cast<int>(length), kernel_buffer.spectrum, kernel_buffer.real,
                                    FFTW_ESTIMATE);
  }

  for (std::size_t n = 0; n < length; ++n) kernel_buffer.real[n] = 0.0;
  const long reach = static_cast<long>(std::min(kernel.half_width(), nu - 1));
  for (long n = -reach; n <= reach; ++n) {
    kernel_buffer.real[(n + static_cast<long>(length)) % static_cast<long>(length)] = kernel.at(n);
  }
  fftw_execute_dft_r2c(forward, kernel_buffer.real, kernel_buffer.spectrum);
  // the kernel is real and symmetric, so its spectrum is real
  std::vector<double> response(bins);
  const double scale = kernel.pitch() / static_cast<double>(length);
  for (std::size_t k = 0; k < bins; ++k) response[k] = kernel_buffer.spectrum[k][0] * scale;

  parallel_for(rows, threads, [&](std::size_t begin, std::size_t end) {
    FftwBuffer buffer(length);
    for (std::size_t row = begin; row < end; ++row) {
      const float* src = in.data.data() + row * nu;
      for (std::size_t n = 0; n < nu; ++n) buffer.real[n] = src[n];
      for (std::size_t n = nu; n < length; ++n) buffer.real[n] = 0.0;
      fftw_execute_dft_r2c(forward, buffer.real, buffer.spectrum);
      for (std::size_t k = 0; k < bins; ++k) {
        buffer.spectrum[k][0] *= response[k];
        buffer.spectrum[k][1] *= response[k];
      }
      fftw_execute_dft_c2r(backward, buffer.spectrum, buffer.real);
      float* dst = out.data.data() + row * nu;
      for (std::size_t n = 0; n < nu; ++n) dst[n] = static_cast<float>(buffer.real[n]);
    }
  });

  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(forward);
  fftw_destroy_plan(backward);
}

const char* method_name(FilterMethod method) {
  switch (method) {
    case FilterMethod::spatial: return "spatial";
    case FilterMethod::fft: return "fft";
    case FilterMethod::automatic: return "automatic";
  }
  return "unknown";
}

FilterMethod resolve_method(FilterMethod method, std::size_t nu) {
  if (method != FilterMethod::automatic) return method;
  return nu > 64 ? FilterMethod::fft : FilterMethod::spatial;
}

}  // namespace

ProjectionStack ramp_filter_rows(const ProjectionStack& stack, const RampKernel& kernel, FilterMethod method,
                                 unsigned threads) {
  const double pitch = stack.geometry.scanner().pitch_u_mm;
  if (std::abs(kernel.pitch() - pitch) > 1e-12 * pitch) {
    throw ParameterError("ramp kernel pitch " + std::to_string(kernel.pitch()) +
                         " does not match detector u pitch " + std::to_string(pitch));
  }
  ProjectionStack out(stack.geometry);
  if (resolve_method(method, stack.geometry.nu()) == FilterMethod::fft) {
    filter_rows_fft(out, stack, kernel, threads);
  } else {
    filter_rows_spatial(out, stack, kernel, threads);
  }
  return out;
}

double backprojection_normalization(const ConeBeamGeometry& geometry) {
  const ScannerSpec& s = geometry.scanner();
  return std::numbers::pi / static_cast<double>(geometry.n_angles()) * (s.sdd_mm / s.sad_mm);
}

Volume3 backproject(const ProjectionStack& filtered, const Grid& grid, unsigned threads) {
  if (!grid.is_axis_aligned()) {
    throw OrientationError("backprojection needs an axis-aligned target grid (identity direction)");
  }
  const ConeBeamGeometry& g = filtered.geometry;
  const ScannerSpec& s = g.scanner();
  const std::size_t n_angles = g.n_angles();
  const long nu = static_cast<long>(g.nu());
  const long nv = static_cast<long>(g.nv());
  const double u_max = static_cast<double>(nu - 1);
  const double v_max = static_cast<double>(nv - 1);

  std::vector<double> cos_beta(n_angles);
  std::vector<double> sin_beta(n_angles);
  for (std::size_t a = 0; a < n_angles; ++a) {
    cos_beta[a] = std::cos(g.angles()[a]);
    sin_beta[a] = std::sin(g.angles()[a]);
  }

  Volume3 out(grid);
  const double normalization = backprojection_normalization(g);
  const std::size_t nx = grid.dims[0];
  const double sad2 = s.sad_mm * s.sad_mm;

  // one task per x-row of voxels; each voxel sums its views in angle order
  parallel_for(grid.dims[1] * grid.dims[2], threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> acc(nx);
    for (std::size_t row = begin; row < end; ++row) {
      const std::size_t j = row % grid.dims[1];
      const std::size_t k = row / grid.dims[1];
      std::fill(acc.begin(), acc.end(), 0.0);
      const double ry = grid.origin.y() + static_cast<double>(j) * grid.spacing.y() - s.isocenter.y();
      const double rz = grid.origin.z() + static_cast<double>(k) * grid.spacing.z() - s.isocenter.z();
      for (std::size_t a = 0; a < n_angles; ++a) {
        const float* view = filtered.data.data() + a * static_cast<std::size_t>(nu * nv);
        const double cb = cos_beta[a];
        const double sb = sin_beta[a];
        for (std::size_t i = 0; i < nx; ++i) {
          const double rx = grid.origin.x() + static_cast<double>(i) * grid.spacing.x() - s.isocenter.x();
          const double distance = s.sad_mm - (rx * cb + ry * sb);
          if (!(distance > 0.0)) continue;
          const double magnification = s.sdd_mm / distance;
          const double u_mm = (-rx * sb + ry * cb) * magnification;
          const double v_mm = rz * magnification;
          const double fu = (u_mm - s.offset_u_mm) / s.pitch_u_mm + g.u_center();
          const double fv = (v_mm - s.offset_v_mm) / s.pitch_v_mm + g.v_center();
          if (!(fu >= 0.0 && fu <= u_max && fv >= 0.0 && fv <= v_max)) continue;
          const long iu = std::min(static_cast<long>(fu), nu - 1);
          const long iv = std::min(static_cast<long>(fv), nv - 1);
          const double wu = fu - static_cast<double>(iu);
          const double wv = fv - static_cast<double>(iv);
          const long iu1 = std::min(iu + 1, nu - 1);
          const long iv1 = std::min(iv + 1, nv - 1);
          const double p00 = view[iv * nu + iu];
          const double p01 = view[iv * nu + iu1];
          const double p10 = view[iv1 * nu + iu];
          const double p11 = view[iv1 * nu + iu1];
          const double sample = (1.0 - wv) * ((1.0 - wu) * p00 + wu * p01) + wv * ((1.0 - wu) * p10 + wu * p11);
          acc[i] += sad2 / (distance * distance) * sample;
        }
      }
      float* dst = out.data().data() + grid.offset(0, j, k);
      for (std::size_t i = 0; i < nx; ++i) dst[i] = static_cast<float>(normalization * acc[i]);
    }
  });
  return out;
}

Volume3 fdk_reconstruct(const ProjectionStack& stack, const Grid& grid, const FdkOptions& options) {
  const RampKernel kernel(stack.geometry.scanner().pitch_u_mm, stack.geometry.nu());
  const ProjectionStack weighted = cosine_weight(stack);
  const ProjectionStack filtered = ramp_filter_rows(weighted, kernel, options.filter, options.threads);
  return backproject(filtered, grid, options.threads);
}

Grid reconstruction_grid(const Eigen::Vector3d& extent_mm, const Eigen::Vector3d& voxel_mm,
                         const Eigen::Vector3d& center) {
  Index3 dims{};
  for (int a = 0; a < 3; ++a) {
    if (!(extent_mm[a] > 0.0) || !(voxel_mm[a] > 0.0)) {
      throw ParameterError("reconstruction extent and voxel size must be positive");
    }
    dims[a] = static_cast<std::size_t>(std::max(1.0, std::round(extent_mm[a] / voxel_mm[a])));
  }
  return Grid::centered(dims, voxel_mm, center);
}

ReconstructionReport make_report(const ProjectionStack& stack, const Grid& grid, FilterMethod method) {
  ReconstructionReport report;
  report.n_projections = stack.geometry.n_angles();
  report.dims = grid.dims;
  report.spacing = grid.spacing;
  report.origin = grid.origin;
  report.filter_method = method_name(resolve_method(method, stack.geometry.nu()));
  report.normalization = backprojection_normalization(stack.geometry);
  return report;
}

void write_report(const ReconstructionReport& report, const std::filesystem::path& path) {
  KeyValueMap map;
  map.set("n_projections", static_cast<long long>(report.n_projections));
  map.set("dims", std::to_string(report.dims[0]) + " " + std::to_string(report.dims[1]) + " " +
                      std::to_string(report.dims[2]));
  map.set("spacing_mm", format_double(report.spacing[0]) + " " + format_double(report.spacing[1]) + " " +
                            format_double(report.spacing[2]));
  map.set("origin_mm", format_double(report.origin[0]) + " " + format_double(report.origin[1]) + " " +
                           format_double(report.origin[2]));
  map.set("dims_rounding", std::string("nearest"));
  map.set("kernel", report.kernel);
  map.set("filter_method", report.filter_method);
  map.set("normalization", report.normalization);
  map.save(path);
}

}  // namespace cbct
