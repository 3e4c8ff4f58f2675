#include "cbct/projector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cbct/error.hpp"
#include "cbct/nifti.hpp"
#include "cbct/parallel.hpp"

namespace cbct {

ProjectionStack::ProjectionStack(ConeBeamGeometry geom)
    : geometry(std::move(geom)), data(geometry.n_angles() * geometry.nv() * geometry.nu(), 0.0f) {}

ProjectionStack::ProjectionStack(ConeBeamGeometry geom, std::vector<float> values)
    : geometry(std::move(geom)), data(std::move(values)) {
  if (data.size() != geometry.n_angles() * geometry.nv() * geometry.nu()) {
    throw ShapeError("projection data length does not match n_angles * nv * nu");
  }
}

Volume3 hu_to_attenuation(const Volume3& ct, double mu_water) {
  if (!(mu_water > 0.0)) throw ParameterError("mu_water must be positive");
  Volume3 out(ct.grid());
  const auto in = ct.data();
  auto dst = out.data();
  for (std::size_t n = 0; n < in.size(); ++n) {
    const double mu = mu_water * (1.0 + static_cast<double>(in[n]) / 1000.0);
    dst[n] = static_cast<float>(std::max(mu, 0.0));
  }
  return out;
}

Volume3 attenuation_to_hu(const Volume3& mu, double mu_water) {
  if (!(mu_water > 0.0)) throw ParameterError("mu_water must be positive");
  Volume3 out(mu.grid());
  const auto in = mu.data();
  auto dst = out.data();
  for (std::size_t n = 0; n < in.size(); ++n) {
    dst[n] = static_cast<float>(1000.0 * (static_cast<double>(in[n]) / mu_water - 1.0));
  }
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Voxel-boundary planes along one axis: lo + k * step, k = 0..n.
struct AxisPlanes {
  double lo = 0.0;
  double step = 1.0;
  long n = 1;
};

}  // namespace

double siddon_trace(const Ray& ray, const Volume3& volume) {
  const Grid& grid = volume.grid();
  if (!grid.is_axis_aligned()) {
    throw OrientationError("Siddon tracing needs an axis-aligned volume (identity direction)");
  }
  const Eigen::Vector3d& s = ray.source;
  const Eigen::Vector3d& d = ray.direction;

  AxisPlanes planes[3];
  long fixed_index[3] = {0, 0, 0};
  bool moving[3] = {false, false, false};
  double alpha_min = -kInf;
  double alpha_max = kInf;
  for (int a = 0; a < 3; ++a) {
    planes[a].lo = grid.origin[a] - 0.5 * grid.spacing[a];
    planes[a].step = grid.spacing[a];
    planes[a].n = static_cast<long>(grid.dims[a]);
    const double hi = planes[a].lo + static_cast<double>(planes[a].n) * planes[a].step;
    if (d[a] == 0.0) {
      // parallel to this axis' planes: inside iff lo <= s < hi (half-open)
      const long index = static_cast<long>(std::floor((s[a] - planes[a].lo) / planes[a].step));
      if (index < 0 || index >= planes[a].n) return 0.0;
      fixed_index[a] = index;
      continue;
    }
    moving[a] = true;
    const double a0 = (planes[a].lo - s[a]) / d[a];
    const double a1 = (hi - s[a]) / d[a];
    alpha_min = std::max(alpha_min, std::min(a0, a1));
    alpha_max = std::min(alpha_max, std::max(a0, a1));
  }
  if (!(alpha_max > alpha_min)) return 0.0;  // also covers a zero direction

  // Per moving axis: index of the next plane crossed after alpha_min.
  long next_plane[3] = {0, 0, 0};
  long plane_step[3] = {0, 0, 0};
  double next_alpha[3] = {kInf, kInf, kInf};
  auto plane_alpha = [&](int a, long k) {
    return (planes[a].lo + static_cast<double>(k) * planes[a].step - s[a]) / d[a];
  };
  for (int a = 0; a < 3; ++a) {
    if (!moving[a]) continue;
    const double entry = (s[a] + alpha_min * d[a] - planes[a].lo) / planes[a].step;
    if (d[a] > 0.0) {
      plane_step[a] = 1;
      next_plane[a] = std::clamp(static_cast<long>(std::floor(entry)), 0L, planes[a].n);
    } else {
      plane_step[a] = -1;
      next_plane[a] = std::clamp(static_cast<long>(std::ceil(entry)), 0L, planes[a].n);
    }
    while (next_plane[a] >= 0 && next_plane[a] <= planes[a].n && plane_alpha(a, next_plane[a]) <= alpha_min) {
      next_plane[a] += plane_step[a];
    }
    if (next_plane[a] >= 0 && next_plane[a] <= planes[a].n) next_alpha[a] = plane_alpha(a, next_plane[a]);
  }

  const Index3& dims = grid.dims;
  const auto data = volume.data();
  double sum = 0.0;
  double alpha = alpha_min;
  while (alpha < alpha_max) {
    const double alpha_next = std::min({next_alpha[0], next_alpha[1], next_alpha[2], alpha_max});
    const double length = alpha_next - alpha;
    if (length > 0.0) {
      const double mid = 0.5 * (alpha + alpha_next);
      long index[3];
      bool inside = true;
      for (int a = 0; a < 3; ++a) {
        index[a] = moving[a] ? static_cast<long>(std::floor((s[a] + mid * d[a] - planes[a].lo) / planes[a].step))
                             : fixed_index[a];
        inside = inside && index[a] >= 0 && index[a] < planes[a].n;
      }
      if (inside) {
        const std::size_t offset = static_cast<std::size_t>(index[0]) +
                                   dims[0] * (static_cast<std::size_t>(index[1]) +
                                              dims[1] * static_cast<std::size_t>(index[2]));
        sum += static_cast<double>(data[offset]) * length;
      }
    }
    for (int a = 0; a < 3; ++a) {
      if (next_alpha[a] == alpha_next) {
        next_plane[a] += plane_step[a];
        next_alpha[a] = (next_plane[a] >= 0 && next_plane[a] <= planes[a].n) ? plane_alpha(a, next_plane[a]) : kInf;
      }
    }
    alpha = alpha_next;
  }
  return sum;
}

ProjectionStack forward_project(const Volume3& attenuation, const ConeBeamGeometry& geometry,
                                const ProjectOptions& options) {
  if (!attenuation.grid().is_axis_aligned()) {
    throw OrientationError("forward projection needs an axis-aligned volume (identity direction)");
  }
  ProjectionStack stack(geometry);
  const std::size_t nu = geometry.nu();
  const std::size_t nv = geometry.nv();
  const double uc = geometry.u_center();
  const double vc = geometry.v_center();
  // one task per detector row of one view
  parallel_for(geometry.n_angles() * nv, options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t row = begin; row < end; ++row) {
      const std::size_t angle = row / nv;
      const std::size_t iv = row % nv;
      float* out = stack.data.data() + row * nu;
      for (std::size_t iu = 0; iu < nu; ++iu) {
        const Ray ray = ray_for_pixel(geometry, angle, static_cast<double>(iu) - uc, static_cast<double>(iv) - vc);
        out[iu] = static_cast<float>(siddon_trace(ray, attenuation));
      }
    }
  });
  return stack;
}

std::vector<float> to_intensity(const ProjectionStack& stack, double i0) {
  if (!(i0 > 0.0)) throw ParameterError("i0 must be positive");
  std::vector<float> out(stack.data.size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = static_cast<float>(i0 * std::exp(-static_cast<double>(stack.data[n])));
  }
  return out;
}

ProjectionStack from_intensity(const ConeBeamGeometry& geometry, const std::vector<float>& intensity, double i0) {
  if (!(i0 > 0.0)) throw ParameterError("i0 must be positive");
  std::vector<float> p(intensity.size());
  for (std::size_t n = 0; n < p.size(); ++n) {
    p[n] = static_cast<float>(-std::log(static_cast<double>(intensity[n]) / i0));
  }
  return ProjectionStack(geometry, std::move(p));
}

std::filesystem::path projection_sidecar_path(const std::filesystem::path& nifti_path) {
  std::string name = nifti_path.filename().string();
  for (const char* suffix : {".nii.gz", ".nii"}) {
    const std::string s(suffix);
    if (name.size() > s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0) {
      name.resize(name.size() - s.size());
      break;
    }
  }
  return nifti_path.parent_path() / (name + ".geom");
}

void write_projections(const ProjectionStack& stack, const std::filesystem::path& path, bool gzip) {
  const ConeBeamGeometry& g = stack.geometry;
  Grid grid;
  grid.dims = {g.nu(), g.nv(), g.n_angles()};
  grid.spacing = Eigen::Vector3d(g.scanner().pitch_u_mm, g.scanner().pitch_v_mm, 1.0);
  Volume3 image(grid, stack.data);
  NiftiWriteOptions options;
  options.gzip = gzip;
  options.description = "line integrals [angle][v][u]";
  write_nifti(image, path, options);
  to_key_values(g).save(projection_sidecar_path(path));
}

ProjectionStack read_projections(const std::filesystem::path& path) {
  const ConeBeamGeometry geometry = geometry_from_key_values(KeyValueMap::load(projection_sidecar_path(path)));
  Volume3 image = read_nifti(path);
  const Index3& dims = image.dims();
  if (dims[0] != geometry.nu() || dims[1] != geometry.nv() || dims[2] != geometry.n_angles()) {
    throw ShapeError("projection image dims do not match the geometry sidecar");
  }
  const auto data = image.data();
  return ProjectionStack(geometry, std::vector<float>(data.begin(), data.end()));
}

}  // namespace cbct
