// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Sizes and tolerances are the release criteria; do not
// relax them here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cbct/error.hpp"
#include "cbct/fdk.hpp"
#include "cbct/metrics.hpp"
#include "cbct/nifti.hpp"
#include "cbct/phantom.hpp"
#include "cbct/pipeline.hpp"
#include "cbct/projector.hpp"
#include "cbct/resample.hpp"
#include "support.hpp"

using namespace cbct;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records a sub-check; the criterion passes only if all of them do.
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
}

double box_chord(const Grid& g, const Ray& r) {
  double t0 = -1e300, t1 = 1e300;
  for (int a = 0; a < 3; ++a) {
    const double lo = g.origin[a] - 0.5 * g.spacing[a];
    const double hi = lo + double(g.dims[a]) * g.spacing[a];
    if (r.direction[a] == 0.0) {
      if (r.source[a] < lo || r.source[a] >= hi) return 0.0;
      continue;
    }
    double ta = (lo - r.source[a]) / r.direction[a], tb = (hi - r.source[a]) / r.direction[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t1 > t0 ? (t1 - t0) * r.direction.norm() : 0.0;
}

ScannerSpec scanner(std::size_t n, double pitch) {
  ScannerSpec s;
  s.det_nu = s.det_nv = n;
  s.pitch_u_mm = s.pitch_v_mm = pitch;
  return s;
}

// Detector-centre pixel coordinates relative to the principal ray.
double pixel_u(const ConeBeamGeometry& g, std::size_t u) { return double(u) - (double(g.nu()) - 1.0) / 2.0; }
double pixel_v(const ConeBeamGeometry& g, std::size_t v) { return double(v) - (double(g.nv()) - 1.0) / 2.0; }

ProjectionStack analytic_projections(const std::vector<EllipsoidSpec>& specs, const ConeBeamGeometry& g) {
  ProjectionStack p(g);
  for (std::size_t a = 0; a < g.n_angles(); ++a)
    for (std::size_t v = 0; v < g.nv(); ++v)
      for (std::size_t u = 0; u < g.nu(); ++u) {
        const Ray r = ray_for_pixel(g, a, pixel_u(g, u), pixel_v(g, v));
        p.at(a, v, u) = static_cast<float>(analytic_line_integral(specs, r));
      }
  return p;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

template <typename T>
bool bit_equal(const Image<T>& a, const Image<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(T)) == 0;
}

// ---------------------------------------------------------------------------

void siddon_oracle(Outcome& out) {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> sp(2.0, 3.0), central(-0.35, 0.35);
  double worst = 0.0;
  int rays = 0;
  for (int vol = 0; vol < 10; ++vol) {
    Grid g = testing::unit_grid(16, 16, 16);
    g.spacing = {sp(rng), sp(rng), sp(rng)};
    g.origin = {-20.0 * sp(rng), 5.0 * sp(rng), -sp(rng)};
    const Volume3 v = testing::random_volume(g, rng, 0.5, 1.0);
    for (int k = 0; k < 100; ++k) {
      const Eigen::Vector3d through =
          g.center() + Eigen::Vector3d(central(rng), central(rng), central(rng)).cwiseProduct(16.0 * g.spacing);
      const Eigen::Vector3d d = random_unit(rng);
      const Ray r{through - 200.0 * d, d};
      const double oracle = testing::march_line_integral(v, r.source, r.direction, 1e-3);
      worst = std::max(worst, std::abs(siddon_trace(r, v) - oracle) / oracle);
      ++rays;
    }
  }
  std::uniform_real_distribution<double> sp2(0.5, 3.0), pos(-0.5, 1.5), mu(0.1, 2.0);
  double worst_chord = 0.0;
  for (int vol = 0; vol < 20; ++vol) {
    Grid g = testing::unit_grid(16, 16, 16);
    g.spacing = {sp2(rng), sp2(rng), sp2(rng)};
    g.origin = {sp2(rng), -sp2(rng), 3.0};
    const float m = static_cast<float>(mu(rng));
    const Volume3 v(g, m);
    const Eigen::Vector3d lo = g.origin - 0.5 * g.spacing;
    for (int k = 0; k < 100; ++k) {
      const Eigen::Vector3d p = lo + Eigen::Vector3d(pos(rng), pos(rng), pos(rng)).cwiseProduct(16.0 * g.spacing);
      const Ray r{p, random_unit(rng)};
      worst_chord = std::max(worst_chord, std::abs(siddon_trace(r, v) / double(m) - box_chord(g, r)));
    }
  }
  const double t = seconds_since(start);
  out.require(rays >= 1000, "ray count");
  out.require(worst <= 1e-4, "oracle deviation");
  out.require(worst_chord <= 1e-9, "chord conservation");
  out.require(t < 60.0, "runtime");
  out.detail << rays << " rays, worst relative " << worst << ", chord error " << worst_chord << " mm";
}

std::vector<EllipsoidSpec> three_ellipsoids() {
  return {
      {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(50, 40, 45), 0.0, 0.02},
      {Eigen::Vector3d(-14, 9, 5), Eigen::Vector3d(16, 10, 13), 0.5, 0.01},
      {Eigen::Vector3d(15, -12, -7), Eigen::Vector3d(9, 13, 11), -0.3, -0.005},
  };
}

double projection_mad(const std::vector<EllipsoidSpec>& specs, std::size_t n, double voxel,
                      const ConeBeamGeometry& geo, double* max_density) {
  const Grid g = Grid::centered({n, n, n}, Eigen::Vector3d::Constant(voxel), Eigen::Vector3d::Zero());
  const Volume3 raster = rasterize(specs, g);
  *max_density = std::max(std::abs(double(max_value(raster))), std::abs(double(min_value(raster))));
  const ProjectionStack p = forward_project(raster, geo);
  const ProjectionStack exact = analytic_projections(specs, geo);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.data.size(); ++i) sum += std::abs(double(p.data[i]) - double(exact.data[i]));
  return sum / double(p.data.size());
}

void analytic_projector(Outcome& out) {
  const auto start = Clock::now();
  const auto specs = three_ellipsoids();
  const ConeBeamGeometry geo = make_circular_trajectory(8, scanner(128, 1.6));
  double max_density = 0.0, unused = 0.0;
  const double coarse = projection_mad(specs, 64, 2.0, geo, &max_density);
  const double fine = projection_mad(specs, 128, 1.0, geo, &unused);
  const double bound = 2.0 * max_density * 2.0 * std::sqrt(3.0);
  const double t = seconds_since(start);
  out.require(coarse <= bound, "mean deviation bound");
  out.require(coarse / fine >= 1.5, "convergence");
  out.require(t < 120.0, "runtime");
  out.detail << "MAD 2 mm " << coarse << " (bound " << bound << "), 1 mm " << fine << ", ratio " << coarse / fine;
}

void ramp_taps(Outcome& out) {
  double worst = 0.0;
  for (double tau : {0.5, 0.75, 1.0}) {
    // impulse response of the row filter equals the taps times the pitch
    ScannerSpec s = scanner(41, tau);
    ProjectionStack impulse(make_circular_trajectory(1, s));
    impulse.at(0, 20, 20) = 1.0f;
    for (FilterMethod m : {FilterMethod::spatial, FilterMethod::fft}) {
      const ProjectionStack f = ramp_filter_rows(impulse, RampKernel(tau, 41), m);
      for (long n = -20; n <= 20; ++n) {
        double expected = 0.0;
        if (n == 0) expected = 1.0 / (4.0 * tau * tau);
        else if (n % 2 != 0) expected = -1.0 / (std::numbers::pi * std::numbers::pi * double(n * n) * tau * tau);
        const RampKernel k(tau, 41);
        worst = std::max(worst, std::abs(k.at(n) - expected));
        // the filtered stack is float: compare at single precision relative to h(0)
        const double got = double(f.at(0, 20, std::size_t(20 + n))) / tau;
        out.require(std::abs(got - expected) <= 1e-6 / (4.0 * tau * tau), "impulse response");
      }
    }
  }
  out.require(worst <= 1e-12, "tap values");
  out.detail << "worst tap error " << worst;
}

void fdk_sphere(Outcome& out) {
  const double radius = 40.0, mu = 0.02;
  const std::vector<EllipsoidSpec> sphere{{Eigen::Vector3d::Zero(), Eigen::Vector3d::Constant(radius), 0.0, mu}};
  const ConeBeamGeometry geo = make_circular_trajectory(360, ScannerSpec{});
  const ProjectionStack p = analytic_projections(sphere, geo);
  const Grid grid = Grid::centered({64, 64, 64}, {2, 2, 2}, Eigen::Vector3d::Zero());
  const auto start = Clock::now();
  const Volume3 rec = fdk_reconstruct(p, grid, FdkOptions{FilterMethod::automatic, 1});
  const double t = seconds_since(start);

  // central ball: voxel centres within 5.8 mm of the sphere centre
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < 64; ++k)
    for (std::size_t j = 0; j < 64; ++j)
      for (std::size_t i = 0; i < 64; ++i) {
        if (grid.index_to_world(Eigen::Vector3d(double(i), double(j), double(k))).norm() <= 5.8) {
          sum += rec(i, j, k);
          ++count;
        }
      }
  const double mean = sum / double(count);

  // quarter turn about the rotation axis: (i, j) -> (63 - j, i)
  double sq = 0.0;
  for (std::size_t k = 0; k < 64; ++k)
    for (std::size_t j = 0; j < 64; ++j)
      for (std::size_t i = 0; i < 64; ++i) {
        const double d = double(rec(i, j, k)) - double(rec(63 - j, i, k));
        sq += d * d;
      }
  const double sym = std::sqrt(sq / double(rec.size())) / mu;
  out.require(std::abs(mean - mu) <= 0.05 * mu, "central mean");
  out.require(sym < 0.10, "rotational symmetry");
  out.require(t < 300.0, "runtime");
  out.detail << count << "-voxel ball mean " << mean << " (" << 100.0 * (mean - mu) / mu << "%), 90 deg RMSE "
             << 100.0 * sym << "% of contrast, FDK " << std::fixed << std::setprecision(1) << t << " s on 1 thread";
}

void quality_monotonicity(Outcome& out) {
  const auto start = Clock::now();
  const Grid grid = Grid::centered({64, 64, 64}, {2, 2, 2}, Eigen::Vector3d::Zero());
  const Volume3 truth = rasterize(shepp_logan_3d(60.0, kDefaultMuWater), grid);
  std::vector<double> errors;
  for (std::size_t n : {490, 256, 128, 64, 32}) {
    const ConeBeamGeometry geo = make_circular_trajectory(n, scanner(128, 1.6));
    errors.push_back(rmse(fdk_reconstruct(forward_project(truth, geo), grid), truth));
  }
  bool increasing = true;
  for (std::size_t i = 1; i < errors.size(); ++i) increasing &= errors[i] > errors[i - 1];
  const double t = seconds_since(start);
  out.require(increasing, "strictly increasing RMSE");
  out.require(t < 900.0, "runtime");
  out.detail << "RMSE 490..32:";
  for (double e : errors) out.detail << ' ' << e;
}

void pipeline_contract(Outcome& out) {
  testing::TempDir dir("acceptance");
  const Grid ct_grid = Grid::centered({64, 64, 64}, {2, 2, 2}, Eigen::Vector3d(5, -3, 2));
  LiverPhantom p = liver_phantom(56.0);
  for (auto& e : p.hu_components) e.center += ct_grid.center();
  p.liver.center += ct_grid.center();
  p.tumor.center += ct_grid.center();
  write_nifti(p.rasterize_hu(ct_grid), dir / "ct.nii.gz", NiftiWriteOptions{true, std::nullopt, ""});
  write_nifti(p.rasterize_labels(ct_grid), dir / "mask.nii.gz", NiftiWriteOptions{true, std::nullopt, ""});

  PipelineConfig config;  // default quality levels 490, 256, 128, 64, 32
  config.extent_mm = {128, 124, 120};
  config.voxel_mm = {4, 4, 4};
  config.scanner = scanner(96, 2.5);
  const VolumeResult first = run_pipeline(dir / "ct.nii.gz", dir / "mask.nii.gz", config, dir / "a");
  config.threads = 1;
  const VolumeResult second = run_pipeline(dir / "ct.nii.gz", dir / "mask.nii.gz", config, dir / "b");
  out.require(first.ok && second.ok, "pipeline run: " + first.error + second.error);
  if (!first.ok || !second.ok) return;

  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dir / "a")) names.insert(e.path().filename().string());
  const std::set<std::string> expected{"cbct_490.nii.gz", "cbct_256.nii.gz", "cbct_128.nii.gz", "cbct_64.nii.gz",
                                       "cbct_32.nii.gz", "ct_aligned.nii.gz", "mask_aligned.nii.gz",
                                       "manifest.json"};
  out.require(names == expected, "file set");

  const LabelVolume mask = read_nifti_labels(dir / "a" / "mask_aligned.nii.gz");
  bool same_grids = read_nifti(dir / "a" / "ct_aligned.nii.gz").grid() == mask.grid();
  for (std::size_t n : {490, 256, 128, 64, 32}) {
    same_grids &= read_nifti(dir / "a" / cbct_file_name(n, true)).grid() == mask.grid();
  }
  out.require(same_grids, "identical grids");

  bool identical = true;
  for (const std::string& name : names) identical &= testing::same_bytes(dir / "a" / name, dir / "b" / name);
  out.require(identical, "byte-identical rerun");

  const double offset = (center_of_gravity(mask, 1) - mask.grid().center()).norm();
  const double diagonal = mask.grid().spacing.norm();
  out.require(offset <= diagonal, "liver COG at grid centre");
  out.detail << names.size() << " files, rerun identical, COG offset " << offset << " mm (diagonal " << diagonal
             << " mm)";
}

void resample_misalign(Outcome& out) {
  std::mt19937_64 rng(7);
  Grid oblique = testing::unit_grid(20, 18, 16);
  oblique.spacing = {1.5, 2.0, 2.5};
  oblique.origin = {-10, 4, 7};
  oblique.direction = Eigen::AngleAxisd(0.4, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  const Volume3 v = testing::random_volume(oblique, rng, -1000, 1000);
  out.require(bit_equal(resample_linear(v, oblique, AffineTransform::identity()), v), "identity resampling");

  const Grid grid = Grid::centered({48, 48, 48}, {3, 3, 3}, Eigen::Vector3d::Zero());
  const LiverPhantom p = liver_phantom(60.0);
  const LabelVolume mask = p.rasterize_labels(grid);
  const MisalignmentBounds bounds;

  const AffineSample zero = random_affine(0.0, bounds, grid.center(), 11);
  out.require(zero.transform == AffineTransform::identity(), "alpha 0 transform");
  out.require(random_elastic(0.0, 10.0, {5, 5, 5}, grid, 11).max_abs_component() == 0.0, "alpha 0 field");
  out.require(random_affine(0.6, bounds, grid.center(), 12).transform ==
                  random_affine(0.6, bounds, grid.center(), 12).transform,
              "seeded affine");
  out.require(random_elastic(0.6, 10.0, {5, 5, 5}, grid, 12).displacements() ==
                  random_elastic(0.6, 10.0, {5, 5, 5}, grid, 12).displacements(),
              "seeded field");

  const std::vector<double> alphas{0.125, 0.25, 0.5, 1.0};
  const int seeds = 8;
  bool labels_ok = true;
  for (const char* mode : {"affine", "elastic"}) {
    std::vector<double> mean_dice;
    for (double alpha : alphas) {
      double sum = 0.0;
      for (int s = 0; s < seeds; ++s) {
        const AffineSample a = random_affine(alpha, bounds, grid.center(), std::uint64_t(s));
        LabelVolume moved = resample_nearest(mask, grid, a.transform);
        if (std::string(mode) == "elastic") {
          const DisplacementField f = random_elastic(alpha, bounds.max_displacement_mm, bounds.control_dims, grid,
                                                     std::uint64_t(s) ^ 0x9e3779b97f4a7c15ULL);
          moved = warp(mask, f, a.transform);
        }
        for (auto x : moved.data()) labels_ok &= x <= 2;
        sum += dice(mask, moved, 1);
      }
      mean_dice.push_back(sum / seeds);
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < mean_dice.size(); ++i) decreasing &= mean_dice[i] < mean_dice[i - 1];
    out.require(decreasing, std::string(mode) + " Dice decreasing");
    out.detail << mode << " mean Dice";
    for (double d : mean_dice) out.detail << ' ' << std::setprecision(4) << d;
    out.detail << "; ";
  }
  out.require(labels_ok, "label set preserved");
}

void metrics_suite(Outcome& out) {
  const Grid g2 = testing::unit_grid(2, 1, 1);
  const Volume3 zero(g2, {0, 0}), other(g2, {3, 4});
  out.require(rmse(zero, zero) == 0.0, "rmse a=b");
  out.require(rmse(zero, Volume3(g2, 1.5f)) == 1.5, "rmse constant difference");
  out.require(rmse(zero, other) == std::sqrt(12.5), "rmse 3.5355");
  out.require(rmse(zero, other) == rmse(other, zero), "rmse symmetry");
  out.require(psnr(zero, zero, 1.0) == std::numeric_limits<double>::infinity(), "psnr inf");
  out.require(format_metric("psnr", psnr(zero, zero, 1.0)) == "psnr=inf", "inf sentinel text");
  out.require(psnr(zero, Volume3(g2, 2.0f), 2.0) == 0.0, "psnr 0 dB");
  out.require(std::abs(psnr(zero, Volume3(g2, 0.25f), 2.5) - 20.0) < 1e-12, "psnr 20 dB");

  const Grid g = testing::unit_grid(10, 10, 4);
  LabelVolume a(g), b(g), c(g);
  for (std::size_t n = 0; n < 100; ++n) a[n] = 1;
  for (std::size_t n = 100; n < 200; ++n) b[n] = 1;
  for (std::size_t n = 50; n < 150; ++n) c[n] = 1;
  out.require(dice(a, a, 1) == 1.0, "dice identical");
  out.require(dice(a, b, 1) == 0.0, "dice disjoint");
  out.require(dice(a, c, 1) == 0.5, "dice half overlap");
  out.require(dice(a, c, 1) == dice(c, a, 1), "dice symmetry");
  out.require(dice(a, b, 2) == 1.0, "dice both empty");
  bool shape_error = false;
  try {
    rmse(zero, Volume3(testing::unit_grid(1, 2, 1)));
  } catch (const ShapeError&) {
    shape_error = true;
  }
  out.require(shape_error, "grid mismatch");
  out.detail << "rmse " << rmse(zero, other) << ", psnr/dice examples exact";
}

void nifti_round_trip(Outcome& out) {
  testing::TempDir dir("acceptance");
  std::mt19937_64 rng(9);
  Grid g = testing::unit_grid(13, 11, 7);
  g.spacing = {0.688, 1.032, 0.688};
  g.origin = {-12.5, 30.25, 101.0};
  int cases = 0;
  for (bool gz : {false, true}) {
    const std::string ext = gz ? ".nii.gz" : ".nii";
    const Volume3 f = testing::random_volume(g, rng, -1000, 3000);
    write_nifti(f, dir / ("f" + ext), NiftiWriteOptions{gz, NiftiDatatype::float32, ""});
    out.require(bit_equal(read_nifti(dir / ("f" + ext)), f), "float32" + ext);

    Volume3 ints(g);
    std::uniform_int_distribution<int> i16(-32768, 32767);
    for (auto& x : ints.data()) x = float(i16(rng));
    write_nifti(ints, dir / ("i" + ext), NiftiWriteOptions{gz, NiftiDatatype::int16, ""});
    LoadReport report;
    out.require(bit_equal(read_nifti(dir / ("i" + ext), &report), ints), "int16" + ext);
    out.require(report.datatype == NiftiDatatype::int16, "int16 stored");

    LabelVolume labels(g);
    std::uniform_int_distribution<int> l(0, 2);
    for (auto& x : labels.data()) x = std::uint8_t(l(rng));
    write_nifti(labels, dir / ("l" + ext), NiftiWriteOptions{gz, std::nullopt, ""});
    out.require(bit_equal(read_nifti_labels(dir / ("l" + ext)), labels), "uint8" + ext);
    // the header stores geometry in single precision
    out.require(same_geometry(read_nifti(dir / ("l" + ext)).grid(), labels.grid(), 1e-5), "grid" + ext);

    // scaled int16 assembled byte by byte: value = slope * stored + inter
    testing::RawNifti raw;
    raw.dims[1] = 5;
    raw.dims[2] = 4;
    raw.dims[3] = 3;
    raw.datatype = 4;
    raw.bitpix = 16;
    raw.scl_slope = 2.5f;
    raw.scl_inter = -1024.0f;
    std::vector<std::int16_t> stored(60);
    for (auto& x : stored) x = std::int16_t(i16(rng) / 16);
    raw.payload = testing::pack(stored);
    raw.write(dir / ("s" + ext), gz);
    const Volume3 scaled = read_nifti(dir / ("s" + ext));
    bool exact = scaled.size() == 60;
    for (std::size_t n = 0; exact && n < 60; ++n) exact = scaled[n] == float(2.5 * stored[n] - 1024.0);
    out.require(exact, "scl_slope/scl_inter" + ext);
    raw.scl_slope = 0.0f;  // zero slope means unscaled
    raw.write(dir / ("z" + ext), gz);
    const Volume3 unscaled = read_nifti(dir / ("z" + ext));
    exact = unscaled.size() == 60;
    for (std::size_t n = 0; exact && n < 60; ++n) exact = unscaled[n] == float(stored[n]);
    out.require(exact, "zero slope" + ext);
    cases += 5;
  }
  out.detail << cases << " round trips bit-exact";
}

void determinism(Outcome& out) {
  std::mt19937_64 rng(10);
  const Grid grid = Grid::centered({32, 32, 32}, {2, 2, 2}, Eigen::Vector3d(1, 2, -1));
  const Volume3 v = testing::random_volume(grid, rng, 0.0, 0.04);
  ScannerSpec s = scanner(80, 1.5);
  s.isocenter = grid.center();
  const ConeBeamGeometry geo = make_circular_trajectory(24, s);
  const unsigned many = std::max(4u, std::thread::hardware_concurrency());
  const ProjectionStack p1 = forward_project(v, geo, ProjectOptions{1});
  const Volume3 r1 = fdk_reconstruct(p1, grid, FdkOptions{FilterMethod::automatic, 1});
  for (unsigned t : {2u, many}) {
    const ProjectionStack pt = forward_project(v, geo, ProjectOptions{t});
    out.require(bit_equal(pt.data, p1.data), "projector " + std::to_string(t) + " threads");
    const Volume3 rt = fdk_reconstruct(p1, grid, FdkOptions{FilterMethod::automatic, t});
    out.require(bit_equal(rt, r1), "FDK " + std::to_string(t) + " threads");
  }
  out.detail << "1, 2 and " << many << " workers bit-identical";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"Siddon oracle equivalence", siddon_oracle},
      {"analytic projector check", analytic_projector},
      {"ramp kernel exactness", ramp_taps},
      {"FDK value recovery", fdk_sphere},
      {"quality monotonicity", quality_monotonicity},
      {"pipeline contract", pipeline_contract},
      {"resample/misalign suite", resample_misalign},
      {"metrics unit suite", metrics_suite},
      {"NIfTI round trip", nifti_round_trip},
      {"determinism under parallelism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    const auto start = Clock::now();
    try {
      criteria[i].second(outcome);
    } catch (const std::exception& e) {
      outcome.require(false, std::string("exception: ") + e.what());
    }
    failures += !outcome.pass;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << " (" << criteria[i].first
              << "): " << outcome.detail.str() << " [" << std::fixed << std::setprecision(1)
              << seconds_since(start) << " s]" << std::defaultfloat << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
