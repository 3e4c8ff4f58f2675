// cbctsim: synthetic cone-beam CT generation from CT volumes.
//
//   cbctsim phantom     --kind liver --out ct.nii.gz --mask-out mask.nii.gz
//   cbctsim project     --in ct.nii.gz --mask mask.nii.gz --n-projections 360 --out drr.nii.gz
//   cbctsim reconstruct --in drr.nii.gz --out cbct.nii.gz
//   cbctsim pipeline    --ct ct.nii.gz --mask mask.nii.gz --out dataset/
//   cbctsim align       --ct ct.nii.gz --mask mask.nii.gz --reference cbct.nii.gz --out-ct a.nii.gz
//   cbctsim misalign    --ct ct.nii.gz --mask mask.nii.gz --alpha 0.5 --mode elastic --out mis/
//   cbctsim metrics     --a x.nii.gz --b y.nii.gz
//
// Exit codes: 0 success, 1 failure (including a partially failed batch),
// 2 bad configuration or command line.

#include <array>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cbct/error.hpp"
#include "cbct/fdk.hpp"
#include "cbct/metrics.hpp"
#include "cbct/nifti.hpp"
#include "cbct/phantom.hpp"
#include "cbct/pipeline.hpp"
#include "cbct/projector.hpp"
#include "cbct/resample.hpp"

namespace {

using namespace cbct;

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

using Triple = std::array<double, 3>;

Eigen::Vector3d vec(const Triple& t) { return {t[0], t[1], t[2]}; }

bool given(const CLI::Option* option) { return option != nullptr && option->count() > 0; }

// Long-form scanner flags shared by project and pipeline. Only flags that
// appear on the command line override the defaults / config file.
struct ScannerFlags {
  ScannerSpec values;
  std::vector<std::pair<CLI::Option*, std::function<void(ScannerSpec&)>>> options;

  void add(CLI::App* app) {
    auto dbl = [&](const char* name, double ScannerSpec::*field, const char* help) {
      options.emplace_back(app->add_option(name, values.*field, help),
                           [this, field](ScannerSpec& s) { s.*field = values.*field; });
    };
    auto count = [&](const char* name, std::size_t ScannerSpec::*field, const char* help) {
      options.emplace_back(app->add_option(name, values.*field, help)->check(CLI::PositiveNumber),
                           [this, field](ScannerSpec& s) { s.*field = values.*field; });
    };
    dbl("--sad-mm", &ScannerSpec::sad_mm, "Source to rotation axis distance");
    dbl("--sdd-mm", &ScannerSpec::sdd_mm, "Source to detector distance");
    count("--det-nu", &ScannerSpec::det_nu, "Detector columns");
    count("--det-nv", &ScannerSpec::det_nv, "Detector rows");
    dbl("--pitch-u-mm", &ScannerSpec::pitch_u_mm, "Detector column pitch");
    dbl("--pitch-v-mm", &ScannerSpec::pitch_v_mm, "Detector row pitch");
    dbl("--offset-u-mm", &ScannerSpec::offset_u_mm, "Principal point offset along u");
    dbl("--offset-v-mm", &ScannerSpec::offset_v_mm, "Principal point offset along v");
  }

  void apply(ScannerSpec& scanner) const {
    for (const auto& [option, set] : options) {
      if (given(option)) set(scanner);
    }
  }
};

void shift(EllipsoidSpec& e, const Eigen::Vector3d& by) { e.center += by; }

// ---------------------------------------------------------------- phantom

struct PhantomArgs {
  std::string kind = "shepp-logan";
  std::string specs;
  std::array<std::size_t, 3> dims{64, 64, 64};
  Triple spacing{2.0, 2.0, 2.0};
  Triple center{0.0, 0.0, 0.0};
  double radius_mm = 56.0;
  double density_scale = kDefaultMuWater;
  std::string units = "hu";
  double mu_water = kDefaultMuWater;
  std::string out;
  std::string mask_out;
  std::string specs_out;
};

void add_phantom(CLI::App& app, PhantomArgs& a) {
  auto* cmd = app.add_subcommand("phantom", "Rasterize a test phantom");
  cmd->add_option("--kind", a.kind, "shepp-logan, liver or file")
      ->check(CLI::IsMember({"shepp-logan", "liver", "file"}))
      ->capture_default_str();
  cmd->add_option("--specs", a.specs, "Ellipsoid list for --kind file");
  cmd->add_option("--dims", a.dims, "Grid size")->capture_default_str();
  cmd->add_option("--spacing-mm", a.spacing, "Voxel size")->capture_default_str();
  cmd->add_option("--center-mm", a.center, "World position of the grid and phantom centre")
      ->capture_default_str();
  cmd->add_option("--radius-mm", a.radius_mm, "Phantom half-width")->capture_default_str();
  cmd->add_option("--density-scale", a.density_scale, "Shepp-Logan density multiplier")
      ->capture_default_str();
  cmd->add_option("--units", a.units, "Liver phantom output: hu or attenuation")
      ->check(CLI::IsMember({"hu", "attenuation"}))
      ->capture_default_str();
  cmd->add_option("--mu-water", a.mu_water, "Water attenuation in 1/mm")->capture_default_str();
  cmd->add_option("--out", a.out, "Output volume")->required();
  cmd->add_option("--mask-out", a.mask_out, "Liver/tumour labels (liver only)");
  cmd->add_option("--specs-out", a.specs_out, "Write the ellipsoid list");
}

int run_phantom(const PhantomArgs& a) {
  const Grid grid = Grid::centered(a.dims, vec(a.spacing), vec(a.center));
  grid.validate();
  const NiftiWriteOptions options{has_gzip_suffix(a.out), std::nullopt, "cbctsim " + a.kind + " phantom"};
  if (a.kind == "liver") {
    LiverPhantom p = liver_phantom(a.radius_mm);
    for (EllipsoidSpec& e : p.hu_components) shift(e, vec(a.center));
    shift(p.liver, vec(a.center));
    shift(p.tumor, vec(a.center));
    const Volume3 volume =
        a.units == "hu" ? p.rasterize_hu(grid) : p.rasterize_attenuation(grid, a.mu_water);
    write_nifti(volume, a.out, options);
    if (!a.mask_out.empty()) {
      write_nifti(p.rasterize_labels(grid), a.mask_out, NiftiWriteOptions{has_gzip_suffix(a.mask_out), {}, {}});
    }
    if (!a.specs_out.empty()) {
      write_phantom_specs(a.units == "hu" ? p.hu_components : p.attenuation_components(a.mu_water), a.specs_out);
    }
    return 0;
  }
  if (!a.mask_out.empty()) throw ConfigError("--mask-out is only available for the liver phantom");
  std::vector<EllipsoidSpec> specs;
  if (a.kind == "file") {
    if (a.specs.empty()) throw ConfigError("--kind file needs --specs");
    specs = read_phantom_specs(a.specs);
  } else {
    specs = shepp_logan_3d(a.radius_mm, a.density_scale);
    for (EllipsoidSpec& e : specs) shift(e, vec(a.center));
  }
  write_nifti(rasterize(specs, grid), a.out, options);
  if (!a.specs_out.empty()) write_phantom_specs(specs, a.specs_out);
  return 0;
}

// ---------------------------------------------------------------- project

struct ProjectArgs {
  std::string in;
  std::string input_units = "hu";
  double mu_water = kDefaultMuWater;
  std::string mask;
  std::string centering;
  Triple iso{0.0, 0.0, 0.0};
  std::string geometry;
  std::size_t n_projections = 360;
  ScannerFlags scanner;
  std::string out;
  std::string intensity_out;
  double i0 = 1.0;
  CLI::Option* iso_option = nullptr;
  CLI::Option* n_option = nullptr;
};

void add_project(CLI::App& app, ProjectArgs& a) {
  auto* cmd = app.add_subcommand("project", "Siddon DRRs over a circular trajectory");
  cmd->add_option("--in", a.in, "Input volume")->required();
  cmd->add_option("--input-units", a.input_units, "hu or attenuation")
      ->check(CLI::IsMember({"hu", "attenuation"}))
      ->capture_default_str();
  cmd->add_option("--mu-water", a.mu_water, "Water attenuation in 1/mm")->capture_default_str();
  cmd->add_option("--mask", a.mask, "Liver mask for liver_cog centring");
  cmd->add_option("--centering", a.centering, "liver_cog (default with --mask) or volume_center")
      ->check(CLI::IsMember({"liver_cog", "volume_center"}));
  a.iso_option = cmd->add_option("--iso-mm", a.iso, "Explicit rotation axis point");
  cmd->add_option("--geometry", a.geometry, "Geometry key-value file");
  a.n_option = cmd->add_option("--n-projections", a.n_projections, "Views over a full turn")
                   ->check(CLI::PositiveNumber)
                   ->capture_default_str();
  a.scanner.add(cmd);
  cmd->add_option("--out", a.out, "Projection stack (NIfTI + .geom sidecar)")->required();
  cmd->add_option("--intensity-out", a.intensity_out, "Also write I0 exp(-p)");
  cmd->add_option("--i0", a.i0, "Unattenuated intensity")->capture_default_str();
}

int run_project(const ProjectArgs& a, unsigned threads) {
  ScannerSpec scanner;
  std::size_t n_projections = a.n_projections;
  if (!a.geometry.empty()) {
    const KeyValueMap map = KeyValueMap::load(a.geometry);
    scanner = scanner_from_key_values(map, scanner);
    if (auto n = map.find_int("n_projections"); n && !given(a.n_option)) {
      if (*n < 1) throw ConfigError("n_projections must be >= 1");
      n_projections = static_cast<std::size_t>(*n);
    }
  }
  a.scanner.apply(scanner);
  try {
    scanner.validate();
  } catch (const GeometryError& e) {
    throw ConfigError(e.what());
  }

  const Volume3 input = read_nifti(a.in);
  std::optional<LabelVolume> mask;
  if (!a.mask.empty()) mask = read_nifti_labels(a.mask);
  if (given(a.iso_option)) {
    scanner.isocenter = vec(a.iso);
  } else {
    CenteringMode mode = mask ? CenteringMode::liver_cog : CenteringMode::volume_center;
    if (!a.centering.empty()) mode = parse_centering(a.centering);
    scanner.isocenter = compute_center(input, mask ? &*mask : nullptr, mode);
  }

  Volume3 attenuation = a.input_units == "hu" ? prepare_attenuation(input, a.mu_water, threads)
                        : input.grid().is_axis_aligned()
                            ? input
                            : resample_linear(input, axis_aligned_cover(input.grid()), AffineTransform::identity(),
                                              ResampleOptions{std::nullopt, threads});
  const ConeBeamGeometry geometry = make_circular_trajectory(n_projections, scanner);
  const ProjectionStack stack = forward_project(attenuation, geometry, ProjectOptions{threads});
  write_projections(stack, a.out, has_gzip_suffix(a.out));
  if (!a.intensity_out.empty()) {
    const std::vector<float> intensity = to_intensity(stack, a.i0);
    Grid grid;
    grid.dims = {geometry.nu(), geometry.nv(), geometry.n_angles()};
    grid.spacing = {scanner.pitch_u_mm, scanner.pitch_v_mm, 1.0};
    Volume3 image(grid);
    std::copy(intensity.begin(), intensity.end(), image.data().begin());
    write_nifti(image, a.intensity_out, NiftiWriteOptions{has_gzip_suffix(a.intensity_out), {}, "I0 exp(-p)"});
  }
  return 0;
}

// ---------------------------------------------------------------- reconstruct

struct ReconstructArgs {
  std::string in;
  std::size_t view_stride = 1;
  Triple extent{252.0, 246.0, 250.0};
  Triple voxel{0.688, 1.032, 0.688};
  Triple center{0.0, 0.0, 0.0};
  std::string output_units = "hu";
  double mu_water = kDefaultMuWater;
  std::string filter = "automatic";
  std::string out;
  std::string report;
  CLI::Option* center_option = nullptr;
};

void add_reconstruct(CLI::App& app, ReconstructArgs& a) {
  auto* cmd = app.add_subcommand("reconstruct", "FDK reconstruction of a projection stack");
  cmd->add_option("--in", a.in, "Projection stack written by 'project'")->required();
  cmd->add_option("--view-stride", a.view_stride, "Use every n-th view")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--extent-mm", a.extent, "Reconstruction extent")->capture_default_str();
  cmd->add_option("--voxel-mm", a.voxel, "Reconstruction voxel size")->capture_default_str();
  a.center_option = cmd->add_option("--center-mm", a.center, "Grid centre (default: rotation axis point)");
  cmd->add_option("--output-units", a.output_units, "hu or attenuation")
      ->check(CLI::IsMember({"hu", "attenuation"}))
      ->capture_default_str();
  cmd->add_option("--mu-water", a.mu_water, "Water attenuation in 1/mm")->capture_default_str();
  cmd->add_option("--filter", a.filter, "spatial, fft or automatic")
      ->check(CLI::IsMember({"spatial", "fft", "automatic"}))
      ->capture_default_str();
  cmd->add_option("--out", a.out, "Output volume")->required();
  cmd->add_option("--report", a.report, "Write a reconstruction report");
}

int run_reconstruct(const ReconstructArgs& a, unsigned threads) {
  PipelineConfig config;
  config.extent_mm = vec(a.extent);
  config.voxel_mm = vec(a.voxel);
  config.mu_water = a.mu_water;
  config.output_units = parse_output_units(a.output_units);
  config.filter = parse_filter(a.filter);
  config.threads = threads;
  config.validate();

  ProjectionStack stack = read_projections(a.in);
  if (a.view_stride > 1) stack = subset_views(stack, a.view_stride);
  const Eigen::Vector3d center = given(a.center_option) ? vec(a.center) : stack.geometry.scanner().isocenter;
  const Grid grid = reconstruction_grid(config.extent_mm, config.voxel_mm, center);
  const Volume3 volume = reconstruct_level(stack, grid, config);
  write_nifti(volume, a.out,
              NiftiWriteOptions{has_gzip_suffix(a.out), std::nullopt,
                                "synthetic CBCT, " + std::to_string(stack.geometry.n_angles()) + " projections"});
  if (!a.report.empty()) write_report(make_report(stack, grid, config.filter), a.report);
  return 0;
}

// ---------------------------------------------------------------- pipeline

struct PipelineArgs {
  std::string ct;
  std::string mask;
  std::string batch;
  std::string out;
  std::string config;
  std::vector<std::size_t> quality_levels;
  Triple extent{};
  Triple voxel{};
  double mu_water = kDefaultMuWater;
  std::string centering;
  std::string output_units;
  std::string filter;
  std::uint64_t seed = 0;
  bool no_gzip = false;
  unsigned parallel_volumes = 1;
  ScannerFlags scanner;
  CLI::Option *levels_option = nullptr, *extent_option = nullptr, *voxel_option = nullptr,
              *mu_option = nullptr, *seed_option = nullptr;
};

void add_pipeline(CLI::App& app, PipelineArgs& a) {
  auto* cmd = app.add_subcommand("pipeline", "Full dataset generation for one CT or a batch");
  auto* ct = cmd->add_option("--ct", a.ct, "CT volume in HU");
  cmd->add_option("--mask", a.mask, "Liver/tumour labels for the CT")->needs(ct);
  cmd->add_option("--batch", a.batch, "File with lines 'ct_path [mask_path]'")->excludes(ct);
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--config", a.config, "Key-value configuration file");
  a.levels_option = cmd->add_option("--quality-levels", a.quality_levels, "Projection counts")->delimiter(',');
  a.extent_option = cmd->add_option("--extent-mm", a.extent, "Reconstruction extent");
  a.voxel_option = cmd->add_option("--voxel-mm", a.voxel, "Reconstruction voxel size");
  a.mu_option = cmd->add_option("--mu-water", a.mu_water, "Water attenuation in 1/mm");
  cmd->add_option("--centering", a.centering, "liver_cog or volume_center");
  cmd->add_option("--output-units", a.output_units, "hu or attenuation");
  cmd->add_option("--filter", a.filter, "spatial, fft or automatic");
  a.seed_option = cmd->add_option("--seed", a.seed, "Seed recorded in the manifest");
  cmd->add_flag("--no-gzip", a.no_gzip, "Write .nii instead of .nii.gz");
  cmd->add_option("--parallel-volumes", a.parallel_volumes, "Volumes processed at once in batch mode")
      ->check(CLI::PositiveNumber);
  a.scanner.add(cmd);
}

PipelineConfig pipeline_config(const PipelineArgs& a, unsigned threads, bool threads_given) {
  PipelineConfig config;
  if (!a.config.empty()) config.apply(KeyValueMap::load(a.config));
  if (given(a.levels_option)) config.quality_levels = a.quality_levels;
  if (given(a.extent_option)) config.extent_mm = vec(a.extent);
  if (given(a.voxel_option)) config.voxel_mm = vec(a.voxel);
  if (given(a.mu_option)) config.mu_water = a.mu_water;
  if (!a.centering.empty()) config.centering = parse_centering(a.centering);
  if (!a.output_units.empty()) config.output_units = parse_output_units(a.output_units);
  if (!a.filter.empty()) config.filter = parse_filter(a.filter);
  if (given(a.seed_option)) config.seed = a.seed;
  if (a.no_gzip) config.gzip = false;
  if (threads_given) config.threads = threads;
  a.scanner.apply(config.scanner);
  config.validate();
  return config;
}

int run_pipeline_command(const PipelineArgs& a, unsigned threads, bool threads_given) {
  const PipelineConfig config = pipeline_config(a, threads, threads_given);
  std::vector<VolumeResult> results;
  if (!a.batch.empty()) {
    results = run_batch(read_batch_list(a.batch), config, a.out, a.parallel_volumes);
  } else if (!a.ct.empty()) {
    std::optional<std::filesystem::path> mask;
    if (!a.mask.empty()) mask = a.mask;
    results.push_back(run_pipeline(a.ct, mask, config, a.out));
  } else {
    throw ConfigError("pipeline needs --ct or --batch");
  }
  int failed = 0;
  for (const VolumeResult& r : results) {
    if (r.ok) {
      std::cout << "ok " << r.output_dir.string() << '\n';
    } else {
      ++failed;
      std::cerr << "failed " << r.output_dir.string() << ": " << r.error << '\n';
    }
  }
  if (failed > 0) {
    std::cerr << failed << " of " << results.size() << " volumes failed\n";
    return kExitFailure;
  }
  return 0;
}

// ---------------------------------------------------------------- align

struct AlignArgs {
  std::string ct;
  std::string mask;
  std::string reference;
  Triple extent{252.0, 246.0, 250.0};
  Triple voxel{0.688, 1.032, 0.688};
  Triple center{0.0, 0.0, 0.0};
  std::string out_ct;
  std::string out_mask;
};

void add_align(CLI::App& app, AlignArgs& a) {
  auto* cmd = app.add_subcommand("align", "Resample CT and mask onto a reconstruction grid");
  cmd->add_option("--ct", a.ct, "CT volume")->required();
  cmd->add_option("--mask", a.mask, "Label volume");
  auto* reference = cmd->add_option("--reference", a.reference, "Volume whose grid is the target");
  cmd->add_option("--extent-mm", a.extent, "Target extent")->excludes(reference)->capture_default_str();
  cmd->add_option("--voxel-mm", a.voxel, "Target voxel size")->excludes(reference)->capture_default_str();
  cmd->add_option("--center-mm", a.center, "Target centre")->excludes(reference)->capture_default_str();
  cmd->add_option("--out-ct", a.out_ct, "Aligned CT")->required();
  cmd->add_option("--out-mask", a.out_mask, "Aligned mask");
}

int run_align(const AlignArgs& a, unsigned threads) {
  if (!a.mask.empty() && a.out_mask.empty()) throw ConfigError("--mask needs --out-mask");
  const Grid target = a.reference.empty() ? reconstruction_grid(vec(a.extent), vec(a.voxel), vec(a.center))
                                          : read_nifti(a.reference).grid();
  const Volume3 ct = read_nifti(a.ct);
  const NiftiWriteOptions ct_options{has_gzip_suffix(a.out_ct), std::nullopt, "CT aligned to the CBCT grid"};
  if (a.mask.empty()) {
    write_nifti(resample_linear(ct, target, AffineTransform::identity(), ResampleOptions{std::nullopt, threads}),
                a.out_ct, ct_options);
    return 0;
  }
  const LabelVolume mask = read_nifti_labels(a.mask);
  const auto [ct_aligned, mask_aligned] = align_to_grid(ct, mask, target, threads);
  write_nifti(ct_aligned, a.out_ct, ct_options);
  write_nifti(mask_aligned, a.out_mask,
              NiftiWriteOptions{has_gzip_suffix(a.out_mask), std::nullopt, "mask aligned to the CBCT grid"});
  return 0;
}

// ---------------------------------------------------------------- misalign

struct MisalignArgs {
  std::string ct;
  std::string mask;
  double alpha = 0.0;
  std::string mode = "affine";
  std::uint64_t seed = 0;
  std::string out;
  MisalignmentBounds bounds;
  bool no_gzip = false;
};

void add_misalign(CLI::App& app, MisalignArgs& a) {
  auto* cmd = app.add_subcommand("misalign", "Random affine or affine+elastic misalignment");
  cmd->add_option("--ct", a.ct, "CT volume")->required();
  cmd->add_option("--mask", a.mask, "Label volume")->required();
  cmd->add_option("--alpha", a.alpha, "Strength in [0, 1]")->required();
  cmd->add_option("--mode", a.mode, "affine or elastic")
      ->check(CLI::IsMember({"affine", "elastic"}))
      ->capture_default_str();
  cmd->add_option("--seed", a.seed, "Random seed")->capture_default_str();
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--max-scale", a.bounds.max_scale, "Scale bound at alpha 1 (fraction)")->capture_default_str();
  cmd->add_option("--max-rotation-deg", a.bounds.max_rotation_deg, "Rotation bound at alpha 1")
      ->capture_default_str();
  cmd->add_option("--max-translation-mm", a.bounds.max_translation_mm, "Translation bound at alpha 1")
      ->capture_default_str();
  cmd->add_option("--max-displacement-mm", a.bounds.max_displacement_mm, "Elastic bound at alpha 1")
      ->capture_default_str();
  cmd->add_option("--control-points", a.bounds.control_dims, "Elastic control lattice")->capture_default_str();
  cmd->add_flag("--no-gzip", a.no_gzip, "Write .nii instead of .nii.gz");
}

int run_misalign_command(const MisalignArgs& a, unsigned threads) {
  const MisalignResult r = run_misalign(a.ct, a.mask, a.alpha, parse_misalign_mode(a.mode), a.seed, a.bounds,
                                        a.out, !a.no_gzip, threads);
  std::cout << r.ct.string() << '\n' << r.mask.string() << '\n' << r.transform.string() << '\n';
  if (r.field) std::cout << r.field->string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
  std::string a;
  std::string b;
  bool labels = false;
  int label = kLiverLabel;
  double data_range = 0.0;
  CLI::Option* range_option = nullptr;
};

void add_metrics(CLI::App& app, MetricsArgs& m) {
  auto* cmd = app.add_subcommand("metrics", "RMSE and PSNR, or Dice for label volumes");
  cmd->add_option("--a", m.a, "First volume")->required();
  cmd->add_option("--b", m.b, "Second (reference) volume")->required();
  cmd->add_flag("--labels", m.labels, "Compare label volumes with Dice");
  cmd->add_option("--label", m.label, "Label for Dice")->check(CLI::Range(0, 255))->capture_default_str();
  m.range_option = cmd->add_option("--data-range", m.data_range, "PSNR range (default: range of --b)");
}

int run_metrics(const MetricsArgs& m) {
  if (m.labels) {
    const double d = dice(read_nifti_labels(m.a), read_nifti_labels(m.b), static_cast<std::uint8_t>(m.label));
    std::cout << format_metric("dice", d) << '\n';
    return 0;
  }
  const Volume3 a = read_nifti(m.a);
  const Volume3 b = read_nifti(m.b);
  const double range = given(m.range_option) ? m.data_range : double(max_value(b)) - double(min_value(b));
  std::cout << format_metric("rmse", rmse(a, b)) << '\n' << format_metric("psnr", psnr(a, b, range)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic cone-beam CT generation"};
  app.set_version_flag("--version", std::string(kSoftwareName) + " " + kSoftwareVersion);
  app.require_subcommand(1);
  unsigned threads = 0;
  auto* threads_option = app.add_option("--threads", threads, "Worker threads (0: all cores)");

  PhantomArgs phantom;
  ProjectArgs project;
  ReconstructArgs reconstruct;
  PipelineArgs pipeline;
  AlignArgs align;
  MisalignArgs misalign;
  MetricsArgs metrics;
  add_phantom(app, phantom);
  add_project(app, project);
  add_reconstruct(app, reconstruct);
  add_pipeline(app, pipeline);
  add_align(app, align);
  add_misalign(app, misalign);
  add_metrics(app, metrics);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (app.got_subcommand("phantom")) return run_phantom(phantom);
    if (app.got_subcommand("project")) return run_project(project, threads);
    if (app.got_subcommand("reconstruct")) return run_reconstruct(reconstruct, threads);
    if (app.got_subcommand("pipeline")) return run_pipeline_command(pipeline, threads, given(threads_option));
    if (app.got_subcommand("align")) return run_align(align, threads);
    if (app.got_subcommand("misalign")) return run_misalign_command(misalign, threads);
    if (app.got_subcommand("metrics")) return run_metrics(metrics);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
