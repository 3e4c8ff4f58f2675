#include "cbct/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "cbct/error.hpp"
#include "cbct/nifti.hpp"
#include "cbct/parallel.hpp"

namespace cbct {

const char* to_string(CenteringMode mode) {
  return mode == CenteringMode::liver_cog ? "liver_cog" : "volume_center";
}

const char* to_string(OutputUnits units) { return units == OutputUnits::hu ? "hu" : "attenuation"; }

CenteringMode parse_centering(const std::string& text) {
  if (text == "liver_cog") return CenteringMode::liver_cog;
  if (text == "volume_center") return CenteringMode::volume_center;
  throw ConfigError("centering must be liver_cog or volume_center, got '" + text + "'");
}

OutputUnits parse_output_units(const std::string& text) {
  if (text == "hu") return OutputUnits::hu;
  if (text == "attenuation" || text == "mu") return OutputUnits::attenuation;
  throw ConfigError("output units must be hu or attenuation, got '" + text + "'");
}

const char* to_string(FilterMethod method) {
  switch (method) {
    case FilterMethod::spatial: return "spatial";
    case FilterMethod::fft: return "fft";
    case FilterMethod::automatic: return "automatic";
  }
  return "automatic";
}

FilterMethod parse_filter(const std::string& text) {
  if (text == "spatial") return FilterMethod::spatial;
  if (text == "fft") return FilterMethod::fft;
  if (text == "automatic") return FilterMethod::automatic;
  throw ConfigError("filter must be spatial, fft or automatic, got '" + text + "'");
}

namespace {

Eigen::Vector3d triple(const KeyValueMap& map, const std::string& key) {
  const auto values = map.get_doubles(key);
  if (values.size() != 3) throw ConfigError("key '" + key + "' needs three numbers");
  return {values[0], values[1], values[2]};
}

nlohmann::json to_json(const Eigen::Vector3d& v) { return nlohmann::json::array({v[0], v[1], v[2]}); }

nlohmann::json to_json(const Grid& grid) {
  return {
      {"dims", {grid.dims[0], grid.dims[1], grid.dims[2]}},
      {"spacing_mm", to_json(grid.spacing)},
      {"origin_mm", to_json(grid.origin)},
      {"direction", nlohmann::json(std::vector<double>(grid.direction.reshaped<Eigen::RowMajor>().begin(),
                                                       grid.direction.reshaped<Eigen::RowMajor>().end()))},
  };
}

}  // namespace

void PipelineConfig::validate() const {
  if (quality_levels.empty()) throw ConfigError("at least one quality level is required");
  std::set<std::size_t> seen;
  for (std::size_t n : quality_levels) {
    if (n < 1) throw ConfigError("quality levels must be >= 1");
    if (!seen.insert(n).second) throw ConfigError("quality levels must be distinct");
  }
  for (int a = 0; a < 3; ++a) {
    if (!(extent_mm[a] > 0.0)) throw ConfigError("extent_mm must be positive");
    if (!(voxel_mm[a] > 0.0)) throw ConfigError("voxel_mm must be positive");
  }
  if (!(mu_water > 0.0)) throw ConfigError("mu_water must be positive");
  try {
    scanner.validate();
  } catch (const GeometryError& e) {
    throw ConfigError(e.what());
  }
}

void PipelineConfig::apply(const KeyValueMap& map) {
  if (map.contains("quality_levels")) {
    quality_levels.clear();
    for (double v : map.get_doubles("quality_levels")) {
      if (v < 1.0 || v != std::floor(v)) throw ConfigError("quality_levels must be positive integers");
      quality_levels.push_back(static_cast<std::size_t>(v));
    }
  }
  if (map.contains("extent_mm")) extent_mm = triple(map, "extent_mm");
  if (map.contains("voxel_mm")) voxel_mm = triple(map, "voxel_mm");
  if (auto v = map.find_double("mu_water")) mu_water = *v;
  if (auto v = map.find_string("centering")) centering = parse_centering(*v);
  if (auto v = map.find_string("output_units")) output_units = parse_output_units(*v);
  if (auto v = map.find_string("filter")) filter = parse_filter(*v);
  if (auto v = map.find_int("seed")) seed = static_cast<std::uint64_t>(*v);
  if (auto v = map.find_int("threads")) {
    if (*v < 0) throw ConfigError("threads must be >= 0");
    threads = static_cast<unsigned>(*v);
  }
  if (auto v = map.find_int("gzip")) gzip = *v != 0;
  scanner = scanner_from_key_values(map, scanner);
}

nlohmann::json PipelineConfig::to_json() const {
  // threads is deliberately absent: it never changes the outputs
  return {
      {"quality_levels", quality_levels},
      {"extent_mm", cbct::to_json(extent_mm)},
      {"voxel_mm", cbct::to_json(voxel_mm)},
      {"mu_water_per_mm", mu_water},
      {"centering", to_string(centering)},
      {"output_units", to_string(output_units)},
      {"filter", to_string(filter)},
      {"seed", seed},
      {"gzip", gzip},
      {"scanner",
       {
           {"sad_mm", scanner.sad_mm},
           {"sdd_mm", scanner.sdd_mm},
           {"det_nu", scanner.det_nu},
           {"det_nv", scanner.det_nv},
           {"pitch_u_mm", scanner.pitch_u_mm},
           {"pitch_v_mm", scanner.pitch_v_mm},
           {"offset_u_mm", scanner.offset_u_mm},
           {"offset_v_mm", scanner.offset_v_mm},
       }},
  };
}

Eigen::Vector3d compute_center(const Volume3& ct, const LabelVolume* mask, CenteringMode mode) {
  if (mode == CenteringMode::volume_center) return ct.grid().center();
  if (mask == nullptr) throw ConfigError("liver_cog centering needs a liver mask");
  return center_of_gravity(*mask, kLiverLabel);
}

Volume3 prepare_attenuation(const Volume3& ct_hu, double mu_water, unsigned threads) {
  if (ct_hu.grid().is_axis_aligned()) return hu_to_attenuation(ct_hu, mu_water);
  ResampleOptions options;
  options.threads = threads;
  const Volume3 aligned = resample_linear(ct_hu, axis_aligned_cover(ct_hu.grid()), AffineTransform::identity(), options);
  return hu_to_attenuation(aligned, mu_water);
}

ConeBeamGeometry level_geometry(const PipelineConfig& config, std::size_t n_projections,
                                const Eigen::Vector3d& center) {
  ScannerSpec scanner = config.scanner;
  scanner.isocenter = center;
  return make_circular_trajectory(n_projections, scanner);
}

Volume3 reconstruct_level(const ProjectionStack& stack, const Grid& grid, const PipelineConfig& config) {
  FdkOptions options;
  options.filter = config.filter;
  options.threads = config.threads;
  Volume3 mu = fdk_reconstruct(stack, grid, options);
  if (config.output_units == OutputUnits::attenuation) return mu;
  return attenuation_to_hu(mu, config.mu_water);
}

ProjectionStack subset_views(const ProjectionStack& stack, std::size_t stride) {
  if (stride == 0 || stack.geometry.n_angles() % stride != 0) {
    throw ParameterError("view stride must divide the number of views");
  }
  std::vector<double> angles;
  for (std::size_t a = 0; a < stack.geometry.n_angles(); a += stride) angles.push_back(stack.geometry.angles()[a]);
  ProjectionStack out(ConeBeamGeometry(stack.geometry.scanner(), angles));
  const std::size_t view = stack.geometry.nu() * stack.geometry.nv();
  for (std::size_t a = 0; a < angles.size(); ++a) {
    std::copy_n(stack.data.begin() + static_cast<std::ptrdiff_t>(a * stride * view), view,
                out.data.begin() + static_cast<std::ptrdiff_t>(a * view));
  }
  return out;
}

std::size_t reuse_stride(std::size_t n_projections, std::size_t largest) {
  if (n_projections == 0 || largest % n_projections != 0) return 0;
  return largest / n_projections;
}

std::string cbct_file_name(std::size_t n_projections, bool gzip) {
  return "cbct_" + std::to_string(n_projections) + (gzip ? ".nii.gz" : ".nii");
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 initialisation failed");
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    const auto n = in.gcount();
    if (n > 0 && EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(n)) != 1) {
      throw Error("SHA-256 update failed");
    }
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) throw Error("SHA-256 finalisation failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::string nifti_stem(const std::filesystem::path& path) {
  std::string name = path.filename().string();
  for (const std::string suffix : {".nii.gz", ".nii"}) {
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      return name.substr(0, name.size() - suffix.size());
    }
  }
  return path.stem().string();
}

namespace {

struct OutputRecord {
  std::string file;
  std::string kind;
  std::optional<std::size_t> n_projections;
};

void write_json(const nlohmann::json& document, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << document.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

VolumeResult run_pipeline(const std::filesystem::path& ct_path, const std::optional<std::filesystem::path>& mask_path,
                          const PipelineConfig& config, const std::filesystem::path& output_dir) {
  VolumeResult result;
  result.output_dir = output_dir;
  try {
    config.validate();
    std::filesystem::create_directories(output_dir);

    LoadReport ct_report;
    const Volume3 ct = read_nifti(ct_path, &ct_report);
    std::optional<LabelVolume> mask;
    LoadReport mask_report;
    if (mask_path) {
      mask = read_nifti_labels(*mask_path, &mask_report);
      if (!same_geometry(ct.grid(), mask->grid(), 1e-4)) throw ShapeError("CT and mask grids differ");
    }

    const Eigen::Vector3d center = compute_center(ct, mask ? &*mask : nullptr, config.centering);
    const Grid grid = reconstruction_grid(config.extent_mm, config.voxel_mm, center);
    const Volume3 attenuation = prepare_attenuation(ct, config.mu_water, config.threads);

    NiftiWriteOptions write_options;
    write_options.gzip = config.gzip;
    const std::string ext = config.gzip ? ".nii.gz" : ".nii";
    std::vector<OutputRecord> records;
    nlohmann::json levels = nlohmann::json::array();

    ProjectOptions project_options;
    project_options.threads = config.threads;
    const std::size_t largest = *std::max_element(config.quality_levels.begin(), config.quality_levels.end());
    const ProjectionStack full =
        forward_project(attenuation, level_geometry(config, largest, center), project_options);

    // levels that divide the largest count take every stride-th view, the
    // rest get their own equidistant trajectory
    for (std::size_t n_projections : config.quality_levels) {
      const std::size_t stride = reuse_stride(n_projections, largest);
      const ProjectionStack stack =
          stride > 0 ? subset_views(full, stride)
                     : forward_project(attenuation, level_geometry(config, n_projections, center), project_options);
      const ConeBeamGeometry& geometry = stack.geometry;
      const Volume3 cbct = reconstruct_level(stack, grid, config);
      const std::string name = cbct_file_name(n_projections, config.gzip);
      write_options.description = "synthetic CBCT, " + std::to_string(n_projections) + " projections";
      write_nifti(cbct, output_dir / name, write_options);
      records.push_back({name, "cbct", n_projections});
      levels.push_back({{"n_projections", n_projections},
                        {"projections", stride > 0 ? "views of " + std::to_string(largest) + " with stride " +
                                                         std::to_string(stride)
                                                   : std::string("traced")},
                        {"normalization", backprojection_normalization(geometry)}});
    }

    write_options.description = "CT aligned to the CBCT grid";
    if (mask) {
      const auto [ct_aligned, mask_aligned] = align_to_grid(ct, *mask, grid, config.threads);
      write_nifti(ct_aligned, output_dir / ("ct_aligned" + ext), write_options);
      write_options.description = "mask aligned to the CBCT grid";
      write_nifti(mask_aligned, output_dir / ("mask_aligned" + ext), write_options);
      records.push_back({"ct_aligned" + ext, "ct_aligned", std::nullopt});
      records.push_back({"mask_aligned" + ext, "mask_aligned", std::nullopt});
    } else {
      ResampleOptions options;
      options.threads = config.threads;
      const Volume3 ct_aligned = resample_linear(ct, grid, AffineTransform::identity(), options);
      write_nifti(ct_aligned, output_dir / ("ct_aligned" + ext), write_options);
      records.push_back({"ct_aligned" + ext, "ct_aligned", std::nullopt});
    }

    nlohmann::json outputs = nlohmann::json::array();
    for (const OutputRecord& r : records) {
      nlohmann::json entry = {{"file", r.file}, {"kind", r.kind}, {"sha256", sha256_file(output_dir / r.file)}};
      if (r.n_projections) entry["n_projections"] = *r.n_projections;
      outputs.push_back(entry);
      result.files.push_back(output_dir / r.file);
    }

    nlohmann::json inputs = {
        {"ct", {{"path", ct_path.string()},
                {"sha256", sha256_file(ct_path)},
                {"datatype", to_string(ct_report.datatype)},
                {"orientation_source", to_string(ct_report.orientation)},
                {"grid", to_json(ct.grid())}}},
    };
    if (mask_path) {
      inputs["mask"] = {{"path", mask_path->string()},
                        {"sha256", sha256_file(*mask_path)},
                        {"orientation_source", to_string(mask_report.orientation)}};
    } else {
      inputs["mask"] = nullptr;
    }

    const nlohmann::json manifest = {
        {"software", {{"name", kSoftwareName}, {"version", kSoftwareVersion}}},
        {"inputs", inputs},
        {"config", config.to_json()},
        {"center_mm", to_json(center)},
        {"reconstruction_grid", to_json(grid)},
        {"dims_rounding", "round(extent_mm / voxel_mm) to nearest"},
        {"attenuation_model",
         {{"formula", "mu = mu_water * (1 + HU / 1000)"},
          {"clamp", "mu < 0 set to 0"},
          {"mu_water_per_mm", config.mu_water}}},
        {"reconstruction", {{"algorithm", "FDK"}, {"kernel", "ram-lak"}, {"levels", levels}}},
        {"outputs", outputs},
    };
    const auto manifest_path = output_dir / "manifest.json";
    write_json(manifest, manifest_path);
    result.files.push_back(manifest_path);
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
    result.files.clear();
    try {
      std::filesystem::create_directories(output_dir);
      write_json({{"ct", ct_path.string()}, {"error", result.error}}, output_dir / "failure.json");
    } catch (const std::exception&) {
      // the failure is still reported through the return value
    }
  }
  return result;
}

std::vector<BatchEntry> read_batch_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open batch list " + path.string());
  std::vector<BatchEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string ct;
    if (!(fields >> ct) || ct.front() == '#') continue;
    BatchEntry entry{ct, std::nullopt};
    std::string mask;
    if (fields >> mask) entry.mask = mask;
    entries.push_back(entry);
  }
  return entries;
}

std::vector<VolumeResult> run_batch(const std::vector<BatchEntry>& entries, const PipelineConfig& config,
                                    const std::filesystem::path& output_root, unsigned parallel_volumes) {
  std::vector<std::filesystem::path> dirs;
  std::map<std::string, int> used;
  for (const BatchEntry& entry : entries) {
    std::string name = nifti_stem(entry.ct);
    const int count = used[name]++;
    if (count > 0) name += "_" + std::to_string(count);
    dirs.push_back(output_root / name);
  }
  std::vector<VolumeResult> results(entries.size());
  if (parallel_volumes <= 1) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      results[i] = run_pipeline(entries[i].ct, entries[i].mask, config, dirs[i]);
    }
    return results;
  }
  PipelineConfig single = config;
  single.threads = 1;
  // each worker owns a contiguous run of whole volumes
  parallel_for(entries.size(), std::min<unsigned>(parallel_volumes, static_cast<unsigned>(entries.size())),
               [&](std::size_t begin, std::size_t end) {
                 for (std::size_t i = begin; i < end; ++i) {
                   results[i] = run_pipeline(entries[i].ct, entries[i].mask, single, dirs[i]);
                 }
               });
  return results;
}

MisalignMode parse_misalign_mode(const std::string& text) {
  if (text == "affine") return MisalignMode::affine;
  if (text == "elastic") return MisalignMode::elastic;
  throw ConfigError("misalignment mode must be affine or elastic, got '" + text + "'");
}

MisalignResult run_misalign(const std::filesystem::path& ct_path, const std::filesystem::path& mask_path,
                            double alpha, MisalignMode mode, std::uint64_t seed, const MisalignmentBounds& bounds,
                            const std::filesystem::path& output_dir, bool gzip, unsigned threads) {
  const Volume3 ct = read_nifti(ct_path);
  const LabelVolume mask = read_nifti_labels(mask_path);
  if (!same_geometry(ct.grid(), mask.grid(), 1e-4)) throw ShapeError("CT and mask grids differ");
  std::filesystem::create_directories(output_dir);

  const AffineSample affine = random_affine(alpha, bounds, ct.grid().center(), seed);
  const std::string ext = gzip ? ".nii.gz" : ".nii";
  MisalignResult result;
  result.ct = output_dir / ("ct_misaligned" + ext);
  result.mask = output_dir / ("mask_misaligned" + ext);
  result.transform = output_dir / "transform.txt";

  ResampleOptions options;
  options.threads = threads;
  NiftiWriteOptions write_options;
  write_options.gzip = gzip;
  if (mode == MisalignMode::affine) {
    write_nifti(resample_linear(ct, ct.grid(), affine.transform, options), result.ct, write_options);
    write_nifti(resample_nearest(mask, mask.grid(), affine.transform, threads), result.mask, write_options);
  } else {
    // separate stream so the affine draw is identical in both modes
    const std::uint64_t field_seed = seed ^ 0x9e3779b97f4a7c15ULL;
    const DisplacementField field =
        random_elastic(alpha, bounds.max_displacement_mm, bounds.control_dims, ct.grid(), field_seed);
    write_nifti(warp(ct, field, affine.transform, options), result.ct, write_options);
    write_nifti(warp(mask, field, affine.transform, threads), result.mask, write_options);
    result.field = output_dir / ("field" + ext);
    write_displacement_field(field, *result.field);
  }
  write_transform(affine.transform, result.transform);
  return result;
}

}  // namespace cbct
