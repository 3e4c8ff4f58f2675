#include "cbct/nifti.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <zlib.h>

namespace cbct {
namespace {

static_assert(std::endian::native == std::endian::little, "NIfTI I/O assumes a little-endian host");

#pragma pack(push, 1)
struct NiftiHeader {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1;
  float intent_p2;
  float intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max;
  float cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax;
  std::int32_t glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b;
  float quatern_c;
  float quatern_d;
  float qoffset_x;
  float qoffset_y;
  float qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(NiftiHeader) == 348);
static_assert(offsetof(NiftiHeader, scl_slope) == 112);
static_assert(offsetof(NiftiHeader, srow_x) == 280);

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kVoxOffset = 352;
constexpr std::int16_t kIntentVector = 1007;
constexpr char kUnitsMillimetre = 2;

int bytes_per_voxel(NiftiDatatype type) {
  switch (type) {
    case NiftiDatatype::uint8: return 1;
    case NiftiDatatype::int16: return 2;
    case NiftiDatatype::int32: return 4;
    case NiftiDatatype::float32: return 4;
    case NiftiDatatype::float64: return 8;
  }
  return 0;
}

bool is_supported(std::int16_t code) {
  switch (code) {
    case 2: case 4: case 8: case 16: case 64: return true;
    default: return false;
  }
}

// Whole-file reader; zlib passes uncompressed files through unchanged.
std::vector<unsigned char> read_file(const std::filesystem::path& path, bool* gzipped) {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open " + path.string());
    unsigned char magic[2] = {0, 0};
    probe.read(reinterpret_cast<char*>(magic), 2);
    *gzipped = probe.gcount() == 2 && magic[0] == 0x1f && magic[1] == 0x8b;
  }
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw IoError("cannot open " + path.string());
  std::unique_ptr<gzFile_s, int (*)(gzFile)> guard(file, gzclose);
  std::vector<unsigned char> bytes;
  unsigned char buffer[1 << 16];
  for (;;) {
    const int n = gzread(file, buffer, sizeof(buffer));
    if (n < 0) throw IoError("decompression failed for " + path.string());
    if (n == 0) break;
    bytes.insert(bytes.end(), buffer, buffer + n);
  }
  return bytes;
}

void write_file(const std::filesystem::path& path, const NiftiHeader& header,
                const std::vector<unsigned char>& payload, bool gzip) {
  const char extension_flags[4] = {0, 0, 0, 0};
  if (gzip) {
    gzFile file = gzopen(path.c_str(), "wb6");
    if (file == nullptr) throw IoError("cannot write " + path.string());
    bool ok = gzwrite(file, &header, kHeaderSize) == static_cast<int>(kHeaderSize);
    ok = ok && gzwrite(file, extension_flags, 4) == 4;
    std::size_t written = 0;
    while (ok && written < payload.size()) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(payload.size() - written, 1u << 30));
      ok = gzwrite(file, payload.data() + written, chunk) == static_cast<int>(chunk);
      written += chunk;
    }
    if (gzclose(file) != Z_OK || !ok) throw IoError("write failed for " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(&header), kHeaderSize);
  out.write(extension_flags, 4);
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

// Nearest orthonormal matrix (polar factor).
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

Eigen::Matrix3d quaternion_to_matrix(double b, double c, double d, double qfac) {
  double a = 1.0 - (b * b + c * c + d * d);
  if (a < 1e-7) {
    // b, c, d describe a 180 degree rotation; renormalise
    const double norm = std::sqrt(b * b + c * c + d * d);
    b /= norm;
    c /= norm;
    d /= norm;
    a = 0.0;
  } else {
    a = std::sqrt(a);
  }
  Eigen::Matrix3d r;
  r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
      2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
      2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b;
  r.col(2) *= qfac < 0 ? -1.0 : 1.0;
  return r;
}

struct DecodedHeader {
  NiftiHeader raw{};
  NiftiDatatype datatype = NiftiDatatype::float32;
  std::size_t voxel_offset = kVoxOffset;
  std::size_t element_count = 0;
};

DecodedHeader decode_header(const std::vector<unsigned char>& bytes, int expected_rank) {
  if (bytes.size() < kHeaderSize) throw FormatError("file shorter than the 348-byte header (sizeof_hdr)");
  DecodedHeader out;
  std::memcpy(&out.raw, bytes.data(), kHeaderSize);
  const NiftiHeader& h = out.raw;
  if (h.sizeof_hdr != 348) {
    throw FormatError("sizeof_hdr is " + std::to_string(h.sizeof_hdr) + ", expected 348 (little-endian NIfTI-1)");
  }
  if (std::memcmp(h.magic, "n+1\0", 4) != 0) throw FormatError("magic is not \"n+1\"");
  if (!is_supported(h.datatype)) {
    throw UnsupportedFormatError("unsupported NIfTI datatype code " + std::to_string(h.datatype));
  }
  out.datatype = static_cast<NiftiDatatype>(h.datatype);
  if (h.bitpix != 8 * bytes_per_voxel(out.datatype)) {
    throw FormatError("bitpix " + std::to_string(h.bitpix) + " does not match datatype");
  }
  if (h.dim[0] != expected_rank) {
    throw ShapeError("dim[0] is " + std::to_string(h.dim[0]) + ", expected " + std::to_string(expected_rank));
  }
  out.element_count = 1;
  for (int a = 1; a <= expected_rank; ++a) {
    if (h.dim[a] < 1) throw FormatError("dim[" + std::to_string(a) + "] must be >= 1");
    out.element_count *= static_cast<std::size_t>(h.dim[a]);
  }
  for (int a = 1; a <= 3; ++a) {
    if (!(std::abs(h.pixdim[a]) > 0.0f) || !std::isfinite(h.pixdim[a])) {
      throw FormatError("pixdim[" + std::to_string(a) + "] must be nonzero");
    }
  }
  if (!(h.vox_offset >= static_cast<float>(kVoxOffset)) || !std::isfinite(h.vox_offset)) {
    throw FormatError("vox_offset " + std::to_string(h.vox_offset) + " is below 352");
  }
  out.voxel_offset = static_cast<std::size_t>(h.vox_offset);
  const std::size_t needed = out.voxel_offset + out.element_count * bytes_per_voxel(out.datatype);
  if (bytes.size() < needed) throw FormatError("voxel data truncated (vox_offset/dim)");
  return out;
}

Grid decode_grid(const NiftiHeader& h, OrientationSource* source) {
  Grid grid;
  for (int a = 0; a < 3; ++a) {
    grid.dims[a] = static_cast<std::size_t>(h.dim[a + 1]);
    grid.spacing[a] = std::abs(static_cast<double>(h.pixdim[a + 1]));
  }
  if (h.sform_code > 0) {
    Eigen::Matrix3d m;
    const float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m(r, c) = rows[r][c];
      grid.origin[r] = rows[r][3];
    }
    for (int c = 0; c < 3; ++c) {
      const double norm = m.col(c).norm();
      if (!(norm > 0.0)) throw FormatError("srow column " + std::to_string(c) + " is zero");
      m.col(c) /= norm;
    }
    grid.direction = orthonormalize(m);
    *source = OrientationSource::sform;
  } else if (h.qform_code > 0) {
    grid.direction = orthonormalize(quaternion_to_matrix(h.quatern_b, h.quatern_c, h.quatern_d, h.pixdim[0]));
    grid.origin = Eigen::Vector3d(h.qoffset_x, h.qoffset_y, h.qoffset_z);
    *source = OrientationSource::qform;
  } else {
    *source = OrientationSource::pixdim;
  }
  grid.validate();
  return grid;
}

template <typename T>
T load_scalar(const unsigned char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

double load_voxel(const unsigned char* base, NiftiDatatype type, std::size_t n) {
  switch (type) {
    case NiftiDatatype::uint8: return base[n];
    case NiftiDatatype::int16: return load_scalar<std::int16_t>(base + 2 * n);
    case NiftiDatatype::int32: return load_scalar<std::int32_t>(base + 4 * n);
    case NiftiDatatype::float32: return load_scalar<float>(base + 4 * n);
    case NiftiDatatype::float64: return load_scalar<double>(base + 8 * n);
  }
  return 0.0;
}

struct Loaded {
  Grid grid;
  std::vector<double> values;
  LoadReport report;
};

Loaded load(const std::filesystem::path& path) {
  Loaded out;
  const auto bytes = read_file(path, &out.report.gzipped);
  const DecodedHeader header = decode_header(bytes, 3);
  out.grid = decode_grid(header.raw, &out.report.orientation);
  out.report.datatype = header.datatype;
  out.report.scl_slope = header.raw.scl_slope;
  out.report.scl_inter = header.raw.scl_inter;
  const double slope = header.raw.scl_slope;
  const double inter = header.raw.scl_inter;
  // slope 0 means "no scaling"; slope 1 / inter 0 is the identity anyway
  out.report.scaled = std::isfinite(slope) && slope != 0.0 && !(slope == 1.0 && inter == 0.0);
  const unsigned char* base = bytes.data() + header.voxel_offset;
  out.values.resize(header.element_count);
  for (std::size_t n = 0; n < header.element_count; ++n) {
    const double raw = load_voxel(base, header.datatype, n);
    out.values[n] = out.report.scaled ? raw * slope + inter : raw;
  }
  return out;
}

NiftiHeader make_header(const Grid& grid, NiftiDatatype type, const std::string& description) {
  NiftiHeader h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  for (int a = 0; a < 3; ++a) {
    if (grid.dims[a] > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max())) {
      throw ShapeError("dimension exceeds the NIfTI-1 limit of 32767");
    }
    h.dim[a + 1] = static_cast<std::int16_t>(grid.dims[a]);
    h.pixdim[a + 1] = static_cast<float>(grid.spacing[a]);
  }
  for (int a = 4; a < 8; ++a) {
    h.dim[a] = 1;
    h.pixdim[a] = 1.0f;
  }
  h.datatype = static_cast<std::int16_t>(type);
  h.bitpix = static_cast<std::int16_t>(8 * bytes_per_voxel(type));
  h.vox_offset = static_cast<float>(kVoxOffset);
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = kUnitsMillimetre;
  std::strncpy(h.descrip, description.c_str(), sizeof(h.descrip) - 1);

  Eigen::Matrix3d rotation = grid.direction;
  double qfac = 1.0;
  if (rotation.determinant() < 0.0) {
    qfac = -1.0;
    rotation.col(2) *= -1.0;
  }
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  h.pixdim[0] = static_cast<float>(qfac);
  h.qform_code = 1;
  h.quatern_b = static_cast<float>(q.x());
  h.quatern_c = static_cast<float>(q.y());
  h.quatern_d = static_cast<float>(q.z());
  h.qoffset_x = static_cast<float>(grid.origin[0]);
  h.qoffset_y = static_cast<float>(grid.origin[1]);
  h.qoffset_z = static_cast<float>(grid.origin[2]);

  h.sform_code = 1;
  const Eigen::Matrix3d scaled = grid.direction * grid.spacing.asDiagonal();
  float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rows[r][c] = static_cast<float>(scaled(r, c));
    rows[r][3] = static_cast<float>(grid.origin[r]);
  }
  std::memcpy(h.magic, "n+1\0", 4);
  return h;
}

template <typename T>
void store(std::vector<unsigned char>& out, std::size_t n, T value) {
  std::memcpy(out.data() + n * sizeof(T), &value, sizeof(T));
}

template <typename T>
T checked_integer(double value) {
  if (value != std::floor(value) || value < static_cast<double>(std::numeric_limits<T>::min()) ||
      value > static_cast<double>(std::numeric_limits<T>::max())) {
    throw ParameterError("value " + std::to_string(value) + " is not representable in the requested datatype");
  }
  return static_cast<T>(value);
}

template <typename Source>
std::vector<unsigned char> encode(std::span<const Source> values, NiftiDatatype type) {
  std::vector<unsigned char> out(values.size() * bytes_per_voxel(type));
  for (std::size_t n = 0; n < values.size(); ++n) {
    const double v = static_cast<double>(values[n]);
    switch (type) {
      case NiftiDatatype::uint8: store(out, n, checked_integer<std::uint8_t>(v)); break;
      case NiftiDatatype::int16: store(out, n, checked_integer<std::int16_t>(v)); break;
      case NiftiDatatype::int32: store(out, n, checked_integer<std::int32_t>(v)); break;
      case NiftiDatatype::float32: store(out, n, static_cast<float>(values[n])); break;
      case NiftiDatatype::float64: store(out, n, v); break;
    }
  }
  return out;
}

}  // namespace

const char* to_string(NiftiDatatype type) {
  switch (type) {
    case NiftiDatatype::uint8: return "uint8";
    case NiftiDatatype::int16: return "int16";
    case NiftiDatatype::int32: return "int32";
    case NiftiDatatype::float32: return "float32";
    case NiftiDatatype::float64: return "float64";
  }
  return "unknown";
}

const char* to_string(OrientationSource source) {
  switch (source) {
    case OrientationSource::sform: return "sform";
    case OrientationSource::qform: return "qform";
    case OrientationSource::pixdim: return "pixdim";
  }
  return "unknown";
}

bool has_gzip_suffix(const std::filesystem::path& path) { return path.extension() == ".gz"; }

Volume3 read_nifti(const std::filesystem::path& path, LoadReport* report) {
  Loaded loaded = load(path);
  std::vector<float> data(loaded.values.size());
  for (std::size_t n = 0; n < data.size(); ++n) data[n] = static_cast<float>(loaded.values[n]);
  if (report != nullptr) *report = loaded.report;
  return Volume3(std::move(loaded.grid), std::move(data));
}

LabelVolume read_nifti_labels(const std::filesystem::path& path, LoadReport* report) {
  Loaded loaded = load(path);
  std::vector<std::uint8_t> data(loaded.values.size());
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double v = loaded.values[n];
    if (v != 0.0 && v != 1.0 && v != 2.0) {
      throw FormatError("label value " + std::to_string(v) + " outside {0, 1, 2} in " + path.string());
    }
    data[n] = static_cast<std::uint8_t>(v);
  }
  if (report != nullptr) *report = loaded.report;
  return LabelVolume(std::move(loaded.grid), std::move(data));
}

void write_nifti(const Volume3& volume, const std::filesystem::path& path, const NiftiWriteOptions& options) {
  volume.grid().validate();
  const NiftiDatatype type = options.datatype.value_or(NiftiDatatype::float32);
  const NiftiHeader header = make_header(volume.grid(), type, options.description);
  write_file(path, header, encode<float>(volume.data(), type), options.gzip);
}

void write_nifti(const LabelVolume& labels, const std::filesystem::path& path, const NiftiWriteOptions& options) {
  labels.grid().validate();
  validate_labels(labels);
  const NiftiDatatype type = options.datatype.value_or(NiftiDatatype::uint8);
  const NiftiHeader header = make_header(labels.grid(), type, options.description);
  write_file(path, header, encode<std::uint8_t>(labels.data(), type), options.gzip);
}

void write_nifti_vector(const Grid& grid, const std::vector<float>& components,
                        const std::filesystem::path& path, bool gzip) {
  grid.validate();
  if (components.size() != 3 * grid.voxel_count()) {
    throw ShapeError("vector image needs 3 components per voxel");
  }
  NiftiHeader header = make_header(grid, NiftiDatatype::float32, "displacement (mm)");
  header.dim[0] = 5;
  header.dim[4] = 1;
  header.dim[5] = 3;
  header.intent_code = kIntentVector;
  std::strncpy(header.intent_name, "displacement", sizeof(header.intent_name) - 1);
  write_file(path, header, encode<float>(components, NiftiDatatype::float32), gzip);
}

std::vector<float> read_nifti_vector(const std::filesystem::path& path, Grid* grid) {
  bool gzipped = false;
  const auto bytes = read_file(path, &gzipped);
  const DecodedHeader header = decode_header(bytes, 5);
  if (header.raw.dim[4] != 1 || header.raw.dim[5] != 3) {
    throw ShapeError("vector image must have dims (nx, ny, nz, 1, 3)");
  }
  OrientationSource source{};
  NiftiHeader spatial = header.raw;
  spatial.dim[0] = 3;
  const Grid decoded = decode_grid(spatial, &source);
  if (grid != nullptr) *grid = decoded;
  std::vector<float> out(header.element_count);
  const unsigned char* base = bytes.data() + header.voxel_offset;
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = static_cast<float>(load_voxel(base, header.datatype, n));
  }
  return out;
}

}  // namespace cbct
