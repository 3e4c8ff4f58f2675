#include "support.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <zlib.h>

namespace testing {

namespace {

template <typename T>
void put(std::vector<unsigned char>& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

}  // namespace

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  const auto base = std::filesystem::temp_directory_path();
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = base / (tag + "-" + std::to_string(rd()) + std::to_string(attempt));
    if (std::filesystem::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create temp dir");
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  return read_bytes(a) == read_bytes(b);
}

cbct::Volume3 random_volume(const cbct::Grid& grid, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  cbct::Volume3 v(grid);
  for (float& x : v.data()) x = static_cast<float>(dist(rng));
  return v;
}

cbct::Grid unit_grid(std::size_t nx, std::size_t ny, std::size_t nz) {
  cbct::Grid g;
  g.dims = {nx, ny, nz};
  return g;
}

std::vector<unsigned char> RawNifti::bytes() const {
  std::vector<unsigned char> buf(352, 0);
  put(buf, 0, sizeof_hdr);
  for (int i = 0; i < 8; ++i) put(buf, 40 + 2 * i, dims[i]);
  put(buf, 68, intent_code);
  put(buf, 70, datatype);
  put(buf, 72, bitpix);
  for (int i = 0; i < 8; ++i) put(buf, 76 + 4 * i, pixdim[i]);
  put(buf, 108, vox_offset);
  put(buf, 112, scl_slope);
  put(buf, 116, scl_inter);
  put(buf, 252, qform_code);
  put(buf, 254, sform_code);
  for (int i = 0; i < 3; ++i) put(buf, 256 + 4 * i, quatern[i]);
  for (int i = 0; i < 3; ++i) put(buf, 268 + 4 * i, qoffset[i]);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) put(buf, 280 + 16 * r + 4 * c, srow[r][c]);
  }
  std::memcpy(buf.data() + 344, magic, 4);
  buf.resize(static_cast<std::size_t>(vox_offset), 0);
  buf.insert(buf.end(), payload.begin(), payload.end());
  return buf;
}

void RawNifti::write(const std::filesystem::path& path, bool gzip) const {
  const auto data = bytes();
  if (gzip) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("gzopen failed");
    gzwrite(f, data.data(), static_cast<unsigned>(data.size()));
    gzclose(f);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

double march_line_integral(const cbct::Volume3& volume, const Eigen::Vector3d& source,
                           const Eigen::Vector3d& direction, double step_mm) {
  const cbct::Grid& g = volume.grid();
  const Eigen::Vector3d d = direction.normalized();
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double lo = g.origin[a] - 0.5 * g.spacing[a];
    const double hi = g.origin[a] + (static_cast<double>(g.dims[a]) - 0.5) * g.spacing[a];
    if (d[a] == 0.0) {
      if (source[a] < lo || source[a] >= hi) return 0.0;
      continue;
    }
    double ta = (lo - source[a]) / d[a];
    double tb = (hi - source[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t1 > t0)) return 0.0;
  const auto n = static_cast<std::size_t>(std::ceil((t1 - t0) / step_mm));
  const double h = (t1 - t0) / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const Eigen::Vector3d p = source + (t0 + (static_cast<double>(s) + 0.5) * h) * d;
    long idx[3];
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      idx[a] = static_cast<long>(std::floor((p[a] - g.origin[a]) / g.spacing[a] + 0.5));
      inside = inside && idx[a] >= 0 && idx[a] < static_cast<long>(g.dims[a]);
    }
    if (inside) sum += volume(static_cast<std::size_t>(idx[0]), static_cast<std::size_t>(idx[1]),
                              static_cast<std::size_t>(idx[2]));
  }
  return sum * h;
}

std::vector<double> direct_convolution(const std::vector<double>& x, const std::vector<double>& h) {
  const long c = static_cast<long>(h.size() / 2);
  const long n = static_cast<long>(x.size());
  std::vector<double> out(x.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (long m = -c; m <= c; ++m) {
      const long j = i - m;
      if (j >= 0 && j < n) acc += h[static_cast<std::size_t>(c + m)] * x[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

}  // namespace testing
