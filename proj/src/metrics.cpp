#include "cbct/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "cbct/error.hpp"

namespace cbct {
namespace {

template <typename T>
void require_same_grid(const Image<T>& a, const Image<T>& b) {
  if (!same_geometry(a.grid(), b.grid(), 1e-6)) throw ShapeError("metric inputs must share a grid");
}

}  // namespace

double rmse(const Volume3& a, const Volume3& b) {
  require_same_grid(a, b);
  const auto x = a.data();
  const auto y = b.data();
  double sum = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double d = static_cast<double>(x[n]) - static_cast<double>(y[n]);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(x.size()));
}

double psnr(const Volume3& a, const Volume3& b, double data_range) {
  if (!(data_range > 0.0)) throw ParameterError("data_range must be positive");
  const double error = rmse(a, b);
  if (error == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(data_range) - 20.0 * std::log10(error);
}

double dice(const LabelVolume& a, const LabelVolume& b, std::uint8_t label) {
  require_same_grid(a, b);
  const auto x = a.data();
  const auto y = b.data();
  std::size_t size_a = 0;
  std::size_t size_b = 0;
  std::size_t overlap = 0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const bool in_a = x[n] == label;
    const bool in_b = y[n] == label;
    size_a += in_a;
    size_b += in_b;
    overlap += in_a && in_b;
  }
  if (size_a + size_b == 0) return 1.0;
  return 2.0 * static_cast<double>(overlap) / static_cast<double>(size_a + size_b);
}

std::string format_metric(const std::string& name, double value) {
  std::ostringstream out;
  out << name << '=';
  if (std::isinf(value)) {
    out << (value > 0 ? "inf" : "-inf");
  } else {
    out << std::setprecision(6) << value;
  }
  return out.str();
}

}  // namespace cbct
