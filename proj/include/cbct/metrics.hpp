#pragma once

#include <cstdint>
#include <string>

#include "cbct/volume.hpp"

namespace cbct {

double rmse(const Volume3& a, const Volume3& b);

/// 20 log10(range) - 20 log10(rmse); +infinity when the volumes match.
double psnr(const Volume3& a, const Volume3& b, double data_range);

/// 2 |A n B| / (|A| + |B|) for voxels equal to `label`, per volume.
/// Both empty gives 1, exactly one empty gives 0.
double dice(const LabelVolume& a, const LabelVolume& b, std::uint8_t label);

/// "name=value" with six significant digits; infinities print as "inf".
std::string format_metric(const std::string& name, double value);

}  // namespace cbct
