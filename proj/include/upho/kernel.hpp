#pragma once

#include <string_view>

namespace upho {

enum class Kernel { Gaussian, Bisquare };

/// Distance-decay weight in [0, 1]. Gaussian: exp(-(d/b)^2 / 2);
/// Bisquare: (1 - (d/b)^2)^2 inside the bandwidth, 0 at or beyond it.
/// Throws Error(NonpositiveBandwidth) for b <= 0.
double kernel_weight(double distance, double bandwidth, Kernel kernel);

std::string_view to_string(Kernel kernel);
Kernel parse_kernel(std::string_view text);

}  // namespace upho
