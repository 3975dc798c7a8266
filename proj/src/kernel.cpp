#include "upho/kernel.hpp"

#include <cmath>
#include <string>

#include "upho/error.hpp"

namespace upho {

double kernel_weight(double distance, double bandwidth, Kernel kernel) {
    if (!(bandwidth > 0.0)) {
        throw Error(Errc::NonpositiveBandwidth, "bandwidth must be > 0, got " + std::to_string(bandwidth));
    }
    if (distance < 0.0) {
        throw Error(Errc::InvalidArgument, "distance must be >= 0");
    }
    const double r = distance / bandwidth;
    switch (kernel) {
        case Kernel::Gaussian:
            return std::exp(-0.5 * r * r);
        case Kernel::Bisquare:
            if (r >= 1.0) {
                return 0.0;
            }
            return (1.0 - r * r) * (1.0 - r * r);
    }
    return 0.0;
}

std::string_view to_string(Kernel kernel) { return kernel == Kernel::Gaussian ? "gaussian" : "bisquare"; }

Kernel parse_kernel(std::string_view text) {
    if (text == "gaussian") {
        return Kernel::Gaussian;
    }
    if (text == "bisquare") {
        return Kernel::Bisquare;
    }
    throw Error(Errc::InvalidArgument, "kernel must be gaussian or bisquare, got '" + std::string(text) + "'");
}

}  // namespace upho
