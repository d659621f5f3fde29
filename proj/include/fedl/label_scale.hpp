#pragma once

namespace fedl {

/// z-score standardization of the energy label.
struct LabelScale {
    double mean = 0.0;
    double stddev = 1.0;

    double standardize(double kwh) const noexcept { return (kwh - mean) / stddev; }
    double destandardize(double z) const noexcept { return z * stddev + mean; }
};

}  // namespace fedl
