#pragma once

#include <cstdint>
#include <vector>

#include "eegbench/classify.hpp"

namespace eegbench::classify::detail {

/// Per-feature quantile bins learned from training data. A value maps to the
/// number of thresholds strictly below it, so `bin <= b` iff `x <= threshold[b]`.
struct Binner {
    std::vector<std::vector<double>> thresholds;

    static Binner fit(const Matrix& x, int max_bins);
    int bins(Index feature) const { return static_cast<int>(thresholds[static_cast<std::size_t>(feature)].size()) + 1; }
    /// Column-major n x D bin codes.
    std::vector<std::uint8_t> transform(const Matrix& x) const;
};

ModelPtr fit_gbdt(const ClassifierSpec& spec, const Matrix& x, const std::vector<int>& y, int classes);
ModelPtr fit_forest(const ClassifierSpec& spec, const Matrix& x, const std::vector<int>& y, int classes);

}  // namespace eegbench::classify::detail
