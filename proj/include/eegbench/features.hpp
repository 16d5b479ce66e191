#pragma once

#include <string>
#include <vector>

#include "eegbench/common.hpp"

namespace eegbench::features {

enum class Family { bandpower, de, hjorth, temporal, pca, tangent };

std::string family_name(Family f);
Family parse_family(const std::string& name);

struct Band {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
};

/// delta 0.5-4, theta 4-8, alpha 8-13, beta 13-30, gamma 30-40 Hz.
const std::vector<Band>& default_bands();

struct Column {
    Family family = Family::bandpower;
    int channel = -1;    // -1 when the column has no single-channel home
    std::string detail;  // band name, statistic name or component index
};

/// trials x D values with one registry entry per column.
struct FeatureMatrix {
    Matrix values;
    std::vector<Column> registry;

    Index dims() const { return values.cols(); }
    Index trials() const { return values.rows(); }
    void validate() const;
};

enum class BandPowerMethod { welch, variance };

/// ln of in-band power per channel and band. The Welch path integrates a
/// 128-sample Hann-segment density over the band; the variance path uses the
/// variance of the zero-phase band-filtered signal.
FeatureMatrix band_power(const EpochSet& epochs, const std::vector<Band>& bands = default_bands(),
                         BandPowerMethod method = BandPowerMethod::welch);

/// 0.5 * ln(2 pi e sigma^2) of each band-filtered channel.
FeatureMatrix differential_entropy(const EpochSet& epochs, const std::vector<Band>& bands = default_bands());

/// Activity, mobility and complexity per channel.
FeatureMatrix hjorth(const EpochSet& epochs);

/// Mean, variance, skewness, excess kurtosis, max and min per channel
/// (population moments).
FeatureMatrix temporal_stats(const EpochSet& epochs);

FeatureMatrix concat_features(const std::vector<FeatureMatrix>& parts);

/// Extracts and concatenates the requested families in the given order.
FeatureMatrix extract(const EpochSet& epochs, const std::vector<Family>& families,
                      const std::vector<Band>& bands = default_bands());

/// Number of columns a family contributes per channel (5, 5, 3, 6).
int columns_per_channel(Family family, std::size_t n_bands = 5);

struct PcaModel {
    Matrix components;  // D x k, orthonormal columns
    Vector mean;
    Vector explained_variance_ratio;
    std::string fit_scope;
};

PcaModel fit_pca(const FeatureMatrix& train, Index k, std::string fit_scope);
FeatureMatrix apply_pca(const PcaModel& model, const FeatureMatrix& any);

/// CSV with a registry header row (family:channel:detail) then one row per trial.
std::string to_csv(const FeatureMatrix& fm, const std::vector<std::string>& channel_names = {});

}  // namespace eegbench::features
