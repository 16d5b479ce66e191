#include "eegbench/features.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "eegbench/signal.hpp"

namespace eegbench::features {

namespace {

constexpr double kVarianceFloor = 1e-12;

double population_variance(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    const double mean = x.mean();
    return (x.array() - mean).square().mean();
}

FeatureMatrix allocate(const EpochSet& epochs, Index per_channel) {
    FeatureMatrix fm;
    fm.values.resize(static_cast<Index>(epochs.trials()), epochs.channels() * per_channel);
    return fm;
}

void check_bands(const std::vector<Band>& bands, double fs) {
    for (const auto& b : bands) {
        if (!(b.lo > 0.0) || !(b.hi > b.lo)) throw DomainError("band '" + b.name + "' has invalid edges");
        if (!(b.hi < fs / 2.0)) throw DomainError("band '" + b.name + "' extends past Nyquist");
    }
}

}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::bandpower: return "bandpower";
        case Family::de: return "de";
        case Family::hjorth: return "hjorth";
        case Family::temporal: return "temporal";
        case Family::pca: return "pca";
        case Family::tangent: return "tangent";
    }
    return "?";
}

Family parse_family(const std::string& name) {
    for (auto f : {Family::bandpower, Family::de, Family::hjorth, Family::temporal, Family::pca, Family::tangent})
        if (family_name(f) == name) return f;
    throw ConfigError("unknown feature family '" + name + "'");
}

const std::vector<Band>& default_bands() {
    static const std::vector<Band> bands{
        {"delta", 0.5, 4.0}, {"theta", 4.0, 8.0}, {"alpha", 8.0, 13.0}, {"beta", 13.0, 30.0}, {"gamma", 30.0, 40.0}};
    return bands;
}

int columns_per_channel(Family family, std::size_t n_bands) {
    switch (family) {
        case Family::bandpower:
        case Family::de: return static_cast<int>(n_bands);
        case Family::hjorth: return 3;
        case Family::temporal: return 6;
        default: throw DomainError("family '" + family_name(family) + "' has no per-channel layout");
    }
}

void FeatureMatrix::validate() const {
    if (static_cast<Index>(registry.size()) != values.cols())
        throw DomainError("FeatureMatrix: registry has " + std::to_string(registry.size()) + " entries for " +
                          std::to_string(values.cols()) + " columns");
}

FeatureMatrix band_power(const EpochSet& epochs, const std::vector<Band>& bands, BandPowerMethod method) {
    check_bands(bands, epochs.fs);
    const auto nb = static_cast<Index>(bands.size());
    FeatureMatrix fm = allocate(epochs, nb);
    std::vector<signal::Sos> filters;
    if (method == BandPowerMethod::variance)
        for (const auto& b : bands) filters.push_back(signal::butter_bandpass(4, b.lo, b.hi, epochs.fs));

    for (std::size_t t = 0; t < epochs.trials(); ++t) {
        const auto& trial = epochs.data[t];
        for (Index c = 0; c < trial.rows(); ++c) {
            if (method == BandPowerMethod::welch) {
                const auto psd = signal::welch(trial.row(c).transpose(), epochs.fs, 128);
                for (Index b = 0; b < nb; ++b) {
                    const auto& band = bands[static_cast<std::size_t>(b)];
                    fm.values(static_cast<Index>(t), c * nb + b) =
                        std::log(std::max(signal::band_integral(psd, band.lo, band.hi), kVarianceFloor));
                }
            } else {
                for (Index b = 0; b < nb; ++b) {
                    const Vector filtered = signal::sosfiltfilt(filters[static_cast<std::size_t>(b)], trial.row(c).transpose());
                    fm.values(static_cast<Index>(t), c * nb + b) =
                        std::log(std::max(population_variance(filtered.transpose()), kVarianceFloor));
                }
            }
        }
    }
    for (Index c = 0; c < epochs.channels(); ++c)
        for (const auto& b : bands) fm.registry.push_back({Family::bandpower, static_cast<int>(c), b.name});
    return fm;
}

FeatureMatrix differential_entropy(const EpochSet& epochs, const std::vector<Band>& bands) {
    check_bands(bands, epochs.fs);
    const auto nb = static_cast<Index>(bands.size());
    FeatureMatrix fm = allocate(epochs, nb);
    std::vector<signal::Sos> filters;
    for (const auto& b : bands) filters.push_back(signal::butter_bandpass(4, b.lo, b.hi, epochs.fs));
    const double offset = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

    std::size_t clamped = 0;
    for (std::size_t t = 0; t < epochs.trials(); ++t) {
        const auto& trial = epochs.data[t];
        for (Index c = 0; c < trial.rows(); ++c) {
            for (Index b = 0; b < nb; ++b) {
                const Vector filtered = signal::sosfiltfilt(filters[static_cast<std::size_t>(b)], trial.row(c).transpose());
                double var = population_variance(filtered.transpose());
                if (!(var > kVarianceFloor)) {
                    var = kVarianceFloor;
                    ++clamped;
                }
                fm.values(static_cast<Index>(t), c * nb + b) = offset + 0.5 * std::log(var);
            }
        }
    }
    if (clamped > 0) warn("differential_entropy: " + std::to_string(clamped) + " band variances clamped to epsilon");
    for (Index c = 0; c < epochs.channels(); ++c)
        for (const auto& b : bands) fm.registry.push_back({Family::de, static_cast<int>(c), b.name});
    return fm;
}

FeatureMatrix hjorth(const EpochSet& epochs) {
    if (epochs.trials() > 0 && epochs.samples() < 3) throw DomainError("hjorth: need at least three samples");
    FeatureMatrix fm = allocate(epochs, 3);
    for (std::size_t t = 0; t < epochs.trials(); ++t) {
        const auto& trial = epochs.data[t];
        const Index n = trial.cols();
        for (Index c = 0; c < trial.rows(); ++c) {
            const Eigen::RowVectorXd x = trial.row(c);
            const Eigen::RowVectorXd dx = x.tail(n - 1) - x.head(n - 1);
            const Eigen::RowVectorXd ddx = dx.tail(n - 2) - dx.head(n - 2);
            const double activity = population_variance(x);
            const double var_dx = population_variance(dx);
            const double var_ddx = population_variance(ddx);
            double mobility = 0.0, complexity = 0.0;
            if (activity > 0.0) {
                mobility = std::sqrt(var_dx / activity);
                if (var_dx > 0.0 && mobility > 0.0) complexity = std::sqrt(var_ddx / var_dx) / mobility;
            }
            fm.values(static_cast<Index>(t), 3 * c) = activity;
            fm.values(static_cast<Index>(t), 3 * c + 1) = mobility;
            fm.values(static_cast<Index>(t), 3 * c + 2) = complexity;
        }
    }
    for (Index c = 0; c < epochs.channels(); ++c)
        for (const char* name : {"activity", "mobility", "complexity"})
            fm.registry.push_back({Family::hjorth, static_cast<int>(c), name});
    return fm;
}

FeatureMatrix temporal_stats(const EpochSet& epochs) {
    if (epochs.trials() > 0 && epochs.samples() < 4) throw DomainError("temporal_stats: need at least four samples");
    FeatureMatrix fm = allocate(epochs, 6);
    for (std::size_t t = 0; t < epochs.trials(); ++t) {
        const auto& trial = epochs.data[t];
        for (Index c = 0; c < trial.rows(); ++c) {
            const auto x = trial.row(c).array();
            const double mean = x.mean();
            const Eigen::ArrayXd d = (x - mean).transpose();
            const double m2 = d.square().mean();
            double skew = 0.0, kurt = 0.0;
            if (m2 > 0.0) {
                skew = d.cube().mean() / std::pow(m2, 1.5);
                kurt = d.square().square().mean() / (m2 * m2) - 3.0;
            }
            const auto row = static_cast<Index>(t);
            fm.values(row, 6 * c) = mean;
            fm.values(row, 6 * c + 1) = m2;
            fm.values(row, 6 * c + 2) = skew;
            fm.values(row, 6 * c + 3) = kurt;
            fm.values(row, 6 * c + 4) = x.maxCoeff();
            fm.values(row, 6 * c + 5) = x.minCoeff();
        }
    }
    for (Index c = 0; c < epochs.channels(); ++c)
        for (const char* name : {"mean", "variance", "skewness", "kurtosis", "max", "min"})
            fm.registry.push_back({Family::temporal, static_cast<int>(c), name});
    return fm;
}

FeatureMatrix concat_features(const std::vector<FeatureMatrix>& parts) {
    if (parts.empty()) throw DomainError("concat_features: nothing to concatenate");
    Index cols = 0;
    for (const auto& p : parts) {
        p.validate();
        if (p.trials() != parts.front().trials()) throw DomainError("concat_features: trial counts differ");
        cols += p.dims();
    }
    FeatureMatrix out;
    out.values.resize(parts.front().trials(), cols);
    Index at = 0;
    for (const auto& p : parts) {
        out.values.middleCols(at, p.dims()) = p.values;
        out.registry.insert(out.registry.end(), p.registry.begin(), p.registry.end());
        at += p.dims();
    }
    return out;
}

FeatureMatrix extract(const EpochSet& epochs, const std::vector<Family>& families, const std::vector<Band>& bands) {
    std::vector<FeatureMatrix> parts;
    for (auto f : families) {
        switch (f) {
            case Family::bandpower: parts.push_back(band_power(epochs, bands)); break;
            case Family::de: parts.push_back(differential_entropy(epochs, bands)); break;
            case Family::hjorth: parts.push_back(hjorth(epochs)); break;
            case Family::temporal: parts.push_back(temporal_stats(epochs)); break;
            default: throw DomainError("extract: family '" + family_name(f) + "' is not computed from epochs");
        }
    }
    return concat_features(parts);
}

PcaModel fit_pca(const FeatureMatrix& train, Index k, std::string fit_scope) {
    train.validate();
    const Index n = train.trials(), d = train.dims();
    if (k < 1 || k > std::min(n - 1, d))
        throw DomainError("fit_pca: k=" + std::to_string(k) + " outside [1, min(trials-1, D)]");
    PcaModel model;
    model.mean = train.values.colwise().mean().transpose();
    const Matrix centered = train.values.rowwise() - model.mean.transpose();
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    Matrix v = svd.matrixV().leftCols(k);
    // deterministic signs: largest-magnitude loading positive
    for (Index j = 0; j < k; ++j) {
        Index arg = 0;
        v.col(j).cwiseAbs().maxCoeff(&arg);
        if (v(arg, j) < 0.0) v.col(j) *= -1.0;
    }
    const Vector s2 = svd.singularValues().cwiseAbs2();
    const double total = s2.sum();
    model.explained_variance_ratio = total > 0.0 ? Vector(s2.head(k) / total) : Vector::Zero(k);
    model.components = std::move(v);
    model.fit_scope = std::move(fit_scope);
    return model;
}

FeatureMatrix apply_pca(const PcaModel& model, const FeatureMatrix& any) {
    any.validate();
    if (any.dims() != model.mean.size()) throw DomainError("apply_pca: dimension mismatch");
    FeatureMatrix out;
    out.values = (any.values.rowwise() - model.mean.transpose()) * model.components;
    for (Index j = 0; j < model.components.cols(); ++j)
        out.registry.push_back({Family::pca, -1, "pc" + std::to_string(j + 1)});
    return out;
}

std::string to_csv(const FeatureMatrix& fm, const std::vector<std::string>& channel_names) {
    fm.validate();
    std::ostringstream out;
    for (std::size_t j = 0; j < fm.registry.size(); ++j) {
        const auto& col = fm.registry[j];
        if (j) out << ',';
        out << family_name(col.family) << ':';
        if (col.channel >= 0) {
            if (static_cast<std::size_t>(col.channel) < channel_names.size()) out << channel_names[static_cast<std::size_t>(col.channel)];
            else out << col.channel;
        }
        out << ':' << col.detail;
    }
    out << '\n';
    char buf[32];
    for (Index i = 0; i < fm.trials(); ++i) {
        for (Index j = 0; j < fm.dims(); ++j) {
            std::snprintf(buf, sizeof buf, "%.9g", fm.values(i, j));
            if (j) out << ',';
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace eegbench::features
