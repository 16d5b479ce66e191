#include "eegbench/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "eegbench/seed.hpp"
#include "eegbench/signal.hpp"

namespace eegbench::preprocess {

Recording rereference_average(Recording rec) {
    if (rec.samples.rows() < 2) throw DomainError("rereference_average: need at least two channels");
    const Eigen::RowVectorXd mean = rec.samples.colwise().mean();
    rec.samples.rowwise() -= mean;
    return rec;
}

Recording bandpass(Recording rec, double lo, double hi, int order) {
    if (!(lo > 0.0)) throw DomainError("bandpass: low cutoff must be positive");
    if (!(hi < rec.fs / 2.0)) throw DomainError("bandpass: high cutoff must be below Nyquist");
    const auto sos = signal::butter_bandpass(order, lo, hi, rec.fs);
    rec.samples = signal::sosfiltfilt_rows(sos, rec.samples);
    return rec;
}

EpochSet bandpass(EpochSet epochs, double lo, double hi, int order) {
    if (!(lo > 0.0)) throw DomainError("bandpass: low cutoff must be positive");
    if (!(hi < epochs.fs / 2.0)) throw DomainError("bandpass: high cutoff must be below Nyquist");
    const auto sos = signal::butter_bandpass(order, lo, hi, epochs.fs);
    for (auto& trial : epochs.data) trial = signal::sosfiltfilt_rows(sos, trial);
    return epochs;
}

Recording resample(Recording rec, double target_fs) {
    if (!(target_fs > 0.0)) throw DomainError("resample: target rate must be positive");
    if (target_fs > rec.fs) throw DomainError("resample: upsampling is not supported");
    if (target_fs == rec.fs) return rec;
    const auto [up, down] = signal::rational_ratio(rec.fs, target_fs);
    Matrix out;
    for (Index c = 0; c < rec.samples.rows(); ++c) {
        Vector y = signal::resample_poly(rec.samples.row(c).transpose(), up, down);
        if (c == 0) out.resize(rec.samples.rows(), y.size());
        out.row(c) = y.transpose();
    }
    const double ratio = target_fs / rec.fs;
    for (auto& ev : rec.events) ev.sample = std::llround(static_cast<double>(ev.sample) * ratio);
    std::erase_if(rec.events, [&](const ingest::Event& e) { return e.sample >= out.cols(); });
    rec.samples = std::move(out);
    rec.fs = target_fs;
    return rec;
}

std::size_t ChannelMask::count() const { return static_cast<std::size_t>(std::count(bad.begin(), bad.end(), true)); }

ChannelMask detect_bad_channels(const EpochSet& epochs, double z_thresh) {
    const Index channels = epochs.channels();
    if (channels < 2) throw DomainError("detect_bad_channels: need at least two channels");
    ChannelMask mask;
    mask.bad.assign(static_cast<std::size_t>(channels), false);
    mask.zscores.assign(static_cast<std::size_t>(channels), 0.0);
    if (epochs.trials() == 0) return mask;

    // Pooled variance of each channel across every sample of every trial.
    Vector sum = Vector::Zero(channels), sumsq = Vector::Zero(channels);
    double count = 0.0;
    for (const auto& trial : epochs.data) {
        sum += trial.rowwise().sum();
        sumsq += trial.array().square().rowwise().sum().matrix();
        count += static_cast<double>(trial.cols());
    }
    const Vector mean = sum / count;
    const Vector var = (sumsq / count - mean.cwiseAbs2()).cwiseMax(0.0);

    std::vector<double> logvar;
    std::vector<Index> live;
    for (Index c = 0; c < channels; ++c) {
        if (var[c] > 0.0) {
            logvar.push_back(std::log(var[c]));
            live.push_back(c);
        }
    }
    if (live.size() < 2) return mask;
    double mu = 0.0;
    for (double v : logvar) mu += v;
    mu /= static_cast<double>(logvar.size());
    double sd = 0.0;
    for (double v : logvar) sd += (v - mu) * (v - mu);
    sd = std::sqrt(sd / static_cast<double>(logvar.size()));
    if (sd == 0.0) return mask;
    for (std::size_t i = 0; i < live.size(); ++i) {
        const double z = (logvar[i] - mu) / sd;
        const auto c = static_cast<std::size_t>(live[i]);
        mask.zscores[c] = z;
        mask.bad[c] = z > z_thresh;
    }
    if (mask.count() == static_cast<std::size_t>(channels)) warn("detect_bad_channels: every channel flagged");
    return mask;
}

EpochSet zero_fill(EpochSet epochs, const ChannelMask& mask) {
    for (auto& trial : epochs.data)
        for (std::size_t c = 0; c < mask.bad.size(); ++c)
            if (mask.bad[c]) trial.row(static_cast<Index>(c)).setZero();
    return epochs;
}

EpochSet reject_artifacts(const EpochSet& epochs, double p2p_limit) {
    std::vector<std::size_t> keep;
    for (std::size_t t = 0; t < epochs.trials(); ++t) {
        const auto& trial = epochs.data[t];
        const Vector p2p = trial.rowwise().maxCoeff() - trial.rowwise().minCoeff();
        if (trial.cols() == 0 || p2p.maxCoeff() <= p2p_limit) keep.push_back(t);
    }
    if (keep.empty() && epochs.trials() > 0) throw DomainError("reject_artifacts: every trial exceeded the peak-to-peak limit");
    return epochs.subset(keep);
}

EpochSet baseline_correct(EpochSet epochs, double window_start, double window_end) {
    const Index n = epochs.samples();
    const double end_time = epochs.tmin + static_cast<double>(n - 1) / epochs.fs;
    // the grid starts at round(tmin * fs) / fs, up to half a sample from a nominal window edge
    const double half = 0.5 / epochs.fs + 1e-9;
    if (window_start < epochs.tmin - half || window_end > end_time + half || !(window_end > window_start))
        throw DomainError("baseline_correct: window lies outside the epoch");
    const auto first = std::max<Index>(0, static_cast<Index>(std::ceil((window_start - epochs.tmin) * epochs.fs - 1e-9)));
    const auto last = std::min<Index>(n - 1, static_cast<Index>(std::floor((window_end - epochs.tmin) * epochs.fs + 1e-9)));
    const Index len = last - first + 1;
    if (len < 1) throw DomainError("baseline_correct: window contains no samples");
    for (auto& trial : epochs.data) {
        const Vector mean = trial.middleCols(first, len).rowwise().mean();
        trial.colwise() -= mean;
    }
    return epochs;
}

Normalizer fit_normalizer(const EpochSet& train, std::string fit_scope) {
    if (train.trials() == 0) throw DomainError("fit_normalizer: empty training set");
    if (fit_scope.empty()) throw DomainError("fit_normalizer: fit scope must be named");
    const Index channels = train.channels();
    Vector sum = Vector::Zero(channels);
    double count = 0.0;
    for (const auto& trial : train.data) {
        sum += trial.rowwise().sum();
        count += static_cast<double>(trial.cols());
    }
    Normalizer norm;
    norm.mean = sum / count;
    Vector ss = Vector::Zero(channels);
    for (const auto& trial : train.data) ss += (trial.colwise() - norm.mean).array().square().rowwise().sum().matrix();
    norm.stddev = (ss / count).cwiseSqrt();
    norm.clamped.assign(static_cast<std::size_t>(channels), false);
    for (Index c = 0; c < channels; ++c) {
        if (norm.stddev[c] < kStdEpsilon) {
            norm.stddev[c] = kStdEpsilon;
            norm.clamped[static_cast<std::size_t>(c)] = true;
        }
    }
    norm.fit_scope = std::move(fit_scope);
    return norm;
}

EpochSet apply_normalizer(const Normalizer& norm, EpochSet epochs) {
    if (norm.mean.size() != epochs.channels()) throw DomainError("apply_normalizer: channel count mismatch");
    const Eigen::ArrayXd inv = norm.stddev.array().inverse();
    for (auto& trial : epochs.data) trial = ((trial.colwise() - norm.mean).array().colwise() * inv).matrix();
    return epochs;
}

std::string PreprocessConfig::hash() const {
    char buf[512];
    std::snprintf(buf, sizeof buf, "reref=%d;fs=%.17g;bp=%.17g,%.17g,%d;badz=%.17g;p2p=%.17g;epoch=%.17g,%.17g;base=%.17g,%.17g",
                  rereference ? 1 : 0, resample_fs, bandpass_lo, bandpass_hi, bandpass_order, bad_channel_z,
                  reject_p2p_uv, epoch_tmin, epoch_tmax, baseline_start, baseline_end);
    char out[32];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(fnv1a(buf)));
    return out;
}

const std::vector<std::string>& canonical_steps() {
    static const std::vector<std::string> steps{"rereference", "resample",  "bandpass", "epoch",
                                                "bad_channels", "artifact_rejection", "baseline", "normalize"};
    return steps;
}

EpochSet concat(const std::vector<EpochSet>& parts) {
    EpochSet out;
    bool first = true;
    for (const auto& p : parts) {
        if (p.trials() == 0 && p.channel_names.empty()) continue;
        if (first) {
            out.fs = p.fs;
            out.tmin = p.tmin;
            out.channel_names = p.channel_names;
            first = false;
        } else if (p.fs != out.fs || p.channel_names != out.channel_names || p.tmin != out.tmin) {
            throw DomainError("concat: epoch sets disagree on channels, rate or window");
        } else if (p.trials() > 0 && out.trials() > 0 && p.samples() != out.samples()) {
            throw DomainError("concat: epoch sets disagree on sample count");
        }
        out.data.insert(out.data.end(), p.data.begin(), p.data.end());
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
        out.subjects.insert(out.subjects.end(), p.subjects.begin(), p.subjects.end());
        out.onsets.insert(out.onsets.end(), p.onsets.begin(), p.onsets.end());
        out.recordings.insert(out.recordings.end(), p.recordings.begin(), p.recordings.end());
    }
    return out;
}

SubjectResult preprocess_subject(const std::vector<Recording>& recordings, const ingest::LabelMap& label_map,
                                 const PreprocessConfig& cfg, const std::string& subject,
                                 const std::vector<std::string>& recording_ids) {
    SubjectResult result;
    std::vector<EpochSet> parts;
    for (std::size_t i = 0; i < recordings.size(); ++i) {
        Recording rec = recordings[i];
        if (cfg.rereference) rec = rereference_average(std::move(rec));
        rec = resample(std::move(rec), cfg.resample_fs);
        rec = bandpass(std::move(rec), cfg.bandpass_lo, cfg.bandpass_hi, cfg.bandpass_order);
        const std::string id = i < recording_ids.size() ? recording_ids[i] : subject + "/" + std::to_string(i);
        parts.push_back(ingest::epoch_from_events(rec, cfg.epoch_tmin, cfg.epoch_tmax, label_map, subject, id));
    }
    if (cfg.rereference) result.steps.push_back("rereference");
    result.steps.insert(result.steps.end(), {"resample", "bandpass", "epoch"});

    EpochSet epochs = concat(parts);
    result.bad_channels = epochs.channels() >= 2 ? detect_bad_channels(epochs, cfg.bad_channel_z) : ChannelMask{};
    epochs = zero_fill(std::move(epochs), result.bad_channels);
    result.steps.push_back("bad_channels");

    const auto before = epochs.trials();
    epochs = reject_artifacts(epochs, cfg.reject_p2p_uv);
    result.rejected = before - epochs.trials();
    result.steps.push_back("artifact_rejection");

    epochs = baseline_correct(std::move(epochs), cfg.baseline_start, cfg.baseline_end);
    result.steps.push_back("baseline");
    result.epochs = std::move(epochs);
    return result;
}

}  // namespace eegbench::preprocess
