#pragma once

#include <string>
#include <vector>

#include "eegbench/common.hpp"
#include "eegbench/ingest.hpp"

namespace eegbench::preprocess {

using ingest::Recording;

/// Subtracts the across-channel mean at every sample.
Recording rereference_average(Recording rec);

/// Zero-phase order-`order` Butterworth bandpass applied forward and backward.
Recording bandpass(Recording rec, double lo = 0.5, double hi = 40.0, int order = 4);
EpochSet bandpass(EpochSet epochs, double lo = 0.5, double hi = 40.0, int order = 4);

/// Polyphase resampling; event sample indices are rescaled to the new rate.
Recording resample(Recording rec, double target_fs = 256.0);

struct ChannelMask {
    std::vector<bool> bad;
    std::vector<double> zscores;  // z-score of log-variance per channel

    std::size_t count() const;
};

/// Flags channels whose log-variance z-score (across channels) exceeds
/// `z_thresh`. Channels that are already flat are never flagged.
ChannelMask detect_bad_channels(const EpochSet& epochs, double z_thresh = 3.0);

/// Sets every flagged channel to zero in all trials.
EpochSet zero_fill(EpochSet epochs, const ChannelMask& mask);

/// Drops trials whose peak-to-peak amplitude exceeds `p2p_limit` on any
/// channel (strict inequality). Order of survivors is preserved.
EpochSet reject_artifacts(const EpochSet& epochs, double p2p_limit = 400.0);

/// Subtracts the per-trial, per-channel mean over [window_start, window_end] s.
EpochSet baseline_correct(EpochSet epochs, double window_start = -0.2, double window_end = 0.0);

struct Normalizer {
    Vector mean;
    Vector stddev;
    std::string fit_scope;
    std::vector<bool> clamped;  // channels whose std fell below epsilon
};

inline constexpr double kStdEpsilon = 1e-12;

/// Per-channel mean and standard deviation pooled over all training trials and samples.
Normalizer fit_normalizer(const EpochSet& train, std::string fit_scope);

/// Applies train statistics; never refits.
EpochSet apply_normalizer(const Normalizer& norm, EpochSet epochs);

struct PreprocessConfig {
    bool rereference = true;
    double resample_fs = 256.0;
    double bandpass_lo = 0.5;
    double bandpass_hi = 40.0;
    int bandpass_order = 4;
    double bad_channel_z = 3.0;
    double reject_p2p_uv = 400.0;
    double epoch_tmin = -0.2;
    double epoch_tmax = 1.0;
    double baseline_start = -0.2;
    double baseline_end = 0.0;

    /// Stable hash over every parameter, carried in archive manifests.
    std::string hash() const;
};

/// Step names in application order. Normalization is the fold-scoped last
/// step and is applied by the evaluation harness.
const std::vector<std::string>& canonical_steps();

struct SubjectResult {
    EpochSet epochs;
    ChannelMask bad_channels;
    std::size_t rejected = 0;
    std::vector<std::string> steps;
};

/// Runs the continuous and epoch-level steps for one subject's recordings.
SubjectResult preprocess_subject(const std::vector<Recording>& recordings, const ingest::LabelMap& label_map,
                                 const PreprocessConfig& cfg, const std::string& subject,
                                 const std::vector<std::string>& recording_ids);

/// Concatenates epoch sets that share channels, rate and window.
EpochSet concat(const std::vector<EpochSet>& parts);

}  // namespace eegbench::preprocess
