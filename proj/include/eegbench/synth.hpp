#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eegbench/common.hpp"
#include "eegbench/ingest.hpp"

namespace eegbench::synth {

enum class Plant { none, band_amplitude, transient_erp, channel_restricted };

std::string plant_name(Plant p);
Plant parse_plant(const std::string& name);

/// 61 electrode labels of the 10-10 system, used when no montage is given.
const std::vector<std::string>& standard_montage();

struct SynthSpec {
    int subjects = 16;
    int trials_per_class = 20;
    std::vector<std::string> class_names{"a", "e", "i", "o", "u"};
    std::vector<std::string> channels = standard_montage();
    double fs = 256.0;
    double tmin = -0.2;
    double tmax = 1.0;

    double noise_uv = 10.0;      // RMS of the background
    double pink_fraction = 0.7;  // share of background variance that is 1/f

    Plant plant = Plant::none;
    double snr = 0.0;
    std::vector<std::string> plant_channels;  // empty: first 8 channels
    std::vector<int> plant_classes;           // empty: class k scales by 1 + k snr
    double band_hz = 10.0;
    double band_uv = 10.0;
    double erp_latency = 0.3;  // s after stimulus
    double erp_width = 0.04;   // Gaussian sd, s
    double erp_uv = 5.0;

    double gain_sigma = 0.1;    // log-normal per-subject channel gain
    double jitter_sigma = 0.0;  // per-subject latency shift sd, s

    std::uint64_t seed = 42;

    /// Throws ConfigError on invalid settings.
    void validate() const;
    int classes() const { return static_cast<int>(class_names.size()); }
    Index samples() const;
};

struct GroundTruth {
    std::vector<Index> plant_channels;
    std::vector<double> class_scale;  // band plants
    Matrix topography;                // classes x channels, ERP plant
    Matrix subject_gain;              // subjects x channels
    double erp_latency = 0.0;
};

/// One continuous recording per subject with stimulus events.
struct SubjectRecording {
    std::string subject;
    std::string recording;
    ingest::Recording data;
};

struct Simulation {
    std::vector<SubjectRecording> recordings;
    GroundTruth truth;
    ingest::LabelMap label_map;
};

/// Continuous data for every subject. Deterministic for a seed and
/// independent of `threads`.
Simulation simulate(const SynthSpec& spec, int threads = 1);

/// Epochs cut from `simulate` output.
EpochSet generate(const SynthSpec& spec, GroundTruth* truth = nullptr, int threads = 1);

struct FixtureOptions {
    /// Subject index and within-subject trial that receive a 500 uV step; -1 disables.
    int artifact_subject = -1;
    int artifact_trial = -1;
    double artifact_uv = 500.0;
    ingest::EdfWriteOptions edf;
};

struct Fixture {
    std::filesystem::path root;
    std::vector<std::filesystem::path> files;
    ingest::LabelMap label_map;
};

/// Writes `<root>/sub-XX/eeg/sub-XX_task-vowels_eeg.edf` for every subject.
Fixture make_edf_fixture(const SynthSpec& spec, const std::filesystem::path& root, const FixtureOptions& options = {});

}  // namespace eegbench::synth
