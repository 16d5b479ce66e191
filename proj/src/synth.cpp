#include "eegbench/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <set>

#include <unsupported/Eigen/FFT>

#include "eegbench/seed.hpp"
#include "parallel.hpp"

namespace eegbench::synth {

namespace fs = std::filesystem;

std::string plant_name(Plant p) {
    switch (p) {
        case Plant::none: return "none";
        case Plant::band_amplitude: return "band_amplitude";
        case Plant::transient_erp: return "transient_erp";
        case Plant::channel_restricted: return "channel_restricted";
    }
    return "?";
}

Plant parse_plant(const std::string& name) {
    for (auto p : {Plant::none, Plant::band_amplitude, Plant::transient_erp, Plant::channel_restricted})
        if (plant_name(p) == name) return p;
    throw ConfigError("unknown synth plant '" + name + "'");
}

const std::vector<std::string>& standard_montage() {
    static const std::vector<std::string> names{
        "Fp1", "Fpz", "Fp2", "AF7", "AF3", "AFz", "AF4", "AF8", "F7",  "F5",  "F3",  "F1",  "Fz",
        "F2",  "F4",  "F6",  "F8",  "FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8",
        "T7",  "C5",  "C3",  "C1",  "Cz",  "C2",  "C4",  "C6",  "T8",  "TP7", "CP5", "CP3", "CP1",
        "CPz", "CP2", "CP4", "CP6", "TP8", "P7",  "P5",  "P3",  "P1",  "Pz",  "P2",  "P4",  "P6",
        "P8",  "PO7", "PO3", "POz", "PO4", "PO8", "O1",  "Oz",  "O2"};
    return names;
}

Index SynthSpec::samples() const { return ingest::epoch_length(tmin, tmax, fs); }

void SynthSpec::validate() const {
    if (subjects < 1) throw ConfigError("synth: subjects must be >= 1");
    if (trials_per_class < 1) throw ConfigError("synth: trials per class must be >= 1");
    if (class_names.size() < 2) throw ConfigError("synth: need at least two classes");
    if (std::set<std::string>(class_names.begin(), class_names.end()).size() != class_names.size())
        throw ConfigError("synth: duplicate class names");
    if (channels.empty()) throw ConfigError("synth: no channels");
    if (std::set<std::string>(channels.begin(), channels.end()).size() != channels.size())
        throw ConfigError("synth: duplicate channel names");
    if (!(fs > 0.0) || std::floor(fs) != fs) throw ConfigError("synth: fs must be a positive integer rate");
    if (!(tmax > tmin) || tmin > 0.0) throw ConfigError("synth: window must contain the stimulus and be non-empty");
    if (samples() < 8) throw ConfigError("synth: epoch window shorter than 8 samples");
    if (!(noise_uv >= 0.0)) throw ConfigError("synth: noise_uv must be >= 0");
    if (!(pink_fraction >= 0.0 && pink_fraction <= 1.0)) throw ConfigError("synth: pink_fraction outside [0, 1]");
    if (!(snr >= 0.0)) throw ConfigError("synth: snr must be >= 0");
    if (!(gain_sigma >= 0.0) || !(jitter_sigma >= 0.0)) throw ConfigError("synth: variability scales must be >= 0");
    if (!(band_hz > 0.0 && band_hz < fs / 2.0)) throw ConfigError("synth: band_hz must lie below Nyquist");
    if (!(erp_width > 0.0)) throw ConfigError("synth: erp_width must be positive");
    for (const auto& c : plant_channels)
        if (std::find(channels.begin(), channels.end(), c) == channels.end())
            throw ConfigError("synth: plant channel '" + c + "' is not in the montage");
    if (plant == Plant::channel_restricted && plant_channels.empty())
        throw ConfigError("synth: channel_restricted plant needs plant_channels");
    for (int k : plant_classes)
        if (k < 0 || k >= classes()) throw ConfigError("synth: plant class out of range");
}

namespace {

// Unit-variance Gaussian noise with power proportional to 1/f.
Vector pink_noise(Index n, Rng& rng) {
    Index nfft = 1;
    while (nfft < n) nfft *= 2;
    if (nfft < 4) nfft = 4;
    const Index half = nfft / 2;
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(half + 1));
    double expected = 0.0;
    for (Index k = 1; k <= half; ++k) {
        const double a = 1.0 / std::sqrt(static_cast<double>(k));
        const double re = standard_normal(rng), im = k == half ? 0.0 : standard_normal(rng);
        spec[static_cast<std::size_t>(k)] = {a * re, a * im};
        expected += k == half ? a * a : 4.0 * a * a;
    }
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> out;
    fft.inv(out, spec, nfft);
    // inv scales by 1/nfft, so E[x^2] = expected / nfft^2
    const double scale = static_cast<double>(nfft) / std::sqrt(expected);
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = out[static_cast<std::size_t>(i)] * scale;
    return x;
}

std::vector<Index> plant_channel_indices(const SynthSpec& spec) {
    std::vector<Index> idx;
    if (spec.plant_channels.empty()) {
        const Index n = std::min<Index>(8, static_cast<Index>(spec.channels.size()));
        for (Index c = 0; c < n; ++c) idx.push_back(c);
    } else {
        for (const auto& name : spec.plant_channels)
            idx.push_back(std::find(spec.channels.begin(), spec.channels.end(), name) - spec.channels.begin());
    }
    return idx;
}

GroundTruth make_truth(const SynthSpec& spec) {
    GroundTruth t;
    t.plant_channels = plant_channel_indices(spec);
    t.erp_latency = spec.erp_latency;
    const int k = spec.classes();
    for (int c = 0; c < k; ++c) {
        double s = 1.0 + c * spec.snr;
        if (!spec.plant_classes.empty()) {
            const bool listed = std::find(spec.plant_classes.begin(), spec.plant_classes.end(), c) != spec.plant_classes.end();
            s = listed ? 1.0 + spec.snr : 1.0;
        }
        t.class_scale.push_back(s);
    }
    const auto nc = static_cast<Index>(spec.channels.size());
    t.topography = Matrix::Zero(k, nc);
    Rng rng = make_rng(spec.seed, "synth_topography");
    for (int c = 0; c < k; ++c) {
        if (!spec.plant_classes.empty() &&
            std::find(spec.plant_classes.begin(), spec.plant_classes.end(), c) == spec.plant_classes.end())
            continue;
        double ss = 0.0;
        for (Index ch : t.plant_channels) {
            t.topography(c, ch) = standard_normal(rng);
            ss += t.topography(c, ch) * t.topography(c, ch);
        }
        if (ss > 0.0) t.topography.row(c) /= std::sqrt(ss / static_cast<double>(t.plant_channels.size()));
    }
    t.subject_gain = Matrix::Ones(spec.subjects, nc);
    return t;
}

std::string subject_id(int s) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%02d", s + 1);
    return buf;
}

SubjectRecording simulate_subject(const SynthSpec& spec, const GroundTruth& truth, int s, Vector* gain_out) {
    Rng rng = make_rng(spec.seed, "synth_subject", static_cast<std::uint64_t>(s));
    const int k = spec.classes();
    const Index samples = spec.samples();
    const auto nc = static_cast<Index>(spec.channels.size());
    const auto offset = static_cast<Index>(std::llround(spec.tmin * spec.fs));  // <= 0
    const Index gap = samples / 2 + 1;
    const Index lead = samples + gap;

    std::vector<int> labels;
    for (int c = 0; c < k; ++c)
        for (int t = 0; t < spec.trials_per_class; ++t) labels.push_back(c);
    shuffle(labels.begin(), labels.end(), rng);

    std::vector<Index> events;
    Index cursor = lead;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        events.push_back(cursor);
        cursor += samples + gap + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(gap)));
    }
    // round the length up to whole seconds so EDF records carry no padding
    const auto per_second = static_cast<Index>(spec.fs);
    const Index length = ((cursor + lead) + per_second - 1) / per_second * per_second;

    Vector gain(nc);
    for (Index c = 0; c < nc; ++c) gain(c) = std::exp(spec.gain_sigma * standard_normal(rng));
    const double shift = spec.jitter_sigma * standard_normal(rng);

    Matrix x(nc, length);
    const double wp = std::sqrt(spec.pink_fraction), ww = std::sqrt(1.0 - spec.pink_fraction);
    for (Index c = 0; c < nc; ++c) {
        const Vector pink = pink_noise(length, rng);
        for (Index i = 0; i < length; ++i) x(c, i) = spec.noise_uv * (wp * pink(i) + ww * standard_normal(rng));
    }

    const double two_pi = 6.283185307179586;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        const int y = labels[t];
        const Index start = events[t] + offset;
        switch (spec.plant) {
            case Plant::none: break;
            case Plant::band_amplitude:
            case Plant::channel_restricted: {
                const double amp = spec.band_uv * truth.class_scale[static_cast<std::size_t>(y)];
                for (Index ch : truth.plant_channels) {
                    const double phase = two_pi * uniform01(rng);
                    for (Index i = 0; i < samples; ++i)
                        x(ch, start + i) += amp * std::sin(two_pi * spec.band_hz * static_cast<double>(i) / spec.fs + phase);
                }
                break;
            }
            case Plant::transient_erp: {
                const double amp = spec.erp_uv * spec.snr;
                const double centre = spec.erp_latency + shift;
                for (Index i = 0; i < samples; ++i) {
                    const double time = static_cast<double>(offset + i) / spec.fs;
                    const double z = (time - centre) / spec.erp_width;
                    const double bump = amp * std::exp(-0.5 * z * z);
                    if (bump < 1e-12 * (amp + 1.0)) continue;
                    for (Index ch : truth.plant_channels) x(ch, start + i) += bump * truth.topography(y, ch);
                }
                break;
            }
        }
    }
    for (Index c = 0; c < nc; ++c) x.row(c) *= gain(c);
    *gain_out = gain;

    SubjectRecording out;
    out.subject = subject_id(s);
    out.recording = out.subject + "_run-1";
    out.data.samples = std::move(x);
    out.data.fs = spec.fs;
    out.data.channel_names = spec.channels;
    for (std::size_t t = 0; t < labels.size(); ++t)
        out.data.events.push_back({events[t], spec.class_names[static_cast<std::size_t>(labels[t])]});
    return out;
}

}  // namespace

Simulation simulate(const SynthSpec& spec, int threads) {
    spec.validate();
    Simulation sim;
    sim.truth = make_truth(spec);
    for (int c = 0; c < spec.classes(); ++c) sim.label_map[spec.class_names[static_cast<std::size_t>(c)]] = c;
    sim.recordings.resize(static_cast<std::size_t>(spec.subjects));
    std::vector<Vector> gains(static_cast<std::size_t>(spec.subjects));
    detail::parallel_for(sim.recordings.size(), threads, [&](std::size_t s) {
        sim.recordings[s] = simulate_subject(spec, sim.truth, static_cast<int>(s), &gains[s]);
    });
    for (std::size_t s = 0; s < gains.size(); ++s) sim.truth.subject_gain.row(static_cast<Index>(s)) = gains[s].transpose();
    return sim;
}

EpochSet generate(const SynthSpec& spec, GroundTruth* truth, int threads) {
    const Simulation sim = simulate(spec, threads);
    const double tmax = spec.tmin + static_cast<double>(spec.samples()) / spec.fs;
    EpochSet out;
    out.fs = spec.fs;
    out.tmin = std::round(spec.tmin * spec.fs) / spec.fs;
    out.channel_names = spec.channels;
    for (const auto& r : sim.recordings) {
        const EpochSet e = ingest::epoch_from_events(r.data, spec.tmin, tmax, sim.label_map, r.subject, r.recording);
        out.data.insert(out.data.end(), e.data.begin(), e.data.end());
        out.labels.insert(out.labels.end(), e.labels.begin(), e.labels.end());
        out.subjects.insert(out.subjects.end(), e.subjects.begin(), e.subjects.end());
        out.onsets.insert(out.onsets.end(), e.onsets.begin(), e.onsets.end());
        out.recordings.insert(out.recordings.end(), e.recordings.begin(), e.recordings.end());
    }
    if (truth) *truth = sim.truth;
    return out;
}

Fixture make_edf_fixture(const SynthSpec& spec, const fs::path& root, const FixtureOptions& options) {
    Simulation sim = simulate(spec);
    if (options.artifact_subject >= 0) {
        if (options.artifact_subject >= spec.subjects) throw ConfigError("fixture: artifact subject out of range");
        auto& rec = sim.recordings[static_cast<std::size_t>(options.artifact_subject)].data;
        if (options.artifact_trial < 0 || options.artifact_trial >= static_cast<int>(rec.events.size()))
            throw ConfigError("fixture: artifact trial out of range");
        // 50 ms box a third of the way into the post-stimulus window, on the first channel
        const Index onset = rec.events[static_cast<std::size_t>(options.artifact_trial)].sample;
        const auto begin = onset + static_cast<Index>(std::llround(spec.tmax * spec.fs / 3.0));
        const auto width = static_cast<Index>(std::llround(0.05 * spec.fs));
        rec.samples.block(0, begin, 1, width).array() += options.artifact_uv;
    }
    Fixture fx;
    fx.root = root;
    fx.label_map = sim.label_map;
    std::error_code ec;
    for (const auto& r : sim.recordings) {
        const std::string sub = "sub-" + r.subject.substr(1);
        const fs::path dir = root / sub / "eeg";
        fs::create_directories(dir, ec);
        if (ec) throw IoError("fixture: cannot create '" + dir.string() + "': " + ec.message());
        const fs::path file = dir / (sub + "_task-vowels_eeg.edf");
        ingest::write_edf_file(file, r.data, options.edf);
        fx.files.push_back(file);
    }
    return fx;
}

}  // namespace eegbench::synth
