#include "doctest.h"

#include <cmath>

#include "eegbench/ingest.hpp"
#include "eegbench/preprocess.hpp"
#include "eegbench/synth.hpp"
#include "support.hpp"

using namespace eegbench;
using namespace eegbench::synth;

namespace {

SynthSpec small() {
    SynthSpec s;
    s.subjects = 2;
    s.trials_per_class = 2;
    s.channels = {"Fz", "Cz", "Pz", "C3", "C4", "Oz"};
    return s;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
    SynthSpec s = small();
    s.plant = Plant::band_amplitude;
    s.snr = 1.0;
    const EpochSet a = generate(s), b = generate(s, nullptr, 3);
    REQUIRE(a.trials() == 20);
    for (std::size_t t = 0; t < a.trials(); ++t) CHECK(a.data[t] == b.data[t]);
    CHECK(a.onsets == b.onsets);
    s.seed = 43;
    CHECK(generate(s).data[0] != a.data[0]);
    CHECK(a.samples() == 307);
    CHECK(a.tmin == doctest::Approx(-51.0 / 256.0));
    CHECK(a.subject_ids() == std::vector<std::string>{"S01", "S02"});
}

TEST_CASE("epochs never overlap within a recording") {
    const EpochSet e = generate(small());
    for (std::size_t i = 0; i < e.trials(); ++i)
        for (std::size_t j = i + 1; j < e.trials(); ++j)
            if (e.recordings[i] == e.recordings[j]) CHECK(std::llabs(e.onsets[i] - e.onsets[j]) >= 307);
}

TEST_CASE("background noise level") {
    SynthSpec s = small();
    s.gain_sigma = 0.0;
    const auto sim = simulate(s);
    const Matrix& x = sim.recordings[0].data.samples;
    const double rms = std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
    CHECK(rms == doctest::Approx(s.noise_uv).epsilon(0.15));
}

TEST_CASE("band plant scales alpha power by class") {
    SynthSpec s = small();
    s.trials_per_class = 10;
    s.plant = Plant::band_amplitude;
    s.snr = 1.0;
    s.noise_uv = 1.0;
    s.gain_sigma = 0.0;
    GroundTruth truth;
    const EpochSet e = generate(s, &truth);
    CHECK(truth.plant_channels.size() == 6);
    REQUIRE(truth.class_scale.size() == 5);
    for (int k = 0; k < 5; ++k) CHECK(truth.class_scale[static_cast<std::size_t>(k)] == doctest::Approx(1.0 + k));
    // least-squares 10 Hz amplitude per class, averaged over trials
    std::vector<double> amp(5, 0.0);
    for (std::size_t t = 0; t < e.trials(); ++t) {
        Matrix basis(e.samples(), 2);
        for (Index i = 0; i < e.samples(); ++i) {
            basis(i, 0) = std::sin(2.0 * M_PI * 10.0 * i / 256.0);
            basis(i, 1) = std::cos(2.0 * M_PI * 10.0 * i / 256.0);
        }
        const Vector c = basis.colPivHouseholderQr().solve(Vector(e.data[t].row(1).transpose()));
        amp[static_cast<std::size_t>(e.labels[t])] += c.norm() / 20.0;
    }
    for (int k = 0; k < 5; ++k) CHECK(amp[static_cast<std::size_t>(k)] == doctest::Approx(10.0 * (1.0 + k)).epsilon(0.05));
}

TEST_CASE("EDF fixture") {
    testing::TempDir tmp("fixture");
    SynthSpec s = small();
    s.trials_per_class = 2;
    FixtureOptions opt;
    opt.artifact_subject = 1;
    opt.artifact_trial = 3;
    const Fixture fx = make_edf_fixture(s, tmp.path(), opt);
    CHECK(fx.files.size() == 2);
    const auto scan = ingest::scan_bids(tmp.path());
    REQUIRE(scan.subjects.size() == 2);
    preprocess::PreprocessConfig cfg;
    std::size_t rejected = 0, kept = 0;
    for (const auto& subj : scan.subjects) {
        std::vector<ingest::Recording> recs;
        std::vector<std::string> ids;
        for (const auto& p : subj.edf_paths) {
            recs.push_back(ingest::read_edf_file(p));
            ids.push_back(p.stem().string());
        }
        const auto out = preprocess::preprocess_subject(recs, fx.label_map, cfg, subj.subject_id, ids);
        rejected += out.rejected;
        kept += out.epochs.trials();
        if (subj.subject_id == "S02") CHECK(out.rejected == 1);
    }
    CHECK(rejected == 1);
    CHECK(kept == 19);
}

TEST_CASE("validation") {
    SynthSpec s = small();
    s.plant = Plant::channel_restricted;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.plant_channels = {"T7"};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = small();
    s.tmin = 0.1;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK(standard_montage().size() == 61);
    for (Plant p : {Plant::none, Plant::band_amplitude, Plant::transient_erp, Plant::channel_restricted})
        CHECK(parse_plant(plant_name(p)) == p);
}
