#include "doctest.h"

#include <cmath>

#include "eegbench/analyses.hpp"
#include "eegbench/synth.hpp"
#include "support.hpp"

using namespace eegbench;
using namespace eegbench::analyses;

namespace {

harness::PipelineSpec de_lda() {
    harness::PipelineSpec p;
    p.name = "lda";
    p.families = {features::Family::de};
    p.classifier = classify::lda_spec();
    return p;
}

FormantTable table() {
    FormantTable t;
    t.vowels = kVowels;
    t.f1 = {850, 500, 300, 500, 320};
    t.f2 = {1600, 1900, 2300, 900, 800};
    return t;
}

}  // namespace

TEST_CASE("Bark scale and acoustic distances") {
    CHECK(bark(1000.0) == doctest::Approx(8.527).epsilon(1e-4));
    CHECK(bark(1000.0) == doctest::Approx(26.81 * 1000.0 / 2960.0 - 0.53));
    CHECK_THROWS_AS(bark(0.0), DomainError);
    const Matrix d = acoustic_distances(table());
    CHECK(d.rows() == 5);
    CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK(d(0, 2) == doctest::Approx(std::hypot(bark(850) - bark(300), bark(1600) - bark(2300))));
    FormantTable same = table();
    same.f1[1] = same.f1[0];
    same.f2[1] = same.f2[0];
    CHECK(acoustic_distances(same)(0, 1) == 0.0);
    FormantTable ragged = table();
    ragged.f2.pop_back();
    CHECK_THROWS_AS(acoustic_distances(ragged), ConfigError);
    CHECK(condensed(d).size() == 10);
    CHECK(condensed(d)[4] == d(1, 2));
}

TEST_CASE("representational similarity") {
    const Matrix d = acoustic_distances(table());
    const auto dist = condensed(d);
    SUBCASE("accuracy turns into confusion") {
        std::vector<double> acc(10, 0.6);
        acc[3] = 0.582;
        // confusion 1 - 0.582 = 0.418 is the lowest, so it must rank first
        std::vector<double> conf;
        for (double a : acc) conf.push_back(1.0 - a);
        CHECK(conf[3] == doctest::Approx(0.418));
        CHECK(rsa(d, acc).statistic == doctest::Approx(stats::spearman(dist, conf).statistic));
    }
    SUBCASE("confusion falling with distance") {
        std::vector<double> acc;
        for (double x : dist) acc.push_back(0.5 + 0.02 * x);
        const auto r = rsa(d, acc, 2000, 1);
        CHECK(r.statistic == doctest::Approx(-1.0));
        CHECK(r.p_raw < 0.01);
    }
    SUBCASE("constant accuracies") { CHECK_THROWS_AS(rsa(d, std::vector<double>(10, 0.6)), DomainError); }
    CHECK_THROWS_AS(rsa(d, std::vector<double>(9, 0.6)), DomainError);
}

TEST_CASE("electrode importance") {
    const Index channels = 61;
    std::vector<features::Column> registry;
    for (Index c = 0; c < channels; ++c)
        for (const char* band : {"delta", "theta", "alpha", "beta", "gamma"})
            registry.push_back({features::Family::de, static_cast<int>(c), band});
    SUBCASE("uniform importances") {
        const Vector u = Vector::Constant(305, 1.0 / 305.0);
        const auto share = electrode_importance({u, u}, registry, channels);
        for (double s : share) CHECK(s == doctest::Approx(1.0 / 61.0));
        CHECK(100.0 / 61.0 == doctest::Approx(1.64).epsilon(0.01));
    }
    SUBCASE("all weight on one channel") {
        Vector v = Vector::Zero(305);
        v.segment(5 * 17, 5).setConstant(0.2);
        const auto share = electrode_importance({v}, registry, channels);
        CHECK(share[17] == doctest::Approx(1.0));
        CHECK(rank_channels(share).front() == 17);
        CHECK(rank_channels(share)[1] == 0);
    }
    SUBCASE("columns without a channel") {
        auto broken = registry;
        broken[0].channel = -1;
        CHECK_THROWS_AS(electrode_importance({Vector::Ones(305)}, broken, channels), DomainError);
    }
}

TEST_CASE("pairwise and triplet tasks") {
    synth::SynthSpec s;
    s.subjects = 3;
    s.trials_per_class = 6;
    s.channels = {"Fz", "Cz", "Pz", "Oz"};
    s.plant = synth::Plant::band_amplitude;
    s.snr = 1.0;
    s.plant_channels = {"Fz", "Cz"};
    const auto rows = pairwise_tasks(synth::generate(s), de_lda());
    REQUIRE(rows.size() == 13);
    CHECK(rows[0].label == "a-e");
    CHECK(rows[9].label == "o-u");
    CHECK(rows[10].label == "aei");
    CHECK(rows[12].label == "iou");
    for (int i = 0; i < 10; ++i) {
        CHECK(rows[static_cast<std::size_t>(i)].chance == 0.5);
        CHECK(rows[static_cast<std::size_t>(i)].test.m == 10);
        CHECK(rows[static_cast<std::size_t>(i)].accuracies.size() == 3);
    }
    for (int i = 10; i < 13; ++i) {
        CHECK(rows[static_cast<std::size_t>(i)].chance == doctest::Approx(1.0 / 3.0));
        CHECK(rows[static_cast<std::size_t>(i)].test.m == 3);
    }
    CHECK(rows[11].classes == std::vector<int>{0, 2, 4});
}

TEST_CASE("channel dropout") {
    synth::SynthSpec s;
    s.subjects = 3;
    s.trials_per_class = 6;
    s.channels = {"Fz", "Cz", "Pz", "Oz"};
    s.plant = synth::Plant::channel_restricted;
    s.snr = 2.0;
    s.plant_channels = {"Cz"};
    const EpochSet e = synth::generate(s);
    const std::vector<Index> ranking{1, 0, 2, 3};
    const auto base = harness::loso(e, {de_lda()}).pipelines.front().fold_accuracies();
    const auto top = channel_dropout(e, ranking, {0, 1}, Direction::top, de_lda());
    const auto bottom = channel_dropout(e, ranking, {1}, Direction::bottom, de_lda());
    CHECK(top[0].accuracies == base);
    CHECK(top[0].dropped.empty());
    CHECK(top[1].dropped == std::vector<Index>{1});
    CHECK(bottom[0].dropped == std::vector<Index>{3});
    CHECK(top[1].mean < bottom[0].mean);
    CHECK_THROWS_AS(channel_dropout(e, ranking, {4}, Direction::top, de_lda()), DomainError);
}

TEST_CASE("ERP peaks") {
    EpochSet e;
    e.fs = 256.0;
    e.tmin = -51.0 / 256.0;
    e.channel_names = {"Cz", "FCz"};
    // N1 trough at sample 79 (109.4 ms), P2 crest at sample 103 (203.1 ms)
    for (int s = 0; s < 3; ++s)
        for (int k = 0; k < 5; ++k)
            for (int rep = 0; rep < 2; ++rep) {
                Matrix m = Matrix::Constant(2, 307, 0.1 * s);
                for (Index i = 0; i < 307; ++i) {
                    m(0, i) -= (2.0 + k) * std::exp(-0.5 * std::pow((i - 79) / 4.0, 2));
                    m(0, i) += 3.0 * std::exp(-0.5 * std::pow((i - 103) / 4.0, 2));
                }
                e.data.push_back(m);
                e.labels.push_back(k);
                e.subjects.push_back("S0" + std::to_string(s + 1));
                e.onsets.push_back(1000 * (10 * k + rep));
                e.recordings.push_back("r" + std::to_string(s));
            }
    const auto r = erp(e);
    REQUIRE(r.peaks.size() == 2 * 2 * 5);
    const auto& n1 = r.peaks[2];
    CHECK(n1.channel == "Cz");
    CHECK(n1.component == "N1");
    CHECK(n1.vowel == "i");
    CHECK(n1.latency_ms == doctest::Approx(1000.0 * 28.0 / 256.0));
    CHECK(n1.peak_uv == doctest::Approx(-4.0 + 0.1 + 3.0 * std::exp(-0.5 * 36.0)).epsilon(1e-6));
    const auto& p2 = r.peaks[5];
    CHECK(p2.component == "P2");
    CHECK(p2.latency_ms == doctest::Approx(1000.0 * 52.0 / 256.0).epsilon(0.03));
    REQUIRE(r.anova.size() == 4);
    CHECK(r.anova_labels[0] == "Cz:N1");
    CHECK(r.anova[0].p_raw < 1e-6);
    CHECK(r.waveforms[0].rows() == 5);
    CHECK_THROWS_AS(erp(e, {"Oz"}), DomainError);
}
