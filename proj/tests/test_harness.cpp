#include "doctest.h"

#include <cmath>
#include <set>

#include "eegbench/harness.hpp"
#include "eegbench/synth.hpp"
#include "support.hpp"

using namespace eegbench;
using namespace eegbench::harness;

namespace {

synth::SynthSpec small_spec(int subjects, std::uint64_t seed = 3) {
    synth::SynthSpec s;
    s.subjects = subjects;
    s.trials_per_class = 8;
    s.channels = {"Fz", "Cz", "Pz", "C3", "C4", "Oz"};
    s.plant = synth::Plant::band_amplitude;
    s.snr = 1.0;
    s.plant_channels = {"Fz", "Cz", "Pz"};
    s.seed = seed;
    return s;
}

PipelineSpec de_lda(Index pca = 0) {
    PipelineSpec p;
    p.name = pca ? "lda_pca" : "lda";
    p.families = {features::Family::de};
    p.pca_components = pca;
    p.classifier = classify::lda_spec();
    return p;
}

const Verdict& verdict(const RunResult& r, int checkpoint) {
    for (const auto& v : r.verdicts)
        if (v.checkpoint == checkpoint) return v;
    throw std::runtime_error("missing checkpoint");
}

}  // namespace

TEST_CASE("metrics") {
    std::vector<int> truth;
    for (int i = 0; i < 50; ++i) truth.push_back(i % 5);
    const Matrix perfect = confusion_matrix(truth, truth, 5);
    CHECK(balanced_accuracy(perfect) == 1.0);
    CHECK(macro_f1(perfect) == 1.0);
    CHECK(perfect.sum() == 50.0);
    const Matrix constant = confusion_matrix(truth, std::vector<int>(50, 2), 5);
    CHECK(balanced_accuracy(constant) == doctest::Approx(0.2));
    CHECK(normalize_rows(constant)(0, 2) == 1.0);
    CHECK(normalize_rows(Matrix::Zero(2, 2)).sum() == 0.0);
    CHECK(cohens_d(std::vector<double>(16, 0.2), 0.2) == 0.0);
    CHECK(cohens_d({0.3, 0.5}, 0.2) == doctest::Approx(0.2 / std::sqrt(0.02)));
    CHECK(sample_sd({1.0, 2.0, 3.0}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(cohens_d({0.3}, 0.2), DomainError);
    CHECK_THROWS_AS(confusion_matrix({0, 1}, {0}, 2), DomainError);
}

TEST_CASE("leave-one-subject-out folds") {
    SUBCASE("sixteen subjects") {
        synth::SynthSpec s = small_spec(16);
        s.trials_per_class = 2;
        s.channels = {"Fz", "Cz"};
        s.plant_channels = {"Fz"};
        const EpochSet e = synth::generate(s);
        const auto plan = loso_plan(e, {});
        REQUIRE(plan.size() == 16);
        for (const auto& f : plan) {
            CHECK(f.test.size() == 10);
            CHECK(f.train.size() == 150);
            for (std::size_t t : f.train) CHECK(e.subjects[t] != f.test_subject);
            for (std::size_t t : f.validation) CHECK(e.subjects[t] != f.test_subject);
            CHECK(f.validation.size() >= 30);
        }
    }
    SUBCASE("two subjects") {
        const EpochSet e = synth::generate(small_spec(2));
        const RunResult r = loso(e, {de_lda()});
        REQUIRE(r.pipelines.front().folds.size() == 2);
        CHECK(r.audit_passed());
        CHECK(r.pipelines.front().fold_accuracies().size() == 2);
        CHECK(r.pipelines.front().pooled_confusion().sum() == 80.0);
    }
    SUBCASE("one subject cannot be split") {
        CHECK_THROWS_AS(loso_plan(synth::generate(small_spec(1)), {}), DomainError);
    }
}

TEST_CASE("leakage audit") {
    const EpochSet e = synth::generate(small_spec(4));
    const std::vector<PipelineSpec> pipes{de_lda(), de_lda(3)};
    SUBCASE("clean run passes every checkpoint") {
        const RunResult r = loso(e, pipes);
        REQUIRE(r.verdicts.size() == 4);
        for (const auto& v : r.verdicts) CHECK(v.pass);
    }
    SUBCASE("each injection fails its own checkpoint") {
        const std::pair<Injection, int> cases[] = {{Injection::normalizer_all_data, 1},
                                                   {Injection::pca_all_data, 1},
                                                   {Injection::validation_from_test, 2},
                                                   {Injection::test_in_train, 3}};
        for (const auto& [inj, checkpoint] : cases) {
            CAPTURE(injection_name(inj));
            EvalOptions opt;
            opt.inject = inj;
            const RunResult r = loso(e, pipes, opt);
            CHECK_FALSE(verdict(r, checkpoint).pass);
            CHECK_FALSE(verdict(r, checkpoint).witness.empty());
            CHECK(verdict(r, 4).pass);
            opt.strict_audit = true;
            CHECK_THROWS_AS(loso(e, pipes, opt), AuditError);
        }
    }
    SUBCASE("overlapping epochs fail the temporal checkpoint") {
        AuditTrail trail = loso(e, {de_lda()}).trail;
        trail.meta.onsets[1] = trail.meta.onsets[0] + 10;
        trail.meta.recordings[1] = trail.meta.recordings[0];
        const auto verdicts = leakage_audit(trail);
        CHECK_FALSE(verdicts[3].pass);
    }
    for (Injection i : {Injection::none, Injection::normalizer_all_data, Injection::pca_all_data,
                        Injection::test_in_train, Injection::validation_from_test})
        CHECK(parse_injection(injection_name(i)) == i);
}

TEST_CASE("thread count does not change results") {
    const EpochSet e = synth::generate(small_spec(4));
    EvalOptions one, many;
    many.threads = 4;
    const RunResult a = loso(e, {de_lda()}, one), b = loso(e, {de_lda()}, many);
    for (std::size_t f = 0; f < 4; ++f) {
        CHECK(a.pipelines[0].folds[f].predicted == b.pipelines[0].folds[f].predicted);
        CHECK(a.pipelines[0].folds[f].proba == b.pipelines[0].folds[f].proba);
    }
}

TEST_CASE("within-subject cross-validation") {
    synth::SynthSpec s = small_spec(2);
    s.trials_per_class = 5;
    const auto cv = within_subject_cv(synth::generate(s), de_lda(), 5);
    REQUIRE(cv.size() == 2);
    CHECK(cv[0].folds.size() == 5);
    for (const auto& f : cv[0].folds) CHECK(f.trials.size() == 5);
    SUBCASE("too few trials per class skips the subject") {
        s.trials_per_class = 4;
        CHECK(within_subject_cv(synth::generate(s), de_lda(), 5).empty());
    }
}

TEST_CASE("time generalization grid") {
    CHECK(tgm_points(307, 4).size() == 77);
    CHECK(tgm_points(307, 4).back() == 304);
    CHECK(tgm_points(8, 4) == std::vector<Index>{0, 4});
    synth::SynthSpec s = small_spec(3);
    s.tmax = 0.2;
    const EpochSet e = synth::generate(s);
    const Matrix m = tgm(e, 8);
    CHECK(m.rows() == static_cast<Index>(tgm_points(e.samples(), 8).size()));
    CHECK(m.cols() == m.rows());
    CHECK(m.minCoeff() >= 0.0);
    CHECK(m.maxCoeff() <= 1.0);
}

TEST_CASE("learning curve and ablation") {
    const EpochSet e = synth::generate(small_spec(4));
    const auto curve = learning_curve(e, {1, 3}, 2, de_lda());
    REQUIRE(curve.size() == 2);
    CHECK(curve[0].accuracies.size() == 2);
    CHECK_THROWS_AS(learning_curve(e, {4}, 1, de_lda()), DomainError);
    std::vector<GridPoint> grid(2);
    grid[0].label = "de";
    grid[0].families = {features::Family::de};
    grid[1].label = "hjorth";
    grid[1].families = {features::Family::hjorth};
    const auto rows = ablation_run(e, Axis::feature_family, grid, de_lda());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].dims == 30);
    CHECK(rows[1].dims == 18);
    CHECK(rows[0].accuracies.size() == 4);
    CHECK(rows[0].delta_vs_chance == doctest::Approx(rows[0].mean - 0.2));
}

TEST_CASE("epoch transforms") {
    const EpochSet e = synth::generate(small_spec(2));
    const EpochSet crop = crop_window(e, 0.0, 0.5);
    CHECK(crop.samples() == 129);
    CHECK(crop.tmin == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(crop.data[3](1, 0) == e.data[3](1, 51));
    const EpochSet sel = select_channels(e, {"Pz", "Fz"});
    CHECK(sel.channel_names == std::vector<std::string>{"Pz", "Fz"});
    CHECK(sel.data[0].row(1) == e.data[0].row(0));
    CHECK_THROWS_AS(select_channels(e, {"T7"}), DomainError);
    const EpochSet zeroed = zero_channels(e, {2});
    CHECK(zeroed.data[5].row(2).cwiseAbs().maxCoeff() == 0.0);
    const EpochSet two = select_classes(e, {4, 1});
    CHECK(two.num_classes() == 2);
    for (std::size_t t = 0; t < two.trials(); ++t) CHECK((two.labels[t] == 0 || two.labels[t] == 1));
    CHECK(two.trials() == 32);
}
