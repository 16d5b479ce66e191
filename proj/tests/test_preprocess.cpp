#include "doctest.h"

#include <cmath>

#include "eegbench/preprocess.hpp"
#include "support.hpp"

using namespace eegbench;
using namespace eegbench::preprocess;

namespace {

Recording tone(double hz, double fs, Index n, double amp = 1.0) {
    Recording r;
    r.fs = fs;
    r.channel_names = {"X"};
    r.samples.resize(1, n);
    for (Index t = 0; t < n; ++t) r.samples(0, t) = amp * std::sin(2.0 * M_PI * hz * t / fs);
    return r;
}

// Least-squares amplitude of a sinusoid at hz over samples [a, b).
double fitted_amplitude(const Vector& x, double hz, double fs, Index a, Index b) {
    Matrix basis(b - a, 2);
    for (Index t = a; t < b; ++t) {
        basis(t - a, 0) = std::sin(2.0 * M_PI * hz * t / fs);
        basis(t - a, 1) = std::cos(2.0 * M_PI * hz * t / fs);
    }
    const Vector coef = basis.colPivHouseholderQr().solve(x.segment(a, b - a));
    return coef.norm();
}

double rms(const Vector& x) { return std::sqrt(x.squaredNorm() / static_cast<double>(x.size())); }

EpochSet noise_epochs(Index channels, int trials, Index samples, Rng& rng) {
    EpochSet e;
    e.fs = 256.0;
    e.tmin = -0.2;
    for (Index c = 0; c < channels; ++c) e.channel_names.push_back("C" + std::to_string(c));
    for (int t = 0; t < trials; ++t) {
        e.data.push_back(testing::gaussian(channels, samples, rng));
        e.labels.push_back(t % 5);
        e.subjects.push_back("S01");
        e.onsets.push_back(1000 * t);
        e.recordings.push_back("r");
    }
    return e;
}

EpochSet constant_epochs(const std::vector<double>& values, Index samples) {
    EpochSet e;
    e.fs = 256.0;
    e.tmin = -0.2;
    e.channel_names = {"A", "B"};
    for (std::size_t t = 0; t < values.size(); ++t) {
        e.data.push_back(Matrix::Constant(2, samples, values[t]));
        e.labels.push_back(0);
        e.subjects.push_back("S01");
        e.onsets.push_back(static_cast<std::int64_t>(1000 * t));
        e.recordings.push_back("r");
    }
    return e;
}

}  // namespace

TEST_CASE("average reference") {
    Recording r;
    r.fs = 256.0;
    r.channel_names = {"A", "B", "C"};
    Rng rng = make_rng(3, "reref");
    r.samples = testing::gaussian(3, 100, rng);
    const Recording base = rereference_average(r);
    SUBCASE("common offset vanishes") {
        Recording shifted = r;
        shifted.samples.array() += 17.0;
        CHECK((rereference_average(shifted).samples - base.samples).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("zero-mean input unchanged") {
        CHECK((rereference_average(base).samples - base.samples).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("plus/minus one") {
        Recording pm;
        pm.fs = 256.0;
        pm.channel_names = {"A", "B"};
        pm.samples.resize(2, 10);
        pm.samples.row(0).setOnes();
        pm.samples.row(1).setConstant(-1.0);
        CHECK(rereference_average(pm).samples == pm.samples);
    }
}

TEST_CASE("bandpass 0.5-40 Hz") {
    const double fs = 256.0;
    const Index n = 2048;
    SUBCASE("10 Hz passes") {
        const Vector out = bandpass(tone(10.0, fs, n)).samples.row(0).transpose();
        CHECK(fitted_amplitude(out, 10.0, fs, 256, n - 256) == doctest::Approx(1.0).epsilon(0.02));
    }
    SUBCASE("80 Hz attenuated by 40 dB") {
        const Vector out = bandpass(tone(80.0, fs, n)).samples.row(0).transpose();
        CHECK(20.0 * std::log10(fitted_amplitude(out, 80.0, fs, 256, n - 256)) <= -40.0);
    }
    SUBCASE("DC attenuated by 20 dB") {
        Recording dc = tone(0.0, fs, 4096);
        dc.samples.setConstant(1.0);
        const Vector out = bandpass(dc).samples.row(0).transpose();
        CHECK(20.0 * std::log10(rms(out.segment(1024, 2048))) <= -20.0);
    }
}

TEST_CASE("resampling") {
    SUBCASE("2000 -> 256 Hz on 1.2 s") {
        Recording r = tone(10.0, 2000.0, 2400);
        r.events = {{1000, "a"}};
        const Recording out = resample(r, 256.0);
        CHECK(std::abs(out.samples.cols() - 307) <= 1);
        CHECK(out.fs == 256.0);
        CHECK(out.events[0].sample == 128);
    }
    SUBCASE("same rate is the identity") {
        const Recording r = tone(7.0, 256.0, 500);
        CHECK(resample(r, 256.0).samples == r.samples);
    }
    SUBCASE("500 Hz content removed") {
        const Recording r = tone(500.0, 2000.0, 20000);
        const Vector out = resample(r, 256.0).samples.row(0).transpose();
        const Index n = out.size();
        CHECK(20.0 * std::log10(rms(out.segment(200, n - 400)) / (1.0 / std::sqrt(2.0))) <= -60.0);
        // 500 Hz would alias to 12 Hz
        CHECK(20.0 * std::log10(fitted_amplitude(out, 512.0 - 500.0, 256.0, 200, n - 200)) <= -60.0);
    }
}

TEST_CASE("bad channel detection") {
    Rng rng = make_rng(5, "bad-channels");
    SUBCASE("one loud channel among 61") {
        EpochSet e = noise_epochs(61, 10, 128, rng);
        for (auto& t : e.data) t.row(17) *= 100.0;
        const auto mask = detect_bad_channels(e);
        CHECK(mask.count() == 1);
        CHECK(mask.bad[17]);
        const EpochSet filled = zero_fill(e, mask);
        for (const auto& t : filled.data) CHECK(t.row(17).cwiseAbs().maxCoeff() == 0.0);
        CHECK(filled.data[0].row(16) == e.data[0].row(16));
    }
    SUBCASE("homogeneous noise matches the one-sided Gaussian tail") {
        // P(no flag) = Phi(3)^61 for 61 independent standard-normal z-scores
        const double phi3 = 0.5 * std::erfc(-3.0 / std::sqrt(2.0));
        const double expected = std::pow(phi3, 61);
        const int draws = 400;
        int clean = 0;
        for (int d = 0; d < draws; ++d) clean += detect_bad_channels(noise_epochs(61, 4, 128, rng)).count() == 0;
        const double rate = static_cast<double>(clean) / draws;
        const double se = std::sqrt(expected * (1.0 - expected) / draws);
        CHECK(std::abs(rate - expected) <= 4.0 * se);
    }
}

TEST_CASE("peak-to-peak rejection") {
    SUBCASE("500 uV spike") {
        EpochSet e = constant_epochs({0.0, 0.0, 0.0}, 50);
        e.data[1](0, 20) = 500.0;
        const EpochSet kept = reject_artifacts(e);
        CHECK(kept.trials() == 2);
        CHECK(kept.onsets == std::vector<std::int64_t>{0, 2000});
    }
    SUBCASE("zeros kept") { CHECK(reject_artifacts(constant_epochs({0.0, 0.0}, 50)).trials() == 2); }
    SUBCASE("exactly 400 kept") {
        EpochSet e = constant_epochs({0.0}, 50);
        e.data[0](1, 3) = 200.0;
        e.data[0](1, 9) = -200.0;
        CHECK(reject_artifacts(e).trials() == 1);
        e.data[0](1, 9) = -200.000001;
        CHECK_THROWS_AS(reject_artifacts(e), DomainError);
    }
}

TEST_CASE("baseline correction") {
    SUBCASE("constant epoch") {
        const EpochSet e = baseline_correct(constant_epochs({5.0}, 307));
        CHECK(e.data[0].cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("baseline 2, post-stimulus 7") {
        EpochSet e = constant_epochs({2.0}, 307);
        // sample i sits at -0.2 + i/256 s, so indices 0..51 form the baseline
        e.data[0].rightCols(307 - 52).setConstant(7.0);
        const EpochSet out = baseline_correct(e);
        CHECK(out.data[0].rightCols(255).mean() == doctest::Approx(5.0));
        CHECK(out.data[0].leftCols(52).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("already zero baseline") {
        EpochSet e = constant_epochs({0.0}, 307);
        e.data[0].rightCols(100).setConstant(3.0);
        CHECK((baseline_correct(e).data[0] - e.data[0]).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("fold normalizer") {
    Rng rng = make_rng(9, "normalizer");
    EpochSet train = noise_epochs(2, 20, 256, rng);
    for (auto& t : train.data) t = (t.array() * 2.0 + 5.0).matrix();
    const auto norm = fit_normalizer(train, "train");
    CHECK(norm.fit_scope == "train");
    const EpochSet z = apply_normalizer(norm, train);
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const auto& t : z.data) {
        sum += t.row(0).sum();
        sq += t.row(0).squaredNorm();
        n += static_cast<double>(t.cols());
    }
    CHECK(std::abs(sum / n) < 1e-9);
    CHECK(std::sqrt(sq / n - (sum / n) * (sum / n)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(norm.mean[0] == doctest::Approx(5.0).epsilon(0.02));
    CHECK(norm.stddev[0] == doctest::Approx(2.0).epsilon(0.03));

    SUBCASE("constant test channel at the train mean") {
        Normalizer fixed = norm;
        fixed.mean[0] = 5.0;
        EpochSet test = constant_epochs({5.0}, 10);
        CHECK(apply_normalizer(fixed, test).data[0].row(0).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("zero-std channel is clamped") {
        EpochSet flat = constant_epochs({1.0, 1.0}, 10);
        const auto n2 = fit_normalizer(flat, "train");
        CHECK(n2.clamped[0]);
        CHECK(n2.stddev[0] == kStdEpsilon);
        CHECK(apply_normalizer(n2, flat).data[0].allFinite());
    }
}

TEST_CASE("config hash is stable and parameter sensitive") {
    PreprocessConfig a, b;
    CHECK(a.hash() == b.hash());
    b.reject_p2p_uv = 300.0;
    CHECK(a.hash() != b.hash());
    CHECK(canonical_steps().back() == "normalize");
}
