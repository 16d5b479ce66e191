#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eegbench/stats.hpp"
#include "support.hpp"

using namespace eegbench;
using namespace eegbench::stats;

namespace {

// P(W <= w) and P(W >= w) by enumerating all 2^n sign patterns of the ranks.
std::pair<double, double> brute_wilcoxon(const std::vector<double>& ranks, double w) {
    const std::size_t n = ranks.size();
    double lower = 0.0, upper = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) s += ranks[i];
        lower += s <= w + 1e-9;
        upper += s >= w - 1e-9;
    }
    const double all = static_cast<double>(1u << n);
    return {lower / all, upper / all};
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += (a[i] - ma) * (b[i] - mb);
        aa += (a[i] - ma) * (a[i] - ma);
        bb += (b[i] - mb) * (b[i] - mb);
    }
    return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("average ranks") {
    CHECK(average_ranks({3.0, 1.0, 2.0}) == std::vector<double>{3.0, 1.0, 2.0});
    CHECK(average_ranks({5.0, 5.0, 1.0, 5.0}) == std::vector<double>{3.0, 3.0, 1.0, 3.0});
}

TEST_CASE("Wilcoxon signed-rank") {
    SUBCASE("three positive differences") {
        const auto r = wilcoxon_signed_rank({0.3, 0.4, 0.5}, 0.2);
        CHECK(r.statistic == 0.0);
        CHECK(r.p_raw == doctest::Approx(0.125));
        CHECK(r.exact);
        CHECK(wilcoxon_signed_rank({0.3, 0.4, 0.5}, 0.2, Alternative::two_sided).p_raw == doctest::Approx(0.25));
    }
    SUBCASE("exact null matches enumeration, ties included") {
        Rng rng = make_rng(1, "wilcoxon");
        for (int rep = 0; rep < 60; ++rep) {
            const std::size_t n = 1 + uniform_index(rng, 8);
            std::vector<double> x(n);
            // rounding to a coarse grid produces tied magnitudes
            for (auto& v : x) v = std::round(4.0 * standard_normal(rng) + 1.0) / 4.0;
            std::vector<double> mag;
            double w = 0.0;
            std::vector<double> nz;
            for (double v : x)
                if (v != 0.0) nz.push_back(v);
            if (nz.empty()) continue;
            for (double v : nz) mag.push_back(std::abs(v));
            const auto ranks = average_ranks(mag);
            for (std::size_t i = 0; i < nz.size(); ++i)
                if (nz[i] < 0.0) w += ranks[i];
            const auto [lower, upper] = brute_wilcoxon(ranks, w);
            const auto greater = wilcoxon_signed_rank(x, 0.0);
            const auto both = wilcoxon_signed_rank(x, 0.0, Alternative::two_sided);
            CHECK(greater.statistic == doctest::Approx(w));
            CHECK(greater.p_raw == doctest::Approx(lower).epsilon(1e-12));
            CHECK(both.p_raw == doctest::Approx(std::min(1.0, 2.0 * std::min(lower, upper))).epsilon(1e-12));
        }
    }
    SUBCASE("all differences zero") {
        const auto r = wilcoxon_signed_rank({0.2, 0.2, 0.2}, 0.2);
        CHECK(r.p_raw == 1.0);
    }
    SUBCASE("normal approximation above 20") {
        std::vector<double> x;
        for (int i = 1; i <= 30; ++i) x.push_back(i % 3 == 0 ? -static_cast<double>(i) : static_cast<double>(i));
        const auto r = wilcoxon_signed_rank(x, 0.0);
        CHECK_FALSE(r.exact);
        // W = 3 + 6 + ... + 30 = 165, mean 232.5, var 30 * 31 * 61 / 24
        const double z = (165.0 - 232.5) / std::sqrt(30.0 * 31.0 * 61.0 / 24.0);
        CHECK(r.statistic == 165.0);
        CHECK(r.p_raw == doctest::Approx(0.5 * std::erfc(-z / std::sqrt(2.0))).epsilon(1e-9));
    }
}

TEST_CASE("multiple-comparison corrections") {
    CHECK(bonferroni(0.001, 14) == doctest::Approx(0.014));
    CHECK(bonferroni(0.1, 14) == 1.0);
    CHECK_THROWS_AS(bonferroni(0.1, 0), DomainError);
    CHECK_THROWS_AS(bonferroni(1.5, 2), DomainError);
    const auto adj = bh_fdr({0.01, 0.02, 0.03});
    for (double a : adj) CHECK(a == doctest::Approx(0.03));
    const auto mono = bh_fdr({0.04, 0.001, 0.5, 0.02});
    CHECK(mono[1] == doctest::Approx(0.004));
    CHECK(mono[3] == doctest::Approx(0.04));
    CHECK(mono[0] == doctest::Approx(0.04 * 4.0 / 3.0));
    CHECK(mono[2] == doctest::Approx(0.5));
    std::vector<StatReport> family(2);
    family[0].p_raw = 0.01;
    family[1].p_raw = 0.3;
    correct(family, Correction::bonferroni);
    CHECK(family[0].p_corrected == doctest::Approx(0.02));
    CHECK(family[1].m == 2);
}

TEST_CASE("Friedman") {
    SUBCASE("perfectly consistent ranking") {
        Matrix s(16, 14);
        for (Index i = 0; i < 16; ++i)
            for (Index j = 0; j < 14; ++j) s(i, j) = 0.2 + 0.01 * static_cast<double>(j);
        const auto r = friedman(s);
        CHECK(r.statistic == doctest::Approx(208.0));
        CHECK(r.p_raw < 1e-30);
    }
    SUBCASE("constant scores") { CHECK(friedman(Matrix::Constant(16, 14, 0.2)).statistic == 0.0); }
    SUBCASE("two models reduce to the sign statistic") {
        Rng rng = make_rng(2, "friedman");
        Matrix s = testing::gaussian(12, 2, rng);
        double wins = 0.0;
        for (Index i = 0; i < 12; ++i) wins += s(i, 1) > s(i, 0);
        const double z = (2.0 * wins - 12.0) / std::sqrt(12.0);
        const auto r = friedman(s);
        CHECK(r.statistic == doctest::Approx(z * z));
        CHECK(r.p_raw == doctest::Approx(std::erfc(std::abs(z) / std::sqrt(2.0))).epsilon(1e-9));
    }
    CHECK_THROWS_AS(friedman(Matrix::Zero(1, 3)), DomainError);
}

TEST_CASE("permutation test") {
    std::vector<FoldPredictions> folds(16);
    for (int f = 0; f < 16; ++f)
        for (int i = 0; i < 100; ++i) {
            folds[static_cast<std::size_t>(f)].truth.push_back(i % 5);
            folds[static_cast<std::size_t>(f)].predicted.push_back(i % 5);
        }
    SUBCASE("perfect predictions reach the floor") {
        const auto r = permutation_test(folds, 5, 10000, 42, 2);
        CHECK(r.statistic == 1.0);
        CHECK(r.p_raw == doctest::Approx(1.0 / 10001.0));
    }
    SUBCASE("constant predictions tie every draw") {
        for (auto& f : folds) std::fill(f.predicted.begin(), f.predicted.end(), 0);
        CHECK(permutation_test(folds, 5, 1).p_raw == 1.0);
    }
    SUBCASE("thread count does not change the draws") {
        for (auto& f : folds)
            for (std::size_t i = 0; i < f.predicted.size(); i += 3) f.predicted[i] = (f.predicted[i] + 1) % 5;
        CHECK(permutation_test(folds, 5, 500, 7, 1).p_raw == permutation_test(folds, 5, 500, 7, 3).p_raw);
    }
    SUBCASE("refit variant") {
        const auto r = permutation_test_refit(0.5, [](int d) { return d < 10 ? 0.6 : 0.2; }, 99);
        CHECK(r.p_raw == doctest::Approx(11.0 / 100.0));
    }
    CHECK_THROWS_AS(permutation_test(folds, 5, 0), DomainError);
}

TEST_CASE("Spearman") {
    CHECK(spearman({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10}).statistic == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4, 5}, {5, 3, 2, 1, 0}).statistic == doctest::Approx(-1.0));
    SUBCASE("exact p by enumerating 120 pairings") {
        const std::vector<double> x{0.3, 1.2, -0.5, 2.0, 0.9}, y{1.0, 0.2, -1.0, 3.0, 0.8};
        const auto r = spearman(x, y);
        const auto rx = average_ranks(x);
        auto ry = average_ranks(y);
        const double rho = pearson(rx, ry);
        CHECK(r.statistic == doctest::Approx(rho));
        std::vector<int> perm{0, 1, 2, 3, 4};
        int total = 0, hits = 0;
        do {
            std::vector<double> py;
            for (int i : perm) py.push_back(ry[static_cast<std::size_t>(i)]);
            ++total;
            hits += std::abs(pearson(rx, py)) >= std::abs(rho) - 1e-12;
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(total == 120);
        CHECK(r.p_raw == doctest::Approx(static_cast<double>(hits) / 120.0));
        CHECK(r.exact);
    }
    CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), DomainError);
    CHECK_THROWS_AS(spearman({1, 2}, {1, 2}), DomainError);
}

TEST_CASE("one-way ANOVA") {
    SUBCASE("identical groups") {
        const auto r = anova_oneway({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
        CHECK(r.statistic == 0.0);
        CHECK(r.p_raw == 1.0);
    }
    SUBCASE("three-group fixture") {
        // means 2, 5, 8: SSb = 54 on 2 df, SSw = 6 on 6 df
        const auto r = anova_oneway({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
        CHECK(r.statistic == doctest::Approx(27.0));
        // F(2, d) survival is (1 + 2F/d)^(-d/2)
        CHECK(r.p_raw == doctest::Approx(std::pow(1.0 + 2.0 * 27.0 / 6.0, -3.0)));
        CHECK(r.effect == doctest::Approx(0.9));
    }
    CHECK_THROWS_AS(anova_oneway({{1, 1}, {2, 2}}), DomainError);
    CHECK_THROWS_AS(anova_oneway({{1, 2}}), DomainError);
}

TEST_CASE("report validation and CSV") {
    StatReport r;
    r.p_raw = 1.2;
    CHECK_THROWS_AS(r.validate(), DomainError);
    const std::string csv = to_csv({wilcoxon_signed_rank({0.3, 0.4, 0.5}, 0.2)});
    CHECK(csv.rfind("test,statistic_name,statistic,p_raw,p_corrected,correction,m,alternative\n", 0) == 0);
    CHECK(csv.find("wilcoxon_signed_rank,W,0,0.125,0.125,none,1,") != std::string::npos);
}
