#include "eegbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>

#include "eegbench/seed.hpp"
#include "parallel.hpp"

namespace eegbench::stats {

std::string correction_name(Correction c) {
    switch (c) {
        case Correction::none: return "none";
        case Correction::bonferroni: return "bonferroni";
        case Correction::bh_fdr: return "bh_fdr";
    }
    return "?";
}

std::string alternative_name(Alternative a) {
    return a == Alternative::one_sided_greater ? "one_sided_greater" : "two_sided";
}

void StatReport::validate() const {
    if (!(p_raw >= 0.0 && p_raw <= 1.0)) throw DomainError(test + ": raw p outside [0, 1]");
    if (!(p_corrected >= p_raw - 1e-15 && p_corrected <= 1.0)) throw DomainError(test + ": corrected p inconsistent");
}

std::vector<double> average_ranks(const std::vector<double>& x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

namespace {

void check_p(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p-value outside [0, 1]");
}

double clamp01(double p) { return std::min(1.0, std::max(0.0, p)); }

}  // namespace

// ---------------------------------------------------------------- Wilcoxon

StatReport wilcoxon_signed_rank(const std::vector<double>& x, double mu0, Alternative alt) {
    StatReport r;
    r.test = "wilcoxon_signed_rank";
    r.statistic_name = "W";
    r.alternative = alt;
    std::vector<double> diff, mag;
    for (double v : x) {
        const double d = v - mu0;
        if (d != 0.0) {
            diff.push_back(d);
            mag.push_back(std::abs(d));
        }
    }
    if (diff.empty()) {
        warn("wilcoxon_signed_rank: all differences are zero, p = 1");
        r.exact = true;
        return r;
    }
    const auto ranks = average_ranks(mag);
    const std::size_t n = diff.size();
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (diff[i] < 0.0) w += ranks[i];
    r.statistic = w;

    double lower = 0.0, upper = 0.0;  // P(W <= w), P(W >= w)
    if (n <= 20) {
        // doubled ranks are integers even with ties; DP over subset sums
        std::vector<int> r2(n);
        int total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            r2[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
            total += r2[i];
        }
        std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
        count[0] = 1.0;
        for (int v : r2)
            for (int s = total; s >= v; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - v)];
        const double all = std::ldexp(1.0, static_cast<int>(n));
        const int w2 = static_cast<int>(std::lround(2.0 * w));
        for (int s = 0; s <= total; ++s) {
            if (s <= w2) lower += count[static_cast<std::size_t>(s)];
            if (s >= w2) upper += count[static_cast<std::size_t>(s)];
        }
        lower /= all;
        upper /= all;
        r.exact = true;
    } else {
        const double nn = static_cast<double>(n);
        const double m = nn * (nn + 1.0) / 4.0;
        double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
        auto sorted = ranks;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i;
            while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            var -= (t * t * t - t) / 48.0;
            i = j + 1;
        }
        const boost::math::normal_distribution<> norm;
        const double z = var > 0.0 ? (w - m) / std::sqrt(var) : 0.0;
        lower = boost::math::cdf(norm, z);
        upper = boost::math::cdf(boost::math::complement(norm, z));
    }
    // few negative ranks is evidence for values above mu0
    r.p_raw = alt == Alternative::one_sided_greater ? clamp01(lower) : clamp01(2.0 * std::min(lower, upper));
    r.p_corrected = r.p_raw;
    return r;
}

// ---------------------------------------------------------------- corrections

double bonferroni(double p, int m) {
    check_p(p);
    if (m < 1) throw DomainError("bonferroni: m must be >= 1");
    return std::min(1.0, p * m);
}

std::vector<double> bh_fdr(const std::vector<double>& p) {
    for (double v : p) check_p(v);
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> adj(m);
    double running = 1.0;
    for (std::size_t k = m; k-- > 0;) {
        const double v = p[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1);
        running = std::min(running, v);
        adj[order[k]] = std::min(1.0, running);
    }
    return adj;
}

void correct(std::vector<StatReport>& family, Correction c) {
    const int m = static_cast<int>(family.size());
    if (c == Correction::bh_fdr) {
        std::vector<double> raw;
        for (const auto& r : family) raw.push_back(r.p_raw);
        const auto adj = bh_fdr(raw);
        for (std::size_t i = 0; i < family.size(); ++i) family[i].p_corrected = adj[i];
    } else {
        for (auto& r : family) r.p_corrected = c == Correction::bonferroni ? bonferroni(r.p_raw, m) : r.p_raw;
    }
    for (auto& r : family) {
        r.correction = c;
        r.m = c == Correction::none ? 1 : m;
    }
}

// ---------------------------------------------------------------- Friedman

StatReport friedman(const Matrix& scores) {
    const Index n = scores.rows(), k = scores.cols();
    if (n < 2 || k < 2) throw DomainError("friedman: need at least 2 subjects and 2 models");
    if (!scores.allFinite()) throw DomainError("friedman: non-finite scores");
    Vector mean_rank = Vector::Zero(k);
    for (Index i = 0; i < n; ++i) {
        std::vector<double> row(static_cast<std::size_t>(k));
        for (Index j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = scores(i, j);
        const auto r = average_ranks(row);
        for (Index j = 0; j < k; ++j) mean_rank(j) += r[static_cast<std::size_t>(j)];
    }
    mean_rank /= static_cast<double>(n);
    const double kk = static_cast<double>(k);
    const double centre = (kk + 1.0) / 2.0;
    const double chi2 = 12.0 * static_cast<double>(n) / (kk * (kk + 1.0)) * (mean_rank.array() - centre).square().sum();
    StatReport r;
    r.test = "friedman";
    r.statistic_name = "chi2";
    r.statistic = chi2;
    r.alternative = Alternative::two_sided;
    if (chi2 <= 0.0) {
        r.statistic = 0.0;
        r.p_raw = 1.0;
    } else {
        const boost::math::chi_squared_distribution<> dist(kk - 1.0);
        r.p_raw = clamp01(boost::math::cdf(boost::math::complement(dist, chi2)));
    }
    r.p_corrected = r.p_raw;
    return r;
}

// ---------------------------------------------------------------- permutation

namespace {

double balanced_accuracy(const std::vector<int>& truth, const std::vector<int>& pred, int classes) {
    std::vector<double> hit(static_cast<std::size_t>(classes), 0.0), support(static_cast<std::size_t>(classes), 0.0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        support[static_cast<std::size_t>(truth[i])] += 1.0;
        if (truth[i] == pred[i]) hit[static_cast<std::size_t>(truth[i])] += 1.0;
    }
    double total = 0.0;
    int used = 0;
    for (int c = 0; c < classes; ++c)
        if (support[static_cast<std::size_t>(c)] > 0) {
            total += hit[static_cast<std::size_t>(c)] / support[static_cast<std::size_t>(c)];
            ++used;
        }
    return used ? total / used : 0.0;
}

StatReport permutation_report(double observed, const std::vector<double>& draws) {
    StatReport r;
    r.test = "permutation";
    r.statistic_name = "balanced_accuracy";
    r.statistic = observed;
    r.alternative = Alternative::one_sided_greater;
    std::size_t ge = 0;
    for (double d : draws)
        if (d >= observed - 1e-12) ++ge;
    r.p_raw = (1.0 + static_cast<double>(ge)) / (1.0 + static_cast<double>(draws.size()));
    r.p_corrected = r.p_raw;
    return r;
}

}  // namespace

StatReport permutation_test(const std::vector<FoldPredictions>& folds, int classes, int n_perm, std::uint64_t seed,
                            int threads) {
    if (n_perm < 1) throw DomainError("permutation_test: n_perm must be >= 1");
    if (folds.empty()) throw DomainError("permutation_test: no folds");
    for (const auto& f : folds) {
        if (f.truth.size() != f.predicted.size()) throw DomainError("permutation_test: length mismatch");
        for (std::size_t i = 0; i < f.truth.size(); ++i)
            if (f.truth[i] < 0 || f.truth[i] >= classes || f.predicted[i] < 0 || f.predicted[i] >= classes)
                throw DomainError("permutation_test: label out of range");
    }
    auto stat = [&](const std::vector<std::vector<int>>& truths) {
        double s = 0.0;
        for (std::size_t f = 0; f < folds.size(); ++f) s += balanced_accuracy(truths[f], folds[f].predicted, classes);
        return s / static_cast<double>(folds.size());
    };
    std::vector<std::vector<int>> truths;
    for (const auto& f : folds) truths.push_back(f.truth);
    const double observed = stat(truths);

    std::vector<double> draws(static_cast<std::size_t>(n_perm));
    detail::parallel_for(draws.size(), threads, [&](std::size_t d) {
        Rng rng = make_rng(seed, "permutation", d);
        auto local = truths;
        for (auto& t : local) shuffle(t.begin(), t.end(), rng);
        draws[d] = stat(local);
    });
    return permutation_report(observed, draws);
}

StatReport permutation_test_refit(double observed, const std::function<double(int)>& statistic, int n_perm,
                                  int threads) {
    if (n_perm < 1) throw DomainError("permutation_test: n_perm must be >= 1");
    std::vector<double> draws(static_cast<std::size_t>(n_perm));
    detail::parallel_for(draws.size(), threads, [&](std::size_t d) { draws[d] = statistic(static_cast<int>(d)); });
    return permutation_report(observed, draws);
}

// ---------------------------------------------------------------- Spearman

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

StatReport spearman(const std::vector<double>& x, const std::vector<double>& y, int n_perm, std::uint64_t seed) {
    if (x.size() != y.size()) throw DomainError("spearman: length mismatch");
    if (x.size() < 3) throw DomainError("spearman: need at least 3 pairs");
    auto constant = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
    };
    if (constant(x) || constant(y)) throw DomainError("spearman: rho undefined for constant input");
    const auto rx = average_ranks(x);
    auto ry = average_ranks(y);
    StatReport r;
    r.test = "spearman";
    r.statistic_name = "rho";
    r.alternative = Alternative::two_sided;
    const double rho = pearson(rx, ry);
    r.statistic = rho;
    const double bar = std::abs(rho) - 1e-12;
    if (x.size() <= 8) {
        std::sort(ry.begin(), ry.end());
        std::size_t total = 0, hits = 0;
        do {
            ++total;
            if (std::abs(pearson(rx, ry)) >= bar) ++hits;
        } while (std::next_permutation(ry.begin(), ry.end()));
        r.p_raw = static_cast<double>(hits) / static_cast<double>(total);
        r.exact = true;
    } else {
        if (n_perm < 1) throw DomainError("spearman: n_perm must be >= 1");
        Rng rng = make_rng(seed, "spearman");
        std::size_t hits = 0;
        for (int d = 0; d < n_perm; ++d) {
            shuffle(ry.begin(), ry.end(), rng);
            if (std::abs(pearson(rx, ry)) >= bar) ++hits;
        }
        r.p_raw = (1.0 + static_cast<double>(hits)) / (1.0 + n_perm);
    }
    r.p_corrected = r.p_raw;
    return r;
}

// ---------------------------------------------------------------- ANOVA

StatReport anova_oneway(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw DomainError("anova_oneway: need at least 2 groups");
    double grand = 0.0;
    std::size_t n = 0;
    for (const auto& g : groups) {
        if (g.size() < 2) throw DomainError("anova_oneway: each group needs at least 2 values");
        for (double v : g) grand += v;
        n += g.size();
    }
    grand /= static_cast<double>(n);
    double ssb = 0.0, ssw = 0.0;
    for (const auto& g : groups) {
        const double m = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
        ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
        for (double v : g) ssw += (v - m) * (v - m);
    }
    if (ssw <= 0.0) throw DomainError("anova_oneway: zero within-group variance, F undefined");
    const double dfb = static_cast<double>(groups.size() - 1);
    const double dfw = static_cast<double>(n - groups.size());
    StatReport r;
    r.test = "anova_oneway";
    r.statistic_name = "F";
    r.statistic = (ssb / dfb) / (ssw / dfw);
    r.alternative = Alternative::one_sided_greater;
    const boost::math::fisher_f_distribution<> dist(dfb, dfw);
    r.p_raw = r.statistic > 0.0 ? clamp01(boost::math::cdf(boost::math::complement(dist, r.statistic))) : 1.0;
    r.p_corrected = r.p_raw;
    r.effect = ssb / (ssb + ssw);
    return r;
}

// ---------------------------------------------------------------- output

std::string to_csv(const std::vector<StatReport>& reports) {
    std::ostringstream s;
    s << "test,statistic_name,statistic,p_raw,p_corrected,correction,m,alternative\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    for (const auto& r : reports)
        s << r.test << ',' << r.statistic_name << ',' << num(r.statistic) << ',' << num(r.p_raw) << ','
          << num(r.p_corrected) << ',' << correction_name(r.correction) << ',' << r.m << ','
          << alternative_name(r.alternative) << '\n';
    return s.str();
}

}  // namespace eegbench::stats
