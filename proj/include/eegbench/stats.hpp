#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eegbench/common.hpp"

namespace eegbench::stats {

enum class Correction { none, bonferroni, bh_fdr };
enum class Alternative { one_sided_greater, two_sided };

std::string correction_name(Correction c);
std::string alternative_name(Alternative a);

struct StatReport {
    std::string test;
    std::string statistic_name;  // W, chi2, F, rho, t
    double statistic = 0.0;
    double p_raw = 1.0;
    double p_corrected = 1.0;
    Correction correction = Correction::none;
    int m = 1;
    Alternative alternative = Alternative::two_sided;
    bool exact = false;
    double effect = 0.0;  // partial eta squared for ANOVA, unused elsewhere

    void validate() const;
};

/// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& x);

/// Signed-rank test of x against mu0 after dropping zero differences.
/// W is the sum of ranks of negative differences; the null is enumerated
/// exactly for n <= 20 and normal-approximated (tie corrected) above.
StatReport wilcoxon_signed_rank(const std::vector<double>& x, double mu0,
                                Alternative alt = Alternative::one_sided_greater);

double bonferroni(double p, int m);
std::vector<double> bh_fdr(const std::vector<double>& p);

/// Applies a correction in place over a family of reports.
void correct(std::vector<StatReport>& family, Correction c);

/// rows = subjects, columns = models.
StatReport friedman(const Matrix& scores);

struct FoldPredictions {
    std::vector<int> truth;
    std::vector<int> predicted;
};

/// Label permutation within each fold against frozen predictions; the
/// statistic is mean balanced accuracy over folds.
StatReport permutation_test(const std::vector<FoldPredictions>& folds, int classes, int n_perm = 10000,
                            std::uint64_t seed = 42, int threads = 1);

/// Re-training variant: `statistic(draw)` must return the permuted statistic
/// for permutation number `draw` (0-based).
StatReport permutation_test_refit(double observed, const std::function<double(int draw)>& statistic, int n_perm,
                                  int threads = 1);

/// Spearman correlation. Exact two-sided p by enumerating all n! pairings for
/// n <= 8, otherwise `n_perm` seeded permutations.
StatReport spearman(const std::vector<double>& x, const std::vector<double>& y, int n_perm = 10000,
                    std::uint64_t seed = 42);

/// One-way ANOVA; `effect` holds partial eta squared.
StatReport anova_oneway(const std::vector<std::vector<double>>& groups);

/// stats.csv rows.
std::string to_csv(const std::vector<StatReport>& reports);

}  // namespace eegbench::stats
