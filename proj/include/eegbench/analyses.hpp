#pragma once

#include <string>
#include <vector>

#include "eegbench/common.hpp"
#include "eegbench/harness.hpp"
#include "eegbench/stats.hpp"

namespace eegbench::analyses {

inline const std::vector<std::string> kVowels{"a", "e", "i", "o", "u"};

// ---------------------------------------------------------------- pairwise tasks

struct TaskRow {
    std::string label;  // "a-e" or "aei"
    std::vector<int> classes;
    double chance = 0.0;
    std::vector<double> accuracies;  // per LOSO fold
    double mean = 0.0, sd = 0.0, d = 0.0;
    stats::StatReport test;  // one-sided Wilcoxon vs chance, Bonferroni within its family
};

/// All 10 two-class tasks (Bonferroni m = 10) followed by the triplets
/// aei, aiu, iou (m = 3), each evaluated with LOSO.
std::vector<TaskRow> pairwise_tasks(const EpochSet& epochs, const harness::PipelineSpec& pipeline,
                                    const harness::EvalOptions& opt = {},
                                    const std::vector<std::string>& class_names = kVowels);

// ---------------------------------------------------------------- acoustics and RSA

/// Traunmueller (1990) Hz -> Bark.
double bark(double hz);

struct FormantTable {
    std::vector<std::string> vowels;
    std::vector<double> f1, f2;

    void validate() const;
};

/// Euclidean distance in (Bark F1, Bark F2); symmetric with zero diagonal.
Matrix acoustic_distances(const FormantTable& table);

/// Upper triangle in (0,1), (0,2), ..., (n-2,n-1) order.
std::vector<double> condensed(const Matrix& dissimilarity);

/// Spearman correlation between acoustic distance and neural confusion
/// (1 - pairwise accuracy), both over condensed pairs.
stats::StatReport rsa(const Matrix& acoustic, const std::vector<double>& pair_accuracies, int n_perm = 10000,
                      std::uint64_t seed = 42);

// ---------------------------------------------------------------- electrodes

/// Fold-averaged importances summed per channel and normalized to 1.
std::vector<double> electrode_importance(const std::vector<Vector>& fold_importances,
                                         const std::vector<features::Column>& registry, Index channels);

/// Channel indices by descending share; ties keep the lower index first.
std::vector<Index> rank_channels(const std::vector<double>& shares);

enum class Direction { top, bottom };

struct DropoutPoint {
    int k = 0;
    std::vector<Index> dropped;
    std::vector<double> accuracies;
    double mean = 0.0, sd = 0.0;
};

/// LOSO with the K most (top) or least (bottom) important channels zeroed
/// before feature extraction.
std::vector<DropoutPoint> channel_dropout(const EpochSet& epochs, const std::vector<Index>& ranking,
                                          const std::vector<int>& ks, Direction direction,
                                          const harness::PipelineSpec& pipeline, const harness::EvalOptions& opt = {});

// ---------------------------------------------------------------- ERP

struct ErpWindow {
    std::string component;
    double start = 0.0, end = 0.0;  // seconds
    bool negative = false;          // minimum when true, maximum otherwise
};

inline const std::vector<ErpWindow> kErpWindows{{"N1", 0.080, 0.150, true}, {"P2", 0.150, 0.280, false}};

struct ErpPeak {
    std::string vowel, channel, component;
    double peak_uv = 0.0;
    double latency_ms = 0.0;
};

struct ErpResult {
    std::vector<ErpPeak> peaks;            // grand average
    std::vector<Matrix> waveforms;         // per channel: classes x samples grand average
    std::vector<stats::StatReport> anova;  // per channel and component, over per-subject peaks
    std::vector<std::string> anova_labels; // "Cz:N1", ...
};

ErpResult erp(const EpochSet& epochs, const std::vector<std::string>& channels = {"Cz", "FCz"},
              const std::vector<ErpWindow>& windows = kErpWindows,
              const std::vector<std::string>& class_names = kVowels);

}  // namespace eegbench::analyses
