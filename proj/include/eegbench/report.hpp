#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eegbench/analyses.hpp"
#include "eegbench/config.hpp"
#include "eegbench/harness.hpp"
#include "eegbench/stats.hpp"

namespace eegbench::report {

/// Metadata carried as the single `#` line on top of every CSV.
struct Header {
    std::string config_hash;
    std::uint64_t seed = 42;
    std::string version = kVersion;

    std::string line() const;
    static Header parse(const std::string& line);
};

/// Nine significant digits.
std::string fmt(double v);

struct FoldRow {
    std::string model, group, fold;
    std::size_t trials = 0;
    double balanced_accuracy = 0.0, macro_f1 = 0.0;
};

struct PredictionRow {
    std::string model, fold;
    std::size_t trial = 0;
    int truth = 0, predicted = 0;
};

struct ResultsTable {
    Header header;
    std::vector<FoldRow> folds;
    std::vector<PredictionRow> predictions;

    std::vector<std::string> models() const;  // first-appearance order
    std::vector<double> accuracies(const std::string& model) const;
    std::vector<std::string> fold_ids(const std::string& model) const;
    std::string group(const std::string& model) const;
    int classes() const;
};

ResultsTable from_run(const harness::RunResult& run, const std::vector<config::NamedPipeline>& pipelines,
                      const Header& header);

std::string results_csv(const ResultsTable& t);
std::string predictions_csv(const ResultsTable& t);
/// Reads results.csv and predictions.csv from a run directory.
ResultsTable read_results(const std::filesystem::path& dir);

std::string confusion_csv(const Matrix& confusion, const std::vector<std::string>& class_names, const Header& h);
std::string audit_json(const harness::RunResult& run, const Header& h);

struct StatsOptions {
    int n_perm = 10000;
    std::uint64_t seed = 42;
    std::string best_model;  // empty: highest mean accuracy
    bool pairwise_models = true;
    int threads = 1;
};

/// Wilcoxon vs chance (Bonferroni over models), all-pairs Wilcoxon (BH-FDR),
/// Friedman, group-level best-model comparisons, permutation test of the best model.
std::vector<stats::StatReport> benchmark_stats(const ResultsTable& t, const StatsOptions& opt);
std::string stats_csv(const std::vector<stats::StatReport>& reports, const Header& h);
std::vector<stats::StatReport> read_stats(const std::filesystem::path& file);

struct SummaryRow {
    std::string model, group;
    double mean = 0.0, sd = 0.0, macro_f1 = 0.0, d = 0.0, p_raw = 1.0, p_bonf = 1.0;
};

std::vector<SummaryRow> summarize(const ResultsTable& t, const std::vector<stats::StatReport>& reports);
std::string summary_csv(const std::vector<SummaryRow>& rows, const Header& h);
/// Fixed-width text table sorted by accuracy.
std::string summary_text(const std::vector<SummaryRow>& rows);

std::string pairwise_csv(const std::vector<analyses::TaskRow>& rows, const Header& h);
std::string rsa_csv(const stats::StatReport& r, const std::vector<std::string>& pairs,
                    const std::vector<double>& distances, const std::vector<double>& accuracies, const Header& h);
std::string importance_csv(const std::vector<std::string>& channels, const std::vector<double>& shares, const Header& h);
std::string dropout_csv(const std::vector<analyses::DropoutPoint>& top, const std::vector<analyses::DropoutPoint>& bottom,
                        const Header& h);
std::string erp_csv(const analyses::ErpResult& r, const Header& h);
std::string ablation_csv(const std::string& axis, const std::vector<harness::AblationRow>& rows, const Header& h);
std::string tgm_csv(const Matrix& m, const std::vector<Index>& points, double fs, double tmin, const Header& h);
std::string within_subject_csv(const std::string& model, const std::vector<harness::SubjectCv>& rows, const Header& h);
std::string learning_curve_csv(const std::string& model, const std::vector<harness::CurvePoint>& rows, const Header& h);

/// Rows of a CSV file without `#` lines; the first row is the column header.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& file, Header* header = nullptr);

}  // namespace eegbench::report
