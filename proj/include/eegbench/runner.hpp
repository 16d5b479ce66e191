#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eegbench/config.hpp"
#include "eegbench/report.hpp"

namespace eegbench::runner {

struct SubjectSummary {
    std::string subject;
    std::size_t epochs = 0;
    std::size_t rejected = 0;
    std::size_t bad_channels = 0;
};

struct IngestResult {
    EpochSet epochs;
    std::vector<SubjectSummary> subjects;
    std::vector<std::string> missing;
};

/// scan_bids + EDF parsing + per-subject preprocessing, subjects in parallel.
IngestResult ingest_dataset(const std::filesystem::path& root, const ingest::LabelMap& label_map,
                            const preprocess::PreprocessConfig& cfg, int threads = 1);

/// Epochs for the configured data source.
EpochSet load_epochs(const config::RunConfig& cfg);

report::Header header_of(const config::RunConfig& cfg);

/// Files written by `run`, relative to the output directory.
struct RunOutputs {
    std::vector<std::string> files;
    harness::RunResult run;
};

/// Evaluates every pipeline, writes results, audit, stats and enabled
/// analyses. A failed audit under strict mode writes only audit.json and
/// then throws AuditError.
RunOutputs run_benchmark(const config::RunConfig& cfg, const EpochSet& epochs, const std::filesystem::path& out);

std::vector<harness::AblationRow> run_ablation(const config::RunConfig& cfg, const EpochSet& epochs,
                                               harness::Axis axis, const std::filesystem::path& out);

Matrix run_tgm(const config::RunConfig& cfg, const EpochSet& epochs, const std::filesystem::path& out);

/// Recomputes stats.csv from results.csv and predictions.csv in `dir`.
std::vector<stats::StatReport> run_stats(const std::filesystem::path& dir, const report::StatsOptions& opt);

/// Writes summary.csv and returns the text table.
std::string run_report(const std::filesystem::path& dir);

}  // namespace eegbench::runner
