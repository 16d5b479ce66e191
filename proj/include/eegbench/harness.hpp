#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eegbench/classify.hpp"
#include "eegbench/common.hpp"
#include "eegbench/features.hpp"

namespace eegbench::harness {

// ---------------------------------------------------------------- metrics

/// K x K counts, rows = true class, columns = predicted class.
Matrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted, int classes);
/// Row-normalized copy; empty rows stay zero.
Matrix normalize_rows(const Matrix& confusion);
/// Mean per-class recall over classes with at least one true trial.
double balanced_accuracy(const Matrix& confusion);
double macro_f1(const Matrix& confusion);
/// (mean - chance) / sample standard deviation (ddof 1).
double cohens_d(const std::vector<double>& values, double chance);
double mean(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);

// ---------------------------------------------------------------- pipelines

enum class Input {
    features,  // hand-crafted families, optional PCA, then a classifier
    tangent,   // covariance -> tangent space at the training geometric mean -> classifier
    mdm,       // covariance -> minimum distance to class geometric means
    vote,      // soft vote over other pipelines of the same run (no refit)
};

struct PipelineSpec {
    std::string name;
    Input input = Input::features;
    std::vector<features::Family> families{features::Family::de, features::Family::bandpower,
                                           features::Family::hjorth, features::Family::temporal};
    std::vector<features::Band> bands = features::default_bands();
    Index pca_components = 0;  // 0 disables PCA
    bool euclidean_alignment = false;
    bool normalize = true;  // fold-scoped per-channel z-score
    classify::ClassifierSpec classifier;
    std::vector<std::string> vote;  // member pipeline names for Input::vote
    bool collect_importance = false;
};

std::string input_name(Input input);
Input parse_input(const std::string& name);

// ---------------------------------------------------------------- audit

enum class Injection { none, normalizer_all_data, pca_all_data, test_in_train, validation_from_test };

std::string injection_name(Injection inj);
Injection parse_injection(const std::string& name);

struct FoldPlan {
    std::string test_subject;
    std::vector<std::size_t> train, test, validation;  // sorted trial indices
};

struct AuditRecord {
    std::string fold;       // held-out subject
    std::string operation;  // "normalizer", "pca", "classifier:<name>", ...
    std::string fit_scope;  // "train", "all", or "subject:<id>" for unsupervised per-subject transforms
    std::vector<std::size_t> data_scope;
};

struct Verdict {
    int checkpoint = 0;
    std::string name;
    bool pass = true;
    std::string witness;
};

/// Trial bookkeeping needed by the temporal checkpoint.
struct EpochMeta {
    std::vector<std::string> subjects;
    std::vector<std::int64_t> onsets;
    std::vector<std::string> recordings;
    Index samples = 0;
    double fs = 0.0;
    double tmin = 0.0;

    static EpochMeta of(const EpochSet& epochs);
};

struct AuditTrail {
    std::vector<FoldPlan> folds;
    std::vector<AuditRecord> records;
    EpochMeta meta;
};

inline constexpr const char* kCheckpointNames[] = {"", "normalization leakage", "validation leakage",
                                                   "subject overlap", "temporal leakage"};

/// Verifies the four checkpoints; failures are verdicts, not exceptions.
std::vector<Verdict> leakage_audit(const AuditTrail& trail);

// ---------------------------------------------------------------- protocols

struct EvalOptions {
    std::uint64_t seed = 42;
    bool strict_audit = false;
    Injection inject = Injection::none;
    int threads = 1;
    double validation_fraction = 0.2;
};

struct FoldResult {
    std::string fold;  // held-out subject (or "<subject>/<k>" within subject)
    std::vector<std::size_t> trials;
    std::vector<int> truth;
    std::vector<int> predicted;
    Matrix proba;
    Matrix confusion;
    double balanced_accuracy = 0.0;
    double macro_f1 = 0.0;
    Vector importance;  // empty unless collected
};

struct PipelineResult {
    std::string name;
    std::vector<FoldResult> folds;
    std::vector<features::Column> registry;  // feature columns behind `importance`

    std::vector<double> fold_accuracies() const;
    Matrix pooled_confusion() const;
};

struct RunResult {
    std::vector<PipelineResult> pipelines;
    AuditTrail trail;
    std::vector<Verdict> verdicts;
    int classes = 0;

    const PipelineResult& find(const std::string& name) const;
    bool audit_passed() const;
};

/// Splits trials into one fold per subject (subjects in sorted order).
std::vector<FoldPlan> loso_plan(const EpochSet& epochs, const EvalOptions& opt);

/// Leave-one-subject-out evaluation of every pipeline on shared folds.
RunResult loso(const EpochSet& epochs, const std::vector<PipelineSpec>& pipelines, const EvalOptions& opt = {});

struct SubjectCv {
    std::string subject;
    std::vector<FoldResult> folds;
    double mean_accuracy = 0.0;
};

/// Stratified k-fold inside each subject. Subjects with fewer than k trials
/// in some class are skipped with a warning.
std::vector<SubjectCv> within_subject_cv(const EpochSet& epochs, const PipelineSpec& pipeline, int k = 5,
                                         const EvalOptions& opt = {});

/// Sample indices used as TGM time points (0, step, 2 step, ...).
std::vector<Index> tgm_points(Index samples, Index step);

/// Time-generalization matrix of balanced accuracies (train time x test
/// time), averaged over LOSO folds. The decoder sees channel vectors at one
/// sample and is standardized on training data at its training time.
Matrix tgm(const EpochSet& epochs, Index step = 4, const classify::ClassifierSpec& decoder = classify::lda_spec(),
           const EvalOptions& opt = {});

struct CurvePoint {
    int n_train = 0;
    std::vector<double> accuracies;  // one per repetition
    double mean = 0.0, sd = 0.0;
};

/// For each N, `reps` seeded draws of N training subjects; accuracy is the
/// mean balanced accuracy over all remaining subjects.
std::vector<CurvePoint> learning_curve(const EpochSet& epochs, const std::vector<int>& ns, int reps,
                                       const PipelineSpec& pipeline, const EvalOptions& opt = {});

enum class Axis { feature_family, time_window, channel_region, pca };
std::string axis_name(Axis axis);
Axis parse_axis(const std::string& name);

struct GridPoint {
    std::string label;
    std::vector<features::Family> families;  // feature_family
    double t0 = 0.0, t1 = 0.0;              // time_window, seconds
    std::vector<std::string> channels;      // channel_region
    Index components = 0;                   // pca
};

struct AblationRow {
    std::string label;
    std::vector<double> accuracies;
    double mean = 0.0, sd = 0.0, delta_vs_chance = 0.0;
    Index dims = 0;
};

std::vector<AblationRow> ablation_run(const EpochSet& epochs, Axis axis, const std::vector<GridPoint>& grid,
                                      const PipelineSpec& base, const EvalOptions& opt = {});

// ---------------------------------------------------------------- epoch transforms

/// Keeps samples with time in [t0, t1] seconds.
EpochSet crop_window(const EpochSet& epochs, double t0, double t1);
EpochSet select_channels(const EpochSet& epochs, const std::vector<std::string>& names);
EpochSet zero_channels(EpochSet epochs, const std::vector<Index>& channels);
/// Trials whose label is in `keep`, relabelled to their position in `keep`.
EpochSet select_classes(const EpochSet& epochs, const std::vector<int>& keep);

}  // namespace eegbench::harness
