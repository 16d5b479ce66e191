#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "eegbench/common.hpp"

namespace eegbench::classify {

enum class Kind { gbdt, random_forest, lda_shrinkage, linear_svm, logistic, soft_vote, stacking };

std::string kind_name(Kind kind);
Kind parse_kind(const std::string& name);

struct ClassifierSpec {
    Kind kind = Kind::lda_shrinkage;
    std::uint64_t seed = 42;

    // tree ensembles
    int n_estimators = 500;
    int num_leaves = 31;
    double learning_rate = 0.05;
    int min_child_samples = 20;
    int max_bins = 255;
    int min_samples_leaf = 5;

    // linear models
    double shrinkage = -1.0;  // LDA; negative selects Ledoit-Wolf
    double C = 1.0;
    int max_iter = 1000;
    double tol = 1e-4;

    // ensembles
    std::vector<ClassifierSpec> bases;
    std::vector<ClassifierSpec> meta;  // exactly one entry for stacking
    int inner_k = 3;

    /// Throws ConfigError for out-of-range hyperparameters.
    void validate() const;
};

/// GBDT defaults: 500 rounds, 31 leaves, rate 0.05, 20 samples per leaf.
ClassifierSpec gbdt_spec(std::uint64_t seed = 42);
ClassifierSpec random_forest_spec(std::uint64_t seed = 42);
ClassifierSpec lda_spec();
ClassifierSpec linear_svm_spec(std::uint64_t seed = 42);
ClassifierSpec logistic_spec();
/// LDA, logistic and linear SVM bases with a logistic meta-learner.
ClassifierSpec stacking_spec(std::uint64_t seed = 42);

class Model {
public:
    virtual ~Model() = default;

    /// trials x K probabilities, rows sum to 1.
    virtual Matrix predict_proba(const Matrix& x) const = 0;
    /// Raw nonnegative per-feature weights; empty if the kind has none.
    virtual Vector raw_importance() const { return {}; }

    Kind kind() const { return kind_; }
    int num_classes() const { return classes_; }
    Index dims() const { return dims_; }

protected:
    Model(Kind kind, int classes, Index dims) : kind_(kind), classes_(classes), dims_(dims) {}

private:
    Kind kind_;
    int classes_;
    Index dims_;
};

using ModelPtr = std::shared_ptr<const Model>;

/// Labels must cover 0..K-1 with every class present; features must be finite.
ModelPtr fit(const ClassifierSpec& spec, const Matrix& x, const std::vector<int>& y);
Matrix predict_proba(const Model& model, const Matrix& x);

/// Row argmax; ties go to the lowest class index.
std::vector<int> argmax(const Matrix& proba);

/// Elementwise mean of probability matrices, renormalized per row.
Matrix soft_vote(const std::vector<Matrix>& probas);

/// Nonnegative per-feature weights summing to 1. Trees report split gain,
/// linear models the absolute coefficients summed over classes.
Vector feature_importance(const Model& model);

/// Fold index per trial: seeded shuffle within each class, then round-robin.
std::vector<int> stratified_folds(const std::vector<int>& y, int k, std::uint64_t seed);

/// Number of classes implied by y; throws DomainError unless every class
/// 0..max(y) occurs and there are at least two.
int check_labels(const std::vector<int>& y);

}  // namespace eegbench::classify
