#include "eegbench/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "eegbench/preprocess.hpp"
#include "eegbench/riemann.hpp"
#include "eegbench/seed.hpp"
#include "parallel.hpp"

namespace eegbench::harness {

// ---------------------------------------------------------------- metrics

Matrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted, int classes) {
    if (truth.size() != predicted.size()) throw DomainError("confusion_matrix: length mismatch");
    Matrix c = Matrix::Zero(classes, classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= classes || predicted[i] < 0 || predicted[i] >= classes)
            throw DomainError("confusion_matrix: label out of range");
        c(truth[i], predicted[i]) += 1.0;
    }
    return c;
}

Matrix normalize_rows(const Matrix& confusion) {
    Matrix out = confusion;
    for (Index i = 0; i < out.rows(); ++i) {
        const double s = out.row(i).sum();
        if (s > 0.0) out.row(i) /= s;
    }
    return out;
}

double balanced_accuracy(const Matrix& confusion) {
    if ((confusion.array() < 0.0).any()) throw DomainError("balanced_accuracy: negative counts");
    double total = 0.0;
    int used = 0;
    for (Index k = 0; k < confusion.rows(); ++k) {
        const double support = confusion.row(k).sum();
        if (support == 0.0) continue;
        total += confusion(k, k) / support;
        ++used;
    }
    if (used < confusion.rows()) warn("balanced_accuracy: " + std::to_string(confusion.rows() - used) +
                                      " class(es) without true trials excluded");
    return used ? total / used : 0.0;
}

double macro_f1(const Matrix& confusion) {
    double total = 0.0;
    int used = 0;
    for (Index k = 0; k < confusion.rows(); ++k) {
        const double support = confusion.row(k).sum();
        if (support == 0.0) continue;
        const double tp = confusion(k, k);
        const double fp = confusion.col(k).sum() - tp;
        const double fn = support - tp;
        total += 2.0 * tp / (2.0 * tp + fp + fn);
        ++used;
    }
    return used ? total / used : 0.0;
}

namespace {
bool all_equal(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}
}  // namespace

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    if (all_equal(v)) return v.front();  // exact, free of summation round-off
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2 || all_equal(v)) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double cohens_d(const std::vector<double>& values, double chance) {
    if (values.size() < 2) throw DomainError("cohens_d: need at least two folds");
    const double diff = mean(values) - chance;
    const double sd = sample_sd(values);
    if (sd == 0.0) {
        if (std::abs(diff) < 1e-12) return 0.0;
        warn("cohens_d: zero spread with nonzero effect");
        return diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    }
    return diff / sd;
}

// ---------------------------------------------------------------- names

std::string input_name(Input input) {
    switch (input) {
        case Input::features: return "features";
        case Input::tangent: return "tangent";
        case Input::mdm: return "mdm";
        case Input::vote: return "vote";
    }
    return "?";
}

Input parse_input(const std::string& name) {
    for (auto i : {Input::features, Input::tangent, Input::mdm, Input::vote})
        if (input_name(i) == name) return i;
    throw ConfigError("unknown pipeline input '" + name + "'");
}

std::string injection_name(Injection inj) {
    switch (inj) {
        case Injection::none: return "none";
        case Injection::normalizer_all_data: return "normalizer_all_data";
        case Injection::pca_all_data: return "pca_all_data";
        case Injection::test_in_train: return "test_in_train";
        case Injection::validation_from_test: return "validation_from_test";
    }
    return "?";
}

Injection parse_injection(const std::string& name) {
    for (auto i : {Injection::none, Injection::normalizer_all_data, Injection::pca_all_data, Injection::test_in_train,
                   Injection::validation_from_test})
        if (injection_name(i) == name) return i;
    throw ConfigError("unknown injection '" + name + "'");
}

std::string axis_name(Axis axis) {
    switch (axis) {
        case Axis::feature_family: return "feature_family";
        case Axis::time_window: return "time_window";
        case Axis::channel_region: return "channel_region";
        case Axis::pca: return "pca";
    }
    return "?";
}

Axis parse_axis(const std::string& name) {
    for (auto a : {Axis::feature_family, Axis::time_window, Axis::channel_region, Axis::pca})
        if (axis_name(a) == name) return a;
    throw ConfigError("unknown ablation axis '" + name + "'");
}

// ---------------------------------------------------------------- results

std::vector<double> PipelineResult::fold_accuracies() const {
    std::vector<double> out;
    for (const auto& f : folds) out.push_back(f.balanced_accuracy);
    return out;
}

Matrix PipelineResult::pooled_confusion() const {
    if (folds.empty()) return {};
    Matrix c = Matrix::Zero(folds.front().confusion.rows(), folds.front().confusion.cols());
    for (const auto& f : folds) c += f.confusion;
    return c;
}

const PipelineResult& RunResult::find(const std::string& name) const {
    for (const auto& p : pipelines)
        if (p.name == name) return p;
    throw DomainError("no pipeline named '" + name + "' in run");
}

bool RunResult::audit_passed() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

// ---------------------------------------------------------------- audit

EpochMeta EpochMeta::of(const EpochSet& epochs) {
    EpochMeta m;
    m.subjects = epochs.subjects;
    m.onsets = epochs.onsets;
    m.recordings = epochs.recordings;
    m.samples = epochs.samples();
    m.fs = epochs.fs;
    m.tmin = epochs.tmin;
    return m;
}

namespace {

std::string describe_trial(const EpochMeta& meta, std::size_t trial) {
    std::ostringstream s;
    s << "trial " << trial;
    if (trial < meta.subjects.size()) s << " (subject " << meta.subjects[trial] << ")";
    return s.str();
}

bool sorted_subset(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, std::size_t* missing) {
    std::vector<std::size_t> sb = b;
    std::sort(sb.begin(), sb.end());
    for (std::size_t x : a)
        if (!std::binary_search(sb.begin(), sb.end(), x)) {
            *missing = x;
            return false;
        }
    return true;
}

}  // namespace

std::vector<Verdict> leakage_audit(const AuditTrail& trail) {
    std::vector<Verdict> v(4);
    for (int c = 1; c <= 4; ++c) {
        v[static_cast<std::size_t>(c - 1)].checkpoint = c;
        v[static_cast<std::size_t>(c - 1)].name = kCheckpointNames[c];
    }
    auto fail = [&](int c, const std::string& witness) {
        auto& verdict = v[static_cast<std::size_t>(c - 1)];
        if (verdict.pass) {
            verdict.pass = false;
            verdict.witness = witness;
        }
    };
    const auto& meta = trail.meta;
    std::map<std::string, const FoldPlan*> by_fold;
    for (const auto& f : trail.folds) by_fold[f.test_subject] = &f;

    // 1: every fitted quantity sees only its fold's training trials
    for (const auto& r : trail.records) {
        const auto it = by_fold.find(r.fold);
        if (it == by_fold.end()) {
            fail(1, "operation '" + r.operation + "' logged for unknown fold '" + r.fold + "'");
            continue;
        }
        if (r.fit_scope.empty()) {
            fail(1, "fold " + r.fold + ": operation '" + r.operation + "' logged without a fit scope");
            continue;
        }
        if (r.fit_scope.rfind("subject:", 0) == 0) {
            // unsupervised per-subject transform: must stay inside that subject
            const std::string subject = r.fit_scope.substr(8);
            for (std::size_t t : r.data_scope)
                if (t >= meta.subjects.size() || meta.subjects[t] != subject) {
                    fail(1, "fold " + r.fold + ": operation '" + r.operation + "' scoped to subject " + subject +
                                " used " + describe_trial(meta, t));
                    break;
                }
            continue;
        }
        std::size_t missing = 0;
        if (!sorted_subset(r.data_scope, it->second->train, &missing))
            fail(1, "fold " + r.fold + ": operation '" + r.operation + "' (scope " + r.fit_scope + ") used " +
                        describe_trial(meta, missing) + " outside the training fold");
    }

    for (const auto& f : trail.folds) {
        // 2: validation trials never come from the held-out subject
        for (std::size_t t : f.validation)
            if (t < meta.subjects.size() && meta.subjects[t] == f.test_subject) {
                fail(2, "fold " + f.test_subject + ": validation split contains " + describe_trial(meta, t));
                break;
            }
        // 3: training and test subjects are disjoint
        std::set<std::string> test_subjects;
        for (std::size_t t : f.test) test_subjects.insert(meta.subjects.at(t));
        for (std::size_t t : f.train)
            if (test_subjects.count(meta.subjects.at(t))) {
                fail(3, "fold " + f.test_subject + ": training set contains " + describe_trial(meta, t) +
                            " of a test subject");
                break;
            }
    }

    // 4: epochs are stimulus-locked and do not overlap within a recording
    if (meta.onsets.size() != meta.subjects.size() || meta.recordings.size() != meta.subjects.size()) {
        fail(4, "epoch onsets or recording ids missing from the epoch metadata");
    } else {
        std::map<std::string, std::vector<std::pair<std::int64_t, std::size_t>>> per_recording;
        for (std::size_t t = 0; t < meta.onsets.size(); ++t) {
            if (meta.onsets[t] < 0) {
                fail(4, describe_trial(meta, t) + " has no stimulus onset");
                continue;
            }
            per_recording[meta.recordings[t]].push_back({meta.onsets[t], t});
        }
        for (auto& [rec, list] : per_recording) {
            std::sort(list.begin(), list.end());
            for (std::size_t j = 1; j < list.size(); ++j)
                if (list[j].first - list[j - 1].first < static_cast<std::int64_t>(meta.samples)) {
                    std::ostringstream s;
                    s << "recording " << rec << ": " << describe_trial(meta, list[j - 1].second) << " at sample "
                      << list[j - 1].first << " overlaps " << describe_trial(meta, list[j].second) << " at sample "
                      << list[j].first << " (window " << meta.samples << " samples)";
                    fail(4, s.str());
                    break;
                }
        }
    }
    return v;
}

// ---------------------------------------------------------------- epoch transforms

EpochSet crop_window(const EpochSet& epochs, double t0, double t1) {
    if (!(t1 > t0)) throw DomainError("crop_window: empty window");
    const Index n = epochs.samples();
    Index first = -1, last = -1;
    for (Index i = 0; i < n; ++i) {
        const double t = epochs.tmin + static_cast<double>(i) / epochs.fs;
        if (t >= t0 - 1e-9 && t <= t1 + 1e-9) {
            if (first < 0) first = i;
            last = i;
        }
    }
    if (first < 0 || last - first + 1 < 2) throw DomainError("crop_window: window contains fewer than two samples");
    EpochSet out = epochs;
    for (auto& trial : out.data) trial = Matrix(trial.middleCols(first, last - first + 1));
    out.tmin = epochs.tmin + static_cast<double>(first) / epochs.fs;
    return out;
}

EpochSet select_channels(const EpochSet& epochs, const std::vector<std::string>& names) {
    if (names.empty()) throw DomainError("select_channels: empty channel list");
    std::vector<Index> rows;
    for (const auto& n : names) {
        const int c = epochs.channel_index(n);
        if (c < 0) throw DomainError("select_channels: unknown channel '" + n + "'");
        rows.push_back(c);
    }
    EpochSet out = epochs;
    out.channel_names = names;
    for (std::size_t t = 0; t < epochs.trials(); ++t) {
        Matrix m(static_cast<Index>(rows.size()), epochs.samples());
        for (std::size_t r = 0; r < rows.size(); ++r) m.row(static_cast<Index>(r)) = epochs.data[t].row(rows[r]);
        out.data[t] = std::move(m);
    }
    return out;
}

EpochSet zero_channels(EpochSet epochs, const std::vector<Index>& channels) {
    for (Index c : channels)
        if (c < 0 || c >= epochs.channels()) throw DomainError("zero_channels: channel index out of range");
    for (auto& trial : epochs.data)
        for (Index c : channels) trial.row(c).setZero();
    return epochs;
}

EpochSet select_classes(const EpochSet& epochs, const std::vector<int>& keep) {
    std::vector<std::size_t> idx;
    for (std::size_t t = 0; t < epochs.trials(); ++t)
        if (std::find(keep.begin(), keep.end(), epochs.labels[t]) != keep.end()) idx.push_back(t);
    EpochSet out = epochs.subset(idx);
    for (auto& y : out.labels)
        y = static_cast<int>(std::find(keep.begin(), keep.end(), y) - keep.begin());
    return out;
}

// ---------------------------------------------------------------- evaluation core

namespace {

struct SplitJob {
    std::string label;
    std::vector<std::size_t> train, test;
    bool normalizer_all = false;
    bool pca_all = false;
};

struct SplitOutcome {
    std::vector<FoldResult> results;  // one per pipeline
    std::vector<AuditRecord> records;
    std::vector<std::vector<features::Column>> registries;
};

std::vector<std::size_t> merged(std::vector<std::size_t> a, const std::vector<std::size_t>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

features::FeatureMatrix stack_rows(const features::FeatureMatrix& a, const features::FeatureMatrix& b) {
    features::FeatureMatrix out;
    out.registry = a.registry;
    out.values.resize(a.values.rows() + b.values.rows(), a.values.cols());
    out.values << a.values, b.values;
    return out;
}

std::vector<int> labels_of(const EpochSet& e, const std::vector<std::size_t>& idx) {
    std::vector<int> y;
    y.reserve(idx.size());
    for (auto i : idx) y.push_back(e.labels[i]);
    return y;
}

std::string family_key(const PipelineSpec& p) {
    std::string key = p.normalize ? "n:" : "r:";
    for (auto f : p.families) key += features::family_name(f) + ",";
    for (const auto& b : p.bands) key += b.name + ",";
    return key;
}

Matrix mdm_proba(const riemann::MdmModel<double>& model, const std::vector<Matrix>& covs) {
    Matrix p(static_cast<Index>(covs.size()), model.num_classes());
    for (std::size_t i = 0; i < covs.size(); ++i) {
        const Vector d = riemann::mdm_distances(model, covs[i]);
        Vector s = -d.cwiseAbs2();
        s.array() -= s.maxCoeff();
        s = s.array().exp();
        p.row(static_cast<Index>(i)) = (s / s.sum()).transpose();
    }
    return p;
}

void validate_pipelines(const std::vector<PipelineSpec>& pipelines) {
    std::set<std::string> seen;
    for (const auto& p : pipelines) {
        if (p.name.empty()) throw ConfigError("pipeline without a name");
        if (!seen.insert(p.name).second) throw ConfigError("duplicate pipeline name '" + p.name + "'");
        if (p.input == Input::vote) {
            if (p.vote.empty()) throw ConfigError("vote pipeline '" + p.name + "' lists no members");
            for (const auto& m : p.vote) {
                if (!seen.count(m) || m == p.name)
                    throw ConfigError("vote pipeline '" + p.name + "' references '" + m +
                                      "', which must be an earlier pipeline");
            }
        } else if (p.input != Input::mdm) {
            p.classifier.validate();
        }
        if (p.input == Input::features && p.families.empty())
            throw ConfigError("pipeline '" + p.name + "' has no feature families");
        if (p.pca_components < 0) throw ConfigError("pipeline '" + p.name + "' has negative PCA components");
    }
}

class SplitRunner {
public:
    SplitRunner(const EpochSet& epochs, const std::vector<PipelineSpec>& pipelines, int classes)
        : epochs_(epochs), pipelines_(pipelines), classes_(classes) {}

    SplitOutcome run(const SplitJob& job) const {
        SplitOutcome out;
        out.results.resize(pipelines_.size());
        out.registries.resize(pipelines_.size());
        const auto ytrain = labels_of(epochs_, job.train);
        const auto ytest = labels_of(epochs_, job.test);
        auto log = [&](std::string op, std::string scope, std::vector<std::size_t> data) {
            std::sort(data.begin(), data.end());
            out.records.push_back({job.label, std::move(op), std::move(scope), std::move(data)});
        };

        // fold-scoped channel normalization
        bool need_norm = false, need_raw = false;
        for (const auto& p : pipelines_) {
            if (p.input == Input::vote) continue;
            (p.normalize ? need_norm : need_raw) = true;
        }
        EpochSet train_raw = epochs_.subset(job.train), test_raw = epochs_.subset(job.test);
        EpochSet train_norm, test_norm;
        if (need_norm) {
            const auto fit_idx = job.normalizer_all ? merged(job.train, job.test) : job.train;
            const auto norm = preprocess::fit_normalizer(epochs_.subset(fit_idx), job.normalizer_all ? "all" : "train");
            log("normalizer", norm.fit_scope, fit_idx);
            train_norm = preprocess::apply_normalizer(norm, train_raw);
            test_norm = preprocess::apply_normalizer(norm, test_raw);
        }
        if (!need_raw) {
            train_raw = {};
            test_raw = {};
        }
        auto pick = [&](bool normalize) -> std::pair<const EpochSet*, const EpochSet*> {
            return normalize ? std::pair{&train_norm, &test_norm} : std::pair{&train_raw, &test_raw};
        };

        std::map<std::string, std::pair<features::FeatureMatrix, features::FeatureMatrix>> feature_cache;
        std::map<std::string, std::pair<std::vector<Matrix>, std::vector<Matrix>>> cov_cache;

        for (std::size_t pi = 0; pi < pipelines_.size(); ++pi) {
            const auto& p = pipelines_[pi];
            Matrix proba;
            Vector importance;
            if (p.input == Input::features) {
                const auto key = family_key(p);
                auto it = feature_cache.find(key);
                if (it == feature_cache.end()) {
                    const auto [tr, te] = pick(p.normalize);
                    it = feature_cache
                             .emplace(key, std::pair{features::extract(*tr, p.families, p.bands),
                                                     features::extract(*te, p.families, p.bands)})
                             .first;
                }
                const features::FeatureMatrix* ftr = &it->second.first;
                const features::FeatureMatrix* fte = &it->second.second;
                features::FeatureMatrix ptr, pte;
                out.registries[pi] = ftr->registry;
                if (p.pca_components > 0) {
                    features::FeatureMatrix fit_on = *ftr;
                    std::vector<std::size_t> scope = job.train;
                    if (job.pca_all) {
                        fit_on = stack_rows(*ftr, *fte);
                        scope = merged(job.train, job.test);
                    }
                    const auto pca = features::fit_pca(fit_on, p.pca_components, job.pca_all ? "all" : "train");
                    log("pca:" + p.name, pca.fit_scope, scope);
                    ptr = features::apply_pca(pca, *ftr);
                    pte = features::apply_pca(pca, *fte);
                    ftr = &ptr;
                    fte = &pte;
                    out.registries[pi] = ptr.registry;
                }
                const auto model = classify::fit(p.classifier, ftr->values, ytrain);
                log("classifier:" + p.name, "train", job.train);
                proba = classify::predict_proba(*model, fte->values);
                if (p.collect_importance && p.pca_components == 0) importance = classify::feature_importance(*model);
            } else if (p.input == Input::tangent || p.input == Input::mdm) {
                const auto& [ctr, cte] = covariances(p, job, pick, cov_cache, log);
                if (p.input == Input::mdm) {
                    const auto model = riemann::mdm_fit(ctr, ytrain);
                    log("mdm_means:" + p.name, "train", job.train);
                    proba = mdm_proba(model, cte);
                } else {
                    const Matrix g = riemann::geometric_mean(ctr);
                    log("geometric_mean:" + p.name, "train", job.train);
                    const Matrix w = riemann::spd_invsqrt(g);
                    const Index dim = g.rows() * (g.rows() + 1) / 2;
                    Matrix xtr(static_cast<Index>(ctr.size()), dim), xte(static_cast<Index>(cte.size()), dim);
                    for (std::size_t i = 0; i < ctr.size(); ++i)
                        xtr.row(static_cast<Index>(i)) = riemann::tangent_embed_whitened<double>(ctr[i], w).transpose();
                    for (std::size_t i = 0; i < cte.size(); ++i)
                        xte.row(static_cast<Index>(i)) = riemann::tangent_embed_whitened<double>(cte[i], w).transpose();
                    const auto model = classify::fit(p.classifier, xtr, ytrain);
                    log("classifier:" + p.name, "train", job.train);
                    proba = classify::predict_proba(*model, xte);
                    for (Index j = 0; j < dim; ++j)
                        out.registries[pi].push_back({features::Family::tangent, -1, "t" + std::to_string(j)});
                }
            } else {
                std::vector<Matrix> members;
                for (const auto& m : p.vote) {
                    const auto at = static_cast<std::size_t>(
                        std::find_if(pipelines_.begin(), pipelines_.end(), [&](const PipelineSpec& q) { return q.name == m; }) -
                        pipelines_.begin());
                    members.push_back(out.results[at].proba);
                }
                proba = classify::soft_vote(members);
            }

            FoldResult& r = out.results[pi];
            r.fold = job.label;
            r.trials = job.test;
            r.truth = ytest;
            r.proba = std::move(proba);
            r.predicted = classify::argmax(r.proba);
            r.confusion = confusion_matrix(r.truth, r.predicted, classes_);
            r.balanced_accuracy = balanced_accuracy(r.confusion);
            r.macro_f1 = macro_f1(r.confusion);
            r.importance = std::move(importance);
        }
        return out;
    }

private:
    template <class Pick, class Log>
    const std::pair<std::vector<Matrix>, std::vector<Matrix>>& covariances(
        const PipelineSpec& p, const SplitJob& job, Pick& pick,
        std::map<std::string, std::pair<std::vector<Matrix>, std::vector<Matrix>>>& cache, Log& log) const {
        const std::string key = std::string(p.normalize ? "n" : "r") + (p.euclidean_alignment ? "e" : "-");
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        const auto [tr, te] = pick(p.normalize);
        std::vector<Matrix> ctr, cte;
        for (const auto& x : tr->data) ctr.push_back(riemann::lw_covariance<double>(x));
        for (const auto& x : te->data) cte.push_back(riemann::lw_covariance<double>(x));
        if (p.euclidean_alignment) {
            align_by_subject(ctr, job.train, log);
            align_by_subject(cte, job.test, log);
        }
        return cache.emplace(key, std::pair{std::move(ctr), std::move(cte)}).first->second;
    }

    template <class Log>
    void align_by_subject(std::vector<Matrix>& covs, const std::vector<std::size_t>& idx, Log& log) const {
        std::map<std::string, std::vector<std::size_t>> groups;  // subject -> positions in covs
        for (std::size_t j = 0; j < idx.size(); ++j) groups[epochs_.subjects[idx[j]]].push_back(j);
        for (const auto& [subject, pos] : groups) {
            std::vector<Matrix> mine;
            std::vector<std::size_t> scope;
            for (auto j : pos) {
                mine.push_back(covs[j]);
                scope.push_back(idx[j]);
            }
            auto aligned = riemann::euclidean_align(mine);
            for (std::size_t k = 0; k < pos.size(); ++k) covs[pos[k]] = std::move(aligned[k]);
            log("ea_reference", "subject:" + subject, scope);
        }
    }

    const EpochSet& epochs_;
    const std::vector<PipelineSpec>& pipelines_;
    int classes_;
};

std::vector<std::size_t> trials_of_subjects(const EpochSet& e, const std::set<std::string>& subjects) {
    std::vector<std::size_t> idx;
    for (std::size_t t = 0; t < e.trials(); ++t)
        if (subjects.count(e.subjects[t])) idx.push_back(t);
    return idx;
}

}  // namespace

// ---------------------------------------------------------------- LOSO

std::vector<FoldPlan> loso_plan(const EpochSet& epochs, const EvalOptions& opt) {
    const auto subjects = epochs.subject_ids();
    if (subjects.size() < 2) throw DomainError("loso: need at least two subjects");
    std::vector<FoldPlan> plans;
    for (std::size_t s = 0; s < subjects.size(); ++s) {
        FoldPlan plan;
        plan.test_subject = subjects[s];
        for (std::size_t t = 0; t < epochs.trials(); ++t)
            (epochs.subjects[t] == subjects[s] ? plan.test : plan.train).push_back(t);

        // validation: whole training subjects, drawn until 20% of training trials
        std::vector<std::string> pool;
        for (const auto& id : subjects)
            if (id != plan.test_subject) pool.push_back(id);
        Rng rng = make_rng(opt.seed, "validation", s);
        shuffle(pool.begin(), pool.end(), rng);
        const double target = opt.validation_fraction * static_cast<double>(plan.train.size());
        std::set<std::string> chosen;
        std::size_t taken = 0;
        for (const auto& id : pool) {
            if (static_cast<double>(taken) >= target) break;
            chosen.insert(id);
            for (std::size_t t : plan.train)
                if (epochs.subjects[t] == id) ++taken;
        }
        plan.validation = trials_of_subjects(epochs, chosen);

        if (opt.inject == Injection::test_in_train) plan.train = merged(plan.train, plan.test);
        if (opt.inject == Injection::validation_from_test) {
            const std::size_t n = std::max<std::size_t>(1, plan.test.size() / 5);
            plan.validation = merged(plan.validation, {plan.test.begin(), plan.test.begin() + static_cast<std::ptrdiff_t>(n)});
        }
        plans.push_back(std::move(plan));
    }
    return plans;
}

RunResult loso(const EpochSet& epochs, const std::vector<PipelineSpec>& pipelines, const EvalOptions& opt) {
    epochs.validate();
    validate_pipelines(pipelines);
    RunResult run;
    run.classes = epochs.num_classes();
    run.trail.folds = loso_plan(epochs, opt);
    run.trail.meta = EpochMeta::of(epochs);

    const SplitRunner runner(epochs, pipelines, run.classes);
    std::vector<SplitOutcome> outcomes(run.trail.folds.size());
    detail::parallel_for(outcomes.size(), opt.threads, [&](std::size_t f) {
        const auto& plan = run.trail.folds[f];
        SplitJob job{plan.test_subject, plan.train, plan.test, opt.inject == Injection::normalizer_all_data,
                     opt.inject == Injection::pca_all_data};
        outcomes[f] = runner.run(job);
    });

    for (const auto& p : pipelines) run.pipelines.push_back({p.name, {}, {}});
    for (auto& o : outcomes) {
        for (std::size_t pi = 0; pi < pipelines.size(); ++pi) {
            run.pipelines[pi].folds.push_back(std::move(o.results[pi]));
            if (run.pipelines[pi].registry.empty()) run.pipelines[pi].registry = std::move(o.registries[pi]);
        }
        run.trail.records.insert(run.trail.records.end(), o.records.begin(), o.records.end());
    }
    run.verdicts = leakage_audit(run.trail);
    if (opt.strict_audit)
        for (const auto& v : run.verdicts)
            if (!v.pass)
                throw AuditError("checkpoint " + std::to_string(v.checkpoint) + " (" + v.name + ") failed: " + v.witness);
    return run;
}

// ---------------------------------------------------------------- within subject

std::vector<SubjectCv> within_subject_cv(const EpochSet& epochs, const PipelineSpec& pipeline, int k,
                                         const EvalOptions& opt) {
    epochs.validate();
    const std::vector<PipelineSpec> pipelines{pipeline};
    validate_pipelines(pipelines);
    if (pipeline.input == Input::vote) throw ConfigError("within_subject_cv: vote pipelines need their members");
    const int classes = epochs.num_classes();
    const auto subjects = epochs.subject_ids();
    std::vector<std::optional<SubjectCv>> slots(subjects.size());
    const SplitRunner runner(epochs, pipelines, classes);

    detail::parallel_for(subjects.size(), opt.threads, [&](std::size_t s) {
        std::vector<std::size_t> mine;
        for (std::size_t t = 0; t < epochs.trials(); ++t)
            if (epochs.subjects[t] == subjects[s]) mine.push_back(t);
        std::vector<int> y = labels_of(epochs, mine);
        std::vector<int> counts(static_cast<std::size_t>(classes), 0);
        for (int v : y) ++counts[static_cast<std::size_t>(v)];
        for (int c = 0; c < classes; ++c)
            if (counts[static_cast<std::size_t>(c)] < k) {
                warn("within_subject_cv: subject " + subjects[s] + " has " +
                     std::to_string(counts[static_cast<std::size_t>(c)]) + " trials of class " + std::to_string(c) +
                     " (< " + std::to_string(k) + "), skipped");
                return;
            }
        const auto folds = classify::stratified_folds(y, k, derive_seed(opt.seed, "within_subject", s));
        SubjectCv cv;
        cv.subject = subjects[s];
        for (int f = 0; f < k; ++f) {
            SplitJob job;
            job.label = subjects[s] + "/" + std::to_string(f);
            for (std::size_t j = 0; j < mine.size(); ++j) (folds[j] == f ? job.test : job.train).push_back(mine[j]);
            cv.folds.push_back(std::move(runner.run(job).results.front()));
        }
        std::vector<double> accs;
        for (const auto& f : cv.folds) accs.push_back(f.balanced_accuracy);
        cv.mean_accuracy = mean(accs);
        slots[s] = std::move(cv);
    });
    std::vector<SubjectCv> out;
    for (auto& s : slots)
        if (s) out.push_back(std::move(*s));
    return out;
}

// ---------------------------------------------------------------- TGM

std::vector<Index> tgm_points(Index samples, Index step) {
    if (step < 1) throw DomainError("tgm: step must be positive");
    if (step >= samples) throw DomainError("tgm: step must be smaller than the epoch length");
    std::vector<Index> pts;
    for (Index t = 0; t < samples; t += step) pts.push_back(t);
    return pts;
}

Matrix tgm(const EpochSet& epochs, Index step, const classify::ClassifierSpec& decoder, const EvalOptions& opt) {
    epochs.validate();
    const auto pts = tgm_points(epochs.samples(), step);
    const auto plans = loso_plan(epochs, opt);
    const auto tp = static_cast<Index>(pts.size());
    const int classes = epochs.num_classes();
    const Index channels = epochs.channels();
    std::vector<Matrix> per_fold(plans.size());

    auto slice = [&](const std::vector<std::size_t>& idx, Index t) {
        Matrix x(static_cast<Index>(idx.size()), channels);
        for (std::size_t i = 0; i < idx.size(); ++i) x.row(static_cast<Index>(i)) = epochs.data[idx[i]].col(t).transpose();
        return x;
    };
    detail::parallel_for(plans.size(), opt.threads, [&](std::size_t f) {
        const auto& plan = plans[f];
        const auto ytr = labels_of(epochs, plan.train);
        const auto yte = labels_of(epochs, plan.test);
        std::vector<Matrix> test_slices;
        for (Index j = 0; j < tp; ++j) test_slices.push_back(slice(plan.test, pts[static_cast<std::size_t>(j)]));
        Matrix acc(tp, tp);
        for (Index i = 0; i < tp; ++i) {
            const auto model = classify::fit(decoder, slice(plan.train, pts[static_cast<std::size_t>(i)]), ytr);
            for (Index j = 0; j < tp; ++j) {
                const auto pred = classify::argmax(classify::predict_proba(*model, test_slices[static_cast<std::size_t>(j)]));
                acc(i, j) = balanced_accuracy(confusion_matrix(yte, pred, classes));
            }
        }
        per_fold[f] = std::move(acc);
    });
    Matrix out = Matrix::Zero(tp, tp);
    for (const auto& m : per_fold) out += m;
    return out / static_cast<double>(per_fold.size());
}

// ---------------------------------------------------------------- learning curve

std::vector<CurvePoint> learning_curve(const EpochSet& epochs, const std::vector<int>& ns, int reps,
                                       const PipelineSpec& pipeline, const EvalOptions& opt) {
    epochs.validate();
    const std::vector<PipelineSpec> pipelines{pipeline};
    validate_pipelines(pipelines);
    if (reps < 1) throw DomainError("learning_curve: reps must be >= 1");
    const auto subjects = epochs.subject_ids();
    for (int n : ns)
        if (n < 1 || n >= static_cast<int>(subjects.size()))
            throw DomainError("learning_curve: N=" + std::to_string(n) + " must be in [1, subjects-1]");
    const int classes = epochs.num_classes();
    const SplitRunner runner(epochs, pipelines, classes);

    std::vector<CurvePoint> out;
    for (int n : ns) {
        CurvePoint point;
        point.n_train = n;
        std::vector<double> accs(static_cast<std::size_t>(reps));
        detail::parallel_for(static_cast<std::size_t>(reps), opt.threads, [&](std::size_t r) {
            std::vector<std::string> order = subjects;
            Rng rng = make_rng(opt.seed, "learning_curve", static_cast<std::uint64_t>(n) * 1000 + r);
            shuffle(order.begin(), order.end(), rng);
            const std::set<std::string> train_set(order.begin(), order.begin() + n);
            SplitJob job;
            job.label = "N" + std::to_string(n) + "/" + std::to_string(r);
            for (std::size_t t = 0; t < epochs.trials(); ++t)
                (train_set.count(epochs.subjects[t]) ? job.train : job.test).push_back(t);
            const FoldResult res = runner.run(job).results.front();
            // mean of per-subject balanced accuracies over held-out subjects
            std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> per_subject;
            for (std::size_t i = 0; i < res.trials.size(); ++i) {
                auto& [t, p] = per_subject[epochs.subjects[res.trials[i]]];
                t.push_back(res.truth[i]);
                p.push_back(res.predicted[i]);
            }
            std::vector<double> subject_acc;
            for (const auto& [id, tp] : per_subject)
                subject_acc.push_back(balanced_accuracy(confusion_matrix(tp.first, tp.second, classes)));
            accs[r] = mean(subject_acc);
        });
        point.accuracies = accs;
        point.mean = mean(accs);
        point.sd = sample_sd(accs);
        out.push_back(std::move(point));
    }
    return out;
}

// ---------------------------------------------------------------- ablations

std::vector<AblationRow> ablation_run(const EpochSet& epochs, Axis axis, const std::vector<GridPoint>& grid,
                                      const PipelineSpec& base, const EvalOptions& opt) {
    if (grid.empty()) throw DomainError("ablation_run: empty grid");
    std::vector<AblationRow> rows;
    const double chance = 1.0 / epochs.num_classes();
    for (const auto& gp : grid) {
        PipelineSpec p = base;
        p.name = gp.label;
        const EpochSet* source = &epochs;
        EpochSet local;
        switch (axis) {
            case Axis::feature_family:
                if (gp.families.empty()) throw DomainError("ablation_run: grid point '" + gp.label + "' has no families");
                p.families = gp.families;
                break;
            case Axis::time_window:
                local = crop_window(epochs, gp.t0, gp.t1);
                source = &local;
                break;
            case Axis::channel_region:
                if (gp.channels.empty()) throw DomainError("ablation_run: region '" + gp.label + "' is empty");
                local = select_channels(epochs, gp.channels);
                source = &local;
                break;
            case Axis::pca:
                p.pca_components = gp.components;
                break;
        }
        const auto run = loso(*source, {p}, opt);
        AblationRow row;
        row.label = gp.label;
        row.accuracies = run.pipelines.front().fold_accuracies();
        row.mean = mean(row.accuracies);
        row.sd = sample_sd(row.accuracies);
        row.delta_vs_chance = row.mean - chance;
        row.dims = static_cast<Index>(run.pipelines.front().registry.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace eegbench::harness
