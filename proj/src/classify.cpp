#include "eegbench/classify.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "classify_detail.hpp"
#include "eegbench/riemann.hpp"
#include "eegbench/seed.hpp"

namespace eegbench::classify {

std::string kind_name(Kind kind) {
    switch (kind) {
        case Kind::gbdt: return "gbdt";
        case Kind::random_forest: return "random_forest";
        case Kind::lda_shrinkage: return "lda_shrinkage";
        case Kind::linear_svm: return "linear_svm";
        case Kind::logistic: return "logistic";
        case Kind::soft_vote: return "soft_vote";
        case Kind::stacking: return "stacking";
    }
    return "?";
}

Kind parse_kind(const std::string& name) {
    for (auto k : {Kind::gbdt, Kind::random_forest, Kind::lda_shrinkage, Kind::linear_svm, Kind::logistic,
                   Kind::soft_vote, Kind::stacking})
        if (kind_name(k) == name) return k;
    throw ConfigError("unknown classifier kind '" + name +
                      "' (gbdt, random_forest, lda_shrinkage, linear_svm, logistic, soft_vote, stacking)");
}

void ClassifierSpec::validate() const {
    auto bad = [&](const std::string& what) { throw ConfigError(kind_name(kind) + ": " + what); };
    switch (kind) {
        case Kind::gbdt:
            if (n_estimators < 1) bad("n_estimators must be >= 1");
            if (num_leaves < 2) bad("num_leaves must be >= 2");
            if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
            if (min_child_samples < 1) bad("min_child_samples must be >= 1");
            if (max_bins < 2 || max_bins > 255) bad("max_bins must be in [2, 255]");
            break;
        case Kind::random_forest:
            if (n_estimators < 1) bad("n_estimators must be >= 1");
            if (min_samples_leaf < 1) bad("min_samples_leaf must be >= 1");
            if (max_bins < 2 || max_bins > 255) bad("max_bins must be in [2, 255]");
            break;
        case Kind::lda_shrinkage:
            if (shrinkage > 1.0) bad("shrinkage must be in [0, 1] or negative for auto");
            break;
        case Kind::linear_svm:
        case Kind::logistic:
            if (!(C > 0.0)) bad("C must be positive");
            if (max_iter < 1) bad("max_iter must be >= 1");
            if (!(tol > 0.0)) bad("tol must be positive");
            break;
        case Kind::soft_vote:
            if (bases.empty()) bad("needs at least one base model");
            for (const auto& b : bases) b.validate();
            break;
        case Kind::stacking:
            if (bases.empty()) bad("needs at least one base model");
            if (meta.size() != 1) bad("needs exactly one meta model");
            if (inner_k < 2) bad("inner_k must be >= 2");
            for (const auto& b : bases) b.validate();
            meta.front().validate();
            break;
    }
}

ClassifierSpec gbdt_spec(std::uint64_t seed) {
    ClassifierSpec s;
    s.kind = Kind::gbdt;
    s.seed = seed;
    return s;
}

ClassifierSpec random_forest_spec(std::uint64_t seed) {
    ClassifierSpec s;
    s.kind = Kind::random_forest;
    s.seed = seed;
    return s;
}

ClassifierSpec lda_spec() { return ClassifierSpec{}; }

ClassifierSpec linear_svm_spec(std::uint64_t seed) {
    ClassifierSpec s;
    s.kind = Kind::linear_svm;
    s.seed = seed;
    return s;
}

ClassifierSpec logistic_spec() {
    ClassifierSpec s;
    s.kind = Kind::logistic;
    s.max_iter = 200;
    return s;
}

ClassifierSpec stacking_spec(std::uint64_t seed) {
    ClassifierSpec s;
    s.kind = Kind::stacking;
    s.seed = seed;
    s.bases = {lda_spec(), logistic_spec(), linear_svm_spec(seed)};
    s.meta = {logistic_spec()};
    return s;
}

int check_labels(const std::vector<int>& y) {
    if (y.empty()) throw DomainError("classifier: empty training set");
    int k = 0;
    for (int v : y) {
        if (v < 0) throw DomainError("classifier: negative label");
        k = std::max(k, v + 1);
    }
    std::vector<int> seen(static_cast<std::size_t>(k), 0);
    for (int v : y) seen[static_cast<std::size_t>(v)] = 1;
    if (k < 2) throw DomainError("classifier: single-class training set");
    for (int c = 0; c < k; ++c)
        if (!seen[static_cast<std::size_t>(c)])
            throw DomainError("classifier: labels must cover 0..K-1 (class " + std::to_string(c) + " missing)");
    return k;
}

std::vector<int> argmax(const Matrix& proba) {
    std::vector<int> out(static_cast<std::size_t>(proba.rows()));
    for (Index i = 0; i < proba.rows(); ++i) {
        Index best = 0;
        for (Index k = 1; k < proba.cols(); ++k)
            if (proba(i, k) > proba(i, best)) best = k;
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

Matrix soft_vote(const std::vector<Matrix>& probas) {
    if (probas.empty()) throw DomainError("soft_vote: no inputs");
    Matrix sum = Matrix::Zero(probas.front().rows(), probas.front().cols());
    for (const auto& p : probas) {
        if (p.rows() != sum.rows() || p.cols() != sum.cols()) throw DomainError("soft_vote: shape mismatch");
        sum += p;
    }
    for (Index i = 0; i < sum.rows(); ++i) {
        const double s = sum.row(i).sum();
        if (s > 0.0) sum.row(i) /= s;
    }
    return sum;
}

std::vector<int> stratified_folds(const std::vector<int>& y, int k, std::uint64_t seed) {
    if (k < 2) throw DomainError("stratified_folds: k must be >= 2");
    int classes = 0;
    for (int v : y) classes = std::max(classes, v + 1);
    std::vector<int> fold(y.size(), 0);
    Rng rng = make_rng(seed, "stratified_folds");
    int next = 0;
    for (int c = 0; c < classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == c) members.push_back(i);
        shuffle(members.begin(), members.end(), rng);
        for (std::size_t i : members) {
            fold[i] = next;
            next = (next + 1) % k;
        }
    }
    return fold;
}

namespace {

Matrix softmax(Matrix scores) {
    for (Index i = 0; i < scores.rows(); ++i) {
        const double m = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - m).exp();
        scores.row(i) /= scores.row(i).sum();
    }
    return scores;
}

Matrix rows_of(const Matrix& x, const std::vector<std::size_t>& idx) {
    Matrix out(static_cast<Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = x.row(static_cast<Index>(idx[i]));
    return out;
}

struct Standardizer {
    Eigen::RowVectorXd mean, scale;

    static Standardizer fit(const Matrix& x) {
        Standardizer s;
        s.mean = x.colwise().mean();
        s.scale = ((x.rowwise() - s.mean).array().square().colwise().mean()).sqrt().matrix();
        for (Index j = 0; j < s.scale.size(); ++j)
            if (s.scale[j] < 1e-12) s.scale[j] = 1.0;
        return s;
    }
    Matrix apply(const Matrix& x) const { return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix(); }
};

// Linear scorer on standardized inputs: softmax(Z W + b).
class LinearModel final : public Model {
public:
    LinearModel(Kind kind, int classes, Index dims) : Model(kind, classes, dims) {}

    Matrix predict_proba(const Matrix& x) const override {
        return softmax((scaler.apply(x) * w).rowwise() + b.transpose());
    }
    Vector raw_importance() const override {
        // class-centered so a shift shared by all classes carries no weight
        const Matrix centered = w.colwise() - w.rowwise().mean();
        return centered.cwiseAbs().rowwise().sum();
    }

    Standardizer scaler;
    Matrix w;  // D x K
    Vector b;
};

ModelPtr fit_lda(const ClassifierSpec& spec, const Matrix& x, const std::vector<int>& y, int k) {
    if (x.cols() == 0) throw DomainError("lda_shrinkage: no features");
    auto model = std::make_shared<LinearModel>(Kind::lda_shrinkage, k, x.cols());
    model->scaler = Standardizer::fit(x);
    const Matrix z = model->scaler.apply(x);
    const Index n = z.rows(), d = z.cols();
    Matrix means = Matrix::Zero(k, d);
    Vector counts = Vector::Zero(k);
    for (Index i = 0; i < n; ++i) {
        means.row(y[static_cast<std::size_t>(i)]) += z.row(i);
        counts[y[static_cast<std::size_t>(i)]] += 1.0;
    }
    means.array().colwise() /= counts.array();
    Matrix centered = z;
    for (Index i = 0; i < n; ++i) centered.row(i) -= means.row(y[static_cast<std::size_t>(i)]);

    Matrix sigma;
    if (spec.shrinkage < 0.0) {
        sigma = riemann::lw_covariance<double>(centered.transpose());
    } else {
        sigma = centered.transpose() * centered / static_cast<double>(n);
        const double mu = sigma.trace() / static_cast<double>(d);
        sigma *= (1.0 - spec.shrinkage);
        sigma.diagonal().array() += spec.shrinkage * mu;
    }
    model->w = sigma.ldlt().solve(means.transpose());
    model->b.resize(k);
    for (int c = 0; c < k; ++c)
        model->b[c] = -0.5 * means.row(c).dot(model->w.col(c)) + std::log(counts[c] / static_cast<double>(n));
    return model;
}

// Limited-memory BFGS with Armijo backtracking. `fg` returns f and fills grad.
template <class F>
Vector lbfgs(F fg, Vector x, int max_iter, double tol) {
    constexpr int kMemory = 10;
    std::deque<Vector> s_hist, y_hist;
    std::deque<double> rho;
    Vector g(x.size());
    double f = fg(x, g);
    for (int it = 0; it < max_iter; ++it) {
        if (g.lpNorm<Eigen::Infinity>() < tol) break;
        Vector q = g;
        std::vector<double> alpha(s_hist.size());
        for (int j = static_cast<int>(s_hist.size()) - 1; j >= 0; --j) {
            alpha[static_cast<std::size_t>(j)] = rho[static_cast<std::size_t>(j)] * s_hist[static_cast<std::size_t>(j)].dot(q);
            q -= alpha[static_cast<std::size_t>(j)] * y_hist[static_cast<std::size_t>(j)];
        }
        if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t j = 0; j < s_hist.size(); ++j) {
            const double beta = rho[j] * y_hist[j].dot(q);
            q += (alpha[j] - beta) * s_hist[j];
        }
        Vector dir = -q;
        double slope = g.dot(dir);
        if (slope >= 0.0) {
            dir = -g;
            slope = -g.squaredNorm();
            s_hist.clear();
            y_hist.clear();
            rho.clear();
        }
        double step = 1.0;
        Vector xn(x.size()), gn(x.size());
        double fn = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            xn = x + step * dir;
            fn = fg(xn, gn);
            if (fn <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        Vector s = xn - x, yv = gn - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > kMemory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho.pop_front();
            }
        }
        const double change = std::abs(f - fn);
        x = std::move(xn);
        g = std::move(gn);
        f = fn;
        if (change <= 1e-12 * std::max(1.0, std::abs(f))) break;
    }
    return x;
}

ModelPtr fit_logistic(const ClassifierSpec& spec, const Matrix& x, const std::vector<int>& y, int k) {
    auto model = std::make_shared<LinearModel>(Kind::logistic, k, x.cols());
    model->scaler = Standardizer::fit(x);
    const Matrix z = model->scaler.apply(x);
    const Index n = z.rows(), d = z.cols();
    Matrix onehot = Matrix::Zero(n, k);
    for (Index i = 0; i < n; ++i) onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    const double reg = 1.0 / (spec.C * static_cast<double>(n));

    // theta = [vec(W) ; b], W is D x K column-major
    auto fg = [&](const Vector& theta, Vector& grad) {
        const Eigen::Map<const Matrix> w(theta.data(), d, k);
        const Eigen::Map<const Vector> b(theta.data() + d * k, k);
        Matrix s = (z * w).rowwise() + b.transpose();
        double loss = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double m = s.row(i).maxCoeff();
            const double lse = m + std::log((s.row(i).array() - m).exp().sum());
            loss += lse - s.row(i).dot(onehot.row(i));
            s.row(i) = (s.row(i).array() - lse).exp();
        }
        const Matrix diff = (s - onehot) * inv_n;
        Eigen::Map<Matrix> gw(grad.data(), d, k);
        gw = z.transpose() * diff + reg * w;
        grad.tail(k) = diff.colwise().sum().transpose();
        return loss * inv_n + 0.5 * reg * w.squaredNorm();
    };
    const Vector theta = lbfgs(fg, Vector::Zero(d * k + k), spec.max_iter, spec.tol * inv_n);
    model->w = Eigen::Map<const Matrix>(theta.data(), d, k);
    model->b = theta.tail(k);
    return model;
}

// One-vs-rest squared-hinge SVM by dual coordinate descent with a penalized
// bias feature; probabilities are a softmax over the K margins.
ModelPtr fit_svm(const ClassifierSpec& spec, const Matrix& x, const std::vector<int>& y, int k) {
    constexpr double kEps = 0.1;
    auto model = std::make_shared<LinearModel>(Kind::linear_svm, k, x.cols());
    model->scaler = Standardizer::fit(x);
    const Matrix z = model->scaler.apply(x);
    const Index n = z.rows(), d = z.cols();
    Matrix zt(d + 1, n);
    zt.topRows(d) = z.transpose();
    zt.row(d).setOnes();
    const Vector qd = zt.colwise().squaredNorm().transpose().array() + 0.5 / spec.C;
    const double diag = 0.5 / spec.C;

    model->w.resize(d, k);
    model->b.resize(k);
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    for (int c = 0; c < k; ++c) {
        Rng rng = make_rng(spec.seed, "linear_svm", static_cast<std::uint64_t>(c));
        Vector w = Vector::Zero(d + 1), alpha = Vector::Zero(n);
        std::iota(order.begin(), order.end(), 0);
        for (int it = 0; it < spec.max_iter; ++it) {
            shuffle(order.begin(), order.end(), rng);
            double pg_max = -std::numeric_limits<double>::infinity(), pg_min = std::numeric_limits<double>::infinity();
            for (std::size_t oi : order) {
                const auto i = static_cast<Index>(oi);
                const double yi = y[oi] == c ? 1.0 : -1.0;
                const double g = yi * w.dot(zt.col(i)) - 1.0 + diag * alpha[i];
                const double pg = alpha[i] == 0.0 ? std::min(g, 0.0) : g;
                pg_max = std::max(pg_max, pg);
                pg_min = std::min(pg_min, pg);
                if (std::abs(pg) > 1e-12) {
                    const double old = alpha[i];
                    alpha[i] = std::max(old - g / qd[i], 0.0);
                    w += (alpha[i] - old) * yi * zt.col(i);
                }
            }
            if (pg_max - pg_min < kEps) break;
        }
        model->w.col(c) = w.head(d);
        model->b[c] = w[d];
    }
    return model;
}

class VoteModel final : public Model {
public:
    VoteModel(int classes, Index dims) : Model(Kind::soft_vote, classes, dims) {}
    Matrix predict_proba(const Matrix& x) const override {
        std::vector<Matrix> p;
        for (const auto& m : bases) p.push_back(m->predict_proba(x));
        return soft_vote(p);
    }
    std::vector<ModelPtr> bases;
};

class StackModel final : public Model {
public:
    StackModel(int classes, Index dims) : Model(Kind::stacking, classes, dims) {}
    Matrix predict_proba(const Matrix& x) const override {
        const int k = num_classes();
        Matrix meta_x(x.rows(), static_cast<Index>(bases.size()) * k);
        for (std::size_t b = 0; b < bases.size(); ++b)
            meta_x.middleCols(static_cast<Index>(b) * k, k) = bases[b]->predict_proba(x);
        return meta->predict_proba(meta_x);
    }
    std::vector<ModelPtr> bases;
    ModelPtr meta;
};

ModelPtr fit_stacking(const ClassifierSpec& spec, const Matrix& x, const std::vector<int>& y, int k) {
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int v : y) ++counts[static_cast<std::size_t>(v)];
    for (int c = 0; c < k; ++c)
        if (counts[static_cast<std::size_t>(c)] < spec.inner_k)
            throw DomainError("stacking: class " + std::to_string(c) + " has fewer trials than inner folds");

    const auto folds = stratified_folds(y, spec.inner_k, derive_seed(spec.seed, "stacking"));
    const auto nb = static_cast<Index>(spec.bases.size());
    Matrix meta_x(x.rows(), nb * k);
    for (int f = 0; f < spec.inner_k; ++f) {
        std::vector<std::size_t> tr, te;
        for (std::size_t i = 0; i < y.size(); ++i) (folds[i] == f ? te : tr).push_back(i);
        std::vector<int> ytr;
        for (auto i : tr) ytr.push_back(y[i]);
        const Matrix xtr = rows_of(x, tr), xte = rows_of(x, te);
        for (Index b = 0; b < nb; ++b) {
            const Matrix p = fit(spec.bases[static_cast<std::size_t>(b)], xtr, ytr)->predict_proba(xte);
            for (std::size_t r = 0; r < te.size(); ++r)
                meta_x.block(static_cast<Index>(te[r]), b * k, 1, k) = p.row(static_cast<Index>(r));
        }
    }
    auto model = std::make_shared<StackModel>(k, x.cols());
    for (const auto& b : spec.bases) model->bases.push_back(fit(b, x, y));
    model->meta = fit(spec.meta.front(), meta_x, y);
    return model;
}

}  // namespace

ModelPtr fit(const ClassifierSpec& spec, const Matrix& x, const std::vector<int>& y) {
    spec.validate();
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw DomainError("fit: feature rows and labels differ");
    if (!x.allFinite()) throw DomainError("fit: non-finite features");
    const int k = check_labels(y);
    if (x.rows() < k) throw DomainError("fit: fewer trials than classes");
    switch (spec.kind) {
        case Kind::gbdt: return detail::fit_gbdt(spec, x, y, k);
        case Kind::random_forest: return detail::fit_forest(spec, x, y, k);
        case Kind::lda_shrinkage: return fit_lda(spec, x, y, k);
        case Kind::linear_svm: return fit_svm(spec, x, y, k);
        case Kind::logistic: return fit_logistic(spec, x, y, k);
        case Kind::soft_vote: {
            auto model = std::make_shared<VoteModel>(k, x.cols());
            for (const auto& b : spec.bases) model->bases.push_back(fit(b, x, y));
            return model;
        }
        case Kind::stacking: return fit_stacking(spec, x, y, k);
    }
    throw ConfigError("fit: unhandled kind");
}

Matrix predict_proba(const Model& model, const Matrix& x) {
    if (x.cols() != model.dims()) throw DomainError("predict_proba: feature dimension mismatch");
    return model.predict_proba(x);
}

Vector feature_importance(const Model& model) {
    Vector raw = model.raw_importance();
    if (raw.size() == 0) throw DomainError("feature_importance: unsupported for " + kind_name(model.kind()));
    const double s = raw.sum();
    if (!(s > 0.0)) return Vector::Constant(raw.size(), 1.0 / static_cast<double>(raw.size()));
    return raw / s;
}

}  // namespace eegbench::classify
