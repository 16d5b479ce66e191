#include <algorithm>
#include <cmath>
#include <numeric>

#include "classify_detail.hpp"
#include "eegbench/seed.hpp"

namespace eegbench::classify::detail {

Binner Binner::fit(const Matrix& x, int max_bins) {
    Binner b;
    b.thresholds.resize(static_cast<std::size_t>(x.cols()));
    const Index n = x.rows();
    std::vector<double> col(static_cast<std::size_t>(n));
    for (Index f = 0; f < x.cols(); ++f) {
        for (Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = x(i, f);
        std::sort(col.begin(), col.end());
        std::vector<double> uniq = col;
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        auto& t = b.thresholds[static_cast<std::size_t>(f)];
        if (static_cast<int>(uniq.size()) <= max_bins) {
            for (std::size_t j = 0; j + 1 < uniq.size(); ++j) t.push_back(0.5 * (uniq[j] + uniq[j + 1]));
        } else {
            for (int q = 1; q < max_bins; ++q) {
                const auto at = static_cast<std::size_t>(static_cast<double>(q) * static_cast<double>(n) / max_bins);
                const double lo = col[std::min(at, col.size() - 1)];
                // place the cut between lo and the next distinct value
                const auto next = std::upper_bound(uniq.begin(), uniq.end(), lo);
                if (next == uniq.end()) break;
                const double cut = 0.5 * (lo + *next);
                if (t.empty() || cut > t.back()) t.push_back(cut);
            }
        }
    }
    return b;
}

std::vector<std::uint8_t> Binner::transform(const Matrix& x) const {
    const Index n = x.rows();
    std::vector<std::uint8_t> out(static_cast<std::size_t>(n * x.cols()));
    for (Index f = 0; f < x.cols(); ++f) {
        const auto& t = thresholds[static_cast<std::size_t>(f)];
        for (Index i = 0; i < n; ++i)
            out[static_cast<std::size_t>(f * n + i)] =
                static_cast<std::uint8_t>(std::lower_bound(t.begin(), t.end(), x(i, f)) - t.begin());
    }
    return out;
}

namespace {

// Flat binary tree; leaves carry `width` values each.
struct Tree {
    std::vector<int> feature;  // -1 marks a leaf
    std::vector<double> threshold;
    std::vector<int> left, right;
    std::vector<double> value;
    int width = 1;

    int add_leaf() {
        feature.push_back(-1);
        threshold.push_back(0.0);
        left.push_back(-1);
        right.push_back(-1);
        value.resize(value.size() + static_cast<std::size_t>(width), 0.0);
        return static_cast<int>(feature.size()) - 1;
    }
    const double* leaf_value(const double* row, Index stride) const {
        int node = 0;
        while (feature[static_cast<std::size_t>(node)] >= 0) {
            const auto s = static_cast<std::size_t>(node);
            node = row[feature[s] * stride] <= threshold[s] ? left[s] : right[s];
        }
        return value.data() + static_cast<std::size_t>(node) * static_cast<std::size_t>(width);
    }
};

std::vector<std::size_t> feature_offsets(const Binner& binner) {
    std::vector<std::size_t> off(binner.thresholds.size() + 1, 0);
    for (std::size_t f = 0; f < binner.thresholds.size(); ++f)
        off[f + 1] = off[f] + static_cast<std::size_t>(binner.bins(static_cast<Index>(f)));
    return off;
}

// ---------------------------------------------------------------- GBDT

constexpr double kMinHessian = 1e-3;

struct Split {
    double gain = 0.0;
    int feature = -1;
    int bin = -1;
};

struct GbdtLeaf {
    int node = -1;
    std::vector<int> idx;
    std::vector<double> hist;  // (g, h, count) per bin
    double g = 0.0, h = 0.0;
    Split best;
};

class GbdtGrower {
public:
    GbdtGrower(const ClassifierSpec& spec, const Binner& binner, const std::vector<std::uint8_t>& bins, Index n)
        : spec_(spec), binner_(binner), bins_(bins), n_(n), off_(feature_offsets(binner)) {}

    // Grows one tree on (g, h); adds each sample's leaf value to `update`.
    Tree grow(const std::vector<double>& g, const std::vector<double>& h, Vector& importance, double* update,
              Index stride) {
        Tree tree;
        tree.width = 1;
        std::vector<GbdtLeaf> leaves;
        GbdtLeaf root;
        root.node = tree.add_leaf();
        root.idx.resize(static_cast<std::size_t>(n_));
        std::iota(root.idx.begin(), root.idx.end(), 0);
        root.hist = take_buffer();
        build(root, g, h);
        evaluate(root);
        leaves.push_back(std::move(root));

        while (static_cast<int>(leaves.size()) < spec_.num_leaves) {
            std::size_t pick = leaves.size();
            double best = 0.0;
            for (std::size_t j = 0; j < leaves.size(); ++j)
                if (leaves[j].best.gain > best) {
                    best = leaves[j].best.gain;
                    pick = j;
                }
            if (pick == leaves.size()) break;
            GbdtLeaf parent = std::move(leaves[pick]);
            leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(pick));
            const Split s = parent.best;
            importance[s.feature] += s.gain;

            GbdtLeaf lo, hi;
            const std::uint8_t* col = bins_.data() + static_cast<std::size_t>(s.feature * n_);
            for (int i : parent.idx) (col[i] <= s.bin ? lo.idx : hi.idx).push_back(i);
            const auto ps = static_cast<std::size_t>(parent.node);
            tree.feature[ps] = s.feature;
            tree.threshold[ps] = binner_.thresholds[static_cast<std::size_t>(s.feature)][static_cast<std::size_t>(s.bin)];
            lo.node = tree.add_leaf();
            hi.node = tree.add_leaf();
            tree.left[ps] = lo.node;
            tree.right[ps] = hi.node;

            GbdtLeaf& small = lo.idx.size() <= hi.idx.size() ? lo : hi;
            GbdtLeaf& large = lo.idx.size() <= hi.idx.size() ? hi : lo;
            sums(lo, g, h);
            sums(hi, g, h);
            // Children too small to split never need a histogram. The larger
            // child reuses the parent buffer minus the smaller child's samples.
            const auto splittable = [&](const GbdtLeaf& leaf) {
                return static_cast<int>(leaf.idx.size()) >= 2 * spec_.min_child_samples;
            };
            if (splittable(large)) {
                large.hist = std::move(parent.hist);
                accumulate(large, small.idx, g, h, -1.0);
            } else {
                release(parent.hist);
            }
            if (splittable(small)) {
                small.hist = take_buffer();
                accumulate(small, small.idx, g, h, 1.0);
            }
            evaluate(lo);
            evaluate(hi);
            leaves.push_back(std::move(lo));
            leaves.push_back(std::move(hi));
        }
        for (auto& leaf : leaves) {
            const double v = -spec_.learning_rate * leaf.g / std::max(leaf.h, kMinHessian);
            tree.value[static_cast<std::size_t>(leaf.node)] = v;
            for (int i : leaf.idx) update[static_cast<Index>(i) * stride] += v;
            if (!leaf.hist.empty()) release(leaf.hist);
        }
        return tree;
    }

private:
    std::vector<double> take_buffer() {
        if (pool_.empty()) return std::vector<double>(3 * off_.back(), 0.0);
        std::vector<double> b = std::move(pool_.back());
        pool_.pop_back();
        std::fill(b.begin(), b.end(), 0.0);
        return b;
    }

    void release(std::vector<double>& hist) { pool_.push_back(std::move(hist)); }

    void sums(GbdtLeaf& leaf, const std::vector<double>& g, const std::vector<double>& h) const {
        leaf.g = leaf.h = 0.0;
        for (int i : leaf.idx) {
            leaf.g += g[static_cast<std::size_t>(i)];
            leaf.h += h[static_cast<std::size_t>(i)];
        }
    }

    void build(GbdtLeaf& leaf, const std::vector<double>& g, const std::vector<double>& h) {
        sums(leaf, g, h);
        accumulate(leaf, leaf.idx, g, h, 1.0);
    }

    void accumulate(GbdtLeaf& leaf, const std::vector<int>& idx, const std::vector<double>& g,
                    const std::vector<double>& h, double sign) {
        const auto d = static_cast<Index>(binner_.thresholds.size());
        for (Index f = 0; f < d; ++f) {
            const std::uint8_t* col = bins_.data() + static_cast<std::size_t>(f * n_);
            double* hist = leaf.hist.data() + 3 * off_[static_cast<std::size_t>(f)];
            if (sign > 0.0) {
                for (int i : idx) {
                    double* cell = hist + 3 * col[i];
                    cell[0] += g[static_cast<std::size_t>(i)];
                    cell[1] += h[static_cast<std::size_t>(i)];
                    cell[2] += 1.0;
                }
            } else {
                for (int i : idx) {
                    double* cell = hist + 3 * col[i];
                    cell[0] -= g[static_cast<std::size_t>(i)];
                    cell[1] -= h[static_cast<std::size_t>(i)];
                    cell[2] -= 1.0;
                }
            }
        }
    }

    void evaluate(GbdtLeaf& leaf) const {
        leaf.best = {};
        const double count = static_cast<double>(leaf.idx.size());
        const double min_child = spec_.min_child_samples;
        if (count < 2 * min_child) return;
        const double parent_score = leaf.g * leaf.g / std::max(leaf.h, kMinHessian);
        // gl^2/hl + gr^2/hr > bar  <=>  gl^2*hr + gr^2*hl > bar*hl*hr, so the
        // scan divides only when a candidate wins.
        double bar = parent_score;
        const auto d = static_cast<Index>(binner_.thresholds.size());
        for (Index f = 0; f < d; ++f) {
            const double* hist = leaf.hist.data() + 3 * off_[static_cast<std::size_t>(f)];
            const int nb = binner_.bins(f);
            double gl = 0.0, hl = 0.0, cl = 0.0;
            for (int b = 0; b + 1 < nb; ++b) {
                gl += hist[3 * b];
                hl += hist[3 * b + 1];
                cl += hist[3 * b + 2];
                if (cl < min_child) continue;
                const double cr = count - cl;
                if (cr < min_child) break;
                const double hr = leaf.h - hl;
                if (hl < kMinHessian || hr < kMinHessian) continue;
                const double gr = leaf.g - gl;
                if (gl * gl * hr + gr * gr * hl > bar * hl * hr) {
                    const double gain = gl * gl / hl + gr * gr / hr - parent_score;
                    if (gain > leaf.best.gain) {
                        leaf.best = {gain, static_cast<int>(f), b};
                        bar = gain + parent_score;
                    }
                }
            }
        }
    }

    const ClassifierSpec& spec_;
    const Binner& binner_;
    const std::vector<std::uint8_t>& bins_;
    Index n_;
    std::vector<std::size_t> off_;
    std::vector<std::vector<double>> pool_;
};

void softmax_rows(Matrix& f) {
    for (Index i = 0; i < f.rows(); ++i) {
        const double m = f.row(i).maxCoeff();
        f.row(i) = (f.row(i).array() - m).exp();
        f.row(i) /= f.row(i).sum();
    }
}

class GbdtModel final : public Model {
public:
    GbdtModel(int classes, Index dims) : Model(Kind::gbdt, classes, dims) {}

    Matrix predict_proba(const Matrix& x) const override {
        Matrix f = init_.transpose().replicate(x.rows(), 1);
        const Eigen::MatrixXd xt = x.transpose();  // contiguous rows
        for (std::size_t t = 0; t < trees_.size(); ++t) {
            const auto k = static_cast<Index>(t % static_cast<std::size_t>(num_classes()));
            for (Index i = 0; i < x.rows(); ++i) f(i, k) += *trees_[t].leaf_value(xt.col(i).data(), 1);
        }
        softmax_rows(f);
        return f;
    }
    Vector raw_importance() const override { return importance_; }

    Vector init_;
    std::vector<Tree> trees_;  // round-major, class-minor
    Vector importance_;
};

// ---------------------------------------------------------------- random forest

class ForestModel final : public Model {
public:
    ForestModel(int classes, Index dims) : Model(Kind::random_forest, classes, dims) {}

    Matrix predict_proba(const Matrix& x) const override {
        const int k = num_classes();
        Matrix p = Matrix::Zero(x.rows(), k);
        const Eigen::MatrixXd xt = x.transpose();
        for (const auto& tree : trees_)
            for (Index i = 0; i < x.rows(); ++i) {
                const double* v = tree.leaf_value(xt.col(i).data(), 1);
                for (int c = 0; c < k; ++c) p(i, c) += v[c];
            }
        p /= static_cast<double>(trees_.size());
        for (Index i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();
        return p;
    }
    Vector raw_importance() const override { return importance_; }

    std::vector<Tree> trees_;
    Vector importance_;
};

class ForestGrower {
public:
    ForestGrower(const ClassifierSpec& spec, const Binner& binner, const std::vector<std::uint8_t>& bins,
                 const std::vector<int>& y, int classes, Index n)
        : spec_(spec), binner_(binner), bins_(bins), y_(y), k_(classes), n_(n),
          d_(static_cast<Index>(binner.thresholds.size())) {
        mtry_ = std::max<Index>(1, static_cast<Index>(std::floor(std::sqrt(static_cast<double>(d_)))));
        counts_.resize(static_cast<std::size_t>(256 * k_));
    }

    Tree grow(Rng& rng, Vector& importance) {
        std::vector<double> w(static_cast<std::size_t>(n_), 0.0);
        for (Index j = 0; j < n_; ++j) w[uniform_index(rng, static_cast<std::uint64_t>(n_))] += 1.0;
        std::vector<int> idx;
        for (Index i = 0; i < n_; ++i)
            if (w[static_cast<std::size_t>(i)] > 0.0) idx.push_back(static_cast<int>(i));
        w_ = std::move(w);

        Tree tree;
        tree.width = k_;
        Vector imp = Vector::Zero(d_);
        const int root = tree.add_leaf();
        struct Job {
            int node;
            std::vector<int> idx;
        };
        std::vector<Job> stack;
        stack.push_back({root, std::move(idx)});
        std::vector<int> features(static_cast<std::size_t>(d_));
        while (!stack.empty()) {
            Job job = std::move(stack.back());
            stack.pop_back();
            std::vector<double> cls(static_cast<std::size_t>(k_), 0.0);
            double total = 0.0;
            for (int i : job.idx) {
                cls[static_cast<std::size_t>(y_[static_cast<std::size_t>(i)])] += w_[static_cast<std::size_t>(i)];
                total += w_[static_cast<std::size_t>(i)];
            }
            double* leaf = tree.value.data() + static_cast<std::size_t>(job.node) * static_cast<std::size_t>(k_);
            for (int c = 0; c < k_; ++c) leaf[c] = cls[static_cast<std::size_t>(c)] / total;
            const bool pure = std::count_if(cls.begin(), cls.end(), [](double v) { return v > 0.0; }) <= 1;
            if (pure || total < 2.0 * spec_.min_samples_leaf) continue;

            double parent_sq = 0.0;
            for (double v : cls) parent_sq += v * v;
            const double parent_score = parent_sq / total;

            std::iota(features.begin(), features.end(), 0);
            Split best;
            Index visited = 0;
            for (Index j = 0; j < d_ && visited < mtry_; ++j) {
                const auto pick = j + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(d_ - j)));
                std::swap(features[static_cast<std::size_t>(j)], features[static_cast<std::size_t>(pick)]);
                const int f = features[static_cast<std::size_t>(j)];
                bool constant = true;
                const Split s = best_split(f, job.idx, cls, total, parent_score, constant);
                if (constant) continue;
                ++visited;
                if (s.gain > best.gain) best = s;
            }
            if (best.feature < 0 || best.gain <= 1e-12) continue;

            imp[best.feature] += best.gain;
            std::vector<int> lo, hi;
            const std::uint8_t* col = bins_.data() + static_cast<std::size_t>(best.feature * n_);
            for (int i : job.idx) (col[i] <= best.bin ? lo : hi).push_back(i);
            const auto ps = static_cast<std::size_t>(job.node);
            const int l = tree.add_leaf();
            const int r = tree.add_leaf();
            tree.feature[ps] = best.feature;
            tree.threshold[ps] = binner_.thresholds[static_cast<std::size_t>(best.feature)][static_cast<std::size_t>(best.bin)];
            tree.left[ps] = l;
            tree.right[ps] = r;
            stack.push_back({r, std::move(hi)});
            stack.push_back({l, std::move(lo)});
        }
        const double s = imp.sum();
        if (s > 0.0) importance += imp / s;
        return tree;
    }

private:
    // Weighted Gini split search on one feature; gain is the total-weight
    // impurity decrease.
    Split best_split(int f, const std::vector<int>& idx, const std::vector<double>& cls, double total,
                     double parent_score, bool& constant) {
        const std::uint8_t* col = bins_.data() + static_cast<std::size_t>(f * n_);
        int lo_bin = 255, hi_bin = 0;
        for (int i : idx) {
            lo_bin = std::min<int>(lo_bin, col[i]);
            hi_bin = std::max<int>(hi_bin, col[i]);
        }
        constant = lo_bin == hi_bin;
        Split best;
        if (constant) return best;
        const int range = hi_bin - lo_bin + 1;
        std::fill(counts_.begin(), counts_.begin() + range * k_, 0.0);
        for (int i : idx)
            counts_[static_cast<std::size_t>((col[i] - lo_bin) * k_ + y_[static_cast<std::size_t>(i)])] +=
                w_[static_cast<std::size_t>(i)];
        std::vector<double>& left = left_;
        left.assign(static_cast<std::size_t>(k_), 0.0);
        double nl = 0.0;
        const double min_leaf = spec_.min_samples_leaf;
        for (int b = 0; b + 1 < range; ++b) {
            const double* row = counts_.data() + static_cast<std::size_t>(b * k_);
            double add = 0.0;
            for (int c = 0; c < k_; ++c) {
                left[static_cast<std::size_t>(c)] += row[c];
                add += row[c];
            }
            if (add == 0.0) continue;
            nl += add;
            if (nl < min_leaf) continue;
            const double nr = total - nl;
            if (nr < min_leaf) break;
            double sl = 0.0, sr = 0.0;
            for (int c = 0; c < k_; ++c) {
                const double lc = left[static_cast<std::size_t>(c)];
                const double rc = cls[static_cast<std::size_t>(c)] - lc;
                sl += lc * lc;
                sr += rc * rc;
            }
            // N*gini(parent) - NL*gini(L) - NR*gini(R)
            const double gain = sl / nl + sr / nr - parent_score;
            if (gain > best.gain) best = {gain, f, b + lo_bin};
        }
        return best;
    }

    const ClassifierSpec& spec_;
    const Binner& binner_;
    const std::vector<std::uint8_t>& bins_;
    const std::vector<int>& y_;
    int k_;
    Index n_, d_, mtry_ = 1;
    std::vector<double> w_, counts_, left_;
};

}  // namespace

ModelPtr fit_gbdt(const ClassifierSpec& spec, const Matrix& x, const std::vector<int>& y, int classes) {
    const Index n = x.rows();
    const Binner binner = Binner::fit(x, spec.max_bins);
    const auto bins = binner.transform(x);
    auto model = std::make_shared<GbdtModel>(classes, x.cols());
    model->importance_ = Vector::Zero(x.cols());

    model->init_ = Vector::Zero(classes);
    for (int c : y) model->init_[c] += 1.0;
    model->init_ = (model->init_ / static_cast<double>(n)).array().log();

    Matrix f = model->init_.transpose().replicate(n, 1);
    const double factor = static_cast<double>(classes) / (classes - 1);
    std::vector<double> g(static_cast<std::size_t>(n)), h(static_cast<std::size_t>(n));
    GbdtGrower grower(spec, binner, bins, n);
    model->trees_.reserve(static_cast<std::size_t>(spec.n_estimators * classes));
    for (int round = 0; round < spec.n_estimators; ++round) {
        Matrix p = f;
        softmax_rows(p);
        for (int k = 0; k < classes; ++k) {
            for (Index i = 0; i < n; ++i) {
                const double pk = p(i, k);
                g[static_cast<std::size_t>(i)] = pk - (y[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0);
                h[static_cast<std::size_t>(i)] = std::max(factor * pk * (1.0 - pk), 1e-16);
            }
            model->trees_.push_back(grower.grow(g, h, model->importance_, f.col(k).data(), 1));
        }
    }
    return model;
}

ModelPtr fit_forest(const ClassifierSpec& spec, const Matrix& x, const std::vector<int>& y, int classes) {
    const Binner binner = Binner::fit(x, spec.max_bins);
    const auto bins = binner.transform(x);
    auto model = std::make_shared<ForestModel>(classes, x.cols());
    model->importance_ = Vector::Zero(x.cols());
    ForestGrower grower(spec, binner, bins, y, classes, x.rows());
    for (int t = 0; t < spec.n_estimators; ++t) {
        Rng rng = make_rng(spec.seed, "random_forest", static_cast<std::uint64_t>(t));
        model->trees_.push_back(grower.grow(rng, model->importance_));
    }
    model->importance_ /= static_cast<double>(spec.n_estimators);
    return model;
}

}  // namespace eegbench::classify::detail
