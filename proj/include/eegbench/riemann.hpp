#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eegbench/common.hpp"

namespace eegbench::riemann {

template <class Scalar>
using SpdMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using TangentVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kSymmetryTol = 1e-9;

template <class Scalar>
bool is_symmetric(const SpdMatrix<Scalar>& a, double tol = kSymmetryTol) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max<double>(1.0, a.cwiseAbs().maxCoeff());
    return static_cast<double>((a - a.transpose()).cwiseAbs().maxCoeff()) <= tol * scale;
}

template <class Scalar>
void require_symmetric(const SpdMatrix<Scalar>& a, const char* where) {
    if (!is_symmetric(a)) throw DomainError(std::string(where) + ": input is not symmetric");
}

template <class Scalar>
bool is_spd(const SpdMatrix<Scalar>& a) {
    if (!is_symmetric(a) || a.rows() == 0) return false;
    Eigen::SelfAdjointEigenSolver<SpdMatrix<Scalar>> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() > Scalar(0);
}

/// Applies f to the eigenvalues of a symmetric matrix: V f(L) V^T.
template <class Scalar, class F>
SpdMatrix<Scalar> eigen_apply(const SpdMatrix<Scalar>& a, F f) {
    Eigen::SelfAdjointEigenSolver<SpdMatrix<Scalar>> es(a);
    const auto& v = es.eigenvectors();
    TangentVector<Scalar> l = es.eigenvalues().unaryExpr(f);
    SpdMatrix<Scalar> out = v * l.asDiagonal() * v.transpose();
    return Scalar(0.5) * (out + out.transpose());
}

template <class Scalar>
SpdMatrix<Scalar> spd_log(const SpdMatrix<Scalar>& a) {
    require_symmetric(a, "spd_log");
    return eigen_apply(a, [](Scalar x) {
        if (!(x > Scalar(0))) throw DomainError("spd_log: matrix is not positive definite");
        return std::log(x);
    });
}

template <class Scalar>
SpdMatrix<Scalar> spd_exp(const SpdMatrix<Scalar>& s) {
    require_symmetric(s, "spd_exp");
    return eigen_apply(s, [](Scalar x) { return std::exp(x); });
}

template <class Scalar>
SpdMatrix<Scalar> spd_sqrt(const SpdMatrix<Scalar>& a) {
    require_symmetric(a, "spd_sqrt");
    return eigen_apply(a, [](Scalar x) {
        if (!(x > Scalar(0))) throw DomainError("spd_sqrt: matrix is not positive definite");
        return std::sqrt(x);
    });
}

template <class Scalar>
SpdMatrix<Scalar> spd_invsqrt(const SpdMatrix<Scalar>& a) {
    require_symmetric(a, "spd_invsqrt");
    return eigen_apply(a, [](Scalar x) {
        if (!(x > Scalar(0))) throw DomainError("spd_invsqrt: matrix is not positive definite");
        return Scalar(1) / std::sqrt(x);
    });
}

struct LwResult {
    double shrinkage = 0.0;
};

inline constexpr double kZeroEpochEpsilon = 1e-10;

/// Ledoit-Wolf shrunk covariance of a channels x samples epoch (rows are
/// centered). A single-sample epoch has no covariance information and yields
/// the scaled identity (shrinkage 1).
template <class Scalar>
SpdMatrix<Scalar> lw_covariance(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& epoch,
                                LwResult* info = nullptr) {
    const Index d = epoch.rows(), n = epoch.cols();
    if (d == 0) throw DomainError("lw_covariance: epoch has no channels");
    if (n == 0) throw DomainError("lw_covariance: epoch has no samples");
    if (epoch.cwiseAbs().maxCoeff() == Scalar(0)) {
        warn("lw_covariance: all-zero epoch, returning epsilon * I");
        if (info) info->shrinkage = 1.0;
        return SpdMatrix<Scalar>::Identity(d, d) * Scalar(kZeroEpochEpsilon);
    }
    if (n == 1) {
        if (info) info->shrinkage = 1.0;
        return SpdMatrix<Scalar>::Identity(d, d) * (epoch.squaredNorm() / Scalar(d));
    }
    const SpdMatrix<Scalar> x = epoch.colwise() - epoch.rowwise().mean();
    const Scalar nn = Scalar(n), dd = Scalar(d);
    SpdMatrix<Scalar> s = x * x.transpose() / nn;
    const Scalar mu = s.trace() / dd;
    SpdMatrix<Scalar> shifted = s;
    shifted.diagonal().array() -= mu;
    const Scalar delta = shifted.squaredNorm() / dd;
    // sum_k ||x_k x_k^T - S||_F^2 = sum_k ||x_k||^4 - n ||S||_F^2
    const Scalar fourth = x.colwise().squaredNorm().array().square().sum();
    Scalar beta = (fourth - nn * s.squaredNorm()) / (dd * nn * nn);
    beta = std::max(Scalar(0), std::min(beta, delta));
    const Scalar lambda = delta > Scalar(0) ? beta / delta : Scalar(1);
    if (info) info->shrinkage = static_cast<double>(lambda);
    s *= (Scalar(1) - lambda);
    s.diagonal().array() += lambda * mu;
    if (mu == Scalar(0)) {
        warn("lw_covariance: constant epoch, returning epsilon * I");
        return SpdMatrix<Scalar>::Identity(d, d) * Scalar(kZeroEpochEpsilon);
    }
    return Scalar(0.5) * (s + s.transpose());
}

/// Affine-invariant distance ||log(A^{-1/2} B A^{-1/2})||_F.
template <class Scalar>
Scalar riemann_distance(const SpdMatrix<Scalar>& a, const SpdMatrix<Scalar>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DomainError("riemann_distance: dimension mismatch");
    require_symmetric(a, "riemann_distance");
    require_symmetric(b, "riemann_distance");
    Eigen::GeneralizedSelfAdjointEigenSolver<SpdMatrix<Scalar>> es(b, a, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw DomainError("riemann_distance: matrices are not positive definite");
    const auto l = es.eigenvalues().array();
    if (!(l.minCoeff() > Scalar(0))) throw DomainError("riemann_distance: matrices are not positive definite");
    return std::sqrt(l.log().square().sum());
}

/// Karcher-mean iteration did not reach the gradient tolerance.
class ConvergenceError : public DomainError {
public:
    ConvergenceError(const std::string& what, double gradient_norm) : DomainError(what), gradient_norm_(gradient_norm) {}
    double gradient_norm() const noexcept { return gradient_norm_; }

private:
    double gradient_norm_;
};

struct MeanInfo {
    int iterations = 0;
    double gradient_norm = 0.0;
};

/// Affine-invariant Karcher mean by unit-step fixed-point iteration from the
/// arithmetic mean.
template <class Scalar>
SpdMatrix<Scalar> geometric_mean(const std::vector<SpdMatrix<Scalar>>& mats, double tol = 1e-8, int max_iter = 50,
                                 MeanInfo* info = nullptr) {
    if (mats.empty()) throw DomainError("geometric_mean: empty list");
    const Index d = mats.front().rows();
    SpdMatrix<Scalar> g = SpdMatrix<Scalar>::Zero(d, d);
    for (const auto& m : mats) {
        if (m.rows() != d || m.cols() != d) throw DomainError("geometric_mean: dimension mismatch");
        g += m;
    }
    g /= Scalar(mats.size());
    if (mats.size() == 1) {
        if (info) *info = {};
        return mats.front();
    }
    double norm = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iter; ++it) {
        const SpdMatrix<Scalar> root = spd_sqrt(g);
        const SpdMatrix<Scalar> inv_root = spd_invsqrt(g);
        SpdMatrix<Scalar> grad = SpdMatrix<Scalar>::Zero(d, d);
        for (const auto& m : mats) {
            SpdMatrix<Scalar> w = inv_root * m * inv_root;
            grad += spd_log<Scalar>(Scalar(0.5) * (w + w.transpose()));
        }
        grad /= Scalar(mats.size());
        norm = static_cast<double>(grad.norm());
        g = root * spd_exp(grad) * root;
        g = Scalar(0.5) * (g + g.transpose());
        if (norm < tol) {
            if (info) *info = {it, norm};
            return g;
        }
    }
    throw ConvergenceError("geometric_mean: no convergence after " + std::to_string(max_iter) +
                               " iterations (gradient norm " + std::to_string(norm) + ")",
                           norm);
}

/// Upper-triangular (row-major) vectorization of a symmetric matrix with
/// off-diagonals scaled by sqrt(2).
template <class Scalar>
TangentVector<Scalar> vectorize_upper(const SpdMatrix<Scalar>& s) {
    const Index d = s.rows();
    TangentVector<Scalar> v(d * (d + 1) / 2);
    const Scalar r2 = std::sqrt(Scalar(2));
    Index k = 0;
    for (Index i = 0; i < d; ++i)
        for (Index j = i; j < d; ++j) v[k++] = i == j ? s(i, j) : r2 * s(i, j);
    return v;
}

template <class Scalar>
SpdMatrix<Scalar> unvectorize_upper(const TangentVector<Scalar>& v) {
    const double root = (std::sqrt(8.0 * static_cast<double>(v.size()) + 1.0) - 1.0) / 2.0;
    const auto d = static_cast<Index>(std::llround(root));
    if (d * (d + 1) / 2 != v.size()) throw DomainError("unvectorize_upper: length is not triangular");
    SpdMatrix<Scalar> s(d, d);
    const Scalar r2 = std::sqrt(Scalar(2));
    Index k = 0;
    for (Index i = 0; i < d; ++i)
        for (Index j = i; j < d; ++j) {
            const Scalar x = i == j ? v[k] : v[k] / r2;
            s(i, j) = s(j, i) = x;
            ++k;
        }
    return s;
}

/// Tangent-space coordinates of C at G; the vector norm equals delta(G, C).
template <class Scalar>
TangentVector<Scalar> tangent_embed(const SpdMatrix<Scalar>& c, const SpdMatrix<Scalar>& g) {
    if (c.rows() != g.rows() || c.cols() != g.cols()) throw DomainError("tangent_embed: dimension mismatch");
    const SpdMatrix<Scalar> inv_root = spd_invsqrt(g);
    SpdMatrix<Scalar> w = inv_root * c * inv_root;
    return vectorize_upper<Scalar>(spd_log<Scalar>(Scalar(0.5) * (w + w.transpose())));
}

/// Same as tangent_embed with a precomputed G^{-1/2}.
template <class Scalar>
TangentVector<Scalar> tangent_embed_whitened(const SpdMatrix<Scalar>& c, const SpdMatrix<Scalar>& g_invsqrt) {
    SpdMatrix<Scalar> w = g_invsqrt * c * g_invsqrt;
    return vectorize_upper<Scalar>(spd_log<Scalar>(Scalar(0.5) * (w + w.transpose())));
}

template <class Scalar>
SpdMatrix<Scalar> tangent_unembed(const TangentVector<Scalar>& v, const SpdMatrix<Scalar>& g) {
    const SpdMatrix<Scalar> root = spd_sqrt(g);
    SpdMatrix<Scalar> c = root * spd_exp(unvectorize_upper(v)) * root;
    return Scalar(0.5) * (c + c.transpose());
}

/// Euclidean-alignment reference: arithmetic mean of trial covariances.
template <class Scalar>
SpdMatrix<Scalar> alignment_reference(const std::vector<SpdMatrix<Scalar>>& covs) {
    if (covs.empty()) throw DomainError("euclidean_align: subject has no trials");
    SpdMatrix<Scalar> r = SpdMatrix<Scalar>::Zero(covs.front().rows(), covs.front().cols());
    for (const auto& c : covs) r += c;
    return r / Scalar(covs.size());
}

/// Whitens every covariance by the subject reference: R^{-1/2} C R^{-1/2}.
/// The aligned set has mean exactly I.
template <class Scalar>
std::vector<SpdMatrix<Scalar>> euclidean_align(const std::vector<SpdMatrix<Scalar>>& covs) {
    const SpdMatrix<Scalar> w = spd_invsqrt(alignment_reference(covs));
    std::vector<SpdMatrix<Scalar>> out;
    out.reserve(covs.size());
    for (const auto& c : covs) {
        SpdMatrix<Scalar> a = w * c * w;
        out.push_back(Scalar(0.5) * (a + a.transpose()));
    }
    return out;
}

/// Epoch-level alignment X -> R^{-1/2} X with R the mean of the epochs'
/// sample covariances.
template <class Scalar>
std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> euclidean_align_epochs(
    const std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>& epochs) {
    std::vector<SpdMatrix<Scalar>> covs;
    covs.reserve(epochs.size());
    for (const auto& x : epochs) covs.push_back(x * x.transpose() / Scalar(x.cols()));
    const SpdMatrix<Scalar> w = spd_invsqrt(alignment_reference(covs));
    std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> out;
    out.reserve(epochs.size());
    for (const auto& x : epochs) out.push_back(w * x);
    return out;
}

template <class Scalar>
struct MdmModel {
    std::vector<SpdMatrix<Scalar>> means;      // one per class
    std::vector<SpdMatrix<Scalar>> invsqrt;    // cached means^{-1/2}
    int num_classes() const { return static_cast<int>(means.size()); }
};

template <class Scalar>
MdmModel<Scalar> mdm_fit(const std::vector<SpdMatrix<Scalar>>& covs, const std::vector<int>& labels) {
    if (covs.size() != labels.size()) throw DomainError("mdm_fit: covariance and label counts differ");
    int k = 0;
    for (int y : labels) {
        if (y < 0) throw DomainError("mdm_fit: negative label");
        k = std::max(k, y + 1);
    }
    std::vector<std::vector<SpdMatrix<Scalar>>> groups(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < covs.size(); ++i) groups[static_cast<std::size_t>(labels[i])].push_back(covs[i]);
    MdmModel<Scalar> model;
    for (int c = 0; c < k; ++c) {
        const auto& g = groups[static_cast<std::size_t>(c)];
        if (g.empty()) throw DomainError("mdm_fit: class " + std::to_string(c) + " has no training covariance");
        model.means.push_back(geometric_mean(g));
        model.invsqrt.push_back(spd_invsqrt(model.means.back()));
    }
    return model;
}

/// Distance from C to every class mean.
template <class Scalar>
TangentVector<Scalar> mdm_distances(const MdmModel<Scalar>& model, const SpdMatrix<Scalar>& c) {
    TangentVector<Scalar> d(model.num_classes());
    for (int k = 0; k < model.num_classes(); ++k) {
        const auto& w = model.invsqrt[static_cast<std::size_t>(k)];
        SpdMatrix<Scalar> m = w * c * w;
        Eigen::SelfAdjointEigenSolver<SpdMatrix<Scalar>> es(Scalar(0.5) * (m + m.transpose()), Eigen::EigenvaluesOnly);
        d[k] = std::sqrt(es.eigenvalues().array().log().square().sum());
    }
    return d;
}

/// Nearest class mean; ties (within 1e-10 relative) go to the lowest class index.
template <class Scalar>
int mdm_predict(const MdmModel<Scalar>& model, const SpdMatrix<Scalar>& c, TangentVector<Scalar>* distances = nullptr) {
    const TangentVector<Scalar> d = mdm_distances(model, c);
    int best = 0;
    for (int k = 1; k < d.size(); ++k)
        if (d[k] < d[best] - Scalar(1e-10) * std::max(Scalar(1), d[best])) best = k;
    if (distances) *distances = d;
    return best;
}

}  // namespace eegbench::riemann
