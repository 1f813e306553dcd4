/**
 * Cramer-Rao machinery for the low-rank parametrization Y = U Z.
 *
 * The parametrization is unidentifiable ((UA, A^-1 Z) fits equally well), so
 * the Fisher information is singular with rank lr + Kr - r^2 and the bound
 * uses its pseudo-inverse at exactly that rank.
 */
#pragma once

#include "jcov/matspace.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jcov {

/// Y = U Z with U l x r and Z r x K, both of full rank r.
struct FactorPair {
    Matrix u;
    Matrix z;

    Index l() const noexcept { return u.rows(); }
    Index r() const noexcept { return u.cols(); }
    Index K() const noexcept { return z.cols(); }

    void validate() const {
        if (u.cols() != z.rows()) throw std::invalid_argument("FactorPair: U has " + std::to_string(u.cols()) +
                                                              " columns but Z has " + std::to_string(z.rows()) + " rows");
        if (r() < 1) throw std::invalid_argument("FactorPair: rank must be positive");
        if (dim_from_half(l()) < 1) throw std::invalid_argument("FactorPair: U row count is not a triangular number");
        if (numeric_rank(u) != r() || numeric_rank(z) != r())
            throw std::invalid_argument("FactorPair: U and Z must both have full rank r");
    }
};

/// lr + Kr - r^2.
inline Index jacobian_rank(Index l, Index r, Index K) {
    if (r < 1 || r > std::min(l, K)) throw std::invalid_argument("jacobian_rank: r outside [1, min(l, K)]");
    return l * r + K * r - r * r;
}

/**
 * Dense Jacobian of (vech Q_1, ..., vech Q_K) with respect to (vec U, z_1..z_K).
 * Block row k is [z_k^T (x) I_l, 0, ..., U, ..., 0].
 */
inline Matrix jacobian(const FactorPair& fp) {
    if (fp.u.cols() != fp.z.rows()) throw std::invalid_argument("jacobian: dimension mismatch");
    const Index l = fp.l(), r = fp.r(), K = fp.K();
    Matrix j = Matrix::Zero(l * K, l * r + K * r);
    for (Index k = 0; k < K; ++k) {
        for (Index c = 0; c < r; ++c) j.block(k * l, c * l, l, l).diagonal().setConstant(fp.z(c, k));
        j.block(k * l, l * r + k * r, l, r) = fp.u;
    }
    return j;
}

/// [Q^-1 (x) Q^-1]_{I,I} for one group, via a Cholesky solve.
inline Matrix restricted_inverse_kron(const SymmetricMatrix& q, double max_condition = 1e12) {
    const Vector lam = q.eigenvalues();
    if (lam[0] <= 0.0) throw std::domain_error("crb: covariance is not positive definite");
    if (lam[lam.size() - 1] / lam[0] > max_condition)
        throw std::domain_error("crb: covariance condition number exceeds " + std::to_string(max_condition));
    Eigen::LLT<Matrix> llt(q.matrix());
    if (llt.info() != Eigen::Success) throw std::domain_error("crb: covariance is not positive definite");
    const Matrix qinv = llt.solve(Matrix::Identity(q.dim(), q.dim()));
    return restrict(kron(qinv, qinv), vec_index_set(q.dim()));
}

namespace detail {

/**
 * J^T blockdiag(D_1..D_K) J assembled blockwise:
 *   UU block  sum_k (z_k z_k^T) (x) D_k
 *   U z_k     z_k (x) (D_k U)
 *   z_k z_k   U^T D_k U
 * With empty blocks the D_k are identities (gives J^T J).
 */
inline Matrix weighted_gram(const FactorPair& fp, std::span<const Matrix> blocks) {
    const Index l = fp.l(), r = fp.r(), K = fp.K();
    const Index nu = l * r;
    Matrix g = Matrix::Zero(nu + K * r, nu + K * r);
    for (Index k = 0; k < K; ++k) {
        const Vector zk = fp.z.col(k);
        const Matrix du = blocks.empty() ? fp.u : Matrix(blocks[static_cast<std::size_t>(k)] * fp.u);
        for (Index a = 0; a < r; ++a) {
            for (Index b = 0; b < r; ++b) {
                if (blocks.empty())
                    g.block(a * l, b * l, l, l).diagonal().array() += zk[a] * zk[b];
                else
                    g.block(a * l, b * l, l, l) += (zk[a] * zk[b]) * blocks[static_cast<std::size_t>(k)];
            }
            g.block(a * l, nu + k * r, l, r) = zk[a] * du;
            g.block(nu + k * r, a * l, r, l) = zk[a] * du.transpose();
        }
        g.block(nu + k * r, nu + k * r, r, r) = fp.u.transpose() * du;
    }
    return 0.5 * (g + g.transpose());
}

inline void check_consistency(const FactorPair& fp, std::span<const SymmetricMatrix> qs) {
    if (static_cast<Index>(qs.size()) != fp.K())
        throw std::invalid_argument("crb: expected " + std::to_string(fp.K()) + " covariances");
    const Matrix y = fp.u * fp.z;
    for (Index k = 0; k < fp.K(); ++k) {
        const auto& q = qs[static_cast<std::size_t>(k)];
        if (half_dim(q.dim()) != fp.l()) throw std::invalid_argument("crb: covariance dimension mismatch");
        const double scale = std::max(1.0, q.matrix().cwiseAbs().maxCoeff());
        if ((mat_dense(y.col(k)) - q.matrix()).cwiseAbs().maxCoeff() > 1e-8 * scale)
            throw std::invalid_argument("crb: mat(U z_" + std::to_string(k + 1) + ") does not match Q_" +
                                        std::to_string(k + 1));
    }
}

inline std::vector<Matrix> restricted_blocks(std::span<const SymmetricMatrix> qs) {
    std::vector<Matrix> d;
    d.reserve(qs.size());
    for (const auto& q : qs) d.push_back(restricted_inverse_kron(q));
    return d;
}

}  // namespace detail

/// J^T J, assembled without forming J.
inline Matrix jacobian_gram(const FactorPair& fp) { return detail::weighted_gram(fp, {}); }

/// Gaussian Fisher information (1/2) J^T diag([Q_k^-1 (x) Q_k^-1]_{I,I}) J.
inline Matrix fim(const FactorPair& fp, std::span<const SymmetricMatrix> qs) {
    fp.validate();
    detail::check_consistency(fp, qs);
    const auto blocks = detail::restricted_blocks(qs);
    return 0.5 * detail::weighted_gram(fp, blocks);
}

struct CrbTrace {
    /// (1/n) Tr(FIM^+ J^T J).
    double value = 0.0;
    /// Rank the pseudo-inverse was forced to.
    Index rank_theory = 0;
    /// Eigenvalues of the FIM above 1e-10 * largest.
    Index fim_rank_numeric = 0;
};

/**
 * (2/n) Tr([J^T D J]^+ J^T J) with the pseudo-inverse restricted to the
 * lr + Kr - r^2 largest eigenvalues.
 */
inline CrbTrace crb_trace_detail(const FactorPair& fp, std::span<const SymmetricMatrix> qs, Index n) {
    if (n < 1) throw std::invalid_argument("crb_trace: n must be positive");
    fp.validate();
    detail::check_consistency(fp, qs);
    const auto blocks = detail::restricted_blocks(qs);
    const Matrix weighted = detail::weighted_gram(fp, blocks);
    const Matrix gram = jacobian_gram(fp);
    const Index rho = jacobian_rank(fp.l(), fp.r(), fp.K());

    Eigen::SelfAdjointEigenSolver<Matrix> es(weighted);
    if (es.info() != Eigen::Success) throw std::runtime_error("crb_trace: eigen-decomposition failed");
    const Vector& lam = es.eigenvalues();  // ascending
    const Index dim = lam.size();
    CrbTrace out;
    out.rank_theory = rho;
    const double top = lam[dim - 1];
    for (Index i = 0; i < dim; ++i)
        if (lam[i] > 1e-10 * top) ++out.fim_rank_numeric;
    double tr = 0.0;
    for (Index i = dim - rho; i < dim; ++i) {
        const auto v = es.eigenvectors().col(i);
        tr += v.dot(gram * v) / lam[i];
    }
    out.value = 2.0 * tr / static_cast<double>(n);
    return out;
}

inline double crb_trace(const FactorPair& fp, std::span<const SymmetricMatrix> qs, Index n) {
    return crb_trace_detail(fp, qs, n).value;
}

/// (2 lambda^2 / n)(lr + Kr - r^2).
inline double crb_floor(Index l, Index r, Index K, Index n, double lambda) {
    if (n < 1) throw std::invalid_argument("crb_floor: n must be positive");
    return 2.0 * lambda * lambda * static_cast<double>(jacobian_rank(l, r, K)) / static_cast<double>(n);
}

/// Shape of the per-matrix MSE: (lr - r^2)/(Kn) + r/n.
inline double marginal_mse(Index l, Index r, Index K, Index n) {
    if (l < 1 || r < 0 || K < 1 || n < 1) throw std::invalid_argument("marginal_mse: inputs must be positive");
    const double dl = static_cast<double>(l), dr = static_cast<double>(r);
    return (dl * dr - dr * dr) / (static_cast<double>(K) * static_cast<double>(n)) + dr / static_cast<double>(n);
}

/// U = top-r left singular vectors, Z = Sigma_r W_r^T.
inline FactorPair factorize(const Matrix& y, Index r) {
    if (r < 1 || r > std::min(y.rows(), y.cols())) throw std::invalid_argument("factorize: r outside [1, min(l, K)]");
    const Svd d = svd(y);
    if (numeric_rank(d.sigma) < r)
        throw std::invalid_argument("factorize: numeric rank " + std::to_string(numeric_rank(d.sigma)) +
                                    " is below r = " + std::to_string(r));
    return {d.u.leftCols(r), d.sigma.head(r).asDiagonal() * d.w.leftCols(r).transpose()};
}

struct CrbReport {
    Index l = 0, r = 0, K = 0, n = 0;
    Index jacobian_rank_theory = 0;
    Index jacobian_rank_numeric = 0;
    double trace_bound = 0.0;
    double floor = 0.0;
    /// Same closed form with the largest eigenvalue; upper end of the sandwich.
    double ceiling = 0.0;
    double marginal_per_matrix = 0.0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    std::vector<std::string> warnings;
};

/**
 * Full report for ground-truth covariances Q_1..Q_K. r defaults to the
 * numeric rank of Y = [vech Q_k].
 */
inline CrbReport crb_report(std::span<const SymmetricMatrix> qs, Index n, Index r = -1) {
    if (qs.empty()) throw std::invalid_argument("crb_report: no covariances");
    const Index p = qs.front().dim();
    Matrix y(half_dim(p), static_cast<Index>(qs.size()));
    for (std::size_t k = 0; k < qs.size(); ++k) y.col(static_cast<Index>(k)) = vech(qs[k]).values();
    if (r < 0) r = numeric_rank(y);
    const FactorPair fp = factorize(y, r);
    const CrbTrace t = crb_trace_detail(fp, qs, n);

    CrbReport rep;
    rep.l = fp.l();
    rep.r = r;
    rep.K = fp.K();
    rep.n = n;
    rep.jacobian_rank_theory = t.rank_theory;
    {
        Eigen::SelfAdjointEigenSolver<Matrix> es(jacobian_gram(fp), Eigen::EigenvaluesOnly);
        const Vector& lam = es.eigenvalues();
        const double top = lam[lam.size() - 1];
        for (Index i = 0; i < lam.size(); ++i)
            if (lam[i] > 1e-12 * top) ++rep.jacobian_rank_numeric;
    }
    rep.trace_bound = t.value;
    rep.lambda_min = std::numeric_limits<double>::infinity();
    rep.lambda_max = -std::numeric_limits<double>::infinity();
    for (const auto& q : qs) {
        const Vector lam = q.eigenvalues();
        rep.lambda_min = std::min(rep.lambda_min, lam[0]);
        rep.lambda_max = std::max(rep.lambda_max, lam[lam.size() - 1]);
    }
    rep.floor = crb_floor(rep.l, r, rep.K, n, rep.lambda_min);
    rep.ceiling = crb_floor(rep.l, r, rep.K, n, rep.lambda_max);
    rep.marginal_per_matrix = marginal_mse(rep.l, r, rep.K, n);
    if (rep.jacobian_rank_numeric != rep.jacobian_rank_theory)
        rep.warnings.push_back("numeric Jacobian rank " + std::to_string(rep.jacobian_rank_numeric) +
                               " differs from theoretical rank " + std::to_string(rep.jacobian_rank_theory));
    if (t.fim_rank_numeric != t.rank_theory)
        rep.warnings.push_back("numeric FIM rank " + std::to_string(t.fim_rank_numeric) +
                               " differs from theoretical rank " + std::to_string(t.rank_theory));
    return rep;
}

}  // namespace jcov
