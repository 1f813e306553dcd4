/**
 * Half-vectorization algebra on the space of p x p real symmetric matrices.
 *
 * vech stacks the lower triangle column by column; mat is its inverse.
 * Everything downstream (bases, Jacobians, measurement matrices) uses this
 * ordering, so it is fixed here and nowhere else.
 */
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace jcov {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// l = p(p+1)/2.
constexpr Index half_dim(Index p) noexcept { return p * (p + 1) / 2; }

/// Inverse of half_dim; -1 if l is not a triangular number.
inline Index dim_from_half(Index l) noexcept {
    if (l < 1) return -1;
    const auto p = static_cast<Index>(std::llround((std::sqrt(8.0 * static_cast<double>(l) + 1.0) - 1.0) / 2.0));
    return half_dim(p) == l ? p : -1;
}

/// Dense real symmetric matrix. Entries are symmetric exactly.
class SymmetricMatrix {
public:
    SymmetricMatrix() = default;

    /// Zero matrix of dimension p.
    explicit SymmetricMatrix(Index p) : m_(Matrix::Zero(p, p)) {
        if (p < 1) throw std::invalid_argument("SymmetricMatrix: dimension must be positive");
    }

    /**
     * Symmetrizes (A + A^T)/2. Throws if A is not square or its asymmetry
     * max|A - A^T| exceeds rel_tol * max(1, max|A|).
     */
    static SymmetricMatrix from_dense(const Matrix& a, double rel_tol = 1e-9) {
        if (a.rows() != a.cols() || a.rows() < 1)
            throw std::invalid_argument("SymmetricMatrix: input must be square and nonempty");
        if (!a.allFinite()) throw std::invalid_argument("SymmetricMatrix: non-finite entries");
        const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
        const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
        if (asym > rel_tol * scale)
            throw std::invalid_argument("SymmetricMatrix: asymmetry " + std::to_string(asym) + " exceeds tolerance");
        SymmetricMatrix s;
        s.m_ = 0.5 * (a + a.transpose());
        return s;
    }

    /// (A + A^T)/2 without a tolerance check; for products known to be symmetric.
    static SymmetricMatrix symmetrize(const Matrix& a) {
        if (a.rows() != a.cols() || a.rows() < 1)
            throw std::invalid_argument("SymmetricMatrix: input must be square and nonempty");
        SymmetricMatrix s;
        s.m_ = 0.5 * (a + a.transpose());
        return s;
    }

    static SymmetricMatrix identity(Index p) { return from_dense(Matrix::Identity(p, p)); }

    Index dim() const noexcept { return m_.rows(); }
    const Matrix& matrix() const noexcept { return m_; }
    double operator()(Index i, Index h) const { return m_(i, h); }

    double trace() const { return m_.trace(); }
    double frobenius_sq() const { return m_.squaredNorm(); }

    /// Eigenvalues in ascending order.
    Vector eigenvalues() const { return Eigen::SelfAdjointEigenSolver<Matrix>(m_, Eigen::EigenvaluesOnly).eigenvalues(); }

    friend bool operator==(const SymmetricMatrix& a, const SymmetricMatrix& b) { return a.m_ == b.m_; }

private:
    Matrix m_;
};

/// vech image of a p x p symmetric matrix; length p(p+1)/2.
class HalfVector {
public:
    HalfVector() = default;

    /// Throws if values.size() is not triangular.
    explicit HalfVector(Vector values) : values_(std::move(values)) {
        p_ = dim_from_half(values_.size());
        if (p_ < 1)
            throw std::invalid_argument("HalfVector: length " + std::to_string(values_.size()) +
                                        " is not a triangular number");
    }

    Index dim() const noexcept { return p_; }
    Index size() const noexcept { return values_.size(); }
    const Vector& values() const noexcept { return values_; }
    double operator[](Index i) const { return values_[i]; }

private:
    Index p_ = 0;
    Vector values_;
};

/// Positions (0-based) of the lower-triangular entries inside column-major vec(S).
struct IndexSet {
    Index p = 0;
    std::vector<Index> indices;

    std::size_t size() const noexcept { return indices.size(); }
};

inline HalfVector vech(const SymmetricMatrix& s) {
    const Index p = s.dim();
    Vector v(half_dim(p));
    Index k = 0;
    for (Index h = 0; h < p; ++h)
        for (Index i = h; i < p; ++i) v[k++] = s(i, h);
    return HalfVector(std::move(v));
}

/// vech of the lower triangle of a square matrix, no symmetry check.
inline Vector vech_lower(const Matrix& a) {
    const Index p = a.rows();
    Vector v(half_dim(p));
    Index k = 0;
    for (Index h = 0; h < p; ++h)
        for (Index i = h; i < p; ++i) v[k++] = a(i, h);
    return v;
}

/// Inverse of vech_lower; the result is exactly symmetric.
inline Matrix mat_dense(const Eigen::Ref<const Vector>& v) {
    const Index p = dim_from_half(v.size());
    if (p < 1)
        throw std::invalid_argument("mat: length " + std::to_string(v.size()) + " is not a triangular number");
    Matrix a(p, p);
    Index k = 0;
    for (Index h = 0; h < p; ++h)
        for (Index i = h; i < p; ++i) {
            a(i, h) = v[k];
            a(h, i) = v[k];
            ++k;
        }
    return a;
}

inline SymmetricMatrix mat(const HalfVector& v) { return SymmetricMatrix::from_dense(mat_dense(v.values()), 0.0); }

inline SymmetricMatrix mat(const Vector& v) { return SymmetricMatrix::from_dense(mat_dense(v), 0.0); }

inline IndexSet vec_index_set(Index p) {
    if (p < 1) throw std::invalid_argument("vec_index_set: p must be positive");
    IndexSet set{p, {}};
    set.indices.reserve(static_cast<std::size_t>(half_dim(p)));
    for (Index h = 0; h < p; ++h)
        for (Index i = h; i < p; ++i) set.indices.push_back(h * p + i);
    return set;
}

/// Column-major full vectorization.
inline Vector vec(const Matrix& a) { return Eigen::Map<const Vector>(a.data(), a.size()); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// [M]_{I,I}: rows and columns of a p^2 x p^2 matrix selected at I.
inline Matrix restrict(const Matrix& m, const IndexSet& set) {
    const Index full = set.p * set.p;
    if (m.rows() != full || m.cols() != full)
        throw std::invalid_argument("restrict: matrix must be p^2 x p^2 with p = " + std::to_string(set.p));
    const auto l = static_cast<Index>(set.size());
    Matrix out(l, l);
    for (Index a = 0; a < l; ++a)
        for (Index b = 0; b < l; ++b) out(a, b) = m(set.indices[a], set.indices[b]);
    return out;
}

/// Thin SVD M = U diag(sigma) W^T, sigma nonincreasing.
struct Svd {
    Matrix u;
    Vector sigma;
    Matrix w;

    Matrix reconstruct() const { return u * sigma.asDiagonal() * w.transpose(); }
};

inline Svd svd(const Matrix& m) {
    if (!m.allFinite()) throw std::domain_error("svd: non-finite entries");
    if (m.size() == 0) return {Matrix(m.rows(), 0), Vector(0), Matrix(m.cols(), 0)};
    Eigen::BDCSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

inline Vector singular_values(const Matrix& m) {
    if (!m.allFinite()) throw std::domain_error("svd: non-finite entries");
    if (m.size() == 0) return Vector(0);
    return Eigen::BDCSVD<Matrix>(m).singularValues();
}

/// Count of singular values above rel_tol * sigma_1.
inline Index numeric_rank(const Vector& sigma, double rel_tol = 1e-8) {
    if (sigma.size() == 0 || sigma[0] <= 0.0) return 0;
    Index r = 0;
    for (Index i = 0; i < sigma.size(); ++i)
        if (sigma[i] > rel_tol * sigma[0]) ++r;
    return r;
}

inline Index numeric_rank(const Matrix& m, double rel_tol = 1e-8) { return numeric_rank(singular_values(m), rel_tol); }

inline double default_pinv_tol(const Matrix& m) {
    return static_cast<double>(std::max(m.rows(), m.cols())) * std::numeric_limits<double>::epsilon();
}

/// Moore-Penrose pseudo-inverse; singular values below tol * sigma_1 are dropped.
inline Matrix pinv(const Matrix& m, double tol) {
    if (tol < 0.0) throw std::invalid_argument("pinv: tol must be nonnegative");
    const Svd d = svd(m);
    Matrix out = Matrix::Zero(m.cols(), m.rows());
    if (d.sigma.size() == 0 || d.sigma[0] == 0.0) return out;
    const double cut = tol * d.sigma[0];
    for (Index i = 0; i < d.sigma.size(); ++i)
        if (d.sigma[i] > cut) out.noalias() += (d.w.col(i) / d.sigma[i]) * d.u.col(i).transpose();
    return out;
}

inline Matrix pinv(const Matrix& m) { return pinv(m, default_pinv_tol(m)); }

}  // namespace jcov
