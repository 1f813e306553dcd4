/**
 * Affine structure subspaces u0 + span(U) in vech coordinates, with
 * constructors for the common covariance families and Euclidean projection.
 */
#pragma once

#include "jcov/io.hpp"
#include "jcov/matspace.hpp"

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace jcov {

enum class StructureKind { diagonal, banded, circulant, toeplitz, proper_complex, custom };

inline std::string to_string(StructureKind k) {
    switch (k) {
        case StructureKind::diagonal: return "diagonal";
        case StructureKind::banded: return "banded";
        case StructureKind::circulant: return "circulant";
        case StructureKind::toeplitz: return "toeplitz";
        case StructureKind::proper_complex: return "proper";
        case StructureKind::custom: return "custom";
    }
    return "unknown";
}

/**
 * Affine subspace model. basis is l x r with orthonormal columns; offset is
 * u0. Immutable once built.
 */
class SubspaceModel {
public:
    /**
     * Orthonormalizes the columns of generators (l x g) and keeps the
     * numerically nonzero directions (singular values above 1e-8 * sigma_1).
     * The resulting r is computed, never taken from the caller.
     */
    static SubspaceModel from_generators(const Matrix& generators, Vector offset, StructureKind kind, int band = -1) {
        const Index l = generators.rows();
        const Index p = dim_from_half(l);
        if (p < 1) throw std::invalid_argument("SubspaceModel: generator length is not a triangular number");
        if (offset.size() != l) throw std::invalid_argument("SubspaceModel: offset length mismatch");
        SubspaceModel m;
        m.p_ = p;
        m.kind_ = kind;
        m.band_ = band;
        m.offset_ = std::move(offset);
        if (generators.cols() == 0) {
            m.basis_ = Matrix(l, 0);
            return m;
        }
        const Svd d = svd(generators);
        const Index r = numeric_rank(d.sigma);
        m.basis_ = d.u.leftCols(r);
        return m;
    }

    static SubspaceModel from_generators(const std::vector<SymmetricMatrix>& gens, StructureKind kind, int band = -1) {
        if (gens.empty()) throw std::invalid_argument("SubspaceModel: no generators");
        const Index p = gens.front().dim();
        Matrix g(half_dim(p), static_cast<Index>(gens.size()));
        for (std::size_t j = 0; j < gens.size(); ++j) {
            if (gens[j].dim() != p) throw std::invalid_argument("SubspaceModel: generator dimensions differ");
            g.col(static_cast<Index>(j)) = vech(gens[j]).values();
        }
        return from_generators(g, Vector::Zero(half_dim(p)), kind, band);
    }

    Index p() const noexcept { return p_; }
    Index l() const noexcept { return half_dim(p_); }
    Index r() const noexcept { return basis_.cols(); }
    const Matrix& basis() const noexcept { return basis_; }
    const Vector& offset() const noexcept { return offset_; }
    StructureKind kind() const noexcept { return kind_; }
    int band() const noexcept { return band_; }

    /// Same span, new offset.
    SubspaceModel with_offset(Vector offset) const {
        if (offset.size() != l()) throw std::invalid_argument("SubspaceModel: offset length mismatch");
        SubspaceModel m = *this;
        m.offset_ = std::move(offset);
        return m;
    }

    /// u0 + U U^T (v - u0).
    Vector project_vech(const Eigen::Ref<const Vector>& v) const {
        if (v.size() != l()) throw std::invalid_argument("project: dimension mismatch");
        const Vector centered = v - offset_;
        return offset_ + basis_ * (basis_.transpose() * centered);
    }

    /// Column-wise projection of an l x K matrix.
    Matrix project_columns(const Matrix& s) const {
        if (s.rows() != l()) throw std::invalid_argument("project: dimension mismatch");
        Matrix centered = s.colwise() - offset_;
        Matrix out = basis_ * (basis_.transpose() * centered);
        out.colwise() += offset_;
        return out;
    }

private:
    Index p_ = 0;
    Matrix basis_;
    Vector offset_;
    StructureKind kind_ = StructureKind::custom;
    int band_ = -1;
};

inline SymmetricMatrix project(const SymmetricMatrix& s, const SubspaceModel& model) {
    if (s.dim() != model.p()) throw std::invalid_argument("project: dimension mismatch");
    return mat(model.project_vech(vech(s).values()));
}

namespace detail {

inline Matrix band_generator(Index p, Index j) {
    Matrix d = Matrix::Zero(p, p);
    for (Index i = 0; i + j < p; ++i) {
        d(i + j, i) = 1.0;
        d(i, i + j) = 1.0;
    }
    return d;
}

inline Matrix generators_matrix(const std::vector<Matrix>& gens, Index p) {
    Matrix g(half_dim(p), static_cast<Index>(gens.size()));
    for (std::size_t j = 0; j < gens.size(); ++j) g.col(static_cast<Index>(j)) = vech_lower(gens[j]);
    return g;
}

}  // namespace detail

/// D_j: ones on the j-th and -j-th subdiagonals (D_0 = I).
inline SymmetricMatrix subdiagonal_generator(Index p, Index j) {
    if (j < 0 || j >= p) throw std::invalid_argument("subdiagonal_generator: j out of range");
    return SymmetricMatrix::from_dense(detail::band_generator(p, j), 0.0);
}

/// Raw (unnormalized) generator matrices of each family, as l x g columns.
inline Matrix diagonal_generators(Index p) {
    Matrix g = Matrix::Zero(half_dim(p), p);
    for (Index i = 0; i < p; ++i) {
        Matrix e = Matrix::Zero(p, p);
        e(i, i) = 1.0;
        g.col(i) = vech_lower(e);
    }
    return g;
}

inline Matrix banded_generators(Index p, Index b) {
    std::vector<Matrix> gens;
    for (Index h = 0; h < p; ++h)
        for (Index i = h; i < p && i - h <= b; ++i) {
            Matrix e = Matrix::Zero(p, p);
            e(i, h) = 1.0;
            e(h, i) = 1.0;
            gens.push_back(e);
        }
    return detail::generators_matrix(gens, p);
}

/// Symmetric circulant patterns: ones where (col - row) mod p is j or p - j.
inline Matrix circulant_generators(Index p) {
    std::vector<Matrix> gens;
    for (Index j = 0; j <= p / 2; ++j) {
        Matrix c = Matrix::Zero(p, p);
        for (Index i = 0; i < p; ++i) {
            c(i, (i + j) % p) = 1.0;
            c(i, (i + p - j) % p) = 1.0;
        }
        gens.push_back(c);
    }
    return detail::generators_matrix(gens, p);
}

inline Matrix toeplitz_generators(Index p) {
    std::vector<Matrix> gens;
    for (Index j = 0; j < p; ++j) gens.push_back(detail::band_generator(p, j));
    return detail::generators_matrix(gens, p);
}

/**
 * Real representation of a hermitian matrix,
 * (1/2) [[Re QC, -Im QC], [Im QC, Re QC]].
 */
inline SymmetricMatrix real_embed(const Eigen::MatrixXcd& qc, double tol = 1e-9) {
    if (qc.rows() != qc.cols() || qc.rows() < 1) throw std::invalid_argument("real_embed: input must be square");
    const double scale = std::max(1.0, qc.cwiseAbs().maxCoeff());
    if ((qc - qc.adjoint()).cwiseAbs().maxCoeff() > tol * scale)
        throw std::invalid_argument("real_embed: input is not hermitian");
    const Index m = qc.rows();
    Matrix out(2 * m, 2 * m);
    out.topLeftCorner(m, m) = qc.real();
    out.topRightCorner(m, m) = -qc.imag();
    out.bottomLeftCorner(m, m) = qc.imag();
    out.bottomRightCorner(m, m) = qc.real();
    out *= 0.5;
    return SymmetricMatrix::from_dense(out, tol);
}

inline Matrix proper_complex_generators(Index p_real) {
    if (p_real < 2 || p_real % 2 != 0) throw std::invalid_argument("proper_complex_model: dimension must be even");
    const Index m = p_real / 2;
    std::vector<Matrix> gens;
    for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b) {
            Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(m, m);
            if (a == b) {
                e(a, a) = 1.0;
            } else if (a > b) {
                e(a, b) = 1.0;
                e(b, a) = 1.0;
            } else {
                e(a, b) = std::complex<double>(0.0, 1.0);
                e(b, a) = std::complex<double>(0.0, -1.0);
            }
            gens.push_back(real_embed(e).matrix());
        }
    return detail::generators_matrix(gens, p_real);
}

inline SubspaceModel diagonal_model(Index p) {
    if (p < 1) throw std::invalid_argument("diagonal_model: p must be positive");
    return SubspaceModel::from_generators(diagonal_generators(p), Vector::Zero(half_dim(p)), StructureKind::diagonal);
}

/// r = (2p - b)(b + 1)/2.
inline SubspaceModel banded_model(Index p, Index b) {
    if (p < 1) throw std::invalid_argument("banded_model: p must be positive");
    if (b < 0 || b > p - 1) throw std::invalid_argument("banded_model: bandwidth out of range [0, p-1]");
    return SubspaceModel::from_generators(banded_generators(p, b), Vector::Zero(half_dim(p)), StructureKind::banded,
                                          static_cast<int>(b));
}

inline SubspaceModel circulant_model(Index p) {
    if (p < 1) throw std::invalid_argument("circulant_model: p must be positive");
    return SubspaceModel::from_generators(circulant_generators(p), Vector::Zero(half_dim(p)), StructureKind::circulant);
}

inline SubspaceModel toeplitz_model(Index p) {
    if (p < 1) throw std::invalid_argument("toeplitz_model: p must be positive");
    return SubspaceModel::from_generators(toeplitz_generators(p), Vector::Zero(half_dim(p)), StructureKind::toeplitz);
}

/// r = p_real^2 / 4.
inline SubspaceModel proper_complex_model(Index p_real) {
    return SubspaceModel::from_generators(proper_complex_generators(p_real), Vector::Zero(half_dim(p_real)),
                                          StructureKind::proper_complex);
}

/// Whole space S(p); equals banded_model(p, p - 1).
inline SubspaceModel full_model(Index p) { return banded_model(p, p - 1); }

inline SubspaceModel custom_model(const std::vector<SymmetricMatrix>& generators) {
    return SubspaceModel::from_generators(generators, StructureKind::custom);
}

inline SubspaceModel custom_model_from_csv(const std::string& path) {
    return custom_model(io::read_stacked_symmetric(path));
}

/**
 * Parses `diagonal | banded:b | circulant | toeplitz | proper | custom:path`.
 * p is ignored for custom (taken from the file) and checked against it
 * when positive.
 */
inline SubspaceModel parse_structure(const std::string& spec, Index p) {
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? std::string{} : spec.substr(colon + 1);
    if (head == "custom") {
        if (arg.empty()) throw std::invalid_argument("structure: custom requires a path");
        SubspaceModel m = custom_model_from_csv(arg);
        if (p > 0 && m.p() != p)
            throw std::invalid_argument("structure: custom generators have p = " + std::to_string(m.p()) +
                                        ", expected " + std::to_string(p));
        return m;
    }
    if (p < 1) throw std::invalid_argument("structure: p must be positive");
    if (head == "diagonal") return diagonal_model(p);
    if (head == "circulant") return circulant_model(p);
    if (head == "toeplitz") return toeplitz_model(p);
    if (head == "proper") return proper_complex_model(p);
    if (head == "banded") {
        if (arg.empty()) throw std::invalid_argument("structure: banded requires a bandwidth, e.g. banded:2");
        Index b = 0;
        try {
            std::size_t used = 0;
            b = std::stol(arg, &used);
            if (used != arg.size()) throw std::invalid_argument(arg);
        } catch (const std::exception&) {
            throw std::invalid_argument("structure: bad bandwidth '" + arg + "'");
        }
        return banded_model(p, b);
    }
    throw std::invalid_argument("structure: unknown kind '" + spec + "'");
}

}  // namespace jcov
