/**
 * Gaussian group samples, sample covariance matrices, the Toeplitz
 * experiment scenario and the normalized complex GARCH-style covariance
 * process used for tracking.
 */
#pragma once

#include "jcov/io.hpp"
#include "jcov/matspace.hpp"
#include "jcov/rng.hpp"
#include "jcov/structures.hpp"

#include <complex>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace jcov {

using ComplexMatrix = Eigen::MatrixXcd;

namespace detail {

inline Matrix cholesky_factor(const SymmetricMatrix& q) {
    Eigen::LLT<Matrix> llt(q.matrix());
    if (llt.info() != Eigen::Success) throw std::domain_error("covariance is not positive definite");
    return llt.matrixL();
}

template <class Engine>
Matrix standard_normal(Index rows, Index cols, Engine& eng) {
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = z(eng);
    return m;
}

}  // namespace detail

/// n i.i.d. columns from N(0, Q) as L z with Q = L L^T.
template <class Engine>
Matrix sample_gaussian(const SymmetricMatrix& q, Index n, Engine& eng) {
    if (n < 0) throw std::invalid_argument("sample_gaussian: n must be nonnegative");
    const Matrix l = detail::cholesky_factor(q);
    if (n == 0) return Matrix(q.dim(), 0);
    return l * detail::standard_normal(q.dim(), n, eng);
}

inline Matrix sample_gaussian(const SymmetricMatrix& q, Index n, std::uint64_t seed) {
    Philox4x32 eng(seed);
    return sample_gaussian(q, n, eng);
}

/// (1/n) sum x_i x_i^T, no mean subtraction.
inline SymmetricMatrix scm(const Matrix& samples) {
    if (samples.cols() == 0) throw std::invalid_argument("scm: no samples");
    if (samples.rows() < 1) throw std::invalid_argument("scm: empty dimension");
    Matrix s = Matrix::Zero(samples.rows(), samples.rows());
    s.selfadjointView<Eigen::Lower>().rankUpdate(samples, 1.0 / static_cast<double>(samples.cols()));
    s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
    return SymmetricMatrix::symmetrize(s);
}

/**
 * SCM of n Gaussian draws from N(0, Q) without materializing the draws.
 * For n >= p uses the Bartlett factorization n S = L A A^T L^T, with A lower
 * triangular, A_ii^2 ~ chi^2(n - i) (0-based i) and A_ij ~ N(0,1) below the
 * diagonal; this has exactly the Wishart(n, Q) law of the direct route.
 */
template <class Engine>
SymmetricMatrix sample_scm(const SymmetricMatrix& q, Index n, Engine& eng) {
    if (n < 1) throw std::invalid_argument("sample_scm: n must be positive");
    const Index p = q.dim();
    if (n < p) return scm(sample_gaussian(q, n, eng));
    const Matrix l = detail::cholesky_factor(q);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix a = Matrix::Zero(p, p);
    for (Index i = 0; i < p; ++i) {
        std::chi_squared_distribution<double> chi2(static_cast<double>(n - i));
        a(i, i) = std::sqrt(chi2(eng));
        for (Index j = 0; j < i; ++j) a(i, j) = z(eng);
    }
    const Matrix la = l * a;
    Matrix s = Matrix::Zero(p, p);
    s.selfadjointView<Eigen::Lower>().rankUpdate(la, 1.0 / static_cast<double>(n));
    s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
    return SymmetricMatrix::symmetrize(s);
}

/// K covariances lying in a known affine subspace, plus the ground truth model.
struct Scenario {
    Index p = 0;
    Index K = 0;
    std::vector<SymmetricMatrix> covariances;
    SubspaceModel model;
    std::uint64_t seed = 0;
    /// Draws discarded because Q_k was not positive definite.
    std::uint64_t rejections = 0;

    /// Y = [vech(Q_1), ..., vech(Q_K)].
    Matrix measurement_matrix() const {
        Matrix y(half_dim(p), K);
        for (Index k = 0; k < K; ++k) y.col(k) = vech(covariances[static_cast<std::size_t>(k)]).values();
        return y;
    }

    double lambda_min() const {
        double v = std::numeric_limits<double>::infinity();
        for (const auto& q : covariances) v = std::min(v, q.eigenvalues()[0]);
        return v;
    }

    double lambda_max() const {
        double v = -std::numeric_limits<double>::infinity();
        for (const auto& q : covariances) v = std::max(v, q.eigenvalues()[q.dim() - 1]);
        return v;
    }
};

namespace detail {

/**
 * Q_k = I + sum_j z_kj G_j with z i.i.d. U[-1/2, 1/2]; redraws z_k until
 * Q_k is positive definite.
 */
template <class Engine>
Scenario draw_scenario(Index p, Index K, const std::vector<Matrix>& gens, SubspaceModel model, std::uint64_t seed,
                       Engine& eng) {
    Scenario sc;
    sc.p = p;
    sc.K = K;
    sc.seed = seed;
    sc.model = std::move(model);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    sc.covariances.reserve(static_cast<std::size_t>(K));
    while (static_cast<Index>(sc.covariances.size()) < K) {
        Matrix q = Matrix::Identity(p, p);
        for (const auto& g : gens) q += u(eng) * g;
        Eigen::LLT<Matrix> llt(q);
        if (llt.info() != Eigen::Success || q.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() <= 0.0) {
            ++sc.rejections;
            continue;
        }
        sc.covariances.push_back(SymmetricMatrix::symmetrize(q));
    }
    return sc;
}

}  // namespace detail

/**
 * Q_k = I + sum_{j=1}^{p-1} z_kj D_j / ||D_j||_F, z ~ U[-1/2, 1/2],
 * non-PD draws rejected. The recorded model is the affine set with offset
 * vech(I) and r = p - 1.
 */
template <class Engine>
Scenario toeplitz_scenario(Index p, Index K, std::uint64_t seed, Engine& eng) {
    if (p < 2) throw std::invalid_argument("toeplitz_scenario: p must be at least 2");
    if (K < 1) throw std::invalid_argument("toeplitz_scenario: K must be positive");
    std::vector<Matrix> gens;
    Matrix g(half_dim(p), p - 1);
    for (Index j = 1; j < p; ++j) {
        Matrix d = subdiagonal_generator(p, j).matrix();
        d /= d.norm();
        g.col(j - 1) = vech_lower(d);
        gens.push_back(std::move(d));
    }
    auto model = SubspaceModel::from_generators(g, vech_lower(Matrix::Identity(p, p)), StructureKind::toeplitz);
    return detail::draw_scenario(p, K, gens, std::move(model), seed, eng);
}

inline Scenario toeplitz_scenario(Index p, Index K, std::uint64_t seed) {
    auto eng = substream(seed, 0, slot::scenario);
    return toeplitz_scenario(p, K, seed, eng);
}

/**
 * Same recipe for an arbitrary structure: the generators are the model's
 * orthonormal basis elements rescaled to unit matrix-Frobenius norm, offset I.
 */
template <class Engine>
Scenario structured_scenario(const SubspaceModel& structure, Index K, std::uint64_t seed, Engine& eng) {
    if (K < 1) throw std::invalid_argument("structured_scenario: K must be positive");
    const Index p = structure.p();
    std::vector<Matrix> gens;
    for (Index j = 0; j < structure.r(); ++j) {
        Matrix g = mat_dense(structure.basis().col(j));
        gens.push_back(g / g.norm());
    }
    auto model = structure.with_offset(vech_lower(Matrix::Identity(p, p)));
    return detail::draw_scenario(p, K, gens, std::move(model), seed, eng);
}

inline Scenario structured_scenario(const SubspaceModel& structure, Index K, std::uint64_t seed) {
    auto eng = substream(seed, 0, slot::scenario);
    return structured_scenario(structure, K, seed, eng);
}

/// Hermitian covariance state of the tracking process; ||h||_F = 1.
struct DgpState {
    ComplexMatrix h;
    std::int64_t t = 0;
    double beta = 0.0;
};

/// H_0 = I / ||I||_F.
inline DgpState dgp_initial(Index p, double beta) {
    if (p < 1) throw std::invalid_argument("dgp_initial: p must be positive");
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("dgp_initial: beta must lie in [0, 1]");
    return {ComplexMatrix::Identity(p, p) / std::sqrt(static_cast<double>(p)), 0, beta};
}

/// H_t = Hhat / ||Hhat||_F with Hhat = (1 - beta) H_{t-1} + beta M M^H.
template <class Engine>
DgpState dgp_step(const DgpState& state, Engine& eng) {
    const Index p = state.h.rows();
    std::normal_distribution<double> z(0.0, 1.0);
    ComplexMatrix m(p, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < p; ++i) {
            const double re = z(eng);
            const double im = z(eng);
            m(i, j) = {re, im};
        }
    ComplexMatrix next = (1.0 - state.beta) * state.h + state.beta * (m * m.adjoint());
    next = 0.5 * (next + next.adjoint()).eval();
    next /= next.norm();
    return {std::move(next), state.t + 1, state.beta};
}

inline DgpState dgp_step(const DgpState& state, std::uint64_t seed) {
    auto eng = substream(seed, static_cast<std::uint64_t>(state.t), slot::dgp);
    return dgp_step(state, eng);
}

/// Hermitian square root of a hermitian PD matrix.
inline ComplexMatrix hermitian_sqrt(const ComplexMatrix& h) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
        throw std::domain_error("hermitian_sqrt: matrix is not positive definite");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
}

/// Columns H^{1/2} y, y circularly-symmetric CN(0, I) (variance 1/2 per real part).
template <class Engine>
ComplexMatrix sample_complex_with_root(const ComplexMatrix& root, Index n, Engine& eng) {
    const Index p = root.rows();
    std::normal_distribution<double> z(0.0, std::sqrt(0.5));
    ComplexMatrix y(p, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < p; ++i) {
            const double re = z(eng);
            const double im = z(eng);
            y(i, j) = {re, im};
        }
    return root * y;
}

template <class Engine>
ComplexMatrix sample_complex(const ComplexMatrix& h, Index n, Engine& eng) {
    if (n < 0) throw std::invalid_argument("sample_complex: n must be nonnegative");
    return sample_complex_with_root(hermitian_sqrt(h), n, eng);
}

inline ComplexMatrix sample_complex(const ComplexMatrix& h, Index n, std::uint64_t seed) {
    Philox4x32 eng(seed);
    return sample_complex(h, n, eng);
}

/// Stacks [Re x; Im x]; covariance of the result is real_embed(H).
inline Matrix real_samples(const ComplexMatrix& x) {
    Matrix out(2 * x.rows(), x.cols());
    out.topRows(x.rows()) = x.real();
    out.bottomRows(x.rows()) = x.imag();
    return out;
}

/// CSV dump: header `group,sample_index,component_1..component_p`, 1-based indices.
inline void write_samples_csv(std::ostream& out, const std::vector<Matrix>& groups) {
    if (groups.empty()) throw std::invalid_argument("write_samples_csv: no groups");
    const Index p = groups.front().rows();
    out << "group,sample_index";
    for (Index i = 1; i <= p; ++i) out << ",component_" << i;
    out << '\n';
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].rows() != p) throw std::invalid_argument("write_samples_csv: groups differ in dimension");
        for (Index s = 0; s < groups[g].cols(); ++s) {
            out << (g + 1) << ',' << (s + 1);
            for (Index i = 0; i < p; ++i) out << ',' << io::format_double(groups[g](i, s));
            out << '\n';
        }
    }
}

/// Reads a sample dump back into per-group p x n matrices (groups ordered by id).
inline std::vector<Matrix> read_samples_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("samples csv: empty input");
    const auto header = io::split(io::trim(line));
    if (header.size() < 3 || io::trim(header[0]) != "group" || io::trim(header[1]) != "sample_index")
        throw std::invalid_argument("samples csv: header must start with group,sample_index");
    const auto p = static_cast<Index>(header.size() - 2);
    std::map<long, std::vector<Vector>> by_group;
    while (std::getline(in, line)) {
        const std::string t = io::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto tok = io::split(t);
        if (static_cast<Index>(tok.size()) != p + 2) throw std::invalid_argument("samples csv: ragged row");
        const long g = std::stol(tok[0]);
        Vector x(p);
        for (Index i = 0; i < p; ++i) x[i] = io::parse_double(tok[static_cast<std::size_t>(i + 2)]);
        by_group[g].push_back(std::move(x));
    }
    if (by_group.empty()) throw std::invalid_argument("samples csv: no samples");
    std::vector<Matrix> groups;
    for (auto& [g, xs] : by_group) {
        Matrix m(p, static_cast<Index>(xs.size()));
        for (std::size_t s = 0; s < xs.size(); ++s) m.col(static_cast<Index>(s)) = xs[s];
        groups.push_back(std::move(m));
    }
    return groups;
}

}  // namespace jcov
