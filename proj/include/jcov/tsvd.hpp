/**
 * Truncated-SVD joint covariance estimator.
 *
 * The K vech'd SCMs form an l x K measurement matrix S. Its column mean is
 * removed, the centered matrix is truncated to rank r by SVD and the mean is
 * added back. r is either given or chosen by one of the rank rules below.
 */
#pragma once

#include "jcov/aoht.hpp"
#include "jcov/matspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jcov {

/// l x K matrix whose columns are vech(S_k).
class MeasurementMatrix {
public:
    MeasurementMatrix() = default;

    explicit MeasurementMatrix(Matrix data) : data_(std::move(data)) {
        p_ = dim_from_half(data_.rows());
        if (p_ < 1) throw std::invalid_argument("MeasurementMatrix: row count is not a triangular number");
        if (data_.cols() < 1) throw std::invalid_argument("MeasurementMatrix: no columns");
        if (!data_.allFinite()) throw std::invalid_argument("MeasurementMatrix: non-finite entries");
    }

    static MeasurementMatrix from_scms(std::span<const SymmetricMatrix> scms) {
        if (scms.empty()) throw std::invalid_argument("MeasurementMatrix: no SCMs");
        const Index p = scms.front().dim();
        Matrix d(half_dim(p), static_cast<Index>(scms.size()));
        for (std::size_t k = 0; k < scms.size(); ++k) {
            if (scms[k].dim() != p) throw std::invalid_argument("MeasurementMatrix: SCM dimensions differ");
            d.col(static_cast<Index>(k)) = vech(scms[k]).values();
        }
        return MeasurementMatrix(std::move(d));
    }

    Index p() const noexcept { return p_; }
    Index l() const noexcept { return data_.rows(); }
    Index K() const noexcept { return data_.cols(); }
    const Matrix& data() const noexcept { return data_; }

    SymmetricMatrix column_matrix(Index k) const { return mat(Vector(data_.col(k))); }

private:
    Index p_ = 0;
    Matrix data_;
};

struct Centered {
    Matrix sprime;
    Vector u0hat;
};

/// Subtracts the column mean.
inline Centered center(const Matrix& s) {
    if (s.cols() < 1) throw std::invalid_argument("center: no columns");
    Centered c;
    c.u0hat = s.rowwise().mean();
    c.sprime = s.colwise() - c.u0hat;
    return c;
}

namespace detail {

inline Matrix truncate_from_svd(const Svd& d, Index rows, Index cols, Index r) {
    if (r == 0) return Matrix::Zero(rows, cols);
    return d.u.leftCols(r) * d.sigma.head(r).asDiagonal() * d.w.leftCols(r).transpose();
}

}  // namespace detail

/// Best rank-r approximation in Frobenius norm; r = 0 gives the zero matrix.
inline Matrix truncate(const Matrix& m, Index r) {
    if (r < 0 || r > std::min(m.rows(), m.cols()))
        throw std::invalid_argument("truncate: rank " + std::to_string(r) + " outside [0, min(l, K)]");
    if (r == 0) return Matrix::Zero(m.rows(), m.cols());
    return detail::truncate_from_svd(svd(m), m.rows(), m.cols(), r);
}

/// p ||S||_F^2 / (Tr S)^2, in [1, p] for PSD S.
inline double sphericity(const SymmetricMatrix& s) {
    const double tr = s.trace();
    if (tr == 0.0) throw std::domain_error("sphericity: zero trace");
    return static_cast<double>(s.dim()) * s.frobenius_sq() / (tr * tr);
}

/**
 * Estimated fraction of measurement energy carried by the signal,
 * 1 - (1/n) sum_k (Tr S_k)^2 / sum_k ||S_k||_F^2, clamped to [0, 1].
 */
inline double alpha_ratio(std::span<const SymmetricMatrix> scms, Index n) {
    if (n < 1) throw std::invalid_argument("alpha_ratio: n must be positive");
    double tr2 = 0.0, fro2 = 0.0;
    for (const auto& s : scms) {
        tr2 += s.trace() * s.trace();
        fro2 += s.frobenius_sq();
    }
    if (fro2 == 0.0) throw std::domain_error("alpha_ratio: all SCMs are zero");
    return std::clamp(1.0 - tr2 / (static_cast<double>(n) * fro2), 0.0, 1.0);
}

inline double alpha_ratio(const MeasurementMatrix& s, Index n) {
    std::vector<SymmetricMatrix> scms;
    scms.reserve(static_cast<std::size_t>(s.K()));
    for (Index k = 0; k < s.K(); ++k) scms.push_back(s.column_matrix(k));
    return alpha_ratio(scms, n);
}

/**
 * argmin over L of |sum_{i<=L} sigma_i^2 - alpha sum_i sigma_i^2|.
 * Objectives within 64 eps of the total energy count as ties; the smaller
 * L wins.
 */
inline Index rank_select_alpha_sigma(const Vector& sigma, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("rank_select_alpha: alpha must lie in [0, 1]");
    const double total = sigma.squaredNorm();
    const double target = alpha * total;
    const double tie = 64.0 * std::numeric_limits<double>::epsilon() * total;
    Index best = 0;
    double best_obj = std::abs(target);
    double cum = 0.0;
    for (Index l = 1; l <= sigma.size(); ++l) {
        cum += sigma[l - 1] * sigma[l - 1];
        const double obj = std::abs(cum - target);
        if (obj < best_obj - tie) {
            best_obj = obj;
            best = l;
        }
    }
    return best;
}

inline Index rank_select_alpha(const Matrix& s, double alpha) { return rank_select_alpha_sigma(singular_values(s), alpha); }

/// Position of the largest gap sigma_i - sigma_{i+1}; first occurrence wins.
inline Index rank_select_elbow_sigma(const Vector& sigma) {
    if (sigma.size() < 2) throw std::invalid_argument("rank_select_elbow: need at least two singular values");
    Index best = 1;
    double gap = sigma[0] - sigma[1];
    for (Index i = 1; i + 1 < sigma.size(); ++i)
        if (sigma[i] - sigma[i + 1] > gap) {
            gap = sigma[i] - sigma[i + 1];
            best = i + 1;
        }
    return best;
}

inline Index rank_select_elbow(const Matrix& m) { return rank_select_elbow_sigma(singular_values(m)); }

inline double median(Vector v) {
    if (v.size() == 0) throw std::invalid_argument("median: empty input");
    std::sort(v.data(), v.data() + v.size());
    const Index mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// Threshold omega(beta) * median(sigma) for an l x K matrix.
inline double aoht_threshold(const Vector& sigma, Index rows, Index cols) {
    return aoht::omega(aoht::aspect_ratio(rows, cols)) * median(sigma);
}

/// Count of singular values strictly above the AOHT threshold.
inline Index rank_select_aoht_sigma(const Vector& sigma, Index rows, Index cols) {
    const double tau = aoht_threshold(sigma, rows, cols);
    Index r = 0;
    for (Index i = 0; i < sigma.size(); ++i)
        if (sigma[i] > tau) ++r;
    return r;
}

inline Index rank_select_aoht(const Matrix& m) {
    return rank_select_aoht_sigma(singular_values(m), m.rows(), m.cols());
}

enum class RankRule { known, alpha, fixed_alpha, aoht, aoht_centered, elbow, elbow_centered };

inline std::string to_string(RankRule r) {
    switch (r) {
        case RankRule::known: return "known";
        case RankRule::alpha: return "alpha";
        case RankRule::fixed_alpha: return "fixed-alpha";
        case RankRule::aoht: return "aoht";
        case RankRule::aoht_centered: return "aoht-c";
        case RankRule::elbow: return "elbow";
        case RankRule::elbow_centered: return "elbow-c";
    }
    return "unknown";
}

/// A rank rule plus its parameter (known r or fixed alpha).
struct RankSpec {
    RankRule rule = RankRule::alpha;
    Index known_r = -1;
    double alpha = std::numeric_limits<double>::quiet_NaN();

    static RankSpec known(Index r) { return {RankRule::known, r, std::numeric_limits<double>::quiet_NaN()}; }
    static RankSpec estimated_alpha() { return {RankRule::alpha, -1, std::numeric_limits<double>::quiet_NaN()}; }
    static RankSpec fixed_alpha(double a) { return {RankRule::fixed_alpha, -1, a}; }
    static RankSpec of(RankRule rule) { return {rule, -1, std::numeric_limits<double>::quiet_NaN()}; }

    /// `known:R | alpha | alpha:A | aoht | aoht-c | elbow | elbow-c`.
    static RankSpec parse(const std::string& s) {
        const auto colon = s.find(':');
        const std::string head = s.substr(0, colon);
        const std::string arg = colon == std::string::npos ? std::string{} : s.substr(colon + 1);
        auto need_no_arg = [&] {
            if (colon != std::string::npos) throw std::invalid_argument("rank: '" + head + "' takes no argument");
        };
        if (head == "known") {
            if (arg.empty()) throw std::invalid_argument("rank: known requires a rank, e.g. known:9");
            std::size_t used = 0;
            long r = -1;
            try {
                r = std::stol(arg, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != arg.size() || r < 0) throw std::invalid_argument("rank: bad known rank '" + arg + "'");
            return known(r);
        }
        if (head == "alpha") {
            if (arg.empty()) return estimated_alpha();
            std::size_t used = 0;
            double a = -1.0;
            try {
                a = std::stod(arg, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != arg.size() || !(a >= 0.0 && a <= 1.0))
                throw std::invalid_argument("rank: bad alpha '" + arg + "'");
            return fixed_alpha(a);
        }
        if (head == "aoht") return need_no_arg(), of(RankRule::aoht);
        if (head == "aoht-c") return need_no_arg(), of(RankRule::aoht_centered);
        if (head == "elbow") return need_no_arg(), of(RankRule::elbow);
        if (head == "elbow-c") return need_no_arg(), of(RankRule::elbow_centered);
        throw std::invalid_argument("rank: unknown rule '" + s + "'");
    }
};

struct TsvdEstimate {
    Matrix yhat;
    Vector u0hat;
    Index r_used = 0;
    /// Rank proposed by the rule before clamping to [0, min(l, K)].
    Index r_raw = 0;
    /// Singular values of the centered matrix.
    Vector sigma;
    RankRule rule = RankRule::known;
    /// Energy fraction used by alpha rules, NaN otherwise.
    double alpha = std::numeric_limits<double>::quiet_NaN();
};

/// Clips negative eigenvalues of each mat(column) to zero.
inline Matrix psd_clip_columns(const Matrix& y) {
    Matrix out(y.rows(), y.cols());
    for (Index k = 0; k < y.cols(); ++k) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(mat_dense(y.col(k)));
        const Vector lam = es.eigenvalues().cwiseMax(0.0);
        out.col(k) = vech_lower(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
    }
    return out;
}

/**
 * Chooses r with the rule, truncates the centered matrix and adds the mean
 * back. n (samples per group) is needed only by the estimated-alpha rule.
 */
inline TsvdEstimate estimate(const MeasurementMatrix& s, const RankSpec& spec, Index n, bool psd_clip = false) {
    const Centered c = center(s.data());
    const Svd d = svd(c.sprime);
    TsvdEstimate est;
    est.u0hat = c.u0hat;
    est.sigma = d.sigma;
    est.rule = spec.rule;
    const Index max_r = std::min(s.l(), s.K());
    switch (spec.rule) {
        case RankRule::known:
            if (spec.known_r < 0 || spec.known_r > max_r)
                throw std::invalid_argument("estimate: known rank " + std::to_string(spec.known_r) +
                                            " outside [0, min(l, K)]");
            est.r_raw = spec.known_r;
            break;
        case RankRule::alpha:
            est.alpha = alpha_ratio(s, n);
            est.r_raw = rank_select_alpha(s.data(), est.alpha);
            break;
        case RankRule::fixed_alpha:
            est.alpha = spec.alpha;
            est.r_raw = rank_select_alpha(s.data(), est.alpha);
            break;
        case RankRule::aoht: est.r_raw = rank_select_aoht(s.data()); break;
        case RankRule::aoht_centered: est.r_raw = rank_select_aoht_sigma(d.sigma, s.l(), s.K()); break;
        case RankRule::elbow: est.r_raw = rank_select_elbow(s.data()); break;
        case RankRule::elbow_centered: est.r_raw = rank_select_elbow_sigma(d.sigma); break;
    }
    est.r_used = std::clamp<Index>(est.r_raw, 0, max_r);
    est.yhat = detail::truncate_from_svd(d, s.l(), s.K(), std::min(est.r_used, d.sigma.size()));
    est.yhat.colwise() += c.u0hat;
    if (psd_clip) est.yhat = psd_clip_columns(est.yhat);
    return est;
}

}  // namespace jcov
