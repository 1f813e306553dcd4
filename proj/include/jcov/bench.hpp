/**
 * Seeded Monte-Carlo experiment harness.
 *
 * Every trial draws its randomness from Philox substreams keyed by
 * (seed, trial, group), so the output depends only on the config and seed,
 * never on how many worker threads ran the trials. Within one trial all
 * estimators see the same measurement matrix.
 */
#pragma once

#include "jcov/config.hpp"
#include "jcov/crb.hpp"
#include "jcov/io.hpp"
#include "jcov/matspace.hpp"
#include "jcov/rng.hpp"
#include "jcov/sampling.hpp"
#include "jcov/structures.hpp"
#include "jcov/tsvd.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace jcov::bench {

enum class Experiment { mse_vs_n, thresholds, mse_vs_k, tracking };

inline std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::mse_vs_n: return "mse_vs_n";
        case Experiment::thresholds: return "thresholds";
        case Experiment::mse_vs_k: return "mse_vs_k";
        case Experiment::tracking: return "tracking";
    }
    return "unknown";
}

/// Accepts both `mse_vs_n` and `mse-vs-n` spellings.
inline Experiment parse_experiment(std::string s) {
    std::replace(s.begin(), s.end(), '-', '_');
    if (s == "mse_vs_n") return Experiment::mse_vs_n;
    if (s == "thresholds") return Experiment::thresholds;
    if (s == "mse_vs_k") return Experiment::mse_vs_k;
    if (s == "tracking") return Experiment::tracking;
    throw ConfigError("config: unknown experiment '" + s + "'");
}

namespace tag {
inline const std::string scm = "scm";
inline const std::string projection = "projection";
inline const std::string tsvd_known = "tsvd-known";
inline const std::string tsvd_alpha = "tsvd-alpha";
inline const std::string aoht_s = "aoht-s";
inline const std::string aoht_s_c = "aoht-s-c";
inline const std::string elbow_s = "elbow-s";
inline const std::string elbow_s_c = "elbow-s-c";
inline const std::string tsvd = "tsvd";
inline const std::string crb = "crb";
inline const std::string prediction = "prediction";
}  // namespace tag

enum class AlphaSource { formula, fixed };

struct ExperimentConfig {
    Experiment experiment = Experiment::mse_vs_n;
    /// Ambient dimension; complex dimension for tracking.
    Index p = 10;
    /// Number of groups; 0 means l = p(p+1)/2.
    Index K = 0;
    /// Known structure rank; -1 takes the scenario's rank.
    Index r = -1;
    /// Samples per group where n is not the swept variable.
    Index n = 100;
    std::vector<Index> n_grid{50, 100, 200, 500, 1000, 2000};
    std::vector<Index> K_grid{15, 25, 40, 55, 80, 120};
    Index trials = 200;
    std::uint64_t seed = 1;
    std::vector<std::string> estimators;
    AlphaSource alpha_source = AlphaSource::formula;
    double alpha = 0.9;
    double beta = 0.01;
    Index blocks = 100;
    std::string structure = "toeplitz";
    bool fix_scenario = false;
    unsigned jobs = 0;
    /// Keys that fell back to built-in defaults.
    std::vector<std::string> defaulted;

    static ExperimentConfig defaults(Experiment e) {
        ExperimentConfig c;
        c.experiment = e;
        switch (e) {
            case Experiment::mse_vs_n:
                c.estimators = {tag::scm, tag::projection, tag::tsvd_known, tag::tsvd_alpha};
                break;
            case Experiment::thresholds:
                c.estimators = {tag::tsvd_alpha, tag::aoht_s, tag::aoht_s_c, tag::elbow_s, tag::elbow_s_c};
                break;
            case Experiment::mse_vs_k:
                c.estimators = {tag::tsvd_known, tag::scm};
                break;
            case Experiment::tracking:
                c.p = 4;
                c.n = 30;
                c.blocks = 100;
                c.beta = 0.01;
                c.alpha_source = AlphaSource::fixed;
                c.alpha = 0.9;
                c.trials = 1000;
                c.structure = "proper";
                c.estimators = {tag::scm, tag::tsvd, tag::projection};
                break;
        }
        return c;
    }

    Index groups() const { return K > 0 ? K : half_dim(p); }

    void validate() const {
        auto strictly_increasing = [](const std::vector<Index>& g) {
            if (g.empty()) return false;
            for (std::size_t i = 1; i < g.size(); ++i)
                if (g[i] <= g[i - 1]) return false;
            return g.front() >= 1;
        };
        if (trials < 1) throw ConfigError("config: trials must be at least 1");
        if (trials >= (Index{1} << 24)) throw ConfigError("config: trials must be below 2^24");
        if (p < 2 && experiment != Experiment::tracking) throw ConfigError("config: p must be at least 2");
        if (p < 1) throw ConfigError("config: p must be positive");
        if (K < 0) throw ConfigError("config: K must be nonnegative");
        if (n < 1) throw ConfigError("config: n must be positive");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("config: alpha must lie in [0, 1]");
        if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("config: beta must lie in [0, 1]");
        if (estimators.empty()) throw ConfigError("config: no estimators");
        if (experiment == Experiment::mse_vs_n || experiment == Experiment::thresholds) {
            if (!strictly_increasing(n_grid)) throw ConfigError("config: n_grid must be nonempty and strictly increasing");
            if (n_grid.size() > 255) throw ConfigError("config: n_grid is too long");
        }
        if (experiment == Experiment::mse_vs_k) {
            if (!strictly_increasing(K_grid)) throw ConfigError("config: K_grid must be nonempty and strictly increasing");
            if (K_grid.front() < 2) throw ConfigError("config: K_grid values must be at least 2");
            if (K_grid.size() > 255) throw ConfigError("config: K_grid is too long");
        }
        if (experiment == Experiment::tracking && blocks < 1) throw ConfigError("config: blocks must be positive");
        const std::set<std::string> allowed = experiment == Experiment::tracking
                                                  ? std::set<std::string>{tag::scm, tag::tsvd, tag::projection}
                                                  : std::set<std::string>{tag::scm,      tag::projection, tag::tsvd_known,
                                                                          tag::tsvd_alpha, tag::aoht_s,   tag::aoht_s_c,
                                                                          tag::elbow_s,  tag::elbow_s_c};
        std::set<std::string> seen;
        for (const auto& e : estimators) {
            if (!allowed.count(e)) throw ConfigError("config: estimator '" + e + "' is not valid for " + to_string(experiment));
            if (!seen.insert(e).second) throw ConfigError("config: estimator '" + e + "' listed twice");
        }
    }
};

/**
 * Builds a config from key/values. `forced` (the CLI subcommand) wins over
 * an `experiment` key; a conflicting key is an error.
 */
inline ExperimentConfig parse_config(const KeyValues& kv, std::optional<Experiment> forced = std::nullopt) {
    Experiment e{};
    if (auto v = kv.get("experiment")) {
        e = parse_experiment(*v);
        if (forced && *forced != e)
            throw ConfigError("config: experiment '" + *v + "' does not match subcommand " + to_string(*forced));
    } else if (forced) {
        e = *forced;
    } else {
        throw ConfigError("config: missing 'experiment'");
    }
    ExperimentConfig c = ExperimentConfig::defaults(e);
    auto note_default = [&](const char* key) {
        if (!kv.has(key)) c.defaulted.emplace_back(key);
    };
    auto idx = [](long long v) { return static_cast<Index>(v); };
    if (auto v = kv.get_int("p")) c.p = idx(*v);
    if (auto v = kv.get_int("K")) c.K = idx(*v);
    if (auto v = kv.get_int("r")) c.r = idx(*v);
    if (auto v = kv.get_int("n")) c.n = idx(*v);
    if (auto v = kv.get_int("blocks")) c.blocks = idx(*v);
    if (auto v = kv.get_int_list("n_grid")) c.n_grid.assign(v->begin(), v->end());
    if (auto v = kv.get_int_list("K_grid")) c.K_grid.assign(v->begin(), v->end());
    if (auto v = kv.get_int("trials")) c.trials = idx(*v);
    if (auto v = kv.get_u64("seed")) c.seed = *v;
    if (auto v = kv.get_list("estimators")) c.estimators = *v;
    if (auto v = kv.get("alpha_source")) {
        if (*v == "formula") {
            c.alpha_source = AlphaSource::formula;
        } else if (*v == "fixed") {
            c.alpha_source = AlphaSource::fixed;
        } else {
            throw ConfigError("config: alpha_source must be 'formula' or 'fixed'");
        }
    }
    if (auto v = kv.get_double("alpha")) c.alpha = *v;
    if (auto v = kv.get_double("beta")) c.beta = *v;
    if (auto v = kv.get("structure")) c.structure = *v;
    if (auto v = kv.get_bool("fix_scenario")) c.fix_scenario = *v;
    if (auto v = kv.get_int("jobs")) {
        if (*v < 0) throw ConfigError("config: jobs must be nonnegative");
        c.jobs = static_cast<unsigned>(*v);
    }
    for (const char* key : {"trials", "seed"}) note_default(key);
    switch (e) {
        case Experiment::mse_vs_n:
        case Experiment::thresholds: note_default("n_grid"); break;
        case Experiment::mse_vs_k: note_default("K_grid"); break;
        case Experiment::tracking: break;
    }
    if (auto unknown = kv.unused(); !unknown.empty()) throw ConfigError("config: unknown key '" + unknown.front() + "'");
    return c;
}

struct MseRecord {
    std::string experiment;
    std::string estimator;
    Index grid = 0;
    double mse = 0.0;
    double stderr_ = 0.0;
    Index trials = 0;
};

struct RankCount {
    std::string experiment;
    std::string rule;
    Index grid = 0;
    Index rank = 0;
    Index count = 0;
};

struct BenchResult {
    std::vector<MseRecord> records;
    std::vector<RankCount> ranks;
    std::vector<std::string> warnings;
    nlohmann::json meta = nlohmann::json::object();

    const MseRecord* find(const std::string& estimator, Index grid) const {
        for (const auto& r : records)
            if (r.estimator == estimator && r.grid == grid) return &r;
        return nullptr;
    }
};

/// Runs body(i) for i in [0, count) on `jobs` threads (0 = hardware concurrency).
inline void parallel_for(Index count, unsigned jobs, const std::function<void(Index)>& body) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<Index>(jobs, std::max<Index>(count, 1)));
    if (jobs <= 1) {
        for (Index i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<Index> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (Index i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mu);
                    if (!failure) failure = std::current_exception();
                    next = count;
                }
            }
        });
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

/// Mean and standard error (sample sd / sqrt(T)) in fixed order.
inline std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
    const double t = static_cast<double>(xs.size());
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / t;
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (t - 1.0)) / std::sqrt(t)};
}

namespace detail {

/// Trial key: grid position in the high byte, trial index below.
constexpr std::uint64_t trial_key(std::size_t grid_index, Index trial) {
    return (static_cast<std::uint64_t>(grid_index) << 24) | static_cast<std::uint64_t>(trial);
}

inline Scenario draw_scenario(const ExperimentConfig& cfg, const SubspaceModel& structure, Index K,
                              std::uint64_t key) {
    auto eng = substream(cfg.seed, key, slot::scenario);
    if (structure.kind() == StructureKind::toeplitz) return toeplitz_scenario(cfg.p, K, cfg.seed, eng);
    return structured_scenario(structure, K, cfg.seed, eng);
}

inline double sq_error(const Matrix& a, const Matrix& b) { return (a - b).squaredNorm(); }

struct Outcome {
    std::vector<double> error;  // per estimator
    std::vector<Index> rank;    // per estimator, -1 when not rank based
    std::uint64_t rejections = 0;
};

/**
 * One trial of the Toeplitz-type experiments: draws SCMs for every group and
 * scores each estimator against Y.
 */
inline Outcome run_static_trial(const ExperimentConfig& cfg, const Scenario& sc, const SubspaceModel& structure,
                                Index n, std::uint64_t key) {
    const Index K = sc.K;
    std::vector<SymmetricMatrix> scms;
    scms.reserve(static_cast<std::size_t>(K));
    for (Index k = 0; k < K; ++k) {
        auto eng = substream(cfg.seed, key, static_cast<std::uint32_t>(k));
        scms.push_back(sample_scm(sc.covariances[static_cast<std::size_t>(k)], n, eng));
    }
    const auto s = MeasurementMatrix::from_scms(scms);
    const Matrix y = sc.measurement_matrix();
    const Index known_r = cfg.r >= 0 ? cfg.r : sc.model.r();
    const RankSpec alpha_rule =
        cfg.alpha_source == AlphaSource::fixed ? RankSpec::fixed_alpha(cfg.alpha) : RankSpec::estimated_alpha();

    Outcome out;
    out.rejections = sc.rejections;
    for (const auto& e : cfg.estimators) {
        Matrix yhat;
        Index rank = -1;
        auto run = [&](const RankSpec& spec) {
            const auto est = estimate(s, spec, n);
            yhat = est.yhat;
            rank = est.r_used;
        };
        if (e == tag::scm) {
            yhat = s.data();
        } else if (e == tag::projection) {
            yhat = structure.project_columns(s.data());
        } else if (e == tag::tsvd_known) {
            run(RankSpec::known(std::min(known_r, std::min(s.l(), s.K()))));
        } else if (e == tag::tsvd_alpha) {
            run(alpha_rule);
        } else if (e == tag::aoht_s) {
            run(RankSpec::of(RankRule::aoht));
        } else if (e == tag::aoht_s_c) {
            run(RankSpec::of(RankRule::aoht_centered));
        } else if (e == tag::elbow_s) {
            run(RankSpec::of(RankRule::elbow));
        } else if (e == tag::elbow_s_c) {
            run(RankSpec::of(RankRule::elbow_centered));
        } else {
            throw ConfigError("unknown estimator '" + e + "'");
        }
        out.error.push_back(sq_error(yhat, y));
        out.rank.push_back(rank);
    }
    return out;
}

/// Sweeps a grid with the static trial; divisor scales errors (K for marginal MSE).
inline BenchResult sweep(const ExperimentConfig& cfg, const std::vector<Index>& grid, bool grid_is_n,
                         const std::optional<Scenario>& fixed, bool collect_ranks, bool per_matrix) {
    const SubspaceModel structure = parse_structure(cfg.structure, cfg.p);
    if (cfg.experiment != Experiment::tracking && structure.p() != cfg.p)
        throw ConfigError("config: structure dimension does not match p");
    BenchResult res;
    const std::string exp = to_string(cfg.experiment);
    std::uint64_t rejections = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const Index n = grid_is_n ? grid[g] : cfg.n;
        const Index K = grid_is_n ? cfg.groups() : grid[g];
        std::optional<Scenario> grid_fixed = fixed;
        if (!grid_fixed && cfg.fix_scenario) grid_fixed = draw_scenario(cfg, structure, K, trial_key(grid_is_n ? 0 : g, 0));
        if (grid_fixed && grid_fixed->K != K) throw ConfigError("fixed scenario has the wrong number of groups");
        std::vector<Outcome> outcomes(static_cast<std::size_t>(cfg.trials));
        parallel_for(cfg.trials, cfg.jobs, [&](Index t) {
            // Scenario draws are keyed by trial only, so every grid point sees the same covariances.
            const Scenario sc = grid_fixed ? *grid_fixed : draw_scenario(cfg, structure, K, trial_key(grid_is_n ? 0 : g, t));
            outcomes[static_cast<std::size_t>(t)] = run_static_trial(cfg, sc, structure, n, trial_key(g + 1, t));
        });
        const double scale = per_matrix ? 1.0 / static_cast<double>(K) : 1.0;
        for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
            std::vector<double> errs;
            errs.reserve(outcomes.size());
            std::map<Index, Index> hist;
            for (const auto& o : outcomes) {
                errs.push_back(o.error[e] * scale);
                if (o.rank[e] >= 0) ++hist[o.rank[e]];
            }
            const auto [m, se] = mean_stderr(errs);
            res.records.push_back({exp, cfg.estimators[e], grid[g], m, se, cfg.trials});
            if (collect_ranks)
                for (const auto& [rank, count] : hist)
                    res.ranks.push_back({exp, cfg.estimators[e], grid[g], rank, count});
        }
        if (!grid_fixed)
            for (const auto& o : outcomes) rejections += o.rejections;
        else if (g == 0 || !grid_is_n)
            rejections += grid_fixed->rejections;
    }
    res.meta["scenario_rejections"] = rejections;
    return res;
}

inline void common_meta(const ExperimentConfig& cfg, BenchResult& res) {
    res.meta["experiment"] = to_string(cfg.experiment);
    res.meta["seed"] = cfg.seed;
    res.meta["trials"] = cfg.trials;
    res.meta["p"] = cfg.p;
    res.meta["structure"] = cfg.structure;
    res.meta["fix_scenario"] = cfg.fix_scenario;
    res.meta["estimators"] = cfg.estimators;
    res.meta["defaulted_keys"] = cfg.defaulted;
    if (std::find(cfg.defaulted.begin(), cfg.defaulted.end(), "trials") != cfg.defaulted.end())
        res.meta["note"] = "trial count is a built-in default, not a value taken from the reference experiments";
}

}  // namespace detail

/**
 * MSE of each estimator against n at K groups (default l). Appends the CRB
 * trace computed on the fixed scenario (or, with a warning, on the first
 * trial's scenario when scenarios are redrawn).
 */
inline BenchResult run_mse_vs_n(const ExperimentConfig& cfg, const std::optional<Scenario>& fixed = std::nullopt) {
    if (cfg.experiment != Experiment::mse_vs_n) throw ConfigError("run_mse_vs_n: wrong experiment");
    cfg.validate();
    BenchResult res = detail::sweep(cfg, cfg.n_grid, true, fixed, false, false);
    detail::common_meta(cfg, res);

    const SubspaceModel structure = parse_structure(cfg.structure, cfg.p);
    Scenario crb_scenario = fixed ? *fixed : detail::draw_scenario(cfg, structure, cfg.groups(), detail::trial_key(0, 0));
    if (!fixed && !cfg.fix_scenario)
        res.warnings.push_back("CRB overlay is computed on one scenario draw but the MSE averages over redrawn "
                               "scenarios; use --fix-scenario for a like-for-like comparison");
    try {
        const CrbReport rep = crb_report(crb_scenario.covariances, 1);
        for (const auto& w : rep.warnings) res.warnings.push_back("crb: " + w);
        for (Index n : cfg.n_grid)
            res.records.push_back({to_string(cfg.experiment), tag::crb, n, rep.trace_bound / static_cast<double>(n), 0.0, 0});
        res.meta["crb_rank"] = rep.r;
    } catch (const std::exception& e) {
        res.warnings.push_back(std::string("crb: skipped (") + e.what() + ")");
    }
    res.meta["warnings"] = res.warnings;
    return res;
}

/// Rank-rule comparison with the same sweep; also records r-hat histograms.
inline BenchResult run_thresholds(const ExperimentConfig& cfg, const std::optional<Scenario>& fixed = std::nullopt) {
    if (cfg.experiment != Experiment::thresholds) throw ConfigError("run_thresholds: wrong experiment");
    cfg.validate();
    BenchResult res = detail::sweep(cfg, cfg.n_grid, true, fixed, true, false);
    detail::common_meta(cfg, res);
    res.meta["warnings"] = res.warnings;
    return res;
}

/// Least-squares constant c minimizing sum (y - c x)^2 and the fit's R^2.
inline std::pair<double, double> fit_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
    double sxy = 0.0, sxx = 0.0, ybar = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
        ybar += y[i];
    }
    ybar /= static_cast<double>(y.size());
    const double c = sxy / sxx;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        ss_res += (y[i] - c * x[i]) * (y[i] - c * x[i]);
        ss_tot += (y[i] - ybar) * (y[i] - ybar);
    }
    return {c, ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0};
}

/**
 * Marginal MSE (MSE / K) against K at fixed n, with the prediction
 * c [(lr - r^2)/(Kn) + r/n] fitted to the TSVD-known curve (or the first
 * estimator when TSVD-known is absent).
 */
inline BenchResult run_mse_vs_k(const ExperimentConfig& cfg) {
    if (cfg.experiment != Experiment::mse_vs_k) throw ConfigError("run_mse_vs_k: wrong experiment");
    cfg.validate();
    BenchResult res = detail::sweep(cfg, cfg.K_grid, false, std::nullopt, false, true);
    detail::common_meta(cfg, res);

    const SubspaceModel structure = parse_structure(cfg.structure, cfg.p);
    const Index r = cfg.r >= 0 ? cfg.r
                               : (structure.kind() == StructureKind::toeplitz ? cfg.p - 1 : structure.r());
    const std::string target =
        std::find(cfg.estimators.begin(), cfg.estimators.end(), tag::tsvd_known) != cfg.estimators.end()
            ? tag::tsvd_known
            : cfg.estimators.front();
    std::vector<double> x, y;
    for (Index K : cfg.K_grid) {
        x.push_back(marginal_mse(half_dim(cfg.p), r, K, cfg.n));
        y.push_back(res.find(target, K)->mse);
    }
    const auto [c, r2] = fit_through_origin(x, y);
    for (std::size_t i = 0; i < x.size(); ++i)
        res.records.push_back({to_string(cfg.experiment), tag::prediction, cfg.K_grid[i], c * x[i], 0.0, 0});
    res.meta["fit"] = {{"target", target}, {"constant", c}, {"r_squared", r2}, {"r", r}, {"n", cfg.n}};
    res.meta["warnings"] = res.warnings;
    return res;
}

/**
 * Tracking of the normalized complex covariance process. Every n ticks the
 * real-embedded SCM joins a growing measurement matrix, TSVD runs on it, and
 * the newest column of each estimator is scored against real_embed(H) at the
 * block's last tick.
 */
inline BenchResult run_tracking(const ExperimentConfig& cfg) {
    if (cfg.experiment != Experiment::tracking) throw ConfigError("run_tracking: wrong experiment");
    cfg.validate();
    const Index pc = cfg.p;
    const Index pr = 2 * pc;
    const Index l = half_dim(pr);
    const Index blocks = cfg.blocks;
    const SubspaceModel proper = proper_complex_model(pr);
    const RankSpec rule =
        cfg.alpha_source == AlphaSource::fixed ? RankSpec::fixed_alpha(cfg.alpha) : RankSpec::estimated_alpha();
    const std::size_t ne = cfg.estimators.size();

    // errors[t][e * blocks + b]
    std::vector<std::vector<double>> errors(static_cast<std::size_t>(cfg.trials));
    parallel_for(cfg.trials, cfg.jobs, [&](Index t) {
        auto eng = substream(cfg.seed, static_cast<std::uint64_t>(t), slot::dgp);
        DgpState state = dgp_initial(pc, cfg.beta);
        Matrix s(l, blocks);
        Matrix x(pr, cfg.n);
        auto& err = errors[static_cast<std::size_t>(t)];
        err.assign(ne * static_cast<std::size_t>(blocks), 0.0);
        for (Index b = 0; b < blocks; ++b) {
            for (Index i = 0; i < cfg.n; ++i) {
                state = dgp_step(state, eng);
                x.col(i) = real_samples(sample_complex_with_root(hermitian_sqrt(state.h), 1, eng));
            }
            s.col(b) = vech(scm(x)).values();
            const Vector target = vech(real_embed(state.h)).values();
            for (std::size_t e = 0; e < ne; ++e) {
                const auto& name = cfg.estimators[e];
                Vector est;
                if (name == tag::scm) {
                    est = s.col(b);
                } else if (name == tag::projection) {
                    est = proper.project_vech(s.col(b));
                } else {
                    const auto fit = estimate(MeasurementMatrix(s.leftCols(b + 1)), rule, cfg.n);
                    est = fit.yhat.col(b);
                }
                err[e * static_cast<std::size_t>(blocks) + static_cast<std::size_t>(b)] = (est - target).squaredNorm();
            }
        }
    });

    BenchResult res;
    detail::common_meta(cfg, res);
    res.meta["n"] = cfg.n;
    res.meta["beta"] = cfg.beta;
    res.meta["blocks"] = blocks;
    res.meta["alpha"] = cfg.alpha_source == AlphaSource::fixed ? nlohmann::json(cfg.alpha) : nlohmann::json("formula");
    for (std::size_t e = 0; e < ne; ++e)
        for (Index b = 0; b < blocks; ++b) {
            std::vector<double> xs;
            xs.reserve(errors.size());
            for (const auto& err : errors) xs.push_back(err[e * static_cast<std::size_t>(blocks) + static_cast<std::size_t>(b)]);
            const auto [m, se] = mean_stderr(xs);
            res.records.push_back({to_string(cfg.experiment), cfg.estimators[e], b + 1, m, se, cfg.trials});
        }
    res.meta["warnings"] = res.warnings;
    return res;
}

inline BenchResult run(const ExperimentConfig& cfg) {
    switch (cfg.experiment) {
        case Experiment::mse_vs_n: return run_mse_vs_n(cfg);
        case Experiment::thresholds: return run_thresholds(cfg);
        case Experiment::mse_vs_k: return run_mse_vs_k(cfg);
        case Experiment::tracking: return run_tracking(cfg);
    }
    throw ConfigError("unknown experiment");
}

/// Header plus rows sorted by (estimator, grid).
inline void emit_csv(std::vector<MseRecord> records, std::ostream& out) {
    if (records.empty()) throw std::invalid_argument("emit_csv: no records");
    std::stable_sort(records.begin(), records.end(), [](const MseRecord& a, const MseRecord& b) {
        return std::tie(a.estimator, a.grid) < std::tie(b.estimator, b.grid);
    });
    out << "experiment,estimator,grid,mse,stderr,trials\n";
    for (const auto& r : records)
        out << r.experiment << ',' << r.estimator << ',' << r.grid << ',' << io::format_double(r.mse) << ','
            << io::format_double(r.stderr_) << ',' << r.trials << '\n';
}

inline void emit_csv(const std::vector<MseRecord>& records, const std::string& path) {
    if (records.empty()) throw std::invalid_argument("emit_csv: no records");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_csv: cannot write '" + path + "'");
    emit_csv(records, out);
    if (!out) throw std::runtime_error("emit_csv: write to '" + path + "' failed");
}

/// Header `experiment,rule,grid,rank,count`.
inline void emit_rank_csv(const std::vector<RankCount>& ranks, const std::string& path) {
    if (ranks.empty()) throw std::invalid_argument("emit_rank_csv: no histogram entries");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_rank_csv: cannot write '" + path + "'");
    out << "experiment,rule,grid,rank,count\n";
    for (const auto& r : ranks) out << r.experiment << ',' << r.rule << ',' << r.grid << ',' << r.rank << ',' << r.count << '\n';
}

}  // namespace jcov::bench
