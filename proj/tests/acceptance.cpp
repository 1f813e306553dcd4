// Acceptance suite: one PASS/FAIL line per criterion.
//
//   jcov_acceptance [--only NAME] [--cli PATH]
//
// Exit status is nonzero when any selected criterion fails. Tolerances are
// fixed below and never adjusted at run time.

#include "jcov/bench.hpp"
#include "jcov/crb.hpp"
#include "jcov/sampling.hpp"
#include "jcov/tsvd.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace jcov;

namespace {

// ---- pinned tolerances -------------------------------------------------------
constexpr double kCrbIdentityRelTol = 1e-8;
constexpr double kSandwichRelTol = 1e-8;
constexpr double kEckartYoungRelTol = 1e-12;
constexpr double kRecoveryTol = 1e-9;
constexpr double kPowerSigmas = 3.0;
constexpr double kSphericityTol = 0.05;
constexpr double kTrendSigmas = 2.0;
constexpr double kMseVsKMinR2 = 0.9;
constexpr Index kBenchTrials = 200;
constexpr Index kTrackingTrials = 1000;
constexpr std::uint64_t kSeed = 20240601;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(5);
    os << v;
    return os.str();
}

Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = z(rng);
    return m;
}

double pooled(double a, double b) { return std::sqrt(a * a + b * b); }

// ---- algebraic criteria ------------------------------------------------------

Verdict jacobian_rank_exact() {
    std::mt19937_64 rng(kSeed);
    int cases = 0, bad = 0;
    for (Index p : {2, 3, 4}) {
        const Index l = half_dim(p);
        for (Index r = 1; r <= l; ++r)
            for (Index K : {r, r + 3, 2 * l}) {
                if (r > std::min(l, K)) continue;
                const FactorPair fp{gaussian(l, r, rng), gaussian(r, K, rng)};
                ++cases;
                bad += numeric_rank(jacobian(fp)) != jacobian_rank(l, r, K);
            }
    }
    return {bad == 0, std::to_string(cases) + " (p,r,K) cases, " + std::to_string(bad) + " mismatches"};
}

Verdict crb_identity() {
    double worst = 0.0;
    int cases = 0;
    for (Index p : {2, 3, 4, 6})
        for (Index K : {1, 5, 21})
            for (Index n : {10, 100}) {
                const Index l = half_dim(p);
                FactorPair fp;
                fp.u = vech(SymmetricMatrix::identity(p)).values() * 0.5;
                fp.z = Matrix::Constant(1, K, 2.0);
                const std::vector<SymmetricMatrix> qs(static_cast<std::size_t>(K), SymmetricMatrix::identity(p));
                const double expect = 2.0 * static_cast<double>(l + K - 1) / static_cast<double>(n);
                worst = std::max(worst, std::abs(crb_trace(fp, qs, n) - expect) / expect);
                ++cases;
            }
    return {worst <= kCrbIdentityRelTol, std::to_string(cases) + " cases, max rel err " + fmt(worst)};
}

Verdict crb_sandwich() {
    int violations = 0, scenarios = 0;
    const std::vector<std::string> structures{"toeplitz", "diagonal", "banded:1", "circulant", "proper"};
    for (int i = 0; i < 50; ++i) {
        const Index p = i % 2 == 0 ? 4 : 3;
        const std::string st = structures[static_cast<std::size_t>(i) % structures.size()];
        if (st == "proper" && p % 2) continue;
        const Index K = 3 + i % 7;
        auto eng = substream(kSeed, static_cast<std::uint64_t>(i), slot::scenario);
        const auto sc = st == "toeplitz" ? toeplitz_scenario(p, K, kSeed, eng)
                                         : structured_scenario(parse_structure(st, p), K, kSeed, eng);
        const auto rep = crb_report(sc.covariances, 1 + i % 50);
        ++scenarios;
        if (rep.trace_bound < rep.floor * (1 - kSandwichRelTol) || rep.trace_bound > rep.ceiling * (1 + kSandwichRelTol))
            ++violations;
    }
    // Fill up to 50 with generic Toeplitz draws where proper was skipped.
    for (int i = 0; scenarios < 50; ++i) {
        auto eng = substream(kSeed, 1000 + static_cast<std::uint64_t>(i), slot::scenario);
        const auto sc = toeplitz_scenario(5, 6, kSeed, eng);
        const auto rep = crb_report(sc.covariances, 7);
        ++scenarios;
        if (rep.trace_bound < rep.floor * (1 - kSandwichRelTol) || rep.trace_bound > rep.ceiling * (1 + kSandwichRelTol))
            ++violations;
    }
    return {violations == 0, std::to_string(scenarios) + " scenarios, " + std::to_string(violations) + " violations"};
}

Verdict eckart_young() {
    std::mt19937_64 rng(kSeed + 1);
    std::normal_distribution<double> z;
    int violations = 0;
    for (int inst = 0; inst < 50; ++inst) {
        const Matrix m = gaussian(8, 12, rng);
        const Index r = 1 + inst % 7;
        const Matrix best = truncate(m, r);
        const double e = (best - m).norm();
        const Svd d = svd(best);
        for (int c = 0; c < 200; ++c) {
            Matrix comp;
            if (c % 2 == 0) {
                comp = gaussian(8, r, rng) * gaussian(r, 12, rng);
            } else {
                // Small perturbations of the optimum's factors stay rank r.
                const double eps = std::pow(10.0, -1.0 - (c % 6));
                const Matrix u = d.u.leftCols(r) * d.sigma.head(r).asDiagonal() + eps * gaussian(8, r, rng);
                const Matrix w = d.w.leftCols(r) + eps * gaussian(12, r, rng);
                comp = u * w.transpose();
            }
            if ((comp - m).norm() < e * (1 - kEckartYoungRelTol)) ++violations;
        }
    }
    return {violations == 0, "50 instances x 200 competitors, " + std::to_string(violations) + " violations"};
}

Verdict exact_recovery() {
    std::mt19937_64 rng(kSeed + 2);
    double worst = 0.0;
    int cases = 0;
    // 8 x 12 through the centering/truncation core ...
    for (Index r = 0; r <= 7; ++r) {
        const Matrix low = r ? Matrix(gaussian(8, r, rng) * gaussian(r, 12, rng)) : Matrix::Zero(8, 12);
        const Matrix y = (low.colwise() - low.rowwise().mean()).colwise() + gaussian(8, 1, rng).col(0);
        const Centered c = center(y);
        const Matrix yhat = truncate(c.sprime, r).colwise() + c.u0hat;
        worst = std::max(worst, (yhat - y).norm());
        ++cases;
    }
    // ... and through the full estimator on l = 10 (p = 4), K = 12.
    for (Index r = 0; r <= 9; ++r) {
        const Matrix low = r ? Matrix(gaussian(10, r, rng) * gaussian(r, 12, rng)) : Matrix::Zero(10, 12);
        const Matrix y = (low.colwise() - low.rowwise().mean()).colwise() + gaussian(10, 1, rng).col(0);
        const auto est = estimate(MeasurementMatrix(y), RankSpec::known(r), 100);
        worst = std::max(worst, (est.yhat - y).norm());
        ++cases;
    }
    return {worst <= kRecoveryTol, std::to_string(cases) + " ranks, max Frobenius err " + fmt(worst)};
}

// ---- Monte-Carlo identities --------------------------------------------------

Verdict power_identity() {
    const Index p = 10, n = 100, draws = 10000;
    std::vector<SymmetricMatrix> qs{SymmetricMatrix::identity(p)};
    std::mt19937_64 rng(kSeed + 3);
    for (int i = 0; i < 5; ++i) {
        const Matrix a = gaussian(p, p, rng);
        qs.push_back(SymmetricMatrix::symmetrize(a * a.transpose() / static_cast<double>(p) + 0.2 * Matrix::Identity(p, p)));
    }
    double worst = 0.0;
    for (std::size_t qi = 0; qi < qs.size(); ++qi) {
        const auto& q = qs[qi];
        std::vector<double> v;
        v.reserve(draws);
        for (Index t = 0; t < draws; ++t) {
            auto eng = substream(kSeed, static_cast<std::uint64_t>(t), static_cast<std::uint32_t>(qi));
            v.push_back(scm(sample_gaussian(q, n, eng)).frobenius_sq());
        }
        const auto [mean, se] = bench::mean_stderr(v);
        const double nn = static_cast<double>(n);
        const double expect = (nn + 1.0) / nn * q.frobenius_sq() + q.trace() * q.trace() / nn;
        worst = std::max(worst, std::abs(mean - expect) / se);
    }
    return {worst <= kPowerSigmas, "6 covariances, worst deviation " + fmt(worst) + " stderr"};
}

Verdict sphericity_consistency() {
    const Index p = 10, n = 10, draws = 10000;
    const auto q = SymmetricMatrix::identity(p);
    std::vector<double> v;
    for (Index t = 0; t < draws; ++t) {
        auto eng = substream(kSeed + 4, static_cast<std::uint64_t>(t), 0);
        v.push_back(sphericity(scm(sample_gaussian(q, n, eng))) - static_cast<double>(p) / static_cast<double>(n));
    }
    const auto [mean, se] = bench::mean_stderr(v);
    const double target = sphericity(q);
    return {std::abs(mean - target) <= kSphericityTol,
            "mean " + fmt(mean) + " +- " + fmt(se) + " vs rho(Q) = " + fmt(target) + ", |diff| " + fmt(std::abs(mean - target))};
}

// ---- figure trends -----------------------------------------------------------

bench::ExperimentConfig base(bench::Experiment e) {
    auto c = bench::ExperimentConfig::defaults(e);
    c.p = 10;
    c.trials = kBenchTrials;
    c.seed = kSeed;
    c.jobs = 0;
    return c;
}

Verdict mse_vs_n_trend() {
    auto c = base(bench::Experiment::mse_vs_n);
    c.fix_scenario = true;
    const auto res = bench::run_mse_vs_n(c);
    std::ostringstream why;
    bool ok = true;
    const std::vector<std::string> chain{bench::tag::projection, bench::tag::tsvd_known, bench::tag::tsvd_alpha,
                                         bench::tag::scm};
    for (Index n : c.n_grid) {
        if (n < 100) continue;
        for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
            const auto* a = res.find(chain[i], n);
            const auto* b = res.find(chain[i + 1], n);
            const double gap = b->mse - a->mse;
            if (gap <= kTrendSigmas * pooled(a->stderr_, b->stderr_)) {
                ok = false;
                why << " n=" << n << ":" << chain[i] << "!<" << chain[i + 1] << "(" << fmt(a->mse) << " vs " << fmt(b->mse) << ")";
            }
        }
        const auto* s = res.find(bench::tag::scm, n);
        const auto* crb = res.find(bench::tag::crb, n);
        if (s->mse < crb->mse) {
            ok = false;
            why << " n=" << n << ":scm<crb";
        }
    }
    const auto* s100 = res.find(bench::tag::scm, 100);
    return {ok, ok ? "ordering holds for n>=100; n=100 scm " + fmt(s100->mse) + " crb " + fmt(res.find(bench::tag::crb, 100)->mse)
                   : "violations:" + why.str()};
}

Verdict thresholds_trend() {
    const auto c = base(bench::Experiment::thresholds);
    const auto res = bench::run_thresholds(c);
    bool ok = true;
    std::ostringstream why;
    for (Index n : c.n_grid) {
        if (n > 200) continue;
        const auto* a = res.find(bench::tag::tsvd_alpha, n);
        const auto* s = res.find(bench::tag::aoht_s, n);
        const auto* sc = res.find(bench::tag::aoht_s_c, n);
        const auto* best = s->mse <= sc->mse ? s : sc;
        const bool pass = best->mse - a->mse > kTrendSigmas * pooled(a->stderr_, best->stderr_);
        ok = ok && pass;
        why << " n=" << n << ": alpha " << fmt(a->mse) << " vs " << best->estimator << " " << fmt(best->mse)
            << (pass ? "" : " (not better)");
    }
    return {ok, why.str().substr(1)};
}

Verdict mse_vs_k_trend() {
    auto c = base(bench::Experiment::mse_vs_k);
    c.n = 100;
    const auto res = bench::run_mse_vs_k(c);
    bool decreasing = true;
    for (std::size_t i = 1; i < c.K_grid.size(); ++i)
        decreasing = decreasing &&
                     res.find(bench::tag::tsvd_known, c.K_grid[i])->mse < res.find(bench::tag::tsvd_known, c.K_grid[i - 1])->mse;
    const double r2 = res.meta["fit"]["r_squared"].get<double>();
    return {decreasing && r2 >= kMseVsKMinR2,
            std::string(decreasing ? "strictly decreasing" : "NOT decreasing") + ", R^2 " + fmt(r2) + ", c " +
                fmt(res.meta["fit"]["constant"].get<double>())};
}

Verdict tracking_trend() {
    auto c = bench::ExperimentConfig::defaults(bench::Experiment::tracking);
    c.trials = kTrackingTrials;
    c.seed = kSeed;
    c.jobs = 0;
    const auto res = bench::run_tracking(c);
    const Index q = c.blocks / 4;
    auto quarter = [&](const std::string& est, Index first) {
        double m = 0.0, se = 0.0;
        for (Index b = first; b < first + q; ++b) {
            const auto* r = res.find(est, b);
            m += r->mse;
            se += r->stderr_;  // upper bound: blocks within a trial are positively correlated
        }
        return std::pair{m / static_cast<double>(q), se / static_cast<double>(q)};
    };
    const auto [t1, t1se] = quarter(bench::tag::tsvd, 1);
    const auto [t4, t4se] = quarter(bench::tag::tsvd, c.blocks - q + 1);
    const auto [s4, s4se] = quarter(bench::tag::scm, c.blocks - q + 1);
    const bool below = s4 - t4 > kTrendSigmas * pooled(t4se, s4se);
    const bool falls = t4 < t1;
    return {below && falls, "TSVD q1 " + fmt(t1) + " -> q4 " + fmt(t4) + ", SCM q4 " + fmt(s4) +
                                (below ? "" : " (not below SCM)") + (falls ? "" : " (not decreasing)")};
}

// ---- CLI determinism ---------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Verdict determinism(const std::string& cli) {
    if (cli.empty() || !std::filesystem::exists(cli)) return {false, "CLI binary not found (pass --cli)"};
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "jcov_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream(dir / "scenario.ini") << "p = 5\nK = 9\nn = 40\nstructure = toeplitz\nseed = 5\n";
        std::ofstream(dir / "mse_vs_n.ini") << "p = 5\nn_grid = 30, 90\ntrials = 12\nseed = 9\n";
        std::ofstream(dir / "thresholds.ini") << "p = 5\nn_grid = 30, 90\ntrials = 12\nseed = 9\n";
        std::ofstream(dir / "mse_vs_k.ini") << "p = 5\nn = 40\nK_grid = 6, 12\ntrials = 12\nseed = 9\n";
        std::ofstream(dir / "tracking.ini") << "blocks = 8\ntrials = 12\nseed = 9\n";
    }
    const std::string d = dir.string();
    auto run = [&](const std::string& args, const std::string& tag) {
        const std::string cmd = "\"" + cli + "\" " + args + " > \"" + d + "/" + tag + ".stdout\" 2> \"" + d + "/" + tag + ".stderr\"";
        return std::system(cmd.c_str());
    };
    std::vector<std::string> produced;
    int failures = 0;
    for (const std::string variant : {"a", "b", "c"}) {
        const std::string jobs = variant == "c" ? "4" : "1";
        const std::string v = d + "/" + variant;
        failures += run("sample --config " + d + "/scenario.ini --out " + v + "_samples.csv", variant + "_sample") != 0;
        failures += run("estimate --input " + v + "_samples.csv --rank alpha --out " + v + "_est.csv", variant + "_est") != 0;
        failures += run("crb --scenario " + d + "/scenario.ini --n 40", variant + "_crb") != 0;
        for (const std::string e : {"mse-vs-n", "thresholds", "mse-vs-k", "tracking"}) {
            std::string ini = e;
            std::replace(ini.begin(), ini.end(), '-', '_');
            failures += run("bench " + e + " --config " + d + "/" + ini + ".ini --jobs " + jobs + " --out " + v + "_" + ini + ".csv",
                            variant + "_" + ini) != 0;
        }
    }
    if (failures) return {false, std::to_string(failures) + " CLI runs exited nonzero"};
    int compared = 0, differ = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("a_", 0) != 0) continue;
        for (const std::string other : {"b_", "c_"}) {
            const fs::path twin = dir / (other + name.substr(2));
            ++compared;
            if (!fs::exists(twin) || slurp(entry.path()) != slurp(twin)) {
                ++differ;
                produced.push_back(name);
            }
        }
    }
    // The estimate input differs only if sampling differs, so it is covered above.
    std::string detail = std::to_string(compared) + " file pairs compared, " + std::to_string(differ) + " differ";
    for (const auto& p : produced) detail += " " + p;
    return {differ == 0 && compared > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string only, cli;
    app.add_option("--only", only, "run a single criterion");
    app.add_option("--cli", cli, "path to the jcov binary");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"jacobian_rank_exactness", jacobian_rank_exact},
        {"crb_identity", crb_identity},
        {"crb_sandwich", crb_sandwich},
        {"eckart_young", eckart_young},
        {"exact_recovery", exact_recovery},
        {"power_identity", power_identity},
        {"sphericity_consistency", sphericity_consistency},
        {"mse_vs_n_trend", mse_vs_n_trend},
        {"thresholds_trend", thresholds_trend},
        {"mse_vs_k_trend", mse_vs_k_trend},
        {"tracking_trend", tracking_trend},
        {"determinism", [&] { return determinism(cli); }},
    };
    int failed = 0, ran = 0;
    for (const auto& [name, fn] : criteria) {
        if (!only.empty() && only != name) continue;
        ++ran;
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (v.pass ? "PASS " : "FAIL ") << name << " — " << v.detail << std::endl;
        failed += !v.pass;
    }
    if (ran == 0) {
        std::cerr << "unknown criterion '" << only << "'\n";
        return 2;
    }
    return failed ? 1 : 0;
}
