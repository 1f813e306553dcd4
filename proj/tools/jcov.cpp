// jcov: command-line front end for joint structured covariance estimation.
//
//   jcov estimate --input samples.csv --rank alpha [--psd-clip] [--out est.csv]
//   jcov crb --scenario scenario.ini --n 100
//   jcov sample --config scenario.ini --out samples.csv
//   jcov bench mse-vs-n --config fig1.ini --out fig1.csv [--seed S --trials T --jobs J --fix-scenario]
//
// Exit status: 0 ok, 2 bad arguments or config, 1 anything else.

#include "jcov/bench.hpp"
#include "jcov/config.hpp"
#include "jcov/crb.hpp"
#include "jcov/io.hpp"
#include "jcov/sampling.hpp"
#include "jcov/structures.hpp"
#include "jcov/tsvd.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace jcov;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    return out;
}

// Scenario file: p, K, n, structure, seed and (optionally) beta.
struct ScenarioFile {
    Index p = 10;
    Index K = 0;
    Index n = 100;
    std::string structure = "toeplitz";
    std::uint64_t seed = 1;
    std::optional<double> beta;
};

ScenarioFile read_scenario_file(const std::string& path) {
    const auto kv = KeyValues::parse_file(path);
    ScenarioFile s;
    if (auto v = kv.get_int("p")) s.p = static_cast<Index>(*v);
    if (auto v = kv.get_int("K")) s.K = static_cast<Index>(*v);
    if (auto v = kv.get_int("n")) s.n = static_cast<Index>(*v);
    if (auto v = kv.get("structure")) s.structure = *v;
    if (auto v = kv.get_u64("seed")) s.seed = *v;
    s.beta = kv.get_double("beta");
    if (auto unknown = kv.unused(); !unknown.empty()) throw ConfigError("config: unknown key '" + unknown.front() + "'");
    if (s.p < 2) throw ConfigError("config: p must be at least 2");
    if (s.K < 0) throw ConfigError("config: K must be nonnegative");
    if (s.K == 0) s.K = half_dim(s.p);
    if (s.n < 1) throw ConfigError("config: n must be positive");
    if (s.beta && !(*s.beta >= 0.0 && *s.beta <= 1.0)) throw ConfigError("config: beta must lie in [0, 1]");
    return s;
}

Scenario make_scenario(const ScenarioFile& s) {
    SubspaceModel model;
    try {
        model = parse_structure(s.structure, s.p);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    auto eng = substream(s.seed, 0, slot::scenario);
    if (model.kind() == StructureKind::toeplitz) return toeplitz_scenario(s.p, s.K, s.seed, eng);
    return structured_scenario(model, s.K, s.seed, eng);
}

int cmd_estimate(const std::string& input, const std::string& rank, bool psd_clip, const std::string& out_path) {
    RankSpec spec;
    try {
        spec = RankSpec::parse(rank);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    std::ifstream in(input);
    if (!in) throw std::runtime_error("cannot open '" + input + "'");
    const auto groups = read_samples_csv(in);
    std::vector<SymmetricMatrix> scms;
    Index n = groups.front().cols();
    for (const auto& g : groups) {
        if (g.cols() != n && spec.rule == RankRule::alpha)
            throw ConfigError("estimate: the alpha rule needs equal sample counts per group");
        scms.push_back(scm(g));
    }
    const auto s = MeasurementMatrix::from_scms(scms);
    const auto est = estimate(s, spec, n, psd_clip);

    std::ostringstream body;
    body << "# r_used=" << est.r_used << ", alpha=" << (std::isnan(est.alpha) ? std::string("nan") : io::format_double(est.alpha))
         << ", sigma=";
    for (Index i = 0; i < est.sigma.size(); ++i) body << (i ? ";" : "") << io::format_double(est.sigma[i]);
    body << '\n';
    for (Index k = 0; k < est.yhat.cols(); ++k) io::write_matrix_csv(body, mat_dense(est.yhat.col(k)));
    if (out_path.empty()) {
        std::cout << body.str();
    } else {
        auto out = open_out(out_path);
        out << body.str();
    }
    return 0;
}

int cmd_crb(const std::string& scenario_path, Index n) {
    if (n < 1) throw ConfigError("crb: --n must be positive");
    const auto sf = read_scenario_file(scenario_path);
    const auto sc = make_scenario(sf);
    const auto rep = crb_report(sc.covariances, n);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "l,r,K,n,rank_theory,rank_numeric,trace_bound,floor,marginal\n"
              << rep.l << ',' << rep.r << ',' << rep.K << ',' << rep.n << ',' << rep.jacobian_rank_theory << ','
              << rep.jacobian_rank_numeric << ',' << io::format_double(rep.trace_bound) << ','
              << io::format_double(rep.floor) << ',' << io::format_double(rep.marginal_per_matrix) << '\n';
    return 0;
}

// With beta set, groups are consecutive blocks of n ticks of the complex DGP
// (p is the real dimension); otherwise Gaussian groups from the scenario.
int cmd_sample(const std::string& config, const std::string& out_path) {
    const auto sf = read_scenario_file(config);
    std::vector<Matrix> groups;
    if (sf.beta) {
        if (sf.p % 2 != 0) throw ConfigError("config: tracking samples need an even real dimension p");
        auto eng = substream(sf.seed, 0, slot::dgp);
        DgpState state = dgp_initial(sf.p / 2, *sf.beta);
        for (Index k = 0; k < sf.K; ++k) {
            Matrix x(sf.p, sf.n);
            for (Index i = 0; i < sf.n; ++i) {
                state = dgp_step(state, eng);
                x.col(i) = real_samples(sample_complex(state.h, 1, eng));
            }
            groups.push_back(std::move(x));
        }
    } else {
        const auto sc = make_scenario(sf);
        std::cerr << "scenario: K=" << sc.K << " r=" << sc.model.r() << " rejections=" << sc.rejections << '\n';
        for (Index k = 0; k < sc.K; ++k) {
            auto eng = substream(sf.seed, 0, static_cast<std::uint32_t>(k));
            groups.push_back(sample_gaussian(sc.covariances[static_cast<std::size_t>(k)], sf.n, eng));
        }
    }
    auto out = open_out(out_path);
    write_samples_csv(out, groups);
    return 0;
}

std::string sibling(const std::string& out, const std::string& suffix) {
    std::filesystem::path p(out);
    const auto stem = p.stem().string();
    return (p.parent_path() / (stem + suffix)).string();
}

struct BenchFlags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<long long> trials;
    std::optional<unsigned> jobs;
    bool fix_scenario = false;
};

int cmd_bench(const std::string& which, const BenchFlags& f) {
    const auto experiment = bench::parse_experiment(which);
    const auto kv = f.config.empty() ? KeyValues{} : KeyValues::parse_file(f.config);
    auto cfg = bench::parse_config(kv, experiment);
    auto undefault = [&](const std::string& key) {
        std::erase(cfg.defaulted, key);
    };
    if (f.seed) cfg.seed = *f.seed, undefault("seed");
    if (f.trials) cfg.trials = static_cast<Index>(*f.trials), undefault("trials");
    if (f.jobs) cfg.jobs = *f.jobs;
    if (f.fix_scenario) cfg.fix_scenario = true;

    const auto res = bench::run(cfg);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& key : cfg.defaulted) std::cerr << "note: '" << key << "' not set; using the built-in default\n";
    bench::emit_csv(res.records, f.out);
    if (!res.ranks.empty()) bench::emit_rank_csv(res.ranks, sibling(f.out, ".ranks.csv"));
    auto meta = open_out(sibling(f.out, ".meta.json"));
    meta << res.meta.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint estimation of structured covariance matrices"};
    app.require_subcommand(1);

    auto* est = app.add_subcommand("estimate", "TSVD estimate from a sample dump");
    std::string input, rank = "alpha", est_out;
    bool psd_clip = false;
    est->add_option("--input", input, "samples CSV")->required();
    est->add_option("--rank", rank, "known:R | alpha | alpha:A | aoht | aoht-c | elbow | elbow-c");
    est->add_flag("--psd-clip", psd_clip, "clip negative eigenvalues of each estimate");
    est->add_option("--out", est_out, "output CSV (stdout if omitted)");

    auto* crb = app.add_subcommand("crb", "Cramer-Rao bound for a scenario");
    std::string scenario;
    long long crb_n = 0;
    crb->add_option("--scenario", scenario, "scenario config")->required();
    crb->add_option("--n", crb_n, "samples per group")->required();

    auto* smp = app.add_subcommand("sample", "draw a scenario and dump its samples");
    std::string smp_config, smp_out;
    smp->add_option("--config", smp_config, "scenario config")->required();
    smp->add_option("--out", smp_out, "samples CSV")->required();

    auto* bch = app.add_subcommand("bench", "Monte-Carlo experiments");
    bch->require_subcommand(1);
    BenchFlags flags;
    std::string which;
    const std::pair<const char*, const char*> experiments[] = {
        {"mse-vs-n", "estimator MSE against samples per group, with CRB overlay"},
        {"thresholds", "rank rules compared; also writes rank histograms"},
        {"mse-vs-k", "per-group MSE against number of groups, with fitted prediction"},
        {"tracking", "block-wise MSE while tracking a drifting covariance"},
    };
    for (const auto& [name, help] : experiments) {
        auto* sub = bch->add_subcommand(name, help);
        sub->add_option("--config", flags.config, "experiment config");
        sub->add_option("--out", flags.out, "output CSV")->required();
        sub->add_option("--seed", flags.seed, "master seed");
        sub->add_option("--trials", flags.trials, "Monte-Carlo trials");
        sub->add_option("--jobs", flags.jobs, "worker threads (0 = all cores)");
        sub->add_flag("--fix-scenario", flags.fix_scenario, "condition on a single scenario draw");
        sub->callback([&which, name] { which = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*est) return cmd_estimate(input, rank, psd_clip, est_out);
        if (*crb) return cmd_crb(scenario, static_cast<Index>(crb_n));
        if (*smp) return cmd_sample(smp_config, smp_out);
        if (*bch) return cmd_bench(which, flags);
    } catch (const ConfigError& e) {
        std::cerr << "jcov: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "jcov: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
