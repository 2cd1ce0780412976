// Command line front end: observer certificates, gain tables, single/Monte
// Carlo simulation, and budget sweeps for the suboptimal MHE library.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "submhe/submhe.hpp"

namespace {

using namespace submhe;

struct ModelBundle {
    DiscreteSystem sys;
    OutputInjectionObserver obs;
    ObserverCertificate cert;
    EiossConstants eioss;
    LipschitzBounds lipschitz;
};

ModelBundle load_model(const std::string& name) {
    if (name != "reactor") throw CLI::ValidationError("--model", "unknown model: " + name);
    ModelBundle m;
    m.sys = reactor_model();
    m.obs = reactor_observer();
    m.cert = contraction_check(m.obs, m.sys, reactor_certificate_domain());
    if (m.cert.valid) {
        derive_rges_constants(m.obs, m.cert);
        m.eioss = derive_eioss_constants(m.obs, m.cert);
    }
    m.lipschitz = lipschitz_bounds(m.sys, reactor_certificate_domain());
    return m;
}

Variant make_variant(const std::string& candidate, const std::string& cost, bool project) {
    Variant v;
    v.candidate = parse_candidate_kind(candidate);
    v.cost = parse_cost_kind(cost);
    v.projected = project;
    return v;
}

GainReport compute_report(const ModelBundle& m, const Variant& variant, int N, int T, double H) {
    const TheoryParams params =
        theory_params(m.eioss, m.cert, m.lipschitz.F, H > 0 ? H : m.lipschitz.H, variant.cost);
    return aggregate_gains(params, N, T, variant);
}

void print_gain_table(const std::vector<GainReport>& reports) {
    std::printf("%-30s %10s %10s %10s %10s %8s %10s\n", "variant", "C1", "C2", "C3", "C_eps",
                "T_min", "lambda");
    for (const auto& r : reports)
        std::printf("%-30s %10.2f %10.2f %10.2f %10.2f %8d %10.6f\n", r.variant.name().c_str(),
                    r.C1, r.C2, r.C3, r.C_eps, r.T_min, r.lambda);
}

int cmd_gains(const std::string& model, const std::string& candidate, const std::string& cost,
              bool project, int N, int T, double H, const std::string& json_path) {
    const ModelBundle m = load_model(model);
    if (!m.cert.valid) {
        std::fprintf(stderr, "observer certificate invalid; cannot compute gains\n");
        return 1;
    }
    std::vector<Variant> variants;
    if (candidate.empty() && cost.empty()) {
        variants = {make_variant("nominal", "quadratic", project),
                    make_variant("nominal", "discounted", project),
                    make_variant("observer", "quadratic", project),
                    make_variant("observer", "discounted", project)};
    } else {
        variants = {make_variant(candidate.empty() ? "nominal" : candidate,
                                 cost.empty() ? "quadratic" : cost, project)};
    }
    std::vector<GainReport> reports;
    for (const auto& v : variants) reports.push_back(compute_report(m, v, N, T, H));
    std::printf("model=%s  F=%.6f  H=%.6f  kappa=%.6f  rho=%.4f\n", model.c_str(), m.lipschitz.F,
                H > 0 ? H : m.lipschitz.H, m.cert.kappa, m.cert.rho);
    print_gain_table(reports);
    if (!json_path.empty()) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : reports) j.push_back(to_json(r));
        std::ofstream os(json_path);
        if (!os) {
            std::fprintf(stderr, "cannot write %s\n", json_path.c_str());
            return 1;
        }
        os << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_verify(const std::string& model) {
    const ModelBundle m = load_model(model);
    std::cout << to_json(m.cert).dump(2) << "\n";
    if (!m.cert.valid) {
        std::fprintf(stderr, "certificate INVALID: max vertex norm %.9f exceeds rho %.4f\n",
                     m.cert.max_vertex_norm, m.cert.rho);
        return 1;
    }
    return 0;
}

RunConfig build_run_config(const ModelBundle&, const std::string& config_path) {
    RunConfig cfg = reactor_run_config();
    if (!config_path.empty()) cfg = load_config_file(config_path, cfg);
    return cfg;
}

int cmd_simulate(RunConfig cfg, const std::string& out_path, const std::string& format) {
    const ModelBundle m = load_model(cfg.model);
    std::vector<RunRecord> records;
    const MetricsTable table = monte_carlo(m.sys, m.obs, cfg, m.eioss, &records);
    std::printf("runs=%d  SSE=%.4f  SNE=%.4f  tau_a=%.1f us\n", table.n_runs, table.sse, table.sne,
                table.tau_a_us);
    if (!out_path.empty()) {
        if (format == "csv") {
            emit_csv(records, out_path);
        } else {
            nlohmann::json j = nlohmann::json::array();
            for (const auto& r : records) j.push_back(to_json(r));
            std::ofstream os(out_path);
            if (!os) throw std::runtime_error("cannot open " + out_path);
            os << j.dump() << "\n";
        }
    }
    return 0;
}

int cmd_compare(RunConfig base, const std::vector<int>& budgets, const std::string& out_path) {
    const ModelBundle m = load_model(base.model);
    struct Cell {
        const char* candidate;
        const char* cost;
    };
    const std::vector<Cell> cells = {{"nominal", "quadratic"},
                                     {"nominal", "discounted"},
                                     {"observer", "quadratic"},
                                     {"observer", "discounted"}};

    std::ostringstream csv;
    csv << "i";
    for (const char* metric : {"sse", "sne", "tau_us"})
        for (const auto& cell : cells)
            csv << ',' << metric << '_' << (cell.candidate[0] == 'n' ? "nom" : "obs") << '_'
                << (cell.cost[0] == 'q' ? "qc" : "td");
    csv << "\n";

    // Observer baseline (no optimization, never re-initialized), reported as i = -1.
    {
        RunConfig cfg = base;
        cfg.budget = 0;
        cfg.T = 0;
        cfg.project = false;
        cfg.candidate_kind = CandidateKind::nominal;
        cfg.cost_kind = CostKind::quadratic;
        const MetricsTable t = monte_carlo(m.sys, m.obs, cfg, m.eioss);
        csv << -1;
        for (int rep = 0; rep < 4; ++rep) csv << ',' << t.sse;
        for (int rep = 0; rep < 4; ++rep) csv << ',' << t.sne;
        for (int rep = 0; rep < 4; ++rep) csv << ',' << 0.0;
        csv << "\n";
        std::printf("observer baseline: SSE=%.4f SNE=%.4f\n", t.sse, t.sne);
    }

    for (int budget : budgets) {
        std::vector<MetricsTable> tables;
        for (const auto& cell : cells) {
            RunConfig cfg = base;
            cfg.budget = budget;
            cfg.candidate_kind = parse_candidate_kind(cell.candidate);
            cfg.cost_kind = parse_cost_kind(cell.cost);
            cfg.record_timing = true;
            tables.push_back(monte_carlo(m.sys, m.obs, cfg, m.eioss));
        }
        csv << budget;
        for (const auto& t : tables) csv << ',' << t.sse;
        for (const auto& t : tables) csv << ',' << t.sne;
        for (const auto& t : tables) csv << ',' << t.tau_a_us;
        csv << "\n";
        std::printf("i=%-3d SSE: nom-qc=%.3f nom-td=%.3f obs-qc=%.3f obs-td=%.3f\n", budget,
                    tables[0].sse, tables[1].sse, tables[2].sse, tables[3].sse);
    }
    if (!out_path.empty()) {
        std::ofstream os(out_path);
        if (!os) throw std::runtime_error("cannot open " + out_path);
        os << csv.str();
    } else {
        std::cout << csv.str();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Suboptimal nonlinear moving horizon estimation"};
    app.require_subcommand(1);

    std::string model = "reactor";
    std::string config_path;

    // gains
    auto* gains = app.add_subcommand("gains", "Robust-stability gain tables");
    std::string g_candidate, g_cost, g_json;
    bool g_project = false;
    int g_N = 3, g_T = 0;
    double g_H = -1.0;
    gains->add_option("--model", model, "model name")->capture_default_str();
    gains->add_option("--variant", g_candidate, "candidate family: nominal|observer");
    gains->add_option("--cost", g_cost, "cost family: quadratic|discounted");
    gains->add_flag("--project", g_project, "state-constrained (projected) variants");
    gains->add_option("-N", g_N, "horizon length")->capture_default_str();
    gains->add_option("-T", g_T, "re-initialization horizon (0: use T_min)")->capture_default_str();
    gains->add_option("--H", g_H, "output Lipschitz constant override (<0: vertex analysis)");
    gains->add_option("--json", g_json, "write reports to a JSON file");

    // verify
    auto* verify = app.add_subcommand("verify", "Observer certificate and e-IOSS constants");
    verify->add_option("--model", model, "model name")->capture_default_str();

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Seeded single/Monte-Carlo simulation");
    RunConfig scfg = reactor_run_config();
    std::string s_out, s_format = "csv", s_cost = "quadratic", s_candidate = "nominal",
                s_warm = "candidate", s_T = "5";
    bool s_no_project = false, s_timing = false;
    simulate->add_option("--model", scfg.model, "model name")->capture_default_str();
    simulate->add_option("--config", config_path, "config file (CLI flags override)");
    simulate->add_option("-N", scfg.N, "horizon length")->capture_default_str();
    simulate->add_option("-T", s_T, "re-initialization horizon (integer or 't')")
        ->capture_default_str();
    simulate->add_option("--cost", s_cost, "quadratic|discounted")->capture_default_str();
    simulate->add_option("--candidate", s_candidate, "nominal|observer")->capture_default_str();
    simulate->add_flag("--no-project", s_no_project, "drop the state constraints");
    simulate->add_option("--iters", scfg.budget, "solver budget per step")->capture_default_str();
    simulate->add_option("--runs", scfg.n_runs, "Monte-Carlo replicates")->capture_default_str();
    simulate->add_option("--seed", scfg.master_seed, "master seed")->capture_default_str();
    simulate->add_option("--sim-length", scfg.sim_length, "steps per run")->capture_default_str();
    simulate->add_option("--threads", scfg.threads, "worker threads")->capture_default_str();
    simulate->add_option("--warm-start", s_warm, "candidate|shifted")->capture_default_str();
    simulate->add_flag("--timing", s_timing, "record per-step wall time in the output");
    simulate->add_option("--out", s_out, "output path");
    simulate->add_option("--format", s_format, "csv|json")->capture_default_str();

    // compare
    auto* compare = app.add_subcommand("compare", "Budget sweep over the four estimator cells");
    RunConfig ccfg = reactor_run_config();
    std::string c_out, c_budgets = "0,1,2,5,10";
    compare->add_option("--model", ccfg.model, "model name")->capture_default_str();
    compare->add_option("--config", config_path, "config file (CLI flags override)");
    compare->add_option("--budgets", c_budgets, "comma-separated iteration budgets")
        ->capture_default_str();
    compare->add_option("-N", ccfg.N, "horizon length")->capture_default_str();
    compare->add_option("-T", ccfg.T, "re-initialization horizon")->capture_default_str();
    compare->add_option("--runs", ccfg.n_runs, "Monte-Carlo replicates")->capture_default_str();
    compare->add_option("--seed", ccfg.master_seed, "master seed")->capture_default_str();
    compare->add_option("--threads", ccfg.threads, "worker threads")->capture_default_str();
    compare->add_option("--out", c_out, "output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gains->parsed())
            return cmd_gains(model, g_candidate, g_cost, g_project, g_N, g_T, g_H, g_json);
        if (verify->parsed()) return cmd_verify(model);
        if (simulate->parsed()) {
            if (!config_path.empty()) scfg = load_config_file(config_path, scfg);
            // flags override the file
            scfg.cost_kind = parse_cost_kind(s_cost);
            scfg.candidate_kind = parse_candidate_kind(s_candidate);
            scfg.warm_start = parse_warm_start(s_warm);
            scfg.T = s_T == "t" ? 0 : std::stoi(s_T);
            if (s_no_project) scfg.project = false;
            scfg.record_timing = s_timing;
            return cmd_simulate(scfg, s_out, s_format);
        }
        if (compare->parsed()) {
            if (!config_path.empty()) ccfg = load_config_file(config_path, ccfg);
            std::vector<int> budgets;
            std::stringstream ss(c_budgets);
            std::string cell;
            while (std::getline(ss, cell, ',')) budgets.push_back(std::stoi(trim(cell)));
            return cmd_compare(ccfg, budgets, c_out);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
