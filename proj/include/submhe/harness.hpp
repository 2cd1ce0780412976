#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "submhe/estimator.hpp"
#include "submhe/gains.hpp"
#include "submhe/reactor.hpp"
#include "submhe/rng.hpp"

namespace submhe {

/// Simulation configuration; field names double as the config-file keys.
struct RunConfig {
    std::string model = "reactor";
    Eigen::VectorXd x0;     // true initial state
    Eigen::VectorXd xbar0;  // initial estimator guess
    int sim_length = 60;
    int N = 3;
    int T = 5;  // 0 selects the "T = t" mode
    CostKind cost_kind = CostKind::quadratic;
    CandidateKind candidate_kind = CandidateKind::nominal;
    bool project = true;
    int budget = 2;
    WarmStart warm_start = WarmStart::candidate;
    std::uint64_t master_seed = 42;
    int n_runs = 100;

    // harness knobs outside the core schema
    int threads = 1;
    bool record_timing = false;
    bool log_window_projection_errors = false;

    void validate() const {
        if (sim_length < 0) throw std::invalid_argument("RunConfig: sim_length must be >= 0");
        if (budget < 0) throw std::invalid_argument("RunConfig: budget must be >= 0");
        if (n_runs < 1) throw std::invalid_argument("RunConfig: n_runs must be >= 1");
        if (T != 0 && T <= N) throw std::invalid_argument("RunConfig: T must exceed N (or be 0 for T=t)");
    }
};

inline RunConfig reactor_run_config() {
    RunConfig cfg;
    cfg.x0 = Eigen::Vector3d(0.5, 0.05, 0.0);
    cfg.xbar0 = Eigen::Vector3d(1.0, 0.5, 0.1);
    return cfg;
}

struct StepRow {
    long t = 0;
    Eigen::VectorXd x;      // true state
    Eigen::VectorXd z;      // observer state z_{t|t}
    Eigen::VectorXd x_hat;  // suboptimal estimate
    Eigen::VectorXd y;      // measured output
    Eigen::VectorXd w;      // applied process disturbance
    Eigen::VectorXd v;      // applied measurement noise
    double eps_norm = 0.0;  // |z_{t-calN|t} - p_X(z_{t-calN|t})| at this call
    double cost_candidate = 0.0;
    double cost_accepted = 0.0;
    int iters = 0;
    long wall_us = 0;
};

struct RunRecord {
    std::vector<StepRow> rows;
    std::vector<std::vector<double>> eps_windows;  // per call, lag-indexed (optional)
    double sse = 0.0;
    double sne = 0.0;
    double tau_a_us = 0.0;  // mean estimator wall time over t >= N
};

struct MetricsTable {
    double sse = 0.0;
    double sne = 0.0;
    double tau_a_us = 0.0;
    int n_runs = 0;
};

inline MheConfig make_mhe_config(const RunConfig& cfg, const EiossConstants& eioss) {
    MheConfig m;
    m.N = cfg.N;
    m.T = cfg.T;
    m.cost_kind = cfg.cost_kind;
    m.candidate_kind = cfg.candidate_kind;
    m.project = cfg.project;
    m.weights = CostWeights::compatible(eioss, cfg.cost_kind);
    m.solver.budget = cfg.budget;
    m.warm_start = cfg.warm_start;
    m.initial_guess = cfg.xbar0;
    m.log_window_projection_errors = cfg.log_window_projection_errors;
    return m;
}

/// Simulate truth and estimator in lockstep for sim_length steps. Disturbance
/// and noise streams are derived from (master_seed, replicate, channel, t),
/// so every replicate is reproducible in isolation.
inline RunRecord run_single(const DiscreteSystem& sys, const OutputInjectionObserver& obs,
                            const RunConfig& cfg, const EiossConstants& eioss,
                            std::uint64_t replicate) {
    cfg.validate();
    const CounterRng rng(cfg.master_seed, replicate);
    Estimator est(sys, obs, make_mhe_config(cfg, eioss));

    RunRecord rec;
    rec.rows.resize(cfg.sim_length + 1);
    if (cfg.log_window_projection_errors) rec.eps_windows.reserve(cfg.sim_length + 1);

    const Eigen::VectorXd u = sys.zero_input();
    Eigen::VectorXd x = cfg.x0;
    Eigen::VectorXd y_prev;
    long timed_steps = 0;
    double timed_total_us = 0.0;

    for (int t = 0; t <= cfg.sim_length; ++t) {
        StepRow& row = rec.rows[t];
        row.t = t;
        if (t > 0) {
            const auto t0 = std::chrono::steady_clock::now();
            est.step(u, y_prev);
            const auto t1 = std::chrono::steady_clock::now();
            if (cfg.record_timing)
                row.wall_us = std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count();
            if (t >= cfg.N) {
                timed_total_us +=
                    std::chrono::duration<double, std::micro>(t1 - t0).count();
                ++timed_steps;
            }
        }
        const StepInfo& info = est.last_step();
        row.x = x;
        row.z = info.z_now;
        row.x_hat = info.x_hat;
        row.eps_norm = info.eps_prior_norm;
        row.cost_candidate = info.cost_candidate;
        row.cost_accepted = info.cost_accepted;
        row.iters = info.iterations_used;
        if (cfg.log_window_projection_errors) rec.eps_windows.push_back(info.eps_window);

        if (row.cost_accepted > row.cost_candidate + 1e-12 * (1.0 + row.cost_candidate))
            throw std::logic_error("run_single: accepted cost exceeds candidate cost");
        if (cfg.project && !sys.state_set.contains(row.x_hat, 0.0))
            throw std::logic_error("run_single: published estimate violates the state set");

        row.v = sample_box_uniform(sys.noise_set, rng, CounterRng::measurement_noise, t);
        row.y = output(sys, x, u, row.v);
        row.w = sample_box_uniform(sys.disturbance_set, rng, CounterRng::process_disturbance, t);
        if (t < cfg.sim_length) {
            x = step(sys, x, u, row.w);
            if (!x.allFinite()) throw std::runtime_error("run_single: truth rollout overflow");
            y_prev = row.y;
        }

        const double err = (row.x - row.x_hat).norm();
        rec.sse += err * err;
        rec.sne += err;
    }
    rec.tau_a_us = timed_steps > 0 ? timed_total_us / static_cast<double>(timed_steps) : 0.0;
    return rec;
}

/// Monte-Carlo driver: replicates run over a work queue with independent
/// derived streams and are aggregated in replicate order, so the result is
/// bit-identical for any thread count.
inline MetricsTable monte_carlo(const DiscreteSystem& sys, const OutputInjectionObserver& obs,
                                const RunConfig& cfg, const EiossConstants& eioss,
                                std::vector<RunRecord>* records_out = nullptr) {
    cfg.validate();
    std::vector<RunRecord> records(cfg.n_runs);
    const int workers = std::max(1, std::min(cfg.threads, cfg.n_runs));
    if (workers == 1) {
        for (int r = 0; r < cfg.n_runs; ++r)
            records[r] = run_single(sys, obs, cfg, eioss, static_cast<std::uint64_t>(r));
    } else {
        std::atomic<int> next(0);
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        pool.reserve(workers);
        for (int wi = 0; wi < workers; ++wi) {
            pool.emplace_back([&, wi] {
                try {
                    for (int r = next.fetch_add(1); r < cfg.n_runs; r = next.fetch_add(1))
                        records[r] = run_single(sys, obs, cfg, eioss, static_cast<std::uint64_t>(r));
                } catch (...) {
                    errors[wi] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    MetricsTable table;
    table.n_runs = cfg.n_runs;
    for (const auto& rec : records) {
        table.sse += rec.sse;
        table.sne += rec.sne;
        table.tau_a_us += rec.tau_a_us;
    }
    table.sse /= cfg.n_runs;
    table.sne /= cfg.n_runs;
    table.tau_a_us /= cfg.n_runs;
    if (records_out) *records_out = std::move(records);
    return table;
}

namespace detail {

inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline const char* csv_header() {
    return "t,x1,x2,x3,z1,z2,z3,xhat1,xhat2,xhat3,y,w1,w2,w3,v,eps_norm,cost_candidate,"
           "cost_accepted,iters,wall_us";
}

/// Per-step CSV with 17-significant-digit floats for bit round-trips. The
/// column layout is fixed to the reactor shape (3 states, scalar output).
inline void emit_csv(const std::vector<RunRecord>& records, std::ostream& os) {
    os << csv_header() << "\n";
    for (const auto& rec : records) {
        for (const auto& r : rec.rows) {
            if (r.x.size() != 3 || r.y.size() != 1 || r.w.size() != 3 || r.v.size() != 1)
                throw std::invalid_argument("emit_csv: row shape must be the reactor shape");
            os << r.t;
            for (int i = 0; i < 3; ++i) os << ',' << detail::fmt17(r.x[i]);
            for (int i = 0; i < 3; ++i) os << ',' << detail::fmt17(r.z[i]);
            for (int i = 0; i < 3; ++i) os << ',' << detail::fmt17(r.x_hat[i]);
            os << ',' << detail::fmt17(r.y[0]);
            for (int i = 0; i < 3; ++i) os << ',' << detail::fmt17(r.w[i]);
            os << ',' << detail::fmt17(r.v[0]);
            os << ',' << detail::fmt17(r.eps_norm);
            os << ',' << detail::fmt17(r.cost_candidate);
            os << ',' << detail::fmt17(r.cost_accepted);
            os << ',' << r.iters;
            os << ',' << r.wall_us;
            os << "\n";
        }
    }
}

inline void emit_csv(const std::vector<RunRecord>& records, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("emit_csv: cannot open " + path);
    emit_csv(records, os);
    if (!os) throw std::runtime_error("emit_csv: write failed for " + path);
}

/// Inverse of emit_csv, for round-tripping records.
inline std::vector<RunRecord> parse_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("parse_csv: empty input");
    if (line != csv_header()) throw std::runtime_error("parse_csv: unexpected header");
    std::vector<RunRecord> records;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 20) throw std::runtime_error("parse_csv: malformed row");
        StepRow r;
        int c = 0;
        r.t = std::stol(cells[c++]);
        auto vec = [&](int n) {
            Eigen::VectorXd v(n);
            for (int i = 0; i < n; ++i) v[i] = std::stod(cells[c++]);
            return v;
        };
        r.x = vec(3);
        r.z = vec(3);
        r.x_hat = vec(3);
        r.y = vec(1);
        r.w = vec(3);
        r.v = vec(1);
        r.eps_norm = std::stod(cells[c++]);
        r.cost_candidate = std::stod(cells[c++]);
        r.cost_accepted = std::stod(cells[c++]);
        r.iters = std::stoi(cells[c++]);
        r.wall_us = std::stol(cells[c++]);
        if (r.t == 0) records.emplace_back();
        if (records.empty()) throw std::runtime_error("parse_csv: rows do not start at t=0");
        records.back().rows.push_back(std::move(r));
    }
    return records;
}

inline nlohmann::json to_json(const StepRow& r) {
    auto vec = [](const Eigen::VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    return nlohmann::json{{"t", r.t},
                          {"x", vec(r.x)},
                          {"z", vec(r.z)},
                          {"x_hat", vec(r.x_hat)},
                          {"y", vec(r.y)},
                          {"w", vec(r.w)},
                          {"v", vec(r.v)},
                          {"eps_norm", r.eps_norm},
                          {"cost_candidate", r.cost_candidate},
                          {"cost_accepted", r.cost_accepted},
                          {"iters", r.iters},
                          {"wall_us", r.wall_us}};
}

inline nlohmann::json to_json(const RunRecord& rec) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rec.rows) rows.push_back(to_json(r));
    return nlohmann::json{
        {"rows", rows}, {"sse", rec.sse}, {"sne", rec.sne}, {"tau_a_us", rec.tau_a_us}};
}

inline nlohmann::json to_json(const MetricsTable& m) {
    return nlohmann::json{
        {"sse", m.sse}, {"sne", m.sne}, {"tau_a_us", m.tau_a_us}, {"n_runs", m.n_runs}};
}

inline nlohmann::json to_json(const GainReport& rep) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& g : rep.per_horizon)
        per.push_back({{"calN", g.calN},
                       {"sigma_bar", g.sigma_bar},
                       {"c_N", g.c_N},
                       {"C1", g.C1},
                       {"C2", g.C2},
                       {"C3", g.C3},
                       {"C_eps", g.C_eps}});
    return nlohmann::json{{"variant", rep.variant.name()},
                          {"N", rep.N},
                          {"C1", rep.C1},
                          {"C2", rep.C2},
                          {"C3", rep.C3},
                          {"C_eps", rep.C_eps},
                          {"T_min", rep.T_min},
                          {"T_used", rep.T_used},
                          {"lambda", rep.lambda},
                          {"certified", rep.certified},
                          {"rho", rep.rho},
                          {"per_horizon", per}};
}

inline nlohmann::json to_json(const ObserverCertificate& cert) {
    nlohmann::json j{{"valid", cert.valid},
                     {"rho", cert.rho},
                     {"max_vertex_norm", cert.max_vertex_norm},
                     {"C_p", cert.C_p},
                     {"C_w", cert.C_w},
                     {"C_v", cert.C_v},
                     {"kappa", cert.kappa}};
    if (cert.eioss) {
        j["eioss"] = {{"c_p", cert.eioss->c_p}, {"c_u", cert.eioss->c_u},
                      {"c_w", cert.eioss->c_w}, {"c_v", cert.eioss->c_v},
                      {"c_y", cert.eioss->c_y}, {"eta", cert.eioss->eta}};
    }
    return j;
}

// ---------------------------------------------------------------------------
// plaintext config files: `key = value` lines, '#' comments, vectors as
// comma-separated components. CLI flags override file values.

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline Eigen::VectorXd parse_vector(const std::string& s) {
    std::vector<double> vals;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(trim(cell)));
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

inline CostKind parse_cost_kind(const std::string& s) {
    if (s == "quadratic") return CostKind::quadratic;
    if (s == "discounted") return CostKind::discounted;
    throw std::invalid_argument("unknown cost_kind: " + s);
}

inline CandidateKind parse_candidate_kind(const std::string& s) {
    if (s == "nominal") return CandidateKind::nominal;
    if (s == "observer") return CandidateKind::observer_trajectory;
    throw std::invalid_argument("unknown candidate_kind: " + s);
}

inline WarmStart parse_warm_start(const std::string& s) {
    if (s == "candidate") return WarmStart::candidate;
    if (s == "shifted") return WarmStart::shifted;
    throw std::invalid_argument("unknown warm_start: " + s);
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("unknown boolean: " + s);
}

inline void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "model") cfg.model = value;
    else if (key == "x0") cfg.x0 = parse_vector(value);
    else if (key == "xbar0") cfg.xbar0 = parse_vector(value);
    else if (key == "sim_length") cfg.sim_length = std::stoi(value);
    else if (key == "N") cfg.N = std::stoi(value);
    else if (key == "T") cfg.T = value == "t" ? 0 : std::stoi(value);
    else if (key == "cost_kind") cfg.cost_kind = parse_cost_kind(value);
    else if (key == "candidate_kind") cfg.candidate_kind = parse_candidate_kind(value);
    else if (key == "project") cfg.project = parse_bool(value);
    else if (key == "budget") cfg.budget = std::stoi(value);
    else if (key == "warm_start") cfg.warm_start = parse_warm_start(value);
    else if (key == "master_seed") cfg.master_seed = std::stoull(value);
    else if (key == "n_runs") cfg.n_runs = std::stoi(value);
    else if (key == "threads") cfg.threads = std::stoi(value);
    else throw std::invalid_argument("unknown config key: " + key);
}

inline RunConfig load_config(std::istream& is, RunConfig base) {
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        apply_config_line(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

inline RunConfig load_config_file(const std::string& path, RunConfig base) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    return load_config(is, std::move(base));
}

/// Margins of the robust-stability bound along one logged run.
inline std::vector<double> empirical_rges_check(const RunRecord& rec, const GainReport& report) {
    std::vector<Eigen::VectorXd> x, x_hat, w, v;
    for (const auto& r : rec.rows) {
        x.push_back(r.x);
        x_hat.push_back(r.x_hat);
        w.push_back(r.w);
        v.push_back(r.v);
    }
    return empirical_rges_check(x, x_hat, w, v, rec.eps_windows, report);
}

}  // namespace submhe
