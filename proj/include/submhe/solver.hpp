#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "submhe/candidates.hpp"
#include "submhe/cost.hpp"
#include "submhe/rng.hpp"
#include "submhe/system.hpp"

namespace submhe {

struct SolverSettings {
    int budget = 2;                        // max damped Gauss-Newton steps (>= 0)
    std::optional<double> damping_init;    // empty: 1e-3 relative to the normal-matrix trace
    double damping_grow = 10.0;
    double damping_shrink = 0.5;
    double smoothing_eps = 1e-8;           // IRLS smoothing floor
    double step_tol = 0.0;                 // early stop on step size; 0 disables
    double cost_tol = 0.0;                 // early stop on cost decrease; 0 disables
    double feasibility_tol = 1e-9;

    void validate() const {
        if (budget < 0) throw std::invalid_argument("SolverSettings: budget must be >= 0");
        if (damping_init && *damping_init < 0.0)
            throw std::invalid_argument("SolverSettings: damping must be nonnegative");
        if (smoothing_eps <= 0.0)
            throw std::invalid_argument("SolverSettings: smoothing_eps must be positive");
    }
};

/// Condensed view of one MHE problem: the decision vector stacks
/// (chi, w_0..w_{calN-1}, v_0..v_{calN-1}); dynamics hold by construction, so
/// the only constraints are the box sets plus the state box along the
/// rollout. Residual blocks are (prior, then per stage: w, v, output fit),
/// each carrying its cost weight (including the discount for the
/// time-discounted cost).
class NlpView {
public:
    NlpView(const DiscreteSystem& sys, Window window, Eigen::VectorXd prior, CostWeights weights,
            CostKind kind, DecisionSets sets)
        : sys_(sys),
          window_(std::move(window)),
          prior_(std::move(prior)),
          weights_(std::move(weights)),
          kind_(kind),
          sets_(std::move(sets)),
          inputs_(window_.stage_inputs()),
          outputs_(window_.stage_outputs()) {
        weights_.validate(kind_);
        calN_ = static_cast<int>(inputs_.size());
        dim_ = sys_.n_x + calN_ * (sys_.n_w + sys_.n_v);
        n_res_ = sys_.n_x + calN_ * (sys_.n_w + sys_.n_v + sys_.n_y);
        build_blocks();
    }

    int dim() const { return dim_; }
    int horizon() const { return calN_; }
    CostKind kind() const { return kind_; }
    const DecisionSets& sets() const { return sets_; }
    const DiscreteSystem& system() const { return sys_; }
    const std::vector<Eigen::VectorXd>& stage_inputs() const { return inputs_; }
    const Window& window() const { return window_; }
    const Eigen::VectorXd& prior() const { return prior_; }
    const CostWeights& weights() const { return weights_; }

    Eigen::VectorXd pack(const Decision& dec) const {
        Eigen::VectorXd d(dim_);
        d.head(sys_.n_x) = dec.chi;
        for (int k = 0; k < calN_; ++k) {
            d.segment(w_offset(k), sys_.n_w) = dec.omegas[k];
            d.segment(v_offset(k), sys_.n_v) = dec.nus[k];
        }
        return d;
    }

    Decision unpack(const Eigen::VectorXd& d) const {
        Decision dec;
        dec.chi = d.head(sys_.n_x);
        dec.omegas.resize(calN_);
        dec.nus.resize(calN_);
        for (int k = 0; k < calN_; ++k) {
            dec.omegas[k] = d.segment(w_offset(k), sys_.n_w);
            dec.nus[k] = d.segment(v_offset(k), sys_.n_v);
        }
        return dec;
    }

    /// Box projection plus the rolled-state clamp sweep.
    Eigen::VectorXd make_feasible(const Eigen::VectorXd& d) const {
        return pack(clamp_decision(sys_, unpack(d), inputs_, sets_));
    }

    bool feasible(const Eigen::VectorXd& d, double tol) const {
        return is_feasible(sys_, unpack(d), inputs_, sets_, tol);
    }

    /// The exact (unsmoothed) MHE cost of the decision.
    double true_cost(const Eigen::VectorXd& d) const {
        Eigen::VectorXd r(n_res_);
        raw_residuals(d, r, nullptr);
        return cost_of_residuals(r);
    }

    double cost_of_residuals(const Eigen::VectorXd& r) const {
        double c = 0.0;
        for (const auto& b : blocks_) {
            const double nrm = r.segment(b.offset, b.size).norm();
            c += b.gamma * (kind_ == CostKind::quadratic ? nrm * nrm : nrm);
        }
        return c;
    }

    /// Unweighted residual blocks and, optionally, their Jacobian via forward
    /// sensitivity accumulation along the rollout.
    void raw_residuals(const Eigen::VectorXd& d, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
        const int nx = sys_.n_x, nw = sys_.n_w, nv = sys_.n_v, ny = sys_.n_y;
        r.resize(n_res_);
        if (jac) jac->setZero(n_res_, dim_);

        Eigen::VectorXd x = d.head(nx);
        Eigen::MatrixXd sens;  // d x_k / d decision
        if (jac) {
            sens.setZero(nx, dim_);
            sens.leftCols(nx).setIdentity();
        }

        r.head(nx) = x - prior_;
        if (jac) jac->topLeftCorner(nx, nx).setIdentity();

        int row = nx;
        for (int k = 0; k < calN_; ++k) {
            const Eigen::VectorXd w = d.segment(w_offset(k), nw);
            const Eigen::VectorXd v = d.segment(v_offset(k), nv);

            r.segment(row, nw) = w;
            if (jac) jac->block(row, w_offset(k), nw, nw).setIdentity();
            row += nw;

            r.segment(row, nv) = v;
            if (jac) jac->block(row, v_offset(k), nv, nv).setIdentity();
            row += nv;

            r.segment(row, ny) = output(sys_, x, inputs_[k], v) - outputs_[k];
            if (jac) {
                jac->block(row, 0, ny, dim_) = output_state_jacobian_at(sys_, x, inputs_[k], v) * sens;
                jac->block(row, v_offset(k), ny, nv) = output_noise_jacobian_at(sys_, x, inputs_[k], v);
            }
            row += ny;

            if (jac) {
                const Eigen::MatrixXd a = state_jacobian_at(sys_, x, inputs_[k], w);
                const Eigen::MatrixXd b = disturbance_jacobian_at(sys_, x, inputs_[k], w);
                sens = a * sens;
                sens.middleCols(w_offset(k), nw) += b;
            }
            x = step(sys_, x, inputs_[k], w);
        }
    }

    /// Row scale factors turning the raw residual stack into the least-squares
    /// objective of one (possibly IRLS-reweighted) Gauss-Newton subproblem.
    Eigen::VectorXd row_scales(const Eigen::VectorXd& raw, double smoothing_eps) const {
        Eigen::VectorXd s(n_res_);
        for (const auto& b : blocks_) {
            double factor;
            if (kind_ == CostKind::quadratic) {
                factor = std::sqrt(b.gamma);
            } else {
                const double nrm = raw.segment(b.offset, b.size).norm();
                factor = std::sqrt(b.gamma / std::sqrt(nrm * nrm + smoothing_eps * smoothing_eps));
            }
            s.segment(b.offset, b.size).setConstant(factor);
        }
        return s;
    }

private:
    struct Block {
        int offset;
        int size;
        double gamma;
    };

    int w_offset(int k) const { return sys_.n_x + k * sys_.n_w; }
    int v_offset(int k) const { return sys_.n_x + calN_ * sys_.n_w + k * sys_.n_v; }

    void build_blocks() {
        blocks_.clear();
        const bool disc = kind_ == CostKind::discounted;
        auto eta_pow = [&](int i) { return disc ? std::pow(weights_.eta_bar, i) : 1.0; };
        blocks_.push_back({0, sys_.n_x, eta_pow(calN_) * weights_.c_p});
        int row = sys_.n_x;
        for (int k = 0; k < calN_; ++k) {
            const double disc_k = eta_pow(calN_ - k);  // stage lag i = calN - k
            blocks_.push_back({row, sys_.n_w, disc_k * weights_.c_w});
            row += sys_.n_w;
            blocks_.push_back({row, sys_.n_v, disc_k * weights_.c_v});
            row += sys_.n_v;
            blocks_.push_back({row, sys_.n_y, disc_k * weights_.c_y});
            row += sys_.n_y;
        }
    }

    const DiscreteSystem& sys_;
    Window window_;
    Eigen::VectorXd prior_;
    CostWeights weights_;
    CostKind kind_;
    DecisionSets sets_;
    std::vector<Eigen::VectorXd> inputs_;
    std::vector<Eigen::VectorXd> outputs_;
    int calN_ = 0;
    int dim_ = 0;
    int n_res_ = 0;
    std::vector<Block> blocks_;
};

struct SolveResult {
    Decision decision;
    double cost = 0.0;
    int iterations_used = 0;
    std::vector<double> accepted_costs;  // cost after each accepted step
};

namespace detail {

/// Damped Gauss-Newton with box projection and a monotone safeguard. Each
/// iteration spends one linear solve; steps that leave the feasible set or
/// raise the true cost are rejected with increased damping. Returns the best
/// iterate visited, the initial point included.
inline SolveResult solve_gn(const NlpView& view, const Decision& init,
                            const SolverSettings& settings) {
    settings.validate();
    Eigen::VectorXd d = view.pack(init);
    double cost_cur = view.true_cost(d);

    SolveResult result;
    result.decision = init;
    result.cost = cost_cur;

    double mu = settings.damping_init.value_or(-1.0);
    Eigen::VectorXd raw(0);
    Eigen::MatrixXd jac;
    for (int it = 0; it < settings.budget; ++it) {
        ++result.iterations_used;
        view.raw_residuals(d, raw, &jac);
        const Eigen::VectorXd scales = view.row_scales(raw, settings.smoothing_eps);
        const Eigen::MatrixXd js = scales.asDiagonal() * jac;
        const Eigen::VectorXd rs = scales.asDiagonal() * raw;
        Eigen::MatrixXd normal = js.transpose() * js;
        const Eigen::VectorXd grad = js.transpose() * rs;
        if (mu < 0.0) mu = 1e-3 * normal.trace() / view.dim();

        normal.diagonal().array() += mu;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
        if (ldlt.info() != Eigen::Success) {
            mu = std::max(mu, 1e-12) * settings.damping_grow;
            continue;
        }
        const Eigen::VectorXd delta = ldlt.solve(-grad);
        if (!delta.allFinite()) {
            mu = std::max(mu, 1e-12) * settings.damping_grow;
            continue;
        }

        const Eigen::VectorXd trial = view.make_feasible(d + delta);
        const double cost_trial = view.true_cost(trial);
        const bool ok = view.feasible(trial, settings.feasibility_tol) && cost_trial <= cost_cur;
        if (!ok) {
            mu = std::max(mu, 1e-12) * settings.damping_grow;
            continue;
        }
        const double decrease = cost_cur - cost_trial;
        const double step_norm = (trial - d).norm();
        d = trial;
        cost_cur = cost_trial;
        mu *= settings.damping_shrink;
        result.accepted_costs.push_back(cost_cur);
        if (cost_cur < result.cost) {
            result.cost = cost_cur;
            result.decision = view.unpack(d);
        }
        if (settings.step_tol > 0.0 && step_norm <= settings.step_tol * (1.0 + d.norm())) break;
        if (settings.cost_tol > 0.0 && decrease <= settings.cost_tol * (1.0 + cost_cur)) break;
    }
    return result;
}

}  // namespace detail

/// Budgeted projected Gauss-Newton on the quadratic MHE cost.
inline SolveResult solve_quadratic(const NlpView& view, const Decision& init,
                                   const SolverSettings& settings) {
    if (view.kind() != CostKind::quadratic)
        throw std::invalid_argument("solve_quadratic: view must carry the quadratic cost");
    return detail::solve_gn(view, init, settings);
}

/// Budgeted iteratively-reweighted least squares on the time-discounted
/// cost: each iteration models every block norm by a smoothed quadratic at
/// the current iterate and takes one damped Gauss-Newton step. Reported
/// costs are always the true discounted cost.
inline SolveResult solve_discounted(const NlpView& view, const Decision& init,
                                    const SolverSettings& settings) {
    if (view.kind() != CostKind::discounted)
        throw std::invalid_argument("solve_discounted: view must carry the discounted cost");
    return detail::solve_gn(view, init, settings);
}

inline SolveResult solve(const NlpView& view, const Decision& init, const SolverSettings& settings) {
    return view.kind() == CostKind::quadratic ? solve_quadratic(view, init, settings)
                                              : solve_discounted(view, init, settings);
}

enum class WarmStart { candidate, shifted };

/// Warm start for the budgeted solve. `candidate` reuses the fresh candidate
/// solution; `shifted` advances the previous solution by one stage, appending
/// a zero disturbance/noise stage (the one-step forward prediction), then
/// clamps the result feasible.
inline Decision warm_start_shift(const Decision& prev, const Window& prev_window,
                                 const Window& new_window, const DiscreteSystem& sys,
                                 WarmStart mode, const Decision& candidate,
                                 const DecisionSets& sets) {
    if (mode == WarmStart::candidate) return candidate;
    if (prev_window.t + 1 != new_window.t)
        throw std::invalid_argument("warm_start_shift: windows are not consecutive");
    const int prev_n = prev_window.calN;
    const int new_n = new_window.calN;
    if (new_n != prev_n && new_n != prev_n + 1)
        throw std::invalid_argument("warm_start_shift: horizon misalignment");

    Decision shifted;
    if (new_n == prev_n + 1) {
        // Growing window: same start time, one more stage at the end.
        shifted = prev;
    } else {
        const auto roll = rollout(sys, prev, prev_window.stage_inputs());
        shifted.chi = roll.states[1];
        shifted.omegas.assign(prev.omegas.begin() + 1, prev.omegas.end());
        shifted.nus.assign(prev.nus.begin() + 1, prev.nus.end());
    }
    shifted.omegas.push_back(Eigen::VectorXd::Zero(sys.n_w));
    shifted.nus.push_back(Eigen::VectorXd::Zero(sys.n_v));
    return clamp_decision(sys, std::move(shifted), new_window.stage_inputs(), sets);
}

/// Test oracle: generously budgeted multistart descent. Runs the solver from
/// the candidate plus `multistarts` random feasible points and returns the
/// best decision found. Intended for small horizons only.
inline SolveResult brute_force_reference(const NlpView& view, const Decision& candidate,
                                         SolverSettings settings, int multistarts,
                                         std::uint64_t seed) {
    settings.budget = std::max(settings.budget, 500);
    SolveResult best = solve(view, candidate, settings);

    const CounterRng rng(seed);
    const auto& sets = view.sets();
    const int nx = view.system().n_x, nw = view.system().n_w, nv = view.system().n_v;
    auto span = [](const BoxSet& box, Eigen::Index i, double center, double& lo, double& hi) {
        lo = box.lower[i];
        hi = box.upper[i];
        if (!std::isfinite(lo) || !std::isfinite(hi)) {
            const double r = std::max(1.0, std::abs(center));
            lo = center - r;
            hi = center + r;
        }
    };
    for (int s = 0; s < multistarts; ++s) {
        Decision start;
        start.chi.resize(nx);
        std::uint64_t comp = 0;
        for (int i = 0; i < nx; ++i) {
            double lo, hi;
            span(sets.state, i, candidate.chi[i], lo, hi);
            start.chi[i] = rng.uniform(lo, hi, CounterRng::multistart, s, comp++);
        }
        start.omegas.resize(view.horizon());
        start.nus.resize(view.horizon());
        for (int k = 0; k < view.horizon(); ++k) {
            start.omegas[k].resize(nw);
            for (int i = 0; i < nw; ++i) {
                double lo, hi;
                span(sets.disturbance, i, 0.0, lo, hi);
                start.omegas[k][i] = rng.uniform(lo, hi, CounterRng::multistart, s, comp++);
            }
            start.nus[k].resize(nv);
            for (int i = 0; i < nv; ++i) {
                double lo, hi;
                span(sets.noise, i, 0.0, lo, hi);
                start.nus[k][i] = rng.uniform(lo, hi, CounterRng::multistart, s, comp++);
            }
        }
        start = clamp_decision(view.system(), std::move(start), view.stage_inputs(), sets);
        if (!is_feasible(view.system(), start, view.stage_inputs(), sets)) continue;
        SolveResult r = solve(view, start, settings);
        if (r.cost < best.cost) best = std::move(r);
    }
    return best;
}

}  // namespace submhe
