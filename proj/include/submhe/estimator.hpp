#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

#include "submhe/candidates.hpp"
#include "submhe/cost.hpp"
#include "submhe/observer.hpp"
#include "submhe/solver.hpp"
#include "submhe/system.hpp"

namespace submhe {

struct MheConfig {
    int N = 3;
    int T = 5;  // 0 selects the "T = t" mode: the observer is initialized only once
    CostKind cost_kind = CostKind::quadratic;
    CandidateKind candidate_kind = CandidateKind::nominal;
    bool project = true;
    CostWeights weights;
    SolverSettings solver;
    WarmStart warm_start = WarmStart::candidate;
    Eigen::VectorXd initial_guess;  // \bar{x}_0
    bool log_window_projection_errors = false;

    void validate(const DiscreteSystem& sys) const {
        if (N < 1) throw std::invalid_argument("MheConfig: N must be >= 1");
        if (T != 0 && T <= N) throw std::invalid_argument("MheConfig: T must exceed N");
        if (initial_guess.size() != sys.n_x)
            throw std::invalid_argument("MheConfig: initial guess dimension mismatch");
        if (candidate_kind == CandidateKind::observer_trajectory && !sys.additive_disturbance)
            throw std::invalid_argument(
                "MheConfig: observer-trajectory candidate requires additive disturbances");
        weights.validate(cost_kind);
        solver.validate();
    }
};

/// Per-step log of one estimator call.
struct StepInfo {
    long t = 0;
    Eigen::VectorXd x_hat;
    Eigen::VectorXd z_now;  // observer state z_{t|t} after the window roll
    double cost_candidate = 0.0;
    double cost_accepted = 0.0;
    int iterations_used = 0;
    double eps_prior_norm = 0.0;      // |z_{t-calN|t} - p_X(z_{t-calN|t})|
    std::vector<double> eps_window;   // |eps_{t-i|t}| by lag i = 0..calT (when logged)
};

/// Suboptimal moving horizon estimator: budgeted optimization guarded by the
/// candidate's cost, with the auxiliary observer re-initialized from the
/// suboptimal estimate T steps back. One instance is strictly sequential;
/// distinct instances are independent.
class Estimator {
public:
    Estimator(DiscreteSystem sys, OutputInjectionObserver obs, MheConfig config)
        : sys_(std::move(sys)), obs_(std::move(obs)), config_(std::move(config)) {
        config_.validate(sys_);
        sets_.state = config_.project ? sys_.state_set : BoxSet::unbounded(sys_.n_x);
        sets_.disturbance = config_.candidate_kind == CandidateKind::observer_trajectory
                                ? BoxSet::unbounded(sys_.n_w)
                                : sys_.disturbance_set;
        sets_.noise = sys_.noise_set;

        Eigen::VectorXd x0 = config_.project ? sys_.state_set.project(config_.initial_guess)
                                             : config_.initial_guess;
        x_hat_hist_.push_back(x0);
        StepInfo info;
        info.t = 0;
        info.x_hat = x0;
        info.z_now = x0;
        info.eps_prior_norm = (config_.initial_guess - x0).norm();
        if (config_.log_window_projection_errors)
            info.eps_window = {info.eps_prior_norm};
        last_info_ = std::move(info);
    }

    long time() const { return t_; }
    const Eigen::VectorXd& estimate() const { return x_hat_hist_.back(); }
    const StepInfo& last_step() const { return last_info_; }
    const DecisionSets& decision_sets() const { return sets_; }
    const DiscreteSystem& system() const { return sys_; }

    /// Advance the estimator with the data pair (u_{t-1}, y_{t-1}) and return
    /// the new estimate \hat{x}_t. Solver failures fall back to the candidate
    /// solution; the step itself never fails.
    const Eigen::VectorXd& step(const Eigen::VectorXd& u_prev, const Eigen::VectorXd& y_prev) {
        ++t_;
        u_hist_.push_back(u_prev);
        y_hist_.push_back(y_prev);

        const int calN = static_cast<int>(std::min<long>(t_, config_.N));
        const long t_horizon = config_.T == 0 ? t_ : config_.T;
        const int calT = static_cast<int>(std::min<long>(t_, t_horizon));

        Window window;
        window.t = t_;
        window.N = config_.N;
        window.T = config_.T == 0 ? static_cast<int>(t_) : config_.T;
        window.calN = calN;
        window.calT = calT;
        window.inputs.assign(u_hist_.end() - calT, u_hist_.end());
        window.outputs.assign(y_hist_.end() - calT, y_hist_.end());
        window.x_hat_past = x_hat_hist_[t_ - calT];
        window.validate();

        std::vector<Eigen::VectorXd> injections;
        const auto z = reinit_and_roll_with_injections(obs_, sys_, window.x_hat_past,
                                                       window.inputs, window.outputs,
                                                       static_cast<std::size_t>(calT), injections);
        const Eigen::VectorXd& z_at_prior = z[calT - calN];
        const auto prior = prior_from_observer(z_at_prior, config_.project, sys_.state_set);

        const auto stage_inputs = window.stage_inputs();
        Decision candidate;
        if (config_.candidate_kind == CandidateKind::nominal) {
            candidate = candidate_nominal(sys_, z_at_prior, stage_inputs, config_.project, sets_);
        } else {
            const std::vector<Eigen::VectorXd> z_tail(z.end() - (calN + 1), z.end());
            const std::vector<Eigen::VectorXd> inj_tail(injections.end() - calN, injections.end());
            candidate = candidate_observer(sys_, z_tail, inj_tail, stage_inputs, config_.project,
                                           sets_);
        }

        if (!is_feasible(sys_, candidate, stage_inputs, sets_, config_.solver.feasibility_tol))
            throw std::logic_error("Estimator::step: constructed candidate is infeasible");

        NlpView view(sys_, window, prior.prior, config_.weights, config_.cost_kind, sets_);
        const double cost_candidate = view.true_cost(view.pack(candidate));

        Decision accepted = candidate;
        double cost_accepted = cost_candidate;
        int iterations = 0;
        if (config_.solver.budget > 0 && calN > 0) {
            try {
                Decision start = candidate;
                if (config_.warm_start == WarmStart::shifted && prev_decision_)
                    start = warm_start_shift(*prev_decision_, prev_window_, window, sys_,
                                             WarmStart::shifted, candidate, sets_);
                const SolveResult res = solve(view, start, config_.solver);
                iterations = res.iterations_used;
                const auto cost_fn = [&](const Decision& d) { return view.true_cost(view.pack(d)); };
                accepted = accept(sys_, candidate, res.decision, cost_fn, stage_inputs, sets_,
                                  config_.solver.feasibility_tol);
                cost_accepted = view.true_cost(view.pack(accepted));
            } catch (const std::logic_error&) {
                throw;  // contract violations are programmer errors
            } catch (const std::exception&) {
                accepted = candidate;  // numerical trouble: keep the candidate
                cost_accepted = cost_candidate;
            }
        }

        const auto roll = rollout(sys_, accepted, stage_inputs);
        // Published estimates satisfy the known state constraints exactly;
        // the rolled state can sit a solver tolerance outside the box.
        x_hat_hist_.push_back(config_.project ? sys_.state_set.project(roll.states.back())
                                              : roll.states.back());

        StepInfo info;
        info.t = t_;
        info.x_hat = x_hat_hist_.back();
        info.z_now = z.back();
        info.cost_candidate = cost_candidate;
        info.cost_accepted = cost_accepted;
        info.iterations_used = iterations;
        info.eps_prior_norm = prior.projection_error.norm();
        if (config_.log_window_projection_errors) {
            info.eps_window.resize(calT + 1);
            for (int lag = 0; lag <= calT; ++lag)
                info.eps_window[lag] = (z[calT - lag] - sys_.state_set.project(z[calT - lag])).norm();
        }
        last_info_ = std::move(info);
        prev_decision_ = std::move(accepted);
        prev_window_ = std::move(window);
        return x_hat_hist_.back();
    }

private:
    DiscreteSystem sys_;
    OutputInjectionObserver obs_;
    MheConfig config_;
    DecisionSets sets_;

    long t_ = 0;
    std::vector<Eigen::VectorXd> u_hist_;
    std::vector<Eigen::VectorXd> y_hist_;
    std::vector<Eigen::VectorXd> x_hat_hist_;
    std::optional<Decision> prev_decision_;
    Window prev_window_;
    StepInfo last_info_;
};

}  // namespace submhe
