#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <vector>

#include "submhe/box_set.hpp"
#include "submhe/cost.hpp"
#include "submhe/system.hpp"

namespace submhe {

enum class CandidateKind { nominal, observer_trajectory };

/// Constraint sets of the MHE decision variables. These are configuration
/// dependent: without state constraints the state box is unbounded, and the
/// observer-trajectory candidate requires an unbounded disturbance box.
struct DecisionSets {
    BoxSet state;
    BoxSet disturbance;
    BoxSet noise;
};

/// chi, every rolled state, every omega and every nu inside their sets,
/// componentwise within tol.
inline bool is_feasible(const DiscreteSystem& sys, const Decision& dec,
                        const std::vector<Eigen::VectorXd>& inputs, const DecisionSets& sets,
                        double tol = 1e-9) {
    if (!sets.state.contains(dec.chi, tol)) return false;
    for (const auto& w : dec.omegas)
        if (!sets.disturbance.contains(w, tol)) return false;
    for (const auto& v : dec.nus)
        if (!sets.noise.contains(v, tol)) return false;
    const auto roll = rollout(sys, dec, inputs);
    for (const auto& x : roll.states)
        if (!sets.state.contains(x, tol)) return false;
    return true;
}

/// Clamp the decision boxes, then sweep the rollout once and absorb any
/// state-box violations into the disturbance estimates (additive systems
/// only). The result is not guaranteed feasible when the disturbance box is
/// too tight to hold the corrections; callers re-verify with is_feasible.
inline Decision clamp_decision(const DiscreteSystem& sys, Decision dec,
                               const std::vector<Eigen::VectorXd>& inputs,
                               const DecisionSets& sets) {
    dec.chi = sets.state.project(dec.chi);
    for (auto& w : dec.omegas) w = sets.disturbance.project(w);
    for (auto& v : dec.nus) v = sets.noise.project(v);
    if (!sys.additive_disturbance || dec.omegas.empty()) return dec;

    Eigen::VectorXd x = dec.chi;
    for (std::size_t k = 0; k < dec.omegas.size(); ++k) {
        Eigen::VectorXd next = step(sys, x, inputs[k], dec.omegas[k]);
        if (!sets.state.contains(next)) {
            dec.omegas[k] = sets.disturbance.project(dec.omegas[k] + sets.state.project(next) - next);
            next = step(sys, x, inputs[k], dec.omegas[k]);
        }
        x = std::move(next);
    }
    return dec;
}

struct PriorResult {
    Eigen::VectorXd prior;
    Eigen::VectorXd projection_error;  // z - p_X(z); zero when not projecting
};

/// Prior at the beginning of the window: the re-initialized observer
/// estimate, projected onto the state set when constraints are active.
inline PriorResult prior_from_observer(const Eigen::VectorXd& z_at_prior, bool project,
                                       const BoxSet& state_set) {
    PriorResult out;
    if (project) {
        out.prior = state_set.project(z_at_prior);
        out.projection_error = z_at_prior - out.prior;
    } else {
        out.prior = z_at_prior;
        out.projection_error = Eigen::VectorXd::Zero(z_at_prior.size());
    }
    return out;
}

/// Nominal-trajectory candidate: the (projected) observer estimate at the
/// start of the window with zero disturbance and noise estimates. When the
/// state set is not forward invariant under the nominal dynamics, rolled
/// states are clamped and the corrections absorbed into the disturbance
/// estimates (additive systems).
inline Decision candidate_nominal(const DiscreteSystem& sys, const Eigen::VectorXd& z_at_prior,
                                  const std::vector<Eigen::VectorXd>& inputs, bool project,
                                  const DecisionSets& sets) {
    Decision dec;
    dec.chi = project ? sets.state.project(z_at_prior) : z_at_prior;
    dec.omegas.assign(inputs.size(), Eigen::VectorXd::Zero(sys.n_w));
    dec.nus.assign(inputs.size(), Eigen::VectorXd::Zero(sys.n_v));
    if (project && !is_feasible(sys, dec, inputs, sets, 0.0))
        dec = clamp_decision(sys, std::move(dec), inputs, sets);
    return dec;
}

/// Observer-trajectory candidate. Unprojected, the disturbance estimates are
/// the injection terms, so the rollout reproduces the observer trajectory
/// exactly. Projected, every stage state is pinned to the projected observer
/// state by one-step controllability:
///   w_k = p_X(z_{k+1}) - f_n(x_k, u_k).
/// Requires additive disturbances and an unbounded disturbance box.
inline Decision candidate_observer(const DiscreteSystem& sys,
                                   const std::vector<Eigen::VectorXd>& z_seq,
                                   const std::vector<Eigen::VectorXd>& injections,
                                   const std::vector<Eigen::VectorXd>& inputs, bool project,
                                   const DecisionSets& sets) {
    if (!sys.additive_disturbance)
        throw std::invalid_argument(
            "candidate_observer: requires additive disturbance structure");
    if (sets.disturbance.bounded())
        throw std::invalid_argument(
            "candidate_observer: requires an unbounded disturbance set");
    const std::size_t n = inputs.size();
    if (z_seq.size() != n + 1 || injections.size() != n)
        throw std::invalid_argument("candidate_observer: sequence lengths inconsistent");

    Decision dec;
    dec.nus.assign(n, Eigen::VectorXd::Zero(sys.n_v));
    dec.omegas.resize(n);
    if (!project) {
        dec.chi = z_seq.front();
        for (std::size_t k = 0; k < n; ++k) dec.omegas[k] = injections[k];
        return dec;
    }
    dec.chi = sets.state.project(z_seq.front());
    Eigen::VectorXd x = dec.chi;
    for (std::size_t k = 0; k < n; ++k) {
        const Eigen::VectorXd target = sets.state.project(z_seq[k + 1]);
        dec.omegas[k] = target - step_nominal(sys, x, inputs[k]);
        x = target;
    }
    return dec;
}

using CostFn = std::function<double(const Decision&)>;

/// The suboptimal-estimator acceptance rule: the proposal replaces the
/// candidate iff it is feasible and does not increase the cost (ties go to
/// the proposal). The candidate must be feasible; that is the caller's
/// contract.
inline const Decision& accept(const DiscreteSystem& sys, const Decision& candidate,
                              const Decision& proposal, const CostFn& cost_fn,
                              const std::vector<Eigen::VectorXd>& inputs, const DecisionSets& sets,
                              double tol = 1e-9) {
    if (!is_feasible(sys, candidate, inputs, sets, tol))
        throw std::logic_error("accept: candidate solution is infeasible");
    if (!is_feasible(sys, proposal, inputs, sets, tol)) return candidate;
    return cost_fn(proposal) <= cost_fn(candidate) ? proposal : candidate;
}

}  // namespace submhe
