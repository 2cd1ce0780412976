#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "submhe/observer.hpp"
#include "submhe/system.hpp"

namespace submhe {

enum class CostKind { quadratic, discounted };

/// Stage and prior weights of the MHE cost. Lower and upper bounding weights
/// coincide (the compatibility condition against the e-IOSS constants is
/// parameterized with equality, which gives the best possible guarantees).
struct CostWeights {
    double c_p = 1.0;
    double c_w = 1.0;
    double c_v = 1.0;
    double c_y = 1.0;
    double a = 2.0;          // cost exponent; 1 for the time-discounted cost
    double eta_bar = 0.985;  // discount, used only by the time-discounted cost

    void validate(CostKind kind) const {
        if (c_p <= 0 || c_w <= 0 || c_v <= 0 || c_y <= 0)
            throw std::invalid_argument("CostWeights: weights must be positive");
        if (a < 1.0) throw std::invalid_argument("CostWeights: exponent must satisfy a >= 1");
        if (kind == CostKind::discounted) {
            if (a != 1.0)
                throw std::invalid_argument("CostWeights: time-discounted cost requires a = 1");
            if (eta_bar <= 0.0 || eta_bar >= 1.0)
                throw std::invalid_argument("CostWeights: eta_bar must lie in (0,1)");
        }
    }

    /// Weights satisfying the compatibility floor with equality for the given
    /// e-IOSS constants.
    static CostWeights compatible(const EiossConstants& e, CostKind kind) {
        CostWeights w;
        w.c_p = e.c_p;
        w.c_w = e.c_w;
        w.c_v = e.c_v;
        w.c_y = e.c_y;
        w.a = kind == CostKind::quadratic ? 2.0 : 1.0;
        w.eta_bar = e.eta;
        w.validate(kind);
        return w;
    }
};

/// Data of one MHE problem instance: the window [t - calT, t - 1] of inputs
/// and outputs together with the estimate the observer is re-initialized
/// from. calN = min(t, N) of the entries feed the cost; calT = min(t, T) of
/// them feed the observer roll.
struct Window {
    long t = 0;
    int N = 0;
    int T = 0;
    int calN = 0;
    int calT = 0;
    std::vector<Eigen::VectorXd> inputs;   // u_{t-calT} ... u_{t-1}
    std::vector<Eigen::VectorXd> outputs;  // y_{t-calT} ... y_{t-1}
    Eigen::VectorXd x_hat_past;            // \hat{x}_{t-calT}

    void validate() const {
        if (calN > calT) throw std::invalid_argument("Window: calN exceeds calT");
        if (inputs.size() != static_cast<std::size_t>(calT) ||
            outputs.size() != static_cast<std::size_t>(calT))
            throw std::invalid_argument("Window: buffers must hold exactly calT entries");
    }

    /// The last calN inputs, aligned with the decision stages.
    std::vector<Eigen::VectorXd> stage_inputs() const {
        return {inputs.end() - calN, inputs.end()};
    }
    std::vector<Eigen::VectorXd> stage_outputs() const {
        return {outputs.end() - calN, outputs.end()};
    }
};

/// MHE decision triple: initial window state chi, disturbance estimates and
/// noise estimates for the calN stages.
struct Decision {
    Eigen::VectorXd chi;
    std::vector<Eigen::VectorXd> omegas;
    std::vector<Eigen::VectorXd> nus;

    int horizon() const { return static_cast<int>(omegas.size()); }
};

struct Rollout {
    std::vector<Eigen::VectorXd> states;   // calN + 1 states
    std::vector<Eigen::VectorXd> outputs;  // calN predicted outputs
};

/// States and predicted outputs induced by a decision; membership in the
/// trajectory set is by construction.
inline Rollout rollout(const DiscreteSystem& sys, const Decision& dec,
                       const std::vector<Eigen::VectorXd>& inputs) {
    if (dec.omegas.size() != dec.nus.size() || dec.omegas.size() != inputs.size())
        throw std::invalid_argument("rollout: stage sequence lengths differ");
    Rollout r;
    r.states.reserve(inputs.size() + 1);
    r.states.push_back(dec.chi);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        r.outputs.push_back(output(sys, r.states.back(), inputs[k], dec.nus[k]));
        Eigen::VectorXd next = step(sys, r.states.back(), inputs[k], dec.omegas[k]);
        if (!next.allFinite()) throw std::runtime_error("rollout: non-finite state");
        r.states.push_back(std::move(next));
    }
    return r;
}

/// Non-discounted cost
///   J = c_p |chi - prior|^a
///     + sum_{i=1}^{calN} ( c_w |w_{t-i}|^a + c_v |v_{t-i}|^a + c_y |y_{t-i} - zeta_{t-i}|^a ).
/// The output-fit term is a penalty; estimated outputs are never constrained
/// to match the measurements exactly.
inline double cost_nd(const DiscreteSystem& sys, const Decision& dec, const Window& window,
                      const Eigen::VectorXd& prior, const CostWeights& w) {
    const auto inputs = window.stage_inputs();
    const auto outputs = window.stage_outputs();
    const auto roll = rollout(sys, dec, inputs);
    const double a = w.a;
    double cost = w.c_p * std::pow((dec.chi - prior).norm(), a);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        cost += w.c_w * std::pow(dec.omegas[k].norm(), a);
        cost += w.c_v * std::pow(dec.nus[k].norm(), a);
        cost += w.c_y * std::pow((outputs[k] - roll.outputs[k]).norm(), a);
    }
    return cost;
}

/// Time-discounted cost with a = 1,
///   J = eta_bar^calN c_p |chi - prior|
///     + sum_{i=1}^{calN} eta_bar^i ( c_w |w_{t-i}| + c_v |v_{t-i}| + c_y |y_{t-i} - zeta_{t-i}| ),
/// where i counts backward from t (i = 1 is the most recent stage).
inline double cost_td(const DiscreteSystem& sys, const Decision& dec, const Window& window,
                      const Eigen::VectorXd& prior, const CostWeights& w) {
    const auto inputs = window.stage_inputs();
    const auto outputs = window.stage_outputs();
    const auto roll = rollout(sys, dec, inputs);
    const int n = static_cast<int>(inputs.size());
    double cost = std::pow(w.eta_bar, n) * w.c_p * (dec.chi - prior).norm();
    for (int k = 0; k < n; ++k) {
        const double disc = std::pow(w.eta_bar, n - k);  // i = calN - k
        cost += disc * (w.c_w * dec.omegas[k].norm() + w.c_v * dec.nus[k].norm() +
                        w.c_y * (outputs[k] - roll.outputs[k]).norm());
    }
    return cost;
}

inline double cost(CostKind kind, const DiscreteSystem& sys, const Decision& dec,
                   const Window& window, const Eigen::VectorXd& prior, const CostWeights& w) {
    return kind == CostKind::quadratic ? cost_nd(sys, dec, window, prior, w)
                                       : cost_td(sys, dec, window, prior, w);
}

}  // namespace submhe
