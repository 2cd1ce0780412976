#pragma once

#include <Eigen/Dense>

#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "submhe/box_set.hpp"
#include "submhe/linalg.hpp"

namespace submhe {

using StateFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                              const Eigen::VectorXd& w)>;
using OutputFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                               const Eigen::VectorXd& v)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                                 const Eigen::VectorXd& wv)>;

/// Perturbed nonlinear discrete-time system
///   x+ = f(x, u, w),  y = h(x, u, v)
/// together with its constraint sets and the metadata needed by the
/// certificate machinery. Nominal maps are f and h at zero disturbance/noise.
///
/// Analytic Jacobians are optional; anything missing falls back to central
/// finite differences. `jac_state_dependencies` lists the state components the
/// state Jacobian depends on (affinely), which enables vertex-based Lipschitz
/// and contraction analysis.
struct DiscreteSystem {
    int n_x = 0, n_u = 0, n_w = 0, n_v = 0, n_y = 0;

    StateFn step_map;
    OutputFn output_map;

    JacobianFn jac_fx;  // d f / d x   (n_x by n_x)
    JacobianFn jac_fw;  // d f / d w   (n_x by n_w)
    JacobianFn jac_hx;  // d h / d x   (n_y by n_x)
    JacobianFn jac_hv;  // d h / d v   (n_y by n_v)

    BoxSet state_set;        // X
    BoxSet input_set;        // U
    BoxSet disturbance_set;  // W
    BoxSet noise_set;        // V

    bool additive_disturbance = false;           // f(x,u,w) = f_n(x,u) + w
    std::vector<int> jac_state_dependencies;     // affine dependencies of jac_fx

    double lipschitz_F = 1.0;
    double lipschitz_H = 1.0;

    Eigen::VectorXd zero_input() const { return Eigen::VectorXd::Zero(n_u); }
    Eigen::VectorXd zero_disturbance() const { return Eigen::VectorXd::Zero(n_w); }
    Eigen::VectorXd zero_noise() const { return Eigen::VectorXd::Zero(n_v); }
};

namespace detail {

inline void require_dim(const Eigen::VectorXd& v, Eigen::Index n, const char* what) {
    if (v.size() != n) {
        std::ostringstream os;
        os << "dimension mismatch: " << what << " has size " << v.size() << ", expected " << n;
        throw std::invalid_argument(os.str());
    }
}

template <typename Fn>
Eigen::MatrixXd central_difference(const Fn& fn, const Eigen::VectorXd& at, Eigen::Index n_out,
                                   double h = 1e-6) {
    Eigen::MatrixXd jac(n_out, at.size());
    Eigen::VectorXd p = at, m = at;
    for (Eigen::Index j = 0; j < at.size(); ++j) {
        const double hj = h * std::max(1.0, std::abs(at[j]));
        p[j] = at[j] + hj;
        m[j] = at[j] - hj;
        jac.col(j) = (fn(p) - fn(m)) / (2.0 * hj);
        p[j] = at[j];
        m[j] = at[j];
    }
    return jac;
}

}  // namespace detail

/// x+ = f(x, u, w)
inline Eigen::VectorXd step(const DiscreteSystem& sys, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
    detail::require_dim(x, sys.n_x, "state");
    detail::require_dim(u, sys.n_u, "input");
    detail::require_dim(w, sys.n_w, "disturbance");
    return sys.step_map(x, u, w);
}

/// y = h(x, u, v)
inline Eigen::VectorXd output(const DiscreteSystem& sys, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    detail::require_dim(x, sys.n_x, "state");
    detail::require_dim(u, sys.n_u, "input");
    detail::require_dim(v, sys.n_v, "noise");
    return sys.output_map(x, u, v);
}

/// f_n(x, u) = f(x, u, 0)
inline Eigen::VectorXd step_nominal(const DiscreteSystem& sys, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& u) {
    return step(sys, x, u, sys.zero_disturbance());
}

/// h_n(x, u) = h(x, u, 0)
inline Eigen::VectorXd output_nominal(const DiscreteSystem& sys, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& u) {
    return output(sys, x, u, sys.zero_noise());
}

inline Eigen::MatrixXd state_jacobian_at(const DiscreteSystem& sys, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
    if (sys.jac_fx) return sys.jac_fx(x, u, w);
    return detail::central_difference(
        [&](const Eigen::VectorXd& xi) { return sys.step_map(xi, u, w); }, x, sys.n_x);
}

/// Jacobian of the nominal dynamics: entry (i,j) = d f_n,i / d x_j.
inline Eigen::MatrixXd state_jacobian(const DiscreteSystem& sys, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& u) {
    detail::require_dim(x, sys.n_x, "state");
    detail::require_dim(u, sys.n_u, "input");
    return state_jacobian_at(sys, x, u, sys.zero_disturbance());
}

inline Eigen::MatrixXd disturbance_jacobian_at(const DiscreteSystem& sys, const Eigen::VectorXd& x,
                                               const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
    if (sys.jac_fw) return sys.jac_fw(x, u, w);
    if (sys.additive_disturbance) return Eigen::MatrixXd::Identity(sys.n_x, sys.n_w);
    return detail::central_difference(
        [&](const Eigen::VectorXd& wi) { return sys.step_map(x, u, wi); }, w, sys.n_x);
}

inline Eigen::MatrixXd output_state_jacobian_at(const DiscreteSystem& sys, const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (sys.jac_hx) return sys.jac_hx(x, u, v);
    return detail::central_difference(
        [&](const Eigen::VectorXd& xi) { return sys.output_map(xi, u, v); }, x, sys.n_y);
}

inline Eigen::MatrixXd output_noise_jacobian_at(const DiscreteSystem& sys, const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (sys.jac_hv) return sys.jac_hv(x, u, v);
    return detail::central_difference(
        [&](const Eigen::VectorXd& vi) { return sys.output_map(x, u, vi); }, v, sys.n_y);
}

/// A finite trajectory of the system: len+1 states, len outputs, aligned
/// input/disturbance/noise sequences.
struct Trajectory {
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> outputs;
    std::vector<Eigen::VectorXd> inputs;
    std::vector<Eigen::VectorXd> disturbances;
    std::vector<Eigen::VectorXd> noises;

    std::size_t steps() const { return outputs.size(); }
};

/// Forward rollout of the system. Throws on non-finite intermediate states,
/// naming the offending step.
inline Trajectory simulate(const DiscreteSystem& sys, const Eigen::VectorXd& x0,
                           const std::vector<Eigen::VectorXd>& inputs,
                           const std::vector<Eigen::VectorXd>& w_seq,
                           const std::vector<Eigen::VectorXd>& v_seq) {
    if (inputs.size() != w_seq.size() || inputs.size() != v_seq.size())
        throw std::invalid_argument("simulate: sequence lengths differ");
    if (!x0.allFinite()) throw std::invalid_argument("simulate: non-finite initial state");

    Trajectory traj;
    traj.states.reserve(inputs.size() + 1);
    traj.states.push_back(x0);
    traj.inputs = inputs;
    traj.disturbances = w_seq;
    traj.noises = v_seq;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        traj.outputs.push_back(output(sys, traj.states.back(), inputs[k], v_seq[k]));
        Eigen::VectorXd next = step(sys, traj.states.back(), inputs[k], w_seq[k]);
        if (!next.allFinite()) {
            std::ostringstream os;
            os << "simulate: numerical overflow at step " << k;
            throw std::runtime_error(os.str());
        }
        traj.states.push_back(std::move(next));
    }
    return traj;
}

struct LipschitzBounds {
    double F = 1.0;  // floored at 1
    double H = 1.0;
    bool sampled = false;  // true when dense sampling replaced vertex enumeration
};

namespace detail {

/// All corner assignments of the dependent components over the domain box;
/// free components sit at a finite reference point.
inline std::vector<Eigen::VectorXd> dependency_vertices(const DiscreteSystem& sys,
                                                        const BoxSet& domain) {
    if (domain.dim() != sys.n_x)
        throw std::invalid_argument("dependency_vertices: domain dimension mismatch");
    Eigen::VectorXd ref(sys.n_x);
    for (int i = 0; i < sys.n_x; ++i) {
        const double lo = domain.lower[i], hi = domain.upper[i];
        if (std::isfinite(lo) && std::isfinite(hi)) ref[i] = 0.5 * (lo + hi);
        else if (std::isfinite(lo)) ref[i] = lo;
        else if (std::isfinite(hi)) ref[i] = hi;
        else ref[i] = 0.0;
    }
    const auto& deps = sys.jac_state_dependencies;
    for (int d : deps)
        if (!std::isfinite(domain.lower[d]) || !std::isfinite(domain.upper[d]))
            throw std::domain_error(
                "certificate unavailable: domain unbounded in a Jacobian-dependent component");
    std::vector<Eigen::VectorXd> verts;
    const std::size_t count = std::size_t{1} << deps.size();
    verts.reserve(count);
    for (std::size_t mask = 0; mask < count; ++mask) {
        Eigen::VectorXd x = ref;
        for (std::size_t j = 0; j < deps.size(); ++j)
            x[deps[j]] = (mask >> j) & 1 ? domain.upper[deps[j]] : domain.lower[deps[j]];
        verts.push_back(std::move(x));
    }
    return verts;
}

}  // namespace detail

/// Lipschitz constants of the nominal dynamics (F) and the output map (H)
/// over the given domain. F is the max spectral norm of the state Jacobian,
/// floored at 1; H covers both the state and the noise channel of h.
///
/// With declared affine Jacobian dependencies the max is exact over the
/// dependency vertices; otherwise (documented as `sampled`) a dense sample of
/// 10^4 points is used and the domain must be fully bounded.
inline LipschitzBounds lipschitz_bounds(const DiscreteSystem& sys, const BoxSet& domain) {
    LipschitzBounds out;
    const Eigen::VectorXd u0 = sys.zero_input();
    const Eigen::VectorXd w0 = sys.zero_disturbance();
    const Eigen::VectorXd v0 = sys.zero_noise();

    std::vector<Eigen::VectorXd> points;
    if (!sys.jac_state_dependencies.empty() || sys.jac_fx) {
        points = detail::dependency_vertices(sys, domain);
    }
    if (sys.jac_state_dependencies.empty()) {
        // No affine structure declared: dense sampling fallback.
        if (!domain.bounded())
            throw std::domain_error("certificate unavailable: unbounded domain without "
                                    "declared Jacobian dependencies");
        out.sampled = true;
        points.clear();
        const int n_samples = 10000;
        std::uint64_t s = 0x9e3779b97f4a7c15ull;
        auto next01 = [&s]() {
            s += 0x9e3779b97f4a7c15ull;
            std::uint64_t z = s;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            z ^= z >> 31;
            return static_cast<double>(z >> 11) * 0x1.0p-53;
        };
        for (int k = 0; k < n_samples; ++k) {
            Eigen::VectorXd x(sys.n_x);
            for (int i = 0; i < sys.n_x; ++i)
                x[i] = domain.lower[i] + next01() * (domain.upper[i] - domain.lower[i]);
            points.push_back(std::move(x));
        }
    }

    double f_max = 0.0, hx_max = 0.0, hv_max = 0.0;
    for (const auto& x : points) {
        f_max = std::max(f_max, spectral_norm(state_jacobian_at(sys, x, u0, w0)));
        hx_max = std::max(hx_max, spectral_norm(output_state_jacobian_at(sys, x, u0, v0)));
        hv_max = std::max(hv_max, spectral_norm(output_noise_jacobian_at(sys, x, u0, v0)));
    }
    out.F = std::max(1.0, f_max);
    out.H = std::max(hx_max, hv_max);
    return out;
}

}  // namespace submhe
