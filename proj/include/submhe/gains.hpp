#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "submhe/candidates.hpp"
#include "submhe/cost.hpp"
#include "submhe/observer.hpp"

namespace submhe {

/// Which estimator setup a gain computation refers to: candidate family,
/// cost family, and whether the state constraints (and hence projection
/// errors) are active.
struct Variant {
    CandidateKind candidate = CandidateKind::nominal;
    CostKind cost = CostKind::quadratic;
    bool projected = true;

    std::string name() const {
        std::string s = candidate == CandidateKind::nominal ? "nominal" : "observer";
        s += cost == CostKind::quadratic ? "/quadratic" : "/discounted";
        if (projected) s += "/projected";
        return s;
    }
};

/// Every constant feeding the robust-stability gain formulas: the e-IOSS
/// constants of the plant, the RGES constants of the auxiliary observer, the
/// Lipschitz data of the system, and the (upper) cost weights.
struct TheoryParams {
    // e-IOSS constants of the plant
    double c_p = 1.0, c_u = 0.0, c_w = 1.0, c_v = 1.0, c_y = 1.0;
    double eta = 0.985;

    // RGES constants of the auxiliary observer
    double C_p = 1.0, C_w = 1.0, C_v = 1.0;
    double rho = 0.985;
    double kappa = 0.0;

    // system constants
    double F = 1.0;
    double H = 1.0;

    // cost constants
    double a = 2.0;
    double cbar_w = 1.0, cbar_y = 1.0;
    double eta_bar = 0.985;

    double alpha() const { return 1.0 / a; }
    double C() const { return std::max({1.0, 1.0 / (C_w * C_w), 1.0 / (C_v * C_v)}); }
    double c() const { return std::max(1.0, 1.0 / C_v); }

    void validate(CostKind kind) const {
        if (!(eta <= rho && rho < 1.0))
            throw std::invalid_argument("TheoryParams: need eta <= rho < 1");
        if (eta >= 1.0 || eta <= 0.0)
            throw std::invalid_argument("TheoryParams: eta must lie in (0,1)");
        if (F < 1.0) throw std::invalid_argument("TheoryParams: F must satisfy F >= 1");
        if (kind == CostKind::discounted) {
            if (a != 1.0) throw std::invalid_argument("TheoryParams: discounted cost needs a = 1");
            if (!(eta <= eta_bar && eta_bar < 1.0))
                throw std::invalid_argument("TheoryParams: need eta <= eta_bar < 1");
        }
    }
};

/// Parameters of the reactor pipeline: e-IOSS constants from the observer
/// certificate, compatibility-equal cost weights, and the chosen (F, H).
inline TheoryParams theory_params(const EiossConstants& e, const ObserverCertificate& cert,
                                  double F, double H, CostKind kind) {
    TheoryParams p;
    p.c_p = e.c_p;
    p.c_u = e.c_u;
    p.c_w = e.c_w;
    p.c_v = e.c_v;
    p.c_y = e.c_y;
    p.eta = e.eta;
    p.C_p = cert.C_p;
    p.C_w = cert.C_w;
    p.C_v = cert.C_v;
    p.rho = cert.rho;
    p.kappa = cert.kappa;
    p.F = F;
    p.H = H;
    p.a = kind == CostKind::quadratic ? 2.0 : 1.0;
    p.cbar_w = e.c_w;
    p.cbar_y = e.c_y;
    p.eta_bar = e.eta;
    p.validate(kind);
    return p;
}

namespace detail {

/// sum_{i=1}^{n} r^i, with the degenerate r = 1 branch returning n.
inline double geometric_sum(double r, int n) {
    if (n <= 0) return 0.0;
    if (r == 1.0) return static_cast<double>(n);
    return r * (1.0 - std::pow(r, n)) / (1.0 - r);
}

}  // namespace detail

/// sigma_N = H C (F / rho)^N, the fitting-error amplification of the
/// nominal-trajectory candidate.
inline double sigma_N(const TheoryParams& p, int n) {
    if (n < 0) throw std::invalid_argument("sigma_N: horizon must be nonnegative");
    return p.H * p.C() * std::pow(p.F / p.rho, n);
}

/// The cost-bound constant sigma_bar_N of the given variant. Zero at N = 0
/// (empty stage sum). Degenerate bases (F = 1, eta_bar = rho) take the
/// linear-in-N branch.
inline double sigma_bar(const TheoryParams& p, int n, const Variant& variant) {
    if (n < 0) throw std::invalid_argument("sigma_bar: horizon must be nonnegative");
    p.validate(variant.cost);
    if (n == 0) return 0.0;
    if (variant.candidate == CandidateKind::nominal) {
        if (variant.cost == CostKind::quadratic)
            return p.cbar_y * std::pow(sigma_N(p, n), p.a) *
                   detail::geometric_sum(std::pow(p.F, -p.a), n);
        return p.cbar_y * sigma_N(p, n) * detail::geometric_sum(p.eta_bar / p.F, n);
    }
    if (variant.cost == CostKind::quadratic) {
        if (p.kappa <= 0.0 && !variant.projected)
            throw std::invalid_argument("sigma_bar: observer variants need kappa");
        const double hc = std::pow(p.H * p.c(), p.a);
        const double sum = detail::geometric_sum(std::pow(p.rho, -p.a), n);
        // Projected: the (cbar_w kappa^a + cbar_y) factor is carried in sigma1.
        if (variant.projected) return hc * sum;
        return (p.cbar_w * std::pow(p.kappa, p.a) + p.cbar_y) * hc * sum;
    }
    if (p.kappa <= 0.0) throw std::invalid_argument("sigma_bar: observer variants need kappa");
    return (p.cbar_w * p.kappa + p.cbar_y) * p.H * p.c() *
           detail::geometric_sum(p.eta_bar / p.rho, n);
}

/// Jensen factor c_N of the non-discounted cost; identically 1 for a = 1.
inline double c_script_N(const TheoryParams& p, int n) {
    if (p.eta >= 1.0) throw std::invalid_argument("c_script_N: eta must be below 1");
    const double base =
        p.c_p * std::pow(p.eta, n) +
        (p.eta - std::pow(p.eta, n + 1)) / (1.0 - p.eta) * (p.c_w + p.c_v + p.c_y);
    return std::pow(base, p.a - 1.0);
}

struct PerHorizonGains {
    int calN = 0;
    double sigma_bar = 0.0;
    double c_N = 1.0;
    double C1 = 0.0, C2 = 0.0, C3 = 0.0;
    double C_eps = 0.0;  // C_eps^*, projected variants only
};

/// The per-horizon gain triple (and projected-variant C_eps^*) of the given
/// variant, evaluated verbatim from the formula catalogue.
inline PerHorizonGains gains_per_N(const TheoryParams& p, int n, const Variant& variant) {
    PerHorizonGains g;
    g.calN = n;
    g.sigma_bar = sigma_bar(p, n, variant);
    g.c_N = c_script_N(p, n);

    const double decay = std::pow(p.eta / p.rho, n);
    double psi;
    if (variant.cost == CostKind::quadratic) {
        if (variant.candidate == CandidateKind::observer_trajectory && variant.projected) {
            const double sigma1 = p.cbar_w * p.kappa * std::pow(p.F + p.kappa, p.a - 1.0) +
                                  p.cbar_y * std::pow(p.H + 1.0, p.a - 1.0);
            psi = std::pow(2.0 * g.c_N * sigma1 * g.sigma_bar, p.alpha());
        } else {
            psi = std::pow(g.c_N * g.sigma_bar, p.alpha());
        }
    } else {
        psi = g.sigma_bar;
    }
    const double bracket = p.c_p * decay + psi;
    g.C1 = bracket * p.C_p;
    g.C2 = bracket * p.C_w + p.c_w * p.eta / p.rho;
    g.C3 = bracket * p.C_v + p.c_v * p.eta / p.rho;

    if (variant.projected) {
        if (variant.candidate == CandidateKind::nominal) {
            if (variant.cost == CostKind::quadratic)
                g.C_eps = p.c_p * decay + std::pow(g.c_N * g.sigma_bar, p.alpha()) / p.C();
            else
                g.C_eps = p.c_p * decay + g.sigma_bar / p.C();
        } else {
            if (variant.cost == CostKind::quadratic) {
                const double sigma2 = p.cbar_w * p.F * std::pow(p.F + p.kappa, p.a - 1.0) +
                                      p.cbar_y * p.H * std::pow(p.H + 1.0, p.a - 1.0);
                g.C_eps = p.c_p * decay +
                          std::pow(2.0 * g.c_N * sigma2, p.alpha()) * std::pow(p.rho, -n);
            } else {
                const double ratio = p.eta_bar / p.rho;
                const double factor =
                    n >= 1 ? std::max(ratio, std::pow(ratio, n)) : 1.0;
                g.C_eps = (p.c_p * std::pow(p.eta, n) + p.cbar_w * p.F + p.cbar_y * p.H) * factor;
            }
        }
    }
    return g;
}

/// Aggregate robust-stability certificate for one estimator variant.
struct GainReport {
    Variant variant;
    int N = 0;
    std::vector<PerHorizonGains> per_horizon;  // calN = 0..N
    double C1 = 0.0, C2 = 0.0, C3 = 0.0, C_eps = 0.0;
    int T_min = 0;
    int T_used = 0;
    double lambda = 0.0;
    bool certified = false;  // T_used >= T_min
    double rho = 0.0;
};

/// Aggregates the per-horizon gains over calN in [0, N], derives the minimum
/// re-initialization horizon T_min and the decay rate lambda for the
/// requested T (T_requested = 0 picks T_min). The report is flagged
/// non-certified when T falls short of T_min.
inline GainReport aggregate_gains(const TheoryParams& p, int N, int T_requested,
                                  const Variant& variant) {
    if (N < 1) throw std::invalid_argument("aggregate_gains: N must be >= 1");
    if (p.rho >= 1.0 || p.rho <= 0.0)
        throw std::invalid_argument("aggregate_gains: rho must lie in (0,1)");
    GainReport rep;
    rep.variant = variant;
    rep.N = N;
    rep.rho = p.rho;
    double m1 = 0.0, m2 = 0.0, m3 = 0.0, meps = 0.0;
    for (int n = 0; n <= N; ++n) {
        PerHorizonGains g = gains_per_N(p, n, variant);
        m1 = std::max(m1, g.C1);
        m2 = std::max(m2, g.C2);
        m3 = std::max(m3, g.C3);
        meps = std::max(meps, g.C_eps);
        rep.per_horizon.push_back(std::move(g));
    }
    rep.C1 = m1;

    const double threshold = m1 > 1.0 ? -std::log(m1) / std::log(p.rho) : 0.0;
    rep.T_min = std::max(N + 1, static_cast<int>(std::floor(threshold)) + 1);
    rep.T_used = T_requested > 0 ? T_requested : rep.T_min;
    rep.certified = rep.T_used >= rep.T_min;
    rep.lambda = std::pow(m1, 1.0 / rep.T_used) * p.rho;

    const double scale = std::pow(m1, -1.0 / rep.T_used);
    rep.C2 = scale * m2;
    rep.C3 = scale * m3;
    rep.C_eps = scale * meps;
    return rep;
}

/// Evaluate the robust-stability bound along a simulated run and return the
/// per-step margin (bound minus actual estimation error). The projection
/// errors eps[s][lag] are those logged at estimator call s for window lag
/// `lag`; the bound picks lag tau - j at call t - j with j = floor(tau/T)*T.
inline std::vector<double> empirical_rges_check(
    const std::vector<Eigen::VectorXd>& x, const std::vector<Eigen::VectorXd>& x_hat,
    const std::vector<Eigen::VectorXd>& w, const std::vector<Eigen::VectorXd>& v,
    const std::vector<std::vector<double>>& eps, const GainReport& report) {
    if (x.size() != x_hat.size())
        throw std::invalid_argument("empirical_rges_check: state sequences differ in length");
    const int t_max = static_cast<int>(x.size()) - 1;
    const int T = report.T_used;
    std::vector<double> margins(t_max + 1);
    const double e0 = (x[0] - x_hat[0]).norm();
    for (int t = 0; t <= t_max; ++t) {
        double bound = report.C1 * e0 * std::pow(report.lambda, t);
        double lam_tau = 1.0;
        for (int tau = 1; tau <= t; ++tau) {
            lam_tau *= report.lambda;
            double term = report.C2 * w[t - tau].norm() + report.C3 * v[t - tau].norm();
            if (report.C_eps > 0.0 && !eps.empty()) {
                const int j = (tau / T) * T;
                const int call = t - j;
                const int lag = tau - j;
                if (call >= 0 && call < static_cast<int>(eps.size()) &&
                    lag < static_cast<int>(eps[call].size()))
                    term += report.C_eps * eps[call][lag];
            }
            bound += lam_tau * term;
        }
        margins[t] = bound - (x[t] - x_hat[t]).norm();
    }
    return margins;
}

}  // namespace submhe
