#pragma once

#include <Eigen/Dense>

#include <stdexcept>

#include "submhe/system.hpp"

namespace submhe {

/// Rate constants and Euler step size of the batch-reactor benchmark
/// (reactions A <-> B + C, 2B <-> C), in the paper's dimensionless scaling.
struct ReactorParams {
    double p1 = 0.2;
    double p2 = 0.05;
    double p3 = 0.2;
    double p4 = 0.1;
    double t_delta = 0.25;

    void validate() const {
        if (p1 <= 0 || p2 <= 0 || p3 <= 0 || p4 <= 0)
            throw std::invalid_argument("ReactorParams: rate constants must be positive");
        if (t_delta <= 0) throw std::invalid_argument("ReactorParams: t_delta must be positive");
    }
};

/// The observer's working set Xbar, a proper superset of X: the Luenberger
/// estimates may transiently leave [0,4]^3, so the certificate is established
/// on -0.03 <= x2 <= 4, -2 <= x3 <= 4 with x1 unconstrained.
inline BoxSet reactor_certificate_domain() {
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::Vector3d lo(-inf, -0.03, -2.0);
    Eigen::Vector3d hi(inf, 4.0, 4.0);
    return BoxSet(lo, hi);
}

/// Euler-discretized batch reactor with additive process disturbance and
/// measured total concentration y = x1 + x2 + x3 + v.
///
/// State constraints X = [0,4]^3, disturbance bounds |w_i| <= 2e-3 and noise
/// bound |v| <= 1e-2. The system has no control input; `u` is an empty
/// vector everywhere.
inline DiscreteSystem reactor_model(const ReactorParams& params = {}) {
    params.validate();
    DiscreteSystem sys;
    sys.n_x = 3;
    sys.n_u = 0;
    sys.n_w = 3;
    sys.n_v = 1;
    sys.n_y = 1;

    const double p1 = params.p1, p2 = params.p2, p3 = params.p3, p4 = params.p4;
    const double td = params.t_delta;

    sys.step_map = [p1, p2, p3, p4, td](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                                        const Eigen::VectorXd& w) {
        Eigen::VectorXd next(3);
        const double x1 = x[0], x2 = x[1], x3 = x[2];
        next[0] = x1 + td * (-p1 * x1 + p2 * x2 * x3) + w[0];
        next[1] = x2 + td * (p1 * x1 - p2 * x2 * x3 - 2.0 * p3 * x2 * x2 + 2.0 * p4 * x3) + w[1];
        next[2] = x3 + td * (p1 * x1 - p2 * x2 * x3 + p3 * x2 * x2 - p4 * x3) + w[2];
        return next;
    };
    sys.output_map = [](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                        const Eigen::VectorXd& v) {
        Eigen::VectorXd y(1);
        y[0] = x[0] + x[1] + x[2] + v[0];
        return y;
    };

    sys.jac_fx = [p1, p2, p3, p4, td](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                                      const Eigen::VectorXd&) {
        const double x2 = x[1], x3 = x[2];
        Eigen::Matrix3d jg;
        jg << -p1, p2 * x3, p2 * x2,
              p1, -p2 * x3 - 4.0 * p3 * x2, -p2 * x2 + 2.0 * p4,
              p1, -p2 * x3 + 2.0 * p3 * x2, -p2 * x2 - p4;
        return Eigen::MatrixXd(Eigen::Matrix3d::Identity() + td * jg);
    };
    sys.jac_fw = [](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return Eigen::MatrixXd(Eigen::Matrix3d::Identity());
    };
    sys.jac_hx = [](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return Eigen::MatrixXd(Eigen::RowVector3d::Ones());
    };
    sys.jac_hv = [](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return Eigen::MatrixXd(Eigen::MatrixXd::Ones(1, 1));
    };

    sys.state_set = BoxSet(Eigen::Vector3d::Zero(), Eigen::Vector3d::Constant(4.0));
    sys.input_set = BoxSet(Eigen::VectorXd(0), Eigen::VectorXd(0));
    sys.disturbance_set = BoxSet::centered(3, 2e-3);
    sys.noise_set = BoxSet::centered(1, 1e-2);

    sys.additive_disturbance = true;
    sys.jac_state_dependencies = {1, 2};  // the Jacobian is affine in (x2, x3)

    const auto lip = lipschitz_bounds(sys, reactor_certificate_domain());
    sys.lipschitz_F = lip.F;
    sys.lipschitz_H = lip.H;
    return sys;
}

}  // namespace submhe
