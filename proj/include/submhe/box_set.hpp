#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>

namespace submhe {

/// Axis-aligned box with possibly infinite bounds. Membership and projection
/// are componentwise; the box is closed, so faces belong to the set.
struct BoxSet {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    BoxSet() = default;

    BoxSet(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
        if (lower.size() != upper.size())
            throw std::invalid_argument("BoxSet: bound dimensions differ");
        for (Eigen::Index i = 0; i < lower.size(); ++i)
            if (lower[i] > upper[i])
                throw std::invalid_argument("BoxSet: lower bound exceeds upper bound");
    }

    static BoxSet unbounded(Eigen::Index n) {
        const double inf = std::numeric_limits<double>::infinity();
        return BoxSet(Eigen::VectorXd::Constant(n, -inf), Eigen::VectorXd::Constant(n, inf));
    }

    /// Symmetric box |x_i| <= radius.
    static BoxSet centered(Eigen::Index n, double radius) {
        return BoxSet(Eigen::VectorXd::Constant(n, -radius), Eigen::VectorXd::Constant(n, radius));
    }

    Eigen::Index dim() const { return lower.size(); }

    bool bounded() const {
        return lower.allFinite() && upper.allFinite();
    }

    bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
        if (x.size() != lower.size())
            throw std::invalid_argument("BoxSet::contains: dimension mismatch");
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
        return true;
    }

    Eigen::VectorXd project(const Eigen::VectorXd& x) const {
        if (x.size() != lower.size())
            throw std::invalid_argument("BoxSet::project: dimension mismatch");
        return x.cwiseMax(lower).cwiseMin(upper);
    }
};

}  // namespace submhe
