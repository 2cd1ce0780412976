#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace submhe {

/// Spectral norm computed as the square root of the largest eigenvalue of
/// the Gram matrix. Matrices here are tiny (n <= 4), so robustness beats
/// speed.
inline double spectral_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.transpose() * m);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("spectral_norm: eigendecomposition failed");
    const double lam = es.eigenvalues().maxCoeff();
    return lam > 0.0 ? std::sqrt(lam) : 0.0;
}

struct SymmetricSqrt {
    Eigen::MatrixXd sqrt;      // P^{1/2}
    Eigen::MatrixXd inv_sqrt;  // P^{-1/2}
    double lambda_min = 0.0;
    double lambda_max = 0.0;
};

/// Symmetric square root of a positive definite matrix via eigendecomposition.
/// Eigenvalues below the floor mean the certificate matrix is unusable.
inline SymmetricSqrt symmetric_sqrt(const Eigen::MatrixXd& p, double eig_floor = 1e-12) {
    if (p.rows() != p.cols())
        throw std::invalid_argument("symmetric_sqrt: matrix must be square");
    if (!p.isApprox(p.transpose(), 1e-10))
        throw std::invalid_argument("symmetric_sqrt: matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("symmetric_sqrt: eigendecomposition failed");
    const Eigen::VectorXd evals = es.eigenvalues();
    if (evals.minCoeff() < eig_floor)
        throw std::domain_error("symmetric_sqrt: matrix is not positive definite");
    SymmetricSqrt out;
    out.lambda_min = evals.minCoeff();
    out.lambda_max = evals.maxCoeff();
    const Eigen::VectorXd s = evals.array().sqrt();
    out.sqrt = es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
    out.inv_sqrt = es.eigenvectors() * s.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    return out;
}

}  // namespace submhe
