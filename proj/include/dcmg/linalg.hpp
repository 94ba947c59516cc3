#pragma once

#include <Eigen/Dense>

namespace dcmg {

struct PseudoInverse {
    Eigen::MatrixXd matrix;
    int rank = 0;
    double largest_singular_value = 0.0;
};

/// Moore-Penrose pseudo-inverse via SVD. Singular values at or below
/// rank_tol * sigma_max are treated as zero.
PseudoInverse pseudo_inverse(const Eigen::MatrixXd& a, double rank_tol = 1e-10);

inline double inf_norm(const Eigen::VectorXd& x) {
    return x.size() == 0 ? 0.0 : x.lpNorm<Eigen::Infinity>();
}

/// Induced infinity norm (max absolute row sum).
inline double inf_norm(const Eigen::MatrixXd& a) {
    return a.size() == 0 ? 0.0 : a.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace dcmg
