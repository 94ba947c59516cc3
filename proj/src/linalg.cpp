#include "dcmg/linalg.hpp"

#include <Eigen/SVD>

namespace dcmg {

PseudoInverse pseudo_inverse(const Eigen::MatrixXd& a, double rank_tol) {
    PseudoInverse out;
    if (a.size() == 0) {
        out.matrix = Eigen::MatrixXd::Zero(a.cols(), a.rows());
        return out;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    out.largest_singular_value = sigma(0);
    const double cutoff = rank_tol * sigma(0);

    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma(i) > cutoff) {
            inv(i) = 1.0 / sigma(i);
            ++out.rank;
        }
    }
    out.matrix = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    return out;
}

}  // namespace dcmg
