#include "dcmg/control.hpp"

#include "dcmg/error.hpp"
#include "dcmg/plant.hpp"

#include <sstream>

namespace dcmg {

GainVerdict validate_gains(const ControllerGains& gains, const DguParams& dgu) {
    GainVerdict v;
    v.k3_upper_bound = (gains.k1 - 1.0) * (gains.k2 - dgu.resistance) / dgu.inductance;
    v.k1_below_one = gains.k1 < 1.0;
    v.k2_below_resistance = gains.k2 < dgu.resistance;
    v.k3_positive = gains.k3 > 0.0;
    v.k3_below_bound = gains.k3 < v.k3_upper_bound;
    v.k4_equals_k1 = gains.k4 == gains.k1;

    auto fail = [&](const std::string& what, double lhs, const std::string& rel, double rhs) {
        std::ostringstream os;
        os << what << " = " << lhs << " violates " << what << ' ' << rel << ' ' << rhs;
        v.violations.push_back(os.str());
    };
    if (!v.k1_below_one) fail("k1", gains.k1, "<", 1.0);
    if (!v.k2_below_resistance) fail("k2", gains.k2, "<", dgu.resistance);
    if (!v.k3_positive) fail("k3", gains.k3, ">", 0.0);
    if (!v.k3_below_bound) fail("k3", gains.k3, "<", v.k3_upper_bound);
    return v;
}

ControllerGains synthesize_gains(const DguParams& dgu, const SynthesisMargins& m) {
    auto in_unit = [](double x) { return x > 0.0 && x < 1.0; };
    if (!in_unit(m.m1) || !in_unit(m.m2) || !in_unit(m.m3)) {
        throw Error(ErrorKind::InvalidParameter, "synthesis margins must lie in (0, 1)");
    }
    if (!(m.s1 > 0.0) || !(m.s2 > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "synthesis scales must be positive");
    }
    ControllerGains g;
    g.k1 = 1.0 - m.m1 * m.s1;
    g.k2 = dgu.resistance - m.m2 * m.s2;
    g.k3 = m.m3 * (g.k1 - 1.0) * (g.k2 - dgu.resistance) / dgu.inductance;
    g.k4 = g.k1;
    return g;
}

namespace {

// sum_j a_ij (x_i - x_j) with a_ij = -L_ij. Equals L x, but differences are
// formed first so constant offsets cancel before weighting.
Eigen::VectorXd laplacian_apply(const Eigen::MatrixXd& lap, const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i && lap(i, j) != 0.0) {
                out(i) -= lap(i, j) * (x(i) - x(j));
            }
        }
    }
    return out;
}

}  // namespace

Eigen::VectorXd consensus_rhs(const Eigen::VectorXd& filter_currents, const Eigen::VectorXd& ratings,
                              const Eigen::MatrixXd& comm_laplacian) {
    if (filter_currents.size() != ratings.size() || comm_laplacian.rows() != ratings.size()) {
        throw Error(ErrorKind::DimensionMismatch, "consensus_rhs: inconsistent sizes");
    }
    return laplacian_apply(comm_laplacian, filter_currents.cwiseQuotient(ratings));
}

Eigen::VectorXd omega(const Eigen::VectorXd& consensus_state, const Eigen::VectorXd& ratings,
                      const Eigen::MatrixXd& comm_laplacian) {
    if (consensus_state.size() != ratings.size() || comm_laplacian.rows() != ratings.size()) {
        throw Error(ErrorKind::DimensionMismatch, "omega: inconsistent sizes");
    }
    return laplacian_apply(comm_laplacian, consensus_state).cwiseQuotient(ratings);
}

double primary_command(const ControllerGains& gains, double voltage, double filter_current,
                       double integrator, double omega_i) {
    return gains.k1 * voltage + gains.k2 * filter_current + gains.k3 * integrator + gains.k4 * omega_i;
}

}  // namespace dcmg
