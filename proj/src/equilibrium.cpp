#include "dcmg/equilibrium.hpp"

#include "dcmg/control.hpp"
#include "dcmg/error.hpp"
#include "dcmg/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <sstream>

namespace dcmg {

double ConstrainedFlowSystem::residual(const Eigen::VectorXd& voltage, const Eigen::VectorXd& power) const {
    const Eigen::VectorXd r = stacked * voltage - injection + load_coupling * power.cwiseQuotient(voltage);
    return inf_norm(r);
}

ConstrainedFlowSystem build_flow_system(const MicrogridSpec& spec) {
    spec.validate();
    const int n = spec.bus_count();
    const Eigen::VectorXd rating = spec.ratings();
    const Eigen::VectorXd inv_rating = rating.cwiseInverse();
    const double total_rating = rating.sum();

    ConstrainedFlowSystem sys;
    sys.buses = n;
    sys.projector = Eigen::MatrixXd(rating.asDiagonal()) - rating * rating.transpose() / total_rating;

    const Eigen::MatrixXd projector_scaled = sys.projector * inv_rating.asDiagonal();
    sys.flow_laplacian = electrical_laplacian(spec.electrical) + projector_scaled * spec.conductances().asDiagonal();

    sys.stacked.resize(n + 1, n);
    sys.stacked.topRows(n) = sys.flow_laplacian;
    sys.stacked.row(n) = rating.transpose();

    sys.injection.resize(n + 1);
    sys.injection.head(n) = -projector_scaled * spec.load_currents();
    sys.injection(n) = rating.dot(spec.references());

    sys.load_coupling = Eigen::MatrixXd::Zero(n + 1, n);
    sys.load_coupling.topRows(n) = projector_scaled;

    PseudoInverse pinv = pseudo_inverse(sys.stacked, spec.solver.rank_tol);
    sys.rank = pinv.rank;
    if (sys.rank < n) {
        throw Error(ErrorKind::RankDeficient, "stacked flow matrix has column rank " + std::to_string(sys.rank) +
                                                  " < " + std::to_string(n));
    }
    sys.stacked_pinv = std::move(pinv.matrix);
    return sys;
}

NominalVoltage nominal_voltage(const ConstrainedFlowSystem& system) {
    if (system.rank < system.buses) {
        throw Error(ErrorKind::RankDeficient, "stacked flow matrix is rank deficient");
    }
    NominalVoltage out;
    out.voltage = system.stacked_pinv * system.injection;
    out.residual = inf_norm(Eigen::VectorXd(system.stacked * out.voltage - system.injection));
    return out;
}

bool ExistenceCertificate::in_band(const Eigen::VectorXd& voltage, double rel_slack) const {
    const Eigen::VectorXd lo = lower();
    const Eigen::VectorXd hi = upper();
    for (Eigen::Index i = 0; i < voltage.size(); ++i) {
        const double slack = rel_slack * std::abs(nominal(i));
        if (voltage(i) < lo(i) - slack || voltage(i) > hi(i) + slack) {
            return false;
        }
    }
    return true;
}

bool ExistenceCertificate::in_abs_band(const Eigen::VectorXd& voltage, double rel_slack) const {
    if (!(abs_delta < 1.0)) {
        return false;
    }
    const Eigen::VectorXd lo = abs_lower();
    const Eigen::VectorXd hi = abs_upper();
    for (Eigen::Index i = 0; i < voltage.size(); ++i) {
        const double slack = rel_slack * std::abs(nominal(i));
        if (voltage(i) < lo(i) - slack || voltage(i) > hi(i) + slack) {
            return false;
        }
    }
    return true;
}

ExistenceCertificate certificate(const ConstrainedFlowSystem& system, const Eigen::VectorXd& power,
                                 const Eigen::VectorXd& references) {
    if (power.size() != system.buses || references.size() != system.buses) {
        throw Error(ErrorKind::DimensionMismatch, "certificate: load power / reference size mismatch");
    }
    ExistenceCertificate cert;
    cert.nominal = nominal_voltage(system).voltage;
    for (int i = 0; i < system.buses; ++i) {
        if (cert.nominal(i) == 0.0) {
            throw Error(ErrorKind::SingularNominal, "V*_" + std::to_string(i + 1) + " is zero");
        }
        if (cert.nominal(i) < 0.0) {
            cert.nonpositive_buses.push_back(i);
        }
    }
    const Eigen::VectorXd inv_nominal = cert.nominal.cwiseInverse();
    cert.critical_power =
        4.0 * inv_nominal.asDiagonal() * (system.stacked_pinv * system.load_coupling) * inv_nominal.asDiagonal();
    cert.delta = inf_norm(Eigen::VectorXd(cert.critical_power * power));

    if (cert.delta < 1.0) {
        const double root = std::sqrt(1.0 - cert.delta);
        cert.delta_minus = 0.5 * (1.0 - root);
        cert.delta_plus = 0.5 * (1.0 + root);
    } else {
        cert.delta_minus = std::numeric_limits<double>::quiet_NaN();
        cert.delta_plus = std::numeric_limits<double>::quiet_NaN();
    }
    cert.abs_delta = inf_norm(Eigen::VectorXd(cert.critical_power.cwiseAbs() * power.cwiseAbs()));
    cert.abs_delta_minus = cert.abs_delta < 1.0 ? 0.5 * (1.0 - std::sqrt(1.0 - cert.abs_delta))
                                                : std::numeric_limits<double>::quiet_NaN();
    cert.exists = cert.delta < 1.0 && cert.nonpositive_buses.empty();
    if (cert.exists) {
        cert.low_set_excluded = ((1.0 - cert.delta_plus) * cert.nominal - references).maxCoeff() < 0.0;
    }
    return cert;
}

VoltageSolution solve_voltage(const ConstrainedFlowSystem& system, const Eigen::VectorXd& power,
                              const ExistenceCertificate& cert, const FixedPointOptions& options,
                              const std::optional<Eigen::VectorXd>& initial) {
    if (!cert.exists) {
        std::ostringstream os;
        os << "no existence certificate (Delta = " << cert.delta << ")";
        throw Error(ErrorKind::NoCertificate, os.str());
    }
    const Eigen::MatrixXd gain = system.stacked_pinv * system.load_coupling;
    const Eigen::VectorXd& nominal = cert.nominal;

    VoltageSolution out;
    Eigen::VectorXd v = initial.value_or(nominal);
    if (v.size() != system.buses) {
        throw Error(ErrorKind::DimensionMismatch, "initial voltage has the wrong size");
    }
    bool converged = false;
    for (int k = 1; k <= options.max_iterations; ++k) {
        if ((v.array() <= 0.0).any()) {
            throw Error(ErrorKind::NoConvergence, "fixed-point iterate left the positive orthant");
        }
        Eigen::VectorXd next = nominal - gain * power.cwiseQuotient(v);
        const double increment = inf_norm(Eigen::VectorXd(next - v));
        if (!out.increments.empty() && out.increments.back() > 0.0) {
            out.contraction_ratio = std::max(out.contraction_ratio, increment / out.increments.back());
        }
        out.increments.push_back(increment);
        v = std::move(next);
        out.iterations = k;
        if (increment <= options.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw Error(ErrorKind::NoConvergence,
                    "fixed-point iteration did not converge in " + std::to_string(options.max_iterations) + " steps");
    }
    out.voltage = std::move(v);
    out.residual = system.residual(out.voltage, power);
    if (out.residual > options.residual_tol) {
        std::ostringstream os;
        os << "converged point has residual " << out.residual;
        throw Error(ErrorKind::NoConvergence, os.str());
    }
    out.in_band = cert.in_band(out.voltage, 1e-9);
    out.in_abs_band = cert.in_abs_band(out.voltage, 1e-9);
    const bool abs_available = cert.abs_delta < 1.0;
    if (abs_available ? !out.in_abs_band : !out.in_band) {
        throw Error(ErrorKind::OutOfBand, "converged voltage lies outside the certified band");
    }
    return out;
}

std::optional<Eigen::VectorXd> newton_voltage(const ConstrainedFlowSystem& system, const Eigen::VectorXd& power,
                                              const Eigen::VectorXd& initial, double tolerance, int max_iterations) {
    Eigen::VectorXd v = initial;
    const double scale = std::max(1.0, inf_norm(system.injection));
    for (int k = 0; k < max_iterations; ++k) {
        if ((v.array() <= 0.0).any() || !v.allFinite()) {
            return std::nullopt;
        }
        const Eigen::VectorXd f = system.stacked * v - system.injection + system.load_coupling * power.cwiseQuotient(v);
        if (inf_norm(f) <= tolerance * scale) {
            return v;
        }
        const Eigen::VectorXd d = power.cwiseQuotient(v.cwiseProduct(v));
        const Eigen::MatrixXd jac = system.stacked - system.load_coupling * d.asDiagonal();
        v -= jac.colPivHouseholderQr().solve(f);
    }
    return std::nullopt;
}

NonexistenceProbe probe_nonexistence(const ConstrainedFlowSystem& system, const Eigen::VectorXd& power,
                                     const ExistenceCertificate& cert, int attempts, std::uint64_t seed) {
    NonexistenceProbe probe;
    if (!cert.exists) {
        return probe;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Eigen::VectorXd floor = (1.0 - cert.delta_plus) * cert.nominal;
    const Eigen::VectorXd ceiling = 2.0 * cert.nominal;

    auto in_excluded_set = [&](const Eigen::VectorXd& v) {
        return (v - floor).minCoeff() > 0.0 && !cert.in_band(v, 0.0);
    };

    while (probe.attempts < attempts) {
        Eigen::VectorXd start(system.buses);
        for (int i = 0; i < system.buses; ++i) {
            start(i) = floor(i) + (ceiling(i) - floor(i)) * unit(rng);
        }
        if (!in_excluded_set(start)) {
            continue;
        }
        ++probe.attempts;
        if (auto sol = newton_voltage(system, power, start)) {
            ++probe.newton_converged;
            if (in_excluded_set(*sol)) {
                ++probe.solutions_in_excluded_set;
            }
        }
    }
    return probe;
}

EquilibriumPoint complete_equilibrium(const MicrogridSpec& spec, const Eigen::VectorXd& voltage, double consensus_sum) {
    spec.validate();
    const int n = spec.bus_count();
    const int m = spec.line_count();
    if (voltage.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "voltage vector has the wrong size");
    }
    const std::vector<ControllerGains> gains = spec.gains();
    for (int i = 0; i < n; ++i) {
        if (gains[static_cast<std::size_t>(i)].k3 == 0.0) {
            throw Error(ErrorKind::SingularGamma, "k3 of bus " + std::to_string(i + 1) + " is zero");
        }
    }
    const Eigen::VectorXd rating = spec.ratings();
    const Eigen::VectorXd reference = spec.references();
    const Eigen::VectorXd load = spec.conductances().cwiseProduct(voltage) + spec.load_currents() +
                                 spec.load_powers().cwiseQuotient(voltage);

    EquilibriumPoint eq{GlobalState(n, m), 0.0, 0.0};
    GlobalState& x = eq.state;
    x.voltage() = voltage;

    eq.sharing_level = load.sum() / rating.sum();
    x.filter_current() = eq.sharing_level * rating;

    for (int l = 0; l < m; ++l) {
        const Line& line = spec.electrical.line(l);
        x.line_current()(l) = (voltage(line.sink) - voltage(line.source)) / line.resistance;
    }

    const Eigen::MatrixXd lc = comm_laplacian(spec.comm);
    const Eigen::VectorXd base =
        pseudo_inverse(lc, spec.solver.rank_tol).matrix * rating.cwiseProduct(reference - voltage);
    eq.offset = (consensus_sum - base.sum()) / n;
    x.consensus() = base.array() + eq.offset;

    const Eigen::VectorXd w = omega(x.consensus(), rating, lc);
    for (int i = 0; i < n; ++i) {
        const Bus& bus = spec.buses[static_cast<std::size_t>(i)];
        const ControllerGains& g = gains[static_cast<std::size_t>(i)];
        const double alpha = (g.k1 - 1.0) / bus.dgu.inductance;
        const double beta = (g.k2 - bus.dgu.resistance) / bus.dgu.inductance;
        const double gamma = g.k3 / bus.dgu.inductance;
        const double delta = g.k4 / bus.dgu.inductance;
        // 0 = alpha V + beta I_t + gamma v + delta omega
        x.integrator()(i) = -(alpha * voltage(i) + beta * x.filter_current()(i) + delta * w(i)) / gamma;
    }
    return eq;
}

Eigen::MatrixXd closed_loop_jacobian(const MicrogridSpec& spec, const Eigen::VectorXd& voltage) {
    SystemMatrices sys = assemble_system(spec);
    Eigen::MatrixXd jac = sys.a;
    for (int i = 0; i < sys.buses; ++i) {
        jac(i, i) += sys.inv_capacitance(i) * sys.load_power(i) / (voltage(i) * voltage(i));
    }
    return jac;
}

StabilityReport linearized_stability(const MicrogridSpec& spec, const EquilibriumPoint& eq, double zero_tol) {
    const int n = spec.bus_count();
    const int m = spec.line_count();
    StabilityReport report;

    const SystemMatrices sys = assemble_system(spec);
    report.equilibrium_residual = inf_norm(full_rhs(sys, eq.state));

    const Eigen::MatrixXd jac = closed_loop_jacobian(spec, eq.state.voltage());
    Eigen::EigenSolver<Eigen::MatrixXd> solver(jac, false);
    Eigen::VectorXcd ev = solver.eigenvalues();
    std::vector<std::complex<double>> sorted(ev.data(), ev.data() + ev.size());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    report.eigenvalues = Eigen::Map<Eigen::VectorXcd>(sorted.data(), static_cast<Eigen::Index>(sorted.size()));

    Eigen::VectorXd z = Eigen::VectorXd::Zero(4 * n + m);
    z.tail(n).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
    report.zero_mode_residual = inf_norm(Eigen::VectorXd(jac * z));

    report.eigenvalues_near_zero = static_cast<int>(
        std::count_if(sorted.begin(), sorted.end(), [&](const auto& l) { return l.real() > -zero_tol; }));

    const bool zero_is_structural = !sorted.empty() && std::abs(sorted.front().real()) <= zero_tol &&
                                    report.zero_mode_residual <= zero_tol;
    report.spectral_abscissa = sorted.size() > 1 ? sorted[1].real() : -std::numeric_limits<double>::infinity();
    report.stable = zero_is_structural && report.eigenvalues_near_zero == 1;
    return report;
}

EquilibriumAnalysis analyse_equilibrium(const MicrogridSpec& spec, double consensus_sum) {
    EquilibriumAnalysis out{build_flow_system(spec), {}, std::nullopt, std::nullopt};
    out.cert = certificate(out.system, spec.load_powers(), spec.references());
    if (!out.cert.exists) {
        return out;
    }
    FixedPointOptions opts;
    opts.tolerance = spec.solver.fixed_point_tol;
    opts.max_iterations = spec.solver.max_iterations;
    opts.residual_tol = spec.solver.residual_tol;
    out.solution = solve_voltage(out.system, spec.load_powers(), out.cert, opts);
    out.point = complete_equilibrium(spec, out.solution->voltage, consensus_sum);
    return out;
}

}  // namespace dcmg
