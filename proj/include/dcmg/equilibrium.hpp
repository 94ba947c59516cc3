#pragma once

#include "dcmg/microgrid.hpp"
#include "dcmg/plant.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace dcmg {

/// Steady-state voltage equations under current sharing and weighted
/// balancing, written as the stacked system
///
///     stacked * V = injection - load_coupling * [V^-1] P
///
/// with stacked = [L_e + L_t [I^s]^-1 Y; 1^T [I^s]] and the weighted
/// projector L_t = [I^s] - [I^s] 1 1^T [I^s] / (1^T [I^s] 1).
struct ConstrainedFlowSystem {
    int buses = 0;
    Eigen::MatrixXd projector;       // L_t, N x N
    Eigen::MatrixXd flow_laplacian;  // L_p, N x N
    Eigen::MatrixXd stacked;         // (N+1) x N
    Eigen::VectorXd injection;       // N+1
    Eigen::MatrixXd load_coupling;   // (N+1) x N
    Eigen::MatrixXd stacked_pinv;    // N x (N+1)
    int rank = 0;

    /// Infinity-norm residual of the stacked equations at V.
    double residual(const Eigen::VectorXd& voltage, const Eigen::VectorXd& power) const;
};

ConstrainedFlowSystem build_flow_system(const MicrogridSpec& spec);

struct NominalVoltage {
    Eigen::VectorXd voltage;  // V*
    double residual = 0.0;
};

/// Least-squares solution V* of the constant-power-free system.
NominalVoltage nominal_voltage(const ConstrainedFlowSystem& system);

struct ExistenceCertificate {
    Eigen::VectorXd nominal;         // V*
    Eigen::MatrixXd critical_power;  // P_cri = 4 [V*]^-1 stacked^+ load_coupling [V*]^-1
    double delta = 0.0;              // || P_cri P ||_inf
    double delta_minus = 0.0;        // in [0, 1/2) when delta < 1
    double delta_plus = 1.0;         // in (1/2, 1] when delta < 1
    bool exists = false;             // delta < 1 and V* > 0
    std::vector<int> nonpositive_buses;
    /// (1 - delta_plus) V* < V_ref holds. This is the claimed condition for
    /// ruling out low-voltage solutions; it does not rule them out (see
    /// test_equilibrium), so treat it as informational.
    bool low_set_excluded = false;

    /// Same construction with |P_cri| in place of P_cri. When P_cri has
    /// mixed signs the signed band above can miss the solution; this one is
    /// a self-map of the fixed-point iteration and always contains it.
    double abs_delta = 0.0;
    double abs_delta_minus = 0.0;  // NaN when abs_delta >= 1

    Eigen::VectorXd abs_lower() const { return (1.0 - abs_delta_minus) * nominal; }
    Eigen::VectorXd abs_upper() const { return (1.0 + abs_delta_minus) * nominal; }
    bool in_abs_band(const Eigen::VectorXd& voltage, double rel_slack = 1e-12) const;

    Eigen::VectorXd lower() const { return (1.0 - delta_minus) * nominal; }
    Eigen::VectorXd upper() const { return (1.0 + delta_minus) * nominal; }
    /// Componentwise membership in the band, with relative slack.
    bool in_band(const Eigen::VectorXd& voltage, double rel_slack = 1e-12) const;
    /// Smallest lower bound and largest upper bound over all buses.
    double v_min() const { return lower().minCoeff(); }
    double v_max() const { return upper().maxCoeff(); }
};

ExistenceCertificate certificate(const ConstrainedFlowSystem& system, const Eigen::VectorXd& power,
                                 const Eigen::VectorXd& references);

struct FixedPointOptions {
    double tolerance = 1e-10;
    int max_iterations = 10000;
    double residual_tol = 1e-8;
};

struct VoltageSolution {
    Eigen::VectorXd voltage;
    int iterations = 0;
    double residual = 0.0;
    /// Largest ratio of successive increment norms seen during the run.
    double contraction_ratio = 0.0;
    std::vector<double> increments;
    /// Inside [(1 - delta_minus) V*, (1 + delta_minus) V*].
    bool in_band = false;
    /// Inside the |P_cri| band (false when that band is not available).
    bool in_abs_band = false;
};

/// V_{k+1} = V* - stacked^+ load_coupling [V_k^-1] P, started at V* unless
/// `initial` is given. Requires a valid certificate. Throws OutOfBand when the
/// limit lies outside the |P_cri| band, or outside the signed band when the
/// |P_cri| band does not exist.
VoltageSolution solve_voltage(const ConstrainedFlowSystem& system, const Eigen::VectorXd& power,
                              const ExistenceCertificate& cert, const FixedPointOptions& options = {},
                              const std::optional<Eigen::VectorXd>& initial = std::nullopt);

/// Gauss-Newton on the stacked equations. Diagnostic only; returns nothing
/// when it fails to converge or leaves the positive orthant.
std::optional<Eigen::VectorXd> newton_voltage(const ConstrainedFlowSystem& system, const Eigen::VectorXd& power,
                                              const Eigen::VectorXd& initial, double tolerance = 1e-10,
                                              int max_iterations = 100);

struct NonexistenceProbe {
    int attempts = 0;
    int newton_converged = 0;
    int solutions_in_excluded_set = 0;
};

/// Random Newton starts in the excluded set {V > (1 - delta_plus) V*} minus
/// the band. Counts converged solutions that stay in that set. Evidence, not
/// proof.
NonexistenceProbe probe_nonexistence(const ConstrainedFlowSystem& system, const Eigen::VectorXd& power,
                                     const ExistenceCertificate& cert, int attempts, std::uint64_t seed);

struct EquilibriumPoint {
    GlobalState state;
    double sharing_level = 0.0;  // epsilon: I_t = epsilon [I^s] 1
    double offset = 0.0;         // eta: component of Omega along 1 / N
};

/// Fills in I_t, I, Omega and v from a voltage solution. `consensus_sum`
/// fixes 1^T Omega (zero for runs started with Omega(0) = 0).
EquilibriumPoint complete_equilibrium(const MicrogridSpec& spec, const Eigen::VectorXd& voltage,
                                      double consensus_sum = 0.0);

struct StabilityReport {
    Eigen::VectorXcd eigenvalues;  // sorted by descending real part
    bool stable = false;
    int eigenvalues_near_zero = 0;    // count with Re > -zero_tol
    double zero_mode_residual = 0.0;  // || J z || for the normalized Omega-offset direction
    double spectral_abscissa = 0.0;   // largest Re excluding the structural zero
    double equilibrium_residual = 0.0;
};

/// Jacobian of the closed loop at the equilibrium and its spectrum.
/// Stable iff exactly one eigenvalue has Re > -zero_tol and the
/// Omega-offset direction is a null vector to within zero_tol.
StabilityReport linearized_stability(const MicrogridSpec& spec, const EquilibriumPoint& eq, double zero_tol = 1e-9);

Eigen::MatrixXd closed_loop_jacobian(const MicrogridSpec& spec, const Eigen::VectorXd& voltage);

/// End-to-end steady-state pipeline used by the CLI.
struct EquilibriumAnalysis {
    ConstrainedFlowSystem system;
    ExistenceCertificate cert;
    std::optional<VoltageSolution> solution;
    std::optional<EquilibriumPoint> point;
};

/// Builds the certificate and, when it exists, solves and completes the
/// equilibrium. Throws NoConvergence / OutOfBand / SingularGamma from the
/// solver stages.
EquilibriumAnalysis analyse_equilibrium(const MicrogridSpec& spec, double consensus_sum = 0.0);

}  // namespace dcmg
