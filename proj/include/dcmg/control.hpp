#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace dcmg {

struct DguParams;

/// Per-DGU feedback gains. The primary law acts on [V, I_t, v] with
/// (k1, k2, k3); k4 scales the consensus variable injected into the command.
struct ControllerGains {
    double k1 = 0.0;  // dimensionless
    double k2 = 0.0;  // ohm
    double k3 = 0.0;  // ohm / second
    double k4 = 0.0;  // dimensionless

    bool operator==(const ControllerGains&) const = default;
};

/// Outcome of checking one DGU's gains against the stability set
///   k1 < 1,  k2 < R_t,  0 < k3 < (k1 - 1)(k2 - R_t) / L_t
/// together with the coupling k4 = k1.
struct GainVerdict {
    bool k1_below_one = false;
    bool k2_below_resistance = false;
    bool k3_positive = false;
    bool k3_below_bound = false;
    bool k4_equals_k1 = false;
    double k3_upper_bound = 0.0;
    std::vector<std::string> violations;

    bool in_stability_set() const { return k1_below_one && k2_below_resistance && k3_positive && k3_below_bound; }
    /// Membership plus the k4 coupling, i.e. the hypotheses of the stability guarantee.
    bool guaranteed() const { return in_stability_set() && k4_equals_k1; }
};

GainVerdict validate_gains(const ControllerGains& gains, const DguParams& dgu);

/// Placement of synthesized gains inside the stability set:
///   k1 = 1 - m1 s1,  k2 = R_t - m2 s2,  k3 = m3 (k1 - 1)(k2 - R_t) / L_t,  k4 = k1.
/// Margins must lie in (0, 1) and scales must be positive.
struct SynthesisMargins {
    double m1 = 0.5;
    double m2 = 0.5;
    double m3 = 0.5;
    double s1 = 8.0;  // dimensionless
    double s2 = 8.0;  // ohm

    bool operator==(const SynthesisMargins&) const = default;
};

/// Decentralized gain design from the local DGU parameters only.
ControllerGains synthesize_gains(const DguParams& dgu, const SynthesisMargins& margins = {});

/// Omega_dot = L_c [I_t^s]^-1 I_t.
Eigen::VectorXd consensus_rhs(const Eigen::VectorXd& filter_currents, const Eigen::VectorXd& ratings,
                              const Eigen::MatrixXd& comm_laplacian);

/// omega = [I_t^s]^-1 L_c Omega. Always derived from Omega, never integrated.
Eigen::VectorXd omega(const Eigen::VectorXd& consensus_state, const Eigen::VectorXd& ratings,
                      const Eigen::MatrixXd& comm_laplacian);

/// Buck converter command k1 V + k2 I_t + k3 v + k4 omega.
///
/// The consensus term enters with a positive sign so that the command is
/// consistent with the closed-loop filter-current dynamics
/// dI_t/dt = alpha V + beta I_t + gamma v + delta omega used by the plant.
double primary_command(const ControllerGains& gains, double voltage, double filter_current,
                       double integrator, double omega_i);

}  // namespace dcmg
