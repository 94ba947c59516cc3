#pragma once

#include "dcmg/equilibrium.hpp"
#include "dcmg/microgrid.hpp"
#include "dcmg/plant.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace dcmg {

enum class RunVerdict { Completed, VoltageCollapse };

struct CollapseInfo {
    int bus = -1;         // zero-based
    double time = 0.0;    // start of the step in which V_bus hit the floor
    double voltage = 0.0;
};

/// Decimated samples of one run. All samples share the layout 4N + M;
/// lines that are not energized simply carry zero current.
struct Trajectory {
    int buses = 0;
    int lines = 0;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    /// V_ref in force at each sample (SetReference events change it).
    std::vector<Eigen::VectorXd> references;
    /// Times at which the secondary layer switched off or on.
    std::vector<double> comm_switches;
    RunVerdict verdict = RunVerdict::Completed;
    std::optional<CollapseInfo> collapse;
    long steps = 0;

    std::size_t size() const { return times.size(); }
    GlobalState state(std::size_t k) const { return GlobalState(buses, lines, states[k]); }
};

struct IntegrateOptions {
    double t_start = 0.0;
    double dt = 1e-5;
    int decimation = 100;
    NetworkStatus status;  // empty `energized` means all lines on, comm on
};

/// Classic RK4 on a fixed grid t_k = t_start + k dt, with the step split at
/// every event time. Stops with a VoltageCollapse verdict when some V_i
/// reaches the floor. Throws InvalidParameter on bad dt or unsorted events.
Trajectory integrate(const MicrogridSpec& spec, const GlobalState& initial, const std::vector<ScenarioEvent>& events,
                     double t_end, const IntegrateOptions& options);

/// Network status matching the scenario's initial condition.
NetworkStatus initial_status(const MicrogridSpec& spec);

/// Isolated DGUs at their primary-control steady state, or the full
/// secondary equilibrium with 1^T Omega = 0.
GlobalState initial_state(const MicrogridSpec& spec);

/// Runs spec.scenario with spec.solver settings.
Trajectory run_scenario(const MicrogridSpec& spec);

struct SteadyState {
    GlobalState state;
    bool settled = false;
    double max_derivative = 0.0;  // largest finite-difference rate over the window
    double scale = 1.0;           // max(1, largest |x| over the window)
};

/// Looks at samples with t >= t_last - window. Settled iff the largest
/// finite-difference derivative norm is <= tol * scale. The returned state is
/// the time average over the window.
SteadyState steady_state_of(const Trajectory& traj, double window, double tol = 1e-6);

/// Same check but only over samples with t <= until.
SteadyState steady_state_before(const Trajectory& traj, double until, double window, double tol = 1e-6);

double sharing_error(const Eigen::VectorXd& filter_current, const Eigen::VectorXd& ratings);
double balancing_error(const Eigen::VectorXd& voltage, const Eigen::VectorXd& references,
                       const Eigen::VectorXd& ratings);
/// Distance of V outside [v_min, v_max] in the infinity norm.
double band_violation(const Eigen::VectorXd& voltage, double v_min, double v_max);

struct Metrics {
    std::vector<double> times;
    std::vector<double> sharing_error;
    std::vector<double> balancing_error;
    std::vector<double> band_violation;  // empty without a certificate
    std::vector<double> consensus_sum;   // 1^T Omega
};

Metrics compute_metrics(const Trajectory& traj, const MicrogridSpec& spec,
                        const ExistenceCertificate* cert = nullptr);

}  // namespace dcmg
