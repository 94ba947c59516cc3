#pragma once

#include "dcmg/control.hpp"
#include "dcmg/network.hpp"
#include "dcmg/plant.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dcmg {

/// Energize lines. An empty list means every line of the electrical graph.
struct PlugIn {
    std::vector<int> lines;  // zero-based line indices
    bool operator==(const PlugIn&) const = default;
};

struct LoadStep {
    int bus = 0;
    ZipLoad load;
    bool operator==(const LoadStep&) const = default;
};

/// Secondary layer stops: omega forced to zero, Omega frozen.
struct CommCollapse {
    bool operator==(const CommCollapse&) const = default;
};

/// Secondary layer resumes from the frozen Omega.
struct CommRestore {
    bool operator==(const CommRestore&) const = default;
};

struct SetReference {
    int bus = 0;
    double voltage = 0.0;
    bool operator==(const SetReference&) const = default;
};

using EventAction = std::variant<PlugIn, LoadStep, CommCollapse, CommRestore, SetReference>;

struct ScenarioEvent {
    double time = 0.0;  // second
    EventAction action;
    bool operator==(const ScenarioEvent&) const = default;
};

enum class InitialCondition {
    /// Every DGU at its own primary-control steady state, no lines energized,
    /// secondary layer off.
    IsolatedPrimary,
    /// The secondary-control equilibrium of the full network with 1^T Omega = 0.
    Equilibrium,
};

struct Scenario {
    InitialCondition initial = InitialCondition::IsolatedPrimary;
    double t_start = 0.0;
    double t_end = 4.0;
    std::vector<ScenarioEvent> events;
    bool operator==(const Scenario&) const = default;
};

/// Numerical settings; defaults are the documented tolerances.
struct SolverSettings {
    double dt = 1e-5;
    int decimation = 100;
    double min_voltage = kDefaultMinVoltage;
    double residual_tol = 1e-8;
    double settle_tol = 1e-6;
    double settle_window = 0.1;
    double rank_tol = 1e-10;
    double fixed_point_tol = 1e-10;
    int max_iterations = 10000;
    bool operator==(const SolverSettings&) const = default;
};

struct Bus {
    DguParams dgu;
    std::optional<ControllerGains> gains;
    ZipLoad load;
    double reference = 0.0;  // V_ref, volt
    bool operator==(const Bus&) const = default;
};

/// Complete static description of one experiment.
struct MicrogridSpec {
    std::string name;
    ElectricalGraph electrical;
    CommGraph comm;
    std::vector<Bus> buses;
    Scenario scenario;
    SolverSettings solver;

    int bus_count() const { return static_cast<int>(buses.size()); }
    int line_count() const { return electrical.line_count(); }

    /// Throws DimensionMismatch / InvalidParameter when sections disagree.
    void validate() const;

    Eigen::VectorXd ratings() const;
    Eigen::VectorXd references() const;
    Eigen::VectorXd conductances() const;
    Eigen::VectorXd load_currents() const;
    Eigen::VectorXd load_powers() const;

    /// Gains per bus; throws MissingGains if any bus has none.
    std::vector<ControllerGains> gains() const;

    bool operator==(const MicrogridSpec&) const = default;
};

}  // namespace dcmg
