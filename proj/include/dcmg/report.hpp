#pragma once

#include "dcmg/control.hpp"
#include "dcmg/equilibrium.hpp"
#include "dcmg/error.hpp"
#include "dcmg/microgrid.hpp"
#include "dcmg/simulate.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dcmg {

/// Decimal text with 12 significant digits, the format of every CSV cell.
std::string format_number(double value);

/// Header t, V_1..V_N, It_1..It_N, v_1..v_N, I_1..I_M, Omega_1..Omega_N.
std::vector<std::string> trajectory_header(int buses, int lines);

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
/// t, sharing_error, balancing_error, band_violation ("nan" without a certificate).
void write_metrics_csv(const std::filesystem::path& path, const Metrics& metrics);
/// Long format: quantity, index, value.
void write_equilibrium_csv(const std::filesystem::path& path, const EquilibriumPoint& point,
                           const VoltageSolution& solution);

/// matplotlib script over trajectory.csv with three panels: PC voltages and
/// the certified band, weighted filter currents, weighted voltage sum.
std::string plot_script(const MicrogridSpec& spec, const ExistenceCertificate* cert);

/// P_Li < Y_Li V_i^2 at every bus, the load condition behind the stability
/// guarantee.
struct LoadCondition {
    std::vector<bool> holds;
    bool all() const;
};
LoadCondition load_condition(const MicrogridSpec& spec, const Eigen::VectorXd& voltage);

enum class ReportVerdict { Converged, VoltageCollapse, NotSettled };
std::string to_string(ReportVerdict verdict);

struct RunReport {
    std::string name;
    std::vector<GainVerdict> gains;
    std::optional<ExistenceCertificate> cert;
    std::optional<ErrorKind> equilibrium_error;  // why the equilibrium is missing, if it is
    std::string equilibrium_note;
    std::optional<VoltageSolution> solution;
    std::optional<EquilibriumPoint> equilibrium;
    std::optional<StabilityReport> stability;
    std::optional<LoadCondition> loads;
    std::vector<std::string> files;

    // Filled by runs only.
    bool ran = false;
    ReportVerdict verdict = ReportVerdict::Converged;
    std::optional<CollapseInfo> collapse;
    double final_time = 0.0;
    double terminal_sharing = 0.0;
    double terminal_balancing = 0.0;
    double balancing_scale = 0.0;  // |1^T [I^s] V_ref|
    std::optional<double> terminal_band_violation;
    double consensus_drift = 0.0;  // max |1^T Omega(t) - 1^T Omega(0)|
};

/// Analysis part of a report: gain verdicts, certificate, equilibrium,
/// linearized spectrum. Solver failures are recorded, not thrown.
RunReport analyse(const MicrogridSpec& spec);

/// Fills the run fields from a finished trajectory.
void summarize_run(RunReport& report, const MicrogridSpec& spec, const Trajectory& traj, const Metrics& metrics);

std::string format_report(const RunReport& report);

}  // namespace dcmg
