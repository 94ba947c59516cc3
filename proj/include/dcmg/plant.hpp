#pragma once

#include "dcmg/network.hpp"

#include <Eigen/Dense>

#include <vector>

namespace dcmg {

struct MicrogridSpec;

inline constexpr double kDefaultMinVoltage = 1.0;  // volt

/// Averaged Buck converter with series RLC output filter.
struct DguParams {
    double resistance = 0.0;      // R_t, ohm
    double inductance = 0.0;      // L_t, henry
    double capacitance = 0.0;     // C_t, farad (line capacitances lumped in)
    double rated_current = 0.0;   // I_t^s, ampere

    bool operator==(const DguParams&) const = default;
};

/// Parallel constant-impedance / constant-current / constant-power load.
struct ZipLoad {
    double conductance = 0.0;  // Y_L, siemens
    double current = 0.0;      // I_L, ampere
    double power = 0.0;        // P_L, watt

    bool operator==(const ZipLoad&) const = default;
};

/// Y V + I + P / V. Throws VoltageError when voltage <= min_voltage.
double zip_current(const ZipLoad& load, double voltage, double min_voltage = kDefaultMinVoltage);

/// State vector X = [V; I_t; v; I; Omega] of size 4N + M.
class GlobalState {
public:
    GlobalState(int buses, int lines);
    GlobalState(int buses, int lines, Eigen::VectorXd data);

    int buses() const noexcept { return buses_; }
    int lines() const noexcept { return lines_; }
    static int dimension(int buses, int lines) { return 4 * buses + lines; }

    Eigen::VectorXd& data() noexcept { return data_; }
    const Eigen::VectorXd& data() const noexcept { return data_; }

    auto voltage() { return data_.segment(0, buses_); }
    auto voltage() const { return data_.segment(0, buses_); }
    auto filter_current() { return data_.segment(buses_, buses_); }
    auto filter_current() const { return data_.segment(buses_, buses_); }
    auto integrator() { return data_.segment(2 * buses_, buses_); }
    auto integrator() const { return data_.segment(2 * buses_, buses_); }
    auto line_current() { return data_.segment(3 * buses_, lines_); }
    auto line_current() const { return data_.segment(3 * buses_, lines_); }
    auto consensus() { return data_.segment(3 * buses_ + lines_, buses_); }
    auto consensus() const { return data_.segment(3 * buses_ + lines_, buses_); }

private:
    int buses_;
    int lines_;
    Eigen::VectorXd data_;
};

/// Which physical lines are energized and whether the secondary layer is
/// exchanging data. Inactive lines keep their state slot with zero dynamics.
struct NetworkStatus {
    std::vector<bool> energized;
    bool comm_active = true;

    static NetworkStatus all_on(int lines) { return {std::vector<bool>(static_cast<std::size_t>(lines), true), true}; }
    static NetworkStatus isolated(int lines) { return {std::vector<bool>(static_cast<std::size_t>(lines), false), false}; }

    bool operator==(const NetworkStatus&) const = default;
};

/// Dense closed-loop matrix A of X_dot = A X + B(V), laid out in the
/// [V, I_t, v, I, Omega] block structure, plus what B(V) needs.
struct SystemMatrices {
    int buses = 0;
    int lines = 0;
    Eigen::MatrixXd a;
    Eigen::VectorXd inv_capacitance;  // 1 / C_t
    Eigen::VectorXd load_current;     // I_L
    Eigen::VectorXd load_power;       // P_L
    Eigen::VectorXd reference;        // V_ref
    double min_voltage = kDefaultMinVoltage;

    int dimension() const { return 4 * buses + lines; }

    /// B(V) = [-C_t^-1 (I_L + [V^-1] P_L); 0; V_ref; 0; 0].
    Eigen::VectorXd injection(const Eigen::VectorXd& voltage) const;
};

/// dI_l/dt = (-R_l I_l + sum_i B_il V_i) / L_l for every line.
Eigen::VectorXd line_rhs(const GlobalState& state, const ElectricalGraph& graph);

SystemMatrices assemble_system(const MicrogridSpec& spec);
SystemMatrices assemble_system(const MicrogridSpec& spec, const NetworkStatus& status);

/// A X + B(V). Throws VoltageError if some V_i <= min_voltage.
Eigen::VectorXd full_rhs(const SystemMatrices& sys, const Eigen::VectorXd& state);
/// Allocation-free variant; `out` must already have the state dimension.
void full_rhs_into(const SystemMatrices& sys, const Eigen::VectorXd& state, Eigen::VectorXd& out);
Eigen::VectorXd full_rhs(const SystemMatrices& sys, const GlobalState& state);

}  // namespace dcmg
