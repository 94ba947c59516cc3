#include "dcmg/plant.hpp"

#include "dcmg/error.hpp"
#include "dcmg/microgrid.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace dcmg {

double zip_current(const ZipLoad& load, double voltage, double min_voltage) {
    if (!(voltage > 0.0) || !(voltage > min_voltage)) {
        std::ostringstream os;
        os << "bus voltage " << voltage << " V is at or below the floor " << min_voltage << " V";
        throw VoltageError(-1, voltage, os.str());
    }
    return load.conductance * voltage + load.current + load.power / voltage;
}

GlobalState::GlobalState(int buses, int lines)
    : buses_(buses), lines_(lines), data_(Eigen::VectorXd::Zero(dimension(buses, lines))) {
    if (buses < 1 || lines < 0) {
        throw Error(ErrorKind::DimensionMismatch, "state needs N >= 1 and M >= 0");
    }
}

GlobalState::GlobalState(int buses, int lines, Eigen::VectorXd data)
    : buses_(buses), lines_(lines), data_(std::move(data)) {
    if (buses < 1 || lines < 0 || data_.size() != dimension(buses, lines)) {
        throw Error(ErrorKind::DimensionMismatch, "state vector must have 4N + M entries");
    }
}

Eigen::VectorXd SystemMatrices::injection(const Eigen::VectorXd& voltage) const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dimension());
    for (int i = 0; i < buses; ++i) {
        const double vi = voltage(i);
        if (!(vi > min_voltage)) {
            std::ostringstream os;
            os << "V_" << i + 1 << " = " << vi << " V is at or below the floor " << min_voltage << " V";
            throw VoltageError(i, vi, os.str());
        }
        b(i) = -inv_capacitance(i) * (load_current(i) + load_power(i) / vi);
    }
    b.segment(2 * buses, buses) = reference;
    return b;
}

Eigen::VectorXd line_rhs(const GlobalState& state, const ElectricalGraph& graph) {
    if (state.buses() != graph.node_count() || state.lines() != graph.line_count()) {
        throw Error(ErrorKind::DimensionMismatch, "line_rhs: state does not match graph");
    }
    const auto v = state.voltage();
    const auto current = state.line_current();
    Eigen::VectorXd out(graph.line_count());
    for (int l = 0; l < graph.line_count(); ++l) {
        const Line& line = graph.line(l);
        const double drive = v(line.sink) - v(line.source);  // sum_i B_il V_i
        out(l) = (-line.resistance * current(l) + drive) / line.inductance;
    }
    return out;
}

SystemMatrices assemble_system(const MicrogridSpec& spec) {
    return assemble_system(spec, NetworkStatus::all_on(spec.line_count()));
}

SystemMatrices assemble_system(const MicrogridSpec& spec, const NetworkStatus& status) {
    spec.validate();
    const int n = spec.bus_count();
    const int m = spec.line_count();
    if (static_cast<int>(status.energized.size()) != m) {
        throw Error(ErrorKind::DimensionMismatch, "network status must list every line");
    }
    const std::vector<ControllerGains> gains = spec.gains();

    Eigen::MatrixXd b = build_incidence(spec.electrical).cast<double>();
    for (int l = 0; l < m; ++l) {
        if (!status.energized[static_cast<std::size_t>(l)]) {
            b.col(l).setZero();
        }
    }
    const Eigen::MatrixXd lc = status.comm_active ? comm_laplacian(spec.comm) : Eigen::MatrixXd::Zero(n, n);

    Eigen::VectorXd inv_c(n), y_over_c(n), alpha(n), beta(n), gamma(n), delta(n), inv_rating(n);
    for (int i = 0; i < n; ++i) {
        const Bus& bus = spec.buses[static_cast<std::size_t>(i)];
        const ControllerGains& g = gains[static_cast<std::size_t>(i)];
        inv_c(i) = 1.0 / bus.dgu.capacitance;
        y_over_c(i) = bus.load.conductance / bus.dgu.capacitance;
        alpha(i) = (g.k1 - 1.0) / bus.dgu.inductance;
        beta(i) = (g.k2 - bus.dgu.resistance) / bus.dgu.inductance;
        gamma(i) = g.k3 / bus.dgu.inductance;
        delta(i) = g.k4 / bus.dgu.inductance;
        inv_rating(i) = 1.0 / bus.dgu.rated_current;
    }
    Eigen::VectorXd inv_l(m), r_over_l(m);
    for (int l = 0; l < m; ++l) {
        const Line& line = spec.electrical.line(l);
        inv_l(l) = status.energized[static_cast<std::size_t>(l)] ? 1.0 / line.inductance : 0.0;
        r_over_l(l) = status.energized[static_cast<std::size_t>(l)] ? line.resistance / line.inductance : 0.0;
    }

    SystemMatrices sys;
    sys.buses = n;
    sys.lines = m;
    sys.a = Eigen::MatrixXd::Zero(4 * n + m, 4 * n + m);
    const int rv = 0, rt = n, ri = 2 * n, rl = 3 * n, ro = 3 * n + m;
    auto& a = sys.a;

    a.block(rv, rv, n, n).diagonal() = -y_over_c;
    a.block(rv, rt, n, n).diagonal() = inv_c;
    a.block(rv, rl, n, m) = -(inv_c.asDiagonal() * b);

    a.block(rt, rv, n, n).diagonal() = alpha;
    a.block(rt, rt, n, n).diagonal() = beta;
    a.block(rt, ri, n, n).diagonal() = gamma;
    a.block(rt, ro, n, n) = delta.asDiagonal() * (inv_rating.asDiagonal() * lc);

    a.block(ri, rv, n, n).diagonal().setConstant(-1.0);
    a.block(ri, ro, n, n) = -(inv_rating.asDiagonal() * lc);

    a.block(rl, rv, m, n) = inv_l.asDiagonal() * b.transpose();
    a.block(rl, rl, m, m).diagonal() = -r_over_l;

    a.block(ro, rt, n, n) = lc * inv_rating.asDiagonal();

    sys.inv_capacitance = inv_c;
    sys.load_current = spec.load_currents();
    sys.load_power = spec.load_powers();
    sys.reference = spec.references();
    sys.min_voltage = spec.solver.min_voltage;
    return sys;
}

void full_rhs_into(const SystemMatrices& sys, const Eigen::VectorXd& state, Eigen::VectorXd& out) {
    const int n = sys.buses;
    for (int i = 0; i < n; ++i) {
        if (!(state(i) > sys.min_voltage)) {
            std::ostringstream os;
            os << "V_" << i + 1 << " = " << state(i) << " V is at or below the floor " << sys.min_voltage << " V";
            throw VoltageError(i, state(i), os.str());
        }
    }
    out.noalias() = sys.a * state;
    for (int i = 0; i < n; ++i) {
        out(i) -= sys.inv_capacitance(i) * (sys.load_current(i) + sys.load_power(i) / state(i));
    }
    out.segment(2 * n, n) += sys.reference;
}

Eigen::VectorXd full_rhs(const SystemMatrices& sys, const Eigen::VectorXd& state) {
    if (state.size() != sys.dimension()) {
        throw Error(ErrorKind::DimensionMismatch, "state size does not match the system");
    }
    Eigen::VectorXd out(sys.dimension());
    full_rhs_into(sys, state, out);
    return out;
}

Eigen::VectorXd full_rhs(const SystemMatrices& sys, const GlobalState& state) {
    return full_rhs(sys, state.data());
}

// MicrogridSpec helpers.

void MicrogridSpec::validate() const {
    const int n = bus_count();
    if (n != electrical.node_count()) {
        throw Error(ErrorKind::DimensionMismatch, "bus list has " + std::to_string(n) +
                                                      " entries but the electrical graph has " +
                                                      std::to_string(electrical.node_count()) + " nodes");
    }
    if (n != comm.node_count()) {
        throw Error(ErrorKind::DimensionMismatch, "bus list has " + std::to_string(n) +
                                                      " entries but the communication graph has " +
                                                      std::to_string(comm.node_count()) + " nodes");
    }
    for (int i = 0; i < n; ++i) {
        const Bus& bus = buses[static_cast<std::size_t>(i)];
        const std::string id = "bus " + std::to_string(i + 1);
        const auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
        if (!positive(bus.dgu.resistance) || !positive(bus.dgu.inductance) || !positive(bus.dgu.capacitance) ||
            !positive(bus.dgu.rated_current)) {
            throw Error(ErrorKind::InvalidParameter, id + ": DGU parameters must be strictly positive");
        }
        if (bus.load.conductance < 0.0 || bus.load.power < 0.0) {
            throw Error(ErrorKind::InvalidParameter, id + ": load Y and P must be nonnegative");
        }
        if (!positive(bus.reference)) {
            throw Error(ErrorKind::InvalidParameter, id + ": reference voltage must be positive");
        }
    }
}

namespace {

template <typename F>
Eigen::VectorXd collect(const std::vector<Bus>& buses, F f) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(buses.size()));
    for (std::size_t i = 0; i < buses.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = f(buses[i]);
    }
    return out;
}

}  // namespace

Eigen::VectorXd MicrogridSpec::ratings() const {
    return collect(buses, [](const Bus& b) { return b.dgu.rated_current; });
}
Eigen::VectorXd MicrogridSpec::references() const {
    return collect(buses, [](const Bus& b) { return b.reference; });
}
Eigen::VectorXd MicrogridSpec::conductances() const {
    return collect(buses, [](const Bus& b) { return b.load.conductance; });
}
Eigen::VectorXd MicrogridSpec::load_currents() const {
    return collect(buses, [](const Bus& b) { return b.load.current; });
}
Eigen::VectorXd MicrogridSpec::load_powers() const {
    return collect(buses, [](const Bus& b) { return b.load.power; });
}

std::vector<ControllerGains> MicrogridSpec::gains() const {
    std::vector<ControllerGains> out;
    out.reserve(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (!buses[i].gains) {
            throw Error(ErrorKind::MissingGains, "bus " + std::to_string(i + 1) + " has no controller gains");
        }
        out.push_back(*buses[i].gains);
    }
    return out;
}

}  // namespace dcmg
