#include "dcmg/simulate.hpp"

#include "dcmg/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

namespace dcmg {

namespace {

// Event times within this distance of a grid point are treated as on it.
constexpr double kTimeSlack = 1e-12;

class Stepper {
public:
    explicit Stepper(int dim) : k1_(dim), k2_(dim), k3_(dim), k4_(dim), tmp_(dim) {}

    void step(const SystemMatrices& sys, Eigen::VectorXd& x, double h) {
        full_rhs_into(sys, x, k1_);
        tmp_ = x + 0.5 * h * k1_;
        full_rhs_into(sys, tmp_, k2_);
        tmp_ = x + 0.5 * h * k2_;
        full_rhs_into(sys, tmp_, k3_);
        tmp_ = x + h * k3_;
        full_rhs_into(sys, tmp_, k4_);
        x += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    }

private:
    Eigen::VectorXd k1_, k2_, k3_, k4_, tmp_;
};

void check_bus(const MicrogridSpec& spec, int bus, const char* what) {
    if (bus < 0 || bus >= spec.bus_count()) {
        throw Error(ErrorKind::InvalidParameter,
                    std::string(what) + " refers to bus " + std::to_string(bus + 1) + " which does not exist");
    }
}

void validate_events(const MicrogridSpec& spec, const std::vector<ScenarioEvent>& events) {
    for (std::size_t e = 0; e < events.size(); ++e) {
        if (!std::isfinite(events[e].time)) {
            throw Error(ErrorKind::InvalidParameter, "event time must be finite");
        }
        if (e > 0 && events[e].time < events[e - 1].time) {
            throw Error(ErrorKind::InvalidParameter, "events must be sorted by time");
        }
        std::visit(
            [&](const auto& ev) {
                using T = std::decay_t<decltype(ev)>;
                if constexpr (std::is_same_v<T, PlugIn>) {
                    for (int l : ev.lines) {
                        if (l < 0 || l >= spec.line_count()) {
                            throw Error(ErrorKind::InvalidParameter,
                                        "plug_in refers to line " + std::to_string(l + 1) + " which does not exist");
                        }
                    }
                } else if constexpr (std::is_same_v<T, LoadStep>) {
                    check_bus(spec, ev.bus, "load_step");
                } else if constexpr (std::is_same_v<T, SetReference>) {
                    check_bus(spec, ev.bus, "set_reference");
                    if (!(ev.voltage > 0.0)) {
                        throw Error(ErrorKind::InvalidParameter, "set_reference voltage must be positive");
                    }
                }
            },
            events[e].action);
    }
}

}  // namespace

Trajectory integrate(const MicrogridSpec& spec, const GlobalState& initial, const std::vector<ScenarioEvent>& events,
                     double t_end, const IntegrateOptions& options) {
    spec.validate();
    if (!(options.dt > 0.0) || !std::isfinite(options.dt)) {
        throw Error(ErrorKind::InvalidParameter, "dt must be positive");
    }
    if (options.decimation < 1) {
        throw Error(ErrorKind::InvalidParameter, "decimation must be at least 1");
    }
    if (!(t_end >= options.t_start)) {
        throw Error(ErrorKind::InvalidParameter, "t_end must not precede t_start");
    }
    const int n = spec.bus_count();
    const int m = spec.line_count();
    if (initial.buses() != n || initial.lines() != m) {
        throw Error(ErrorKind::DimensionMismatch, "initial state does not match the microgrid");
    }
    validate_events(spec, events);

    MicrogridSpec current = spec;
    NetworkStatus status = options.status.energized.empty() ? NetworkStatus::all_on(m) : options.status;
    if (static_cast<int>(status.energized.size()) != m) {
        throw Error(ErrorKind::DimensionMismatch, "network status must list every line");
    }
    SystemMatrices sys = assemble_system(current, status);

    Trajectory traj;
    traj.buses = n;
    traj.lines = m;
    Eigen::VectorXd x = initial.data();
    // Lines that are not energized carry no current.
    for (int l = 0; l < m; ++l) {
        if (!status.energized[static_cast<std::size_t>(l)]) {
            x(3 * n + l) = 0.0;
        }
    }

    const double t0 = options.t_start;
    const double dt = options.dt;
    std::size_t next_event = 0;

    auto apply = [&](const ScenarioEvent& event) {
        std::visit(
            [&](const auto& ev) {
                using T = std::decay_t<decltype(ev)>;
                if constexpr (std::is_same_v<T, PlugIn>) {
                    auto energize = [&](int l) {
                        if (!status.energized[static_cast<std::size_t>(l)]) {
                            status.energized[static_cast<std::size_t>(l)] = true;
                            x(3 * n + l) = 0.0;
                        }
                    };
                    if (ev.lines.empty()) {
                        for (int l = 0; l < m; ++l) energize(l);
                    } else {
                        for (int l : ev.lines) energize(l);
                    }
                } else if constexpr (std::is_same_v<T, LoadStep>) {
                    current.buses[static_cast<std::size_t>(ev.bus)].load = ev.load;
                } else if constexpr (std::is_same_v<T, CommCollapse>) {
                    if (status.comm_active) traj.comm_switches.push_back(event.time);
                    status.comm_active = false;
                } else if constexpr (std::is_same_v<T, CommRestore>) {
                    if (!status.comm_active) traj.comm_switches.push_back(event.time);
                    status.comm_active = true;
                } else if constexpr (std::is_same_v<T, SetReference>) {
                    current.buses[static_cast<std::size_t>(ev.bus)].reference = ev.voltage;
                }
            },
            event.action);
        sys = assemble_system(current, status);
    };

    auto record = [&](double t) {
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.references.push_back(sys.reference);
    };

    // Events at or before the start act on the initial state.
    while (next_event < events.size() && events[next_event].time <= t0 + kTimeSlack) {
        apply(events[next_event++]);
    }
    record(t0);

    const long total = static_cast<long>(std::ceil((t_end - t0) / dt - 1e-9));
    Stepper stepper(static_cast<int>(x.size()));
    double tau = t0;
    try {
        for (long k = 0; k < total; ++k) {
            const double t_next = std::min(t0 + static_cast<double>(k + 1) * dt, t_end);
            while (next_event < events.size() && events[next_event].time < t_next - kTimeSlack) {
                const double te = events[next_event].time;
                if (te > tau + kTimeSlack) {
                    stepper.step(sys, x, te - tau);
                    tau = te;
                }
                apply(events[next_event++]);
            }
            stepper.step(sys, x, t_next - tau);
            tau = t_next;
            ++traj.steps;
            if ((k + 1) % options.decimation == 0 || k + 1 == total) {
                record(t_next);
            }
        }
        // Catch a floor crossing on the very last step as well.
        for (int i = 0; i < n; ++i) {
            if (!(x(i) > sys.min_voltage)) {
                throw VoltageError(i, x(i), "terminal voltage at or below the floor");
            }
        }
    } catch (const VoltageError& err) {
        traj.verdict = RunVerdict::VoltageCollapse;
        CollapseInfo info;
        info.bus = err.bus();
        info.time = tau;
        info.voltage = err.voltage();
        traj.collapse = info;
        if (traj.times.back() < tau) {
            record(tau);
        }
    }
    return traj;
}

NetworkStatus initial_status(const MicrogridSpec& spec) {
    return spec.scenario.initial == InitialCondition::IsolatedPrimary ? NetworkStatus::isolated(spec.line_count())
                                                                      : NetworkStatus::all_on(spec.line_count());
}

GlobalState initial_state(const MicrogridSpec& spec) {
    spec.validate();
    const int n = spec.bus_count();
    if (spec.scenario.initial == InitialCondition::Equilibrium) {
        EquilibriumAnalysis analysis = analyse_equilibrium(spec, 0.0);
        if (!analysis.point) {
            throw Error(ErrorKind::NoCertificate, "no equilibrium to start from (Delta = " +
                                                      std::to_string(analysis.cert.delta) + ")");
        }
        return analysis.point->state;
    }
    const std::vector<ControllerGains> gains = spec.gains();
    GlobalState state(n, spec.line_count());
    for (int i = 0; i < n; ++i) {
        const Bus& bus = spec.buses[static_cast<std::size_t>(i)];
        const ControllerGains& g = gains[static_cast<std::size_t>(i)];
        if (g.k3 == 0.0) {
            throw Error(ErrorKind::SingularGamma, "bus " + std::to_string(i + 1) + " has k3 = 0");
        }
        const double v = bus.reference;
        const double it = zip_current(bus.load, v, spec.solver.min_voltage);
        const double alpha = (g.k1 - 1.0) / bus.dgu.inductance;
        const double beta = (g.k2 - bus.dgu.resistance) / bus.dgu.inductance;
        const double gamma = g.k3 / bus.dgu.inductance;
        state.voltage()(i) = v;
        state.filter_current()(i) = it;
        state.integrator()(i) = -(alpha * v + beta * it) / gamma;
    }
    return state;
}

Trajectory run_scenario(const MicrogridSpec& spec) {
    IntegrateOptions options;
    options.t_start = spec.scenario.t_start;
    options.dt = spec.solver.dt;
    options.decimation = spec.solver.decimation;
    options.status = initial_status(spec);
    return integrate(spec, initial_state(spec), spec.scenario.events, spec.scenario.t_end, options);
}

SteadyState steady_state_before(const Trajectory& traj, double until, double window, double tol) {
    if (traj.size() < 2) {
        throw Error(ErrorKind::NotSettled, "trajectory has fewer than two samples");
    }
    std::size_t last = traj.size() - 1;
    while (last > 0 && traj.times[last] > until + kTimeSlack) {
        --last;
    }
    const double t_last = traj.times[last];
    if (!(window > 0.0) || t_last - traj.times.front() < window) {
        throw Error(ErrorKind::NotSettled, "window must be positive and shorter than the trajectory");
    }
    std::size_t first = last;
    while (first > 0 && traj.times[first - 1] >= t_last - window - kTimeSlack) {
        --first;
    }
    if (first == last) {
        throw Error(ErrorKind::NotSettled, "window holds a single sample");
    }

    SteadyState out{GlobalState(traj.buses, traj.lines), false, 0.0, 1.0};
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(traj.states[first].size());
    double scale = 1.0;
    double worst = 0.0;
    for (std::size_t k = first; k <= last; ++k) {
        sum += traj.states[k];
        scale = std::max(scale, traj.states[k].cwiseAbs().maxCoeff());
        if (k > first) {
            const double h = traj.times[k] - traj.times[k - 1];
            if (h > 0.0) {
                worst = std::max(worst, (traj.states[k] - traj.states[k - 1]).cwiseAbs().maxCoeff() / h);
            }
        }
    }
    out.state.data() = sum / static_cast<double>(last - first + 1);
    out.scale = scale;
    out.max_derivative = worst;
    out.settled = std::isfinite(worst) && worst <= tol * scale;
    return out;
}

SteadyState steady_state_of(const Trajectory& traj, double window, double tol) {
    if (traj.size() == 0) {
        throw Error(ErrorKind::NotSettled, "empty trajectory");
    }
    return steady_state_before(traj, traj.times.back(), window, tol);
}

double sharing_error(const Eigen::VectorXd& filter_current, const Eigen::VectorXd& ratings) {
    const Eigen::VectorXd ratio = filter_current.cwiseQuotient(ratings);
    return ratio.maxCoeff() - ratio.minCoeff();
}

double balancing_error(const Eigen::VectorXd& voltage, const Eigen::VectorXd& references,
                       const Eigen::VectorXd& ratings) {
    return std::abs(ratings.dot(voltage - references));
}

double band_violation(const Eigen::VectorXd& voltage, double v_min, double v_max) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < voltage.size(); ++i) {
        worst = std::max({worst, v_min - voltage(i), voltage(i) - v_max});
    }
    return worst;
}

Metrics compute_metrics(const Trajectory& traj, const MicrogridSpec& spec, const ExistenceCertificate* cert) {
    const Eigen::VectorXd ratings = spec.ratings();
    const bool banded = cert != nullptr && cert->exists;
    Metrics out;
    out.times = traj.times;
    out.sharing_error.reserve(traj.size());
    out.balancing_error.reserve(traj.size());
    out.consensus_sum.reserve(traj.size());
    const int n = traj.buses;
    const int m = traj.lines;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const Eigen::VectorXd& x = traj.states[k];
        const Eigen::VectorXd refs = traj.references.empty() ? spec.references() : traj.references[k];
        out.sharing_error.push_back(sharing_error(x.segment(n, n), ratings));
        out.balancing_error.push_back(balancing_error(x.head(n), refs, ratings));
        out.consensus_sum.push_back(x.segment(3 * n + m, n).sum());
        if (banded) {
            out.band_violation.push_back(band_violation(x.head(n), cert->v_min(), cert->v_max()));
        }
    }
    return out;
}

}  // namespace dcmg
