#include "dcmg/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dcmg {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::InvalidParameter, "cannot write " + path.string());
    }
    return out;
}

void write_row(std::ostream& out, double t, const Eigen::VectorXd& x) {
    out << format_number(t);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        out << ',' << format_number(x(i));
    }
    out << '\n';
}

}  // namespace

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == 0.0) return "0";  // folds -0 into 0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

std::vector<std::string> trajectory_header(int buses, int lines) {
    std::vector<std::string> cols{"t"};
    for (const char* prefix : {"V_", "It_", "v_"}) {
        for (int i = 1; i <= buses; ++i) cols.push_back(prefix + std::to_string(i));
    }
    for (int l = 1; l <= lines; ++l) cols.push_back("I_" + std::to_string(l));
    for (int i = 1; i <= buses; ++i) cols.push_back("Omega_" + std::to_string(i));
    return cols;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out = open_out(path);
    const auto header = trajectory_header(traj.buses, traj.lines);
    for (std::size_t c = 0; c < header.size(); ++c) {
        out << (c ? "," : "") << header[c];
    }
    out << '\n';
    for (std::size_t k = 0; k < traj.size(); ++k) {
        write_row(out, traj.times[k], traj.states[k]);
    }
}

void write_metrics_csv(const std::filesystem::path& path, const Metrics& metrics) {
    std::ofstream out = open_out(path);
    out << "t,sharing_error,balancing_error,band_violation\n";
    const bool banded = !metrics.band_violation.empty();
    for (std::size_t k = 0; k < metrics.times.size(); ++k) {
        out << format_number(metrics.times[k]) << ',' << format_number(metrics.sharing_error[k]) << ','
            << format_number(metrics.balancing_error[k]) << ','
            << (banded ? format_number(metrics.band_violation[k]) : std::string("nan")) << '\n';
    }
}

void write_equilibrium_csv(const std::filesystem::path& path, const EquilibriumPoint& point,
                           const VoltageSolution& solution) {
    std::ofstream out = open_out(path);
    const GlobalState& s = point.state;
    out << "quantity,index,value\n";
    auto block = [&](const char* name, const auto& values) {
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            out << name << ',' << i + 1 << ',' << format_number(values(i)) << '\n';
        }
    };
    block("V", s.voltage());
    block("It", s.filter_current());
    block("v", s.integrator());
    block("I", s.line_current());
    block("Omega", s.consensus());
    out << "epsilon,0," << format_number(point.sharing_level) << '\n';
    out << "eta,0," << format_number(point.offset) << '\n';
    out << "voltage_residual,0," << format_number(solution.residual) << '\n';
    out << "iterations,0," << solution.iterations << '\n';
}

std::string plot_script(const MicrogridSpec& spec, const ExistenceCertificate* cert) {
    const int n = spec.bus_count();
    std::ostringstream py;
    py << "# Renders the three standard panels from trajectory.csv.\n"
          "# Usage: python3 plot.py [output.png]\n"
          "import csv\n"
          "import os\n"
          "import sys\n\n"
          "import matplotlib\n"
          "matplotlib.use(\"Agg\")\n"
          "import matplotlib.pyplot as plt\n\n"
          "HERE = os.path.dirname(os.path.abspath(__file__))\n"
       << "N = " << n << "\n"
       << "RATINGS = [";
    for (int i = 0; i < n; ++i) py << (i ? ", " : "") << format_number(spec.buses[i].dgu.rated_current);
    py << "]\nREFERENCES = [";
    for (int i = 0; i < n; ++i) py << (i ? ", " : "") << format_number(spec.buses[i].reference);
    py << "]\n";
    if (cert != nullptr && cert->exists) {
        py << "V_MIN = " << format_number(cert->v_min()) << "\nV_MAX = " << format_number(cert->v_max()) << "\n";
    } else {
        py << "V_MIN = None\nV_MAX = None\n";
    }
    py << "\n\n"
          "def load(name):\n"
          "    with open(os.path.join(HERE, name), newline=\"\") as fh:\n"
          "        rows = list(csv.reader(fh))\n"
          "    header, body = rows[0], rows[1:]\n"
          "    cols = {h: [float(r[i]) for r in body] for i, h in enumerate(header)}\n"
          "    return cols\n\n\n"
          "def main():\n"
          "    traj = load(\"trajectory.csv\")\n"
          "    t = traj[\"t\"]\n"
          "    fig, axes = plt.subplots(3, 1, figsize=(8, 10), sharex=True)\n\n"
          "    ax = axes[0]\n"
          "    for i in range(1, N + 1):\n"
          "        ax.plot(t, traj[f\"V_{i}\"], label=f\"DGU {i}\")\n"
          "    if V_MIN is not None:\n"
          "        ax.axhline(V_MIN, color=\"k\", linestyle=\"--\", linewidth=0.8, label=\"V min\")\n"
          "        ax.axhline(V_MAX, color=\"k\", linestyle=\":\", linewidth=0.8, label=\"V max\")\n"
          "    ax.set_ylabel(\"PC voltage [V]\")\n"
          "    ax.legend(ncol=4, fontsize=\"small\")\n\n"
          "    ax = axes[1]\n"
          "    for i in range(1, N + 1):\n"
          "        ax.plot(t, [x / RATINGS[i - 1] for x in traj[f\"It_{i}\"]], label=f\"DGU {i}\")\n"
          "    ax.set_ylabel(\"I_t / I_t^s\")\n"
          "    ax.legend(ncol=3, fontsize=\"small\")\n\n"
          "    ax = axes[2]\n"
          "    weighted = [sum(RATINGS[i] * traj[f\"V_{i + 1}\"][k] for i in range(N)) for k in range(len(t))]\n"
          "    target = sum(r * v for r, v in zip(RATINGS, REFERENCES))\n"
          "    ax.plot(t, weighted, label=\"sum I_t^s V\")\n"
          "    ax.axhline(target, color=\"k\", linestyle=\"--\", linewidth=0.8, label=\"sum I_t^s V_ref\")\n"
          "    ax.set_ylabel(\"weighted voltage [V A]\")\n"
          "    ax.set_xlabel(\"time [s]\")\n"
          "    ax.legend(fontsize=\"small\")\n\n"
          "    fig.tight_layout()\n"
          "    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, \"figure.png\")\n"
          "    fig.savefig(out, dpi=150)\n\n\n"
          "if __name__ == \"__main__\":\n"
          "    main()\n";
    return py.str();
}

bool LoadCondition::all() const {
    return std::all_of(holds.begin(), holds.end(), [](bool b) { return b; });
}

LoadCondition load_condition(const MicrogridSpec& spec, const Eigen::VectorXd& voltage) {
    LoadCondition out;
    for (int i = 0; i < spec.bus_count(); ++i) {
        const ZipLoad& load = spec.buses[static_cast<std::size_t>(i)].load;
        out.holds.push_back(load.power < load.conductance * voltage(i) * voltage(i));
    }
    return out;
}

std::string to_string(ReportVerdict verdict) {
    switch (verdict) {
        case ReportVerdict::Converged: return "Converged";
        case ReportVerdict::VoltageCollapse: return "VoltageCollapse";
        case ReportVerdict::NotSettled: return "NotSettled";
    }
    return "?";
}

RunReport analyse(const MicrogridSpec& spec) {
    RunReport report;
    report.name = spec.name;
    for (const Bus& bus : spec.buses) {
        report.gains.push_back(validate_gains(*bus.gains, bus.dgu));
    }
    try {
        const ConstrainedFlowSystem system = build_flow_system(spec);
        report.cert = certificate(system, spec.load_powers(), spec.references());
        EquilibriumAnalysis analysis = analyse_equilibrium(spec, 0.0);
        if (!analysis.cert.exists) {
            report.equilibrium_error = ErrorKind::NoCertificate;
            report.equilibrium_note = "no certificate: Delta = " + format_number(analysis.cert.delta);
            if (!analysis.cert.nonpositive_buses.empty()) {
                report.equilibrium_note += " and V* has nonpositive entries";
            }
            return report;
        }
        report.solution = analysis.solution;
        report.equilibrium = analysis.point;
        report.stability = linearized_stability(spec, *analysis.point);
        report.loads = load_condition(spec, analysis.solution->voltage);
    } catch (const Error& err) {
        report.equilibrium_error = err.kind();
        report.equilibrium_note = err.what();
    }
    return report;
}

void summarize_run(RunReport& report, const MicrogridSpec& spec, const Trajectory& traj, const Metrics& metrics) {
    report.ran = true;
    report.collapse = traj.collapse;
    report.final_time = traj.times.back();
    report.terminal_sharing = metrics.sharing_error.back();
    report.terminal_balancing = metrics.balancing_error.back();
    report.balancing_scale = std::abs(spec.ratings().dot(traj.references.back()));
    if (!metrics.band_violation.empty()) report.terminal_band_violation = metrics.band_violation.back();
    double drift = 0.0;
    for (double s : metrics.consensus_sum) drift = std::max(drift, std::abs(s - metrics.consensus_sum.front()));
    report.consensus_drift = drift;
    if (traj.verdict == RunVerdict::VoltageCollapse) {
        report.verdict = ReportVerdict::VoltageCollapse;
        return;
    }
    try {
        const SteadyState ss = steady_state_of(traj, spec.solver.settle_window, spec.solver.settle_tol);
        report.verdict = ss.settled ? ReportVerdict::Converged : ReportVerdict::NotSettled;
    } catch (const Error&) {
        report.verdict = ReportVerdict::NotSettled;
    }
}

std::string format_report(const RunReport& r) {
    std::ostringstream os;
    os << "microgrid: " << (r.name.empty() ? "(unnamed)" : r.name) << "\n\n";

    os << "controller gains\n";
    for (std::size_t i = 0; i < r.gains.size(); ++i) {
        const GainVerdict& g = r.gains[i];
        os << "  DGU " << i + 1 << ": " << (g.in_stability_set() ? "valid" : "INVALID")
           << (g.k4_equals_k1 ? "" : ", k4 != k1 (guarantee void)") << ", k3 bound " << format_number(g.k3_upper_bound);
        for (const auto& v : g.violations) os << "; " << v;
        os << '\n';
    }

    os << "\nexistence certificate\n";
    if (r.cert) {
        const ExistenceCertificate& c = *r.cert;
        os << "  Delta        " << format_number(c.delta) << '\n'
           << "  delta-       " << format_number(c.delta_minus) << '\n'
           << "  delta+       " << format_number(c.delta_plus) << '\n'
           << "  V* min/max   " << format_number(c.nominal.minCoeff()) << " / " << format_number(c.nominal.maxCoeff())
           << " V\n"
           << "  exists       " << (c.exists ? "yes" : "no") << '\n';
        if (c.exists) {
            os << "  band         [" << format_number(c.v_min()) << ", " << format_number(c.v_max()) << "] V\n"
               << "  low floor < V_ref " << (c.low_set_excluded ? "yes" : "no") << '\n';
        }
        os << "  |P_cri| Delta " << format_number(c.abs_delta) << ", delta- " << format_number(c.abs_delta_minus)
           << '\n';
    } else {
        os << "  unavailable\n";
    }

    os << "\nequilibrium\n";
    if (r.equilibrium && r.solution) {
        const GlobalState& s = r.equilibrium->state;
        os << "  fixed-point iterations " << r.solution->iterations << ", residual " << format_number(r.solution->residual)
           << '\n'
           << "  sharing level epsilon  " << format_number(r.equilibrium->sharing_level) << '\n'
           << "  inside signed band     " << (r.solution->in_band ? "yes" : "no") << '\n'
           << "  inside |P_cri| band    " << (r.solution->in_abs_band ? "yes" : "no") << '\n';
        for (int i = 0; i < s.buses(); ++i) {
            os << "  bus " << i + 1 << ": V " << format_number(s.voltage()(i)) << " V, It "
               << format_number(s.filter_current()(i)) << " A";
            if (r.loads) os << ", P < Y V^2 " << (r.loads->holds[static_cast<std::size_t>(i)] ? "yes" : "NO");
            os << '\n';
        }
    } else {
        os << "  none: " << r.equilibrium_note << '\n';
    }
    if (r.stability) {
        const StabilityReport& st = *r.stability;
        os << "  linearization " << (st.stable ? "Stable" : "NOT stable") << ": " << st.eigenvalues_near_zero
           << " eigenvalue(s) near zero, zero-mode residual " << format_number(st.zero_mode_residual)
           << ", next abscissa " << format_number(st.spectral_abscissa) << '\n';
    }

    if (r.ran) {
        os << "\nrun\n"
           << "  verdict      " << to_string(r.verdict) << '\n'
           << "  final time   " << format_number(r.final_time) << " s\n";
        if (r.collapse) {
            os << "  collapse     bus " << r.collapse->bus + 1 << " at t = " << format_number(r.collapse->time)
               << " s (V = " << format_number(r.collapse->voltage) << " V)\n";
        }
        os << "  sharing error     " << format_number(r.terminal_sharing) << '\n'
           << "  balancing error   " << format_number(r.terminal_balancing) << " (scale "
           << format_number(r.balancing_scale) << ")\n";
        if (r.terminal_band_violation) {
            os << "  band violation    " << format_number(*r.terminal_band_violation)
               << " V (signed band for the loads at the start of the run)\n";
        }
        os << "  1^T Omega drift   " << format_number(r.consensus_drift) << '\n';
    }
    if (!r.files.empty()) {
        os << "\nfiles\n";
        for (const auto& f : r.files) os << "  " << f << '\n';
    }
    return os.str();
}

}  // namespace dcmg
