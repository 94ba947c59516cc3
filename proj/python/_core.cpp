#include "dcmg/config.hpp"
#include "dcmg/control.hpp"
#include "dcmg/equilibrium.hpp"
#include "dcmg/error.hpp"
#include "dcmg/network.hpp"
#include "dcmg/report.hpp"
#include "dcmg/simulate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace dcmg;

namespace {

Eigen::MatrixXd stack_states(const Trajectory& traj) {
    const Eigen::Index dim = traj.states.empty() ? 0 : traj.states.front().size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(traj.size()), dim);
    for (std::size_t k = 0; k < traj.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = traj.states[k].transpose();
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "DC microgrid secondary control: certificates, equilibria and simulation";

    py::register_exception<Error>(m, "Error");

    py::class_<DguParams>(m, "DguParams")
        .def(py::init<double, double, double, double>(), py::arg("resistance"), py::arg("inductance"),
             py::arg("capacitance"), py::arg("rated_current"))
        .def_readwrite("resistance", &DguParams::resistance)
        .def_readwrite("inductance", &DguParams::inductance)
        .def_readwrite("capacitance", &DguParams::capacitance)
        .def_readwrite("rated_current", &DguParams::rated_current);

    py::class_<ControllerGains>(m, "ControllerGains")
        .def(py::init<double, double, double, double>(), py::arg("k1"), py::arg("k2"), py::arg("k3"), py::arg("k4"))
        .def_readwrite("k1", &ControllerGains::k1)
        .def_readwrite("k2", &ControllerGains::k2)
        .def_readwrite("k3", &ControllerGains::k3)
        .def_readwrite("k4", &ControllerGains::k4);

    py::class_<GainVerdict>(m, "GainVerdict")
        .def_readonly("k3_upper_bound", &GainVerdict::k3_upper_bound)
        .def_readonly("violations", &GainVerdict::violations)
        .def_property_readonly("in_stability_set", &GainVerdict::in_stability_set)
        .def_property_readonly("guaranteed", &GainVerdict::guaranteed);

    m.def("validate_gains", &validate_gains, py::arg("gains"), py::arg("dgu"));
    m.def("synthesize_gains", [](const DguParams& dgu) { return synthesize_gains(dgu); }, py::arg("dgu"));

    py::class_<MicrogridSpec>(m, "MicrogridSpec")
        .def_readonly("name", &MicrogridSpec::name)
        .def_property_readonly("bus_count", &MicrogridSpec::bus_count)
        .def_property_readonly("line_count", &MicrogridSpec::line_count)
        .def_property_readonly("ratings", &MicrogridSpec::ratings)
        .def_property_readonly("references", &MicrogridSpec::references)
        .def_property_readonly("load_powers", &MicrogridSpec::load_powers)
        .def_property_readonly("gains", &MicrogridSpec::gains)
        .def_property_readonly("electrical_laplacian",
                               [](const MicrogridSpec& s) { return electrical_laplacian(s.electrical); })
        .def_property_readonly("comm_laplacian", [](const MicrogridSpec& s) { return comm_laplacian(s.comm); })
        .def_property(
            "t_end", [](const MicrogridSpec& s) { return s.scenario.t_end; },
            [](MicrogridSpec& s, double t) { s.scenario.t_end = t; })
        .def("scale_line_resistances",
             [](MicrogridSpec& s, double factor) { s.electrical = s.electrical.with_scaled_resistances(factor); },
             py::arg("factor"));

    m.def("load_config", &load_config, py::arg("path"));
    m.def("parse_config", &parse_config, py::arg("text"), py::arg("origin") = "<config>");
    m.def("emit_config", &emit_config, py::arg("spec"));

    py::class_<ExistenceCertificate>(m, "ExistenceCertificate")
        .def_readonly("nominal", &ExistenceCertificate::nominal)
        .def_readonly("critical_power", &ExistenceCertificate::critical_power)
        .def_readonly("delta", &ExistenceCertificate::delta)
        .def_readonly("delta_minus", &ExistenceCertificate::delta_minus)
        .def_readonly("delta_plus", &ExistenceCertificate::delta_plus)
        .def_readonly("exists", &ExistenceCertificate::exists)
        .def_readonly("abs_delta", &ExistenceCertificate::abs_delta)
        .def_property_readonly("lower", &ExistenceCertificate::lower)
        .def_property_readonly("upper", &ExistenceCertificate::upper);

    m.def(
        "certificate",
        [](const MicrogridSpec& spec) {
            return certificate(build_flow_system(spec), spec.load_powers(), spec.references());
        },
        py::arg("spec"));

    py::class_<EquilibriumPoint>(m, "EquilibriumPoint")
        .def_property_readonly("state", [](const EquilibriumPoint& e) { return e.state.data(); })
        .def_property_readonly("voltage", [](const EquilibriumPoint& e) { return Eigen::VectorXd(e.state.voltage()); })
        .def_property_readonly("filter_current",
                               [](const EquilibriumPoint& e) { return Eigen::VectorXd(e.state.filter_current()); })
        .def_readonly("sharing_level", &EquilibriumPoint::sharing_level)
        .def_readonly("offset", &EquilibriumPoint::offset);

    py::class_<StabilityReport>(m, "StabilityReport")
        .def_readonly("eigenvalues", &StabilityReport::eigenvalues)
        .def_readonly("stable", &StabilityReport::stable)
        .def_readonly("spectral_abscissa", &StabilityReport::spectral_abscissa)
        .def_readonly("zero_mode_residual", &StabilityReport::zero_mode_residual);

    m.def(
        "equilibrium",
        [](const MicrogridSpec& spec, double consensus_sum) {
            const EquilibriumAnalysis a = analyse_equilibrium(spec, consensus_sum);
            if (!a.point) throw Error(ErrorKind::NoCertificate, "no certified equilibrium");
            return *a.point;
        },
        py::arg("spec"), py::arg("consensus_sum") = 0.0);
    m.def("stability", &linearized_stability, py::arg("spec"), py::arg("equilibrium"), py::arg("zero_tol") = 1e-9);

    m.def(
        "run",
        [](const MicrogridSpec& spec) {
            Trajectory traj;
            {
                py::gil_scoped_release release;
                traj = run_scenario(spec);
            }
            const Metrics metrics = compute_metrics(traj, spec);
            py::dict out;
            out["times"] = Eigen::VectorXd(
                Eigen::Map<const Eigen::VectorXd>(traj.times.data(), static_cast<Eigen::Index>(traj.size())));
            out["states"] = stack_states(traj);
            out["buses"] = traj.buses;
            out["lines"] = traj.lines;
            out["collapsed"] = traj.verdict == RunVerdict::VoltageCollapse;
            if (traj.collapse) {
                out["collapse_bus"] = traj.collapse->bus;
                out["collapse_time"] = traj.collapse->time;
            }
            out["sharing_error"] = metrics.sharing_error;
            out["balancing_error"] = metrics.balancing_error;
            out["consensus_sum"] = metrics.consensus_sum;
            return out;
        },
        py::arg("spec"));

    m.def("trajectory_header", &trajectory_header, py::arg("buses"), py::arg("lines"));
    m.def("format_number", &format_number, py::arg("value"));
}
