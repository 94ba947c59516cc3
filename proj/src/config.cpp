#include "dcmg/config.hpp"

#include "dcmg/control.hpp"
#include "dcmg/error.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace dcmg {

namespace {

class Reader {
public:
    explicit Reader(std::string origin) : origin_(std::move(origin)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& what) const {
        std::ostringstream os;
        os << origin_;
        if (node.IsDefined() && node.Mark().line >= 0) {
            os << ':' << node.Mark().line + 1 << ':' << node.Mark().column + 1;
        }
        os << ": " << field << ": " << what;
        throw Error(ErrorKind::ConfigError, os.str());
    }

    void expect_map(const YAML::Node& node, const std::string& field) const {
        if (!node.IsMap()) fail(node, field, "expected a mapping");
    }

    void expect_seq(const YAML::Node& node, const std::string& field) const {
        if (!node.IsSequence()) fail(node, field, "expected a list");
    }

    void only_keys(const YAML::Node& node, const std::string& field, const std::set<std::string>& allowed) const {
        for (const auto& kv : node) {
            const std::string key = kv.first.as<std::string>();
            if (!allowed.count(key)) {
                fail(kv.first, field.empty() ? key : field + "." + key, "unknown field");
            }
        }
    }

    double number(const YAML::Node& parent, const std::string& key, const std::string& field) const {
        const YAML::Node node = parent[key];
        if (!node.IsDefined()) fail(parent, join(field, key), "missing required field");
        return as_number(node, join(field, key));
    }

    double number_or(const YAML::Node& parent, const std::string& key, const std::string& field, double fallback) const {
        const YAML::Node node = parent[key];
        if (!node.IsDefined()) return fallback;
        return as_number(node, join(field, key));
    }

    int integer(const YAML::Node& parent, const std::string& key, const std::string& field) const {
        const YAML::Node node = parent[key];
        if (!node.IsDefined()) fail(parent, join(field, key), "missing required field");
        return as_integer(node, join(field, key));
    }

    int as_integer(const YAML::Node& node, const std::string& field) const {
        if (!node.IsScalar()) fail(node, field, "expected an integer");
        try {
            return node.as<int>();
        } catch (const YAML::Exception&) {
            fail(node, field, "expected an integer, got '" + node.Scalar() + "'");
        }
    }

    double as_number(const YAML::Node& node, const std::string& field) const {
        if (!node.IsScalar()) fail(node, field, "expected a number");
        double value = 0.0;
        try {
            value = node.as<double>();
        } catch (const YAML::Exception&) {
            fail(node, field, "expected a number, got '" + node.Scalar() + "'");
        }
        if (!std::isfinite(value)) fail(node, field, "must be finite");
        return value;
    }

    std::string text(const YAML::Node& node, const std::string& field) const {
        if (!node.IsScalar()) fail(node, field, "expected a string");
        return node.Scalar();
    }

    static std::string join(const std::string& field, const std::string& key) {
        return field.empty() ? key : field + "." + key;
    }

    static std::string index(const std::string& field, std::size_t i) {
        return field + "[" + std::to_string(i + 1) + "]";
    }

private:
    std::string origin_;
};

ZipLoad read_load(const Reader& r, const YAML::Node& node, const std::string& field) {
    r.expect_map(node, field);
    r.only_keys(node, field, {"conductance", "current", "power"});
    ZipLoad load;
    load.conductance = r.number_or(node, "conductance", field, 0.0);
    load.current = r.number_or(node, "current", field, 0.0);
    load.power = r.number_or(node, "power", field, 0.0);
    if (load.conductance < 0.0) r.fail(node["conductance"], field + ".conductance", "must be >= 0");
    if (load.power < 0.0) r.fail(node["power"], field + ".power", "must be >= 0");
    return load;
}

double positive(const Reader& r, const YAML::Node& parent, const std::string& key, const std::string& field) {
    const double value = r.number(parent, key, field);
    if (!(value > 0.0)) r.fail(parent[key], Reader::join(field, key), "must be > 0");
    return value;
}

int one_based(const Reader& r, const YAML::Node& parent, const std::string& key, const std::string& field, int count,
              const char* what) {
    const int id = r.integer(parent, key, field);
    if (id < 1 || id > count) {
        r.fail(parent[key], Reader::join(field, key),
               std::string(what) + " id " + std::to_string(id) + " out of range 1.." + std::to_string(count));
    }
    return id - 1;
}

ScenarioEvent read_event(const Reader& r, const YAML::Node& node, const std::string& field, int buses, int lines) {
    r.expect_map(node, field);
    ScenarioEvent event;
    event.time = r.number(node, "time", field);
    const YAML::Node type_node = node["type"];
    if (!type_node.IsDefined()) r.fail(node, field + ".type", "missing required field");
    const std::string type = r.text(type_node, field + ".type");
    if (type == "plug_in") {
        r.only_keys(node, field, {"time", "type", "lines"});
        PlugIn plug;
        if (node["lines"].IsDefined()) {
            const YAML::Node ids = node["lines"];
            r.expect_seq(ids, field + ".lines");
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const int id = r.as_integer(ids[i], Reader::index(field + ".lines", i));
                if (id < 1 || id > lines) {
                    r.fail(ids[i], Reader::index(field + ".lines", i), "line id out of range");
                }
                plug.lines.push_back(id - 1);
            }
            if (plug.lines.empty()) r.fail(ids, field + ".lines", "omit the list to plug in every line");
        }
        event.action = plug;
    } else if (type == "load_step") {
        r.only_keys(node, field, {"time", "type", "bus", "load"});
        LoadStep step;
        step.bus = one_based(r, node, "bus", field, buses, "bus");
        if (!node["load"].IsDefined()) r.fail(node, field + ".load", "missing required field");
        step.load = read_load(r, node["load"], field + ".load");
        event.action = step;
    } else if (type == "comm_collapse") {
        r.only_keys(node, field, {"time", "type"});
        event.action = CommCollapse{};
    } else if (type == "comm_restore") {
        r.only_keys(node, field, {"time", "type"});
        event.action = CommRestore{};
    } else if (type == "set_reference") {
        r.only_keys(node, field, {"time", "type", "bus", "voltage"});
        SetReference set;
        set.bus = one_based(r, node, "bus", field, buses, "bus");
        set.voltage = positive(r, node, "voltage", field);
        event.action = set;
    } else {
        r.fail(type_node, field + ".type",
               "unknown event type '" + type +
                   "' (expected plug_in, load_step, comm_collapse, comm_restore or set_reference)");
    }
    return event;
}

MicrogridSpec parse_root(const Reader& r, const YAML::Node& root) {
    r.expect_map(root, "<root>");
    r.only_keys(root, "", {"name", "buses", "lines", "comm", "gain_synthesis", "scenario", "solver"});

    const YAML::Node bus_nodes = root["buses"];
    if (!bus_nodes.IsDefined()) r.fail(root, "buses", "missing required field");
    r.expect_seq(bus_nodes, "buses");
    const int n = static_cast<int>(bus_nodes.size());
    if (n < 1) r.fail(bus_nodes, "buses", "at least one bus is required");

    SynthesisMargins margins;
    if (root["gain_synthesis"].IsDefined()) {
        const YAML::Node g = root["gain_synthesis"];
        r.expect_map(g, "gain_synthesis");
        r.only_keys(g, "gain_synthesis", {"m1", "m2", "m3", "s1", "s2"});
        margins.m1 = r.number_or(g, "m1", "gain_synthesis", margins.m1);
        margins.m2 = r.number_or(g, "m2", "gain_synthesis", margins.m2);
        margins.m3 = r.number_or(g, "m3", "gain_synthesis", margins.m3);
        margins.s1 = r.number_or(g, "s1", "gain_synthesis", margins.s1);
        margins.s2 = r.number_or(g, "s2", "gain_synthesis", margins.s2);
        for (const char* key : {"m1", "m2", "m3"}) {
            const double v = r.number_or(g, key, "gain_synthesis", 0.5);
            if (!(v > 0.0 && v < 1.0)) r.fail(g[key], std::string("gain_synthesis.") + key, "must lie in (0, 1)");
        }
        for (const char* key : {"s1", "s2"}) {
            const double v = r.number_or(g, key, "gain_synthesis", 1.0);
            if (!(v > 0.0)) r.fail(g[key], std::string("gain_synthesis.") + key, "must be > 0");
        }
    }

    std::vector<Bus> buses(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const YAML::Node b = bus_nodes[static_cast<std::size_t>(i)];
        const std::string field = Reader::index("buses", static_cast<std::size_t>(i));
        r.expect_map(b, field);
        r.only_keys(b, field, {"id", "dgu", "gains", "load", "reference"});
        if (b["id"].IsDefined() && r.as_integer(b["id"], field + ".id") != i + 1) {
            r.fail(b["id"], field + ".id", "buses must be listed in order with ids 1..N");
        }
        Bus& bus = buses[static_cast<std::size_t>(i)];
        const YAML::Node d = b["dgu"];
        if (!d.IsDefined()) r.fail(b, field + ".dgu", "missing required field");
        r.expect_map(d, field + ".dgu");
        r.only_keys(d, field + ".dgu", {"resistance", "inductance", "capacitance", "rated_current"});
        bus.dgu.resistance = positive(r, d, "resistance", field + ".dgu");
        bus.dgu.inductance = positive(r, d, "inductance", field + ".dgu");
        bus.dgu.capacitance = positive(r, d, "capacitance", field + ".dgu");
        bus.dgu.rated_current = positive(r, d, "rated_current", field + ".dgu");
        if (b["load"].IsDefined()) bus.load = read_load(r, b["load"], field + ".load");
        bus.reference = positive(r, b, "reference", field);
        if (b["gains"].IsDefined()) {
            const YAML::Node g = b["gains"];
            r.expect_map(g, field + ".gains");
            r.only_keys(g, field + ".gains", {"k1", "k2", "k3", "k4"});
            ControllerGains gains;
            gains.k1 = r.number(g, "k1", field + ".gains");
            gains.k2 = r.number(g, "k2", field + ".gains");
            gains.k3 = r.number(g, "k3", field + ".gains");
            gains.k4 = r.number(g, "k4", field + ".gains");
            bus.gains = gains;
        } else {
            bus.gains = synthesize_gains(bus.dgu, margins);
        }
    }

    const YAML::Node line_nodes = root["lines"];
    std::vector<Line> lines;
    if (line_nodes.IsDefined()) {
        r.expect_seq(line_nodes, "lines");
        for (std::size_t l = 0; l < line_nodes.size(); ++l) {
            const YAML::Node node = line_nodes[l];
            const std::string field = Reader::index("lines", l);
            r.expect_map(node, field);
            r.only_keys(node, field, {"from", "to", "resistance", "inductance"});
            Line line;
            line.source = one_based(r, node, "from", field, n, "bus");
            line.sink = one_based(r, node, "to", field, n, "bus");
            if (line.source == line.sink) r.fail(node, field, "self loop");
            line.resistance = positive(r, node, "resistance", field);
            line.inductance = positive(r, node, "inductance", field);
            lines.push_back(line);
        }
    }

    std::vector<CommLink> links;
    const YAML::Node comm_nodes = root["comm"];
    if (comm_nodes.IsDefined()) {
        r.expect_seq(comm_nodes, "comm");
        for (std::size_t k = 0; k < comm_nodes.size(); ++k) {
            const YAML::Node node = comm_nodes[k];
            const std::string field = Reader::index("comm", k);
            r.expect_map(node, field);
            r.only_keys(node, field, {"a", "b", "weight"});
            CommLink link;
            link.a = one_based(r, node, "a", field, n, "bus");
            link.b = one_based(r, node, "b", field, n, "bus");
            if (link.a == link.b) r.fail(node, field, "self loop");
            link.weight = r.number_or(node, "weight", field, 1.0);
            if (!(link.weight > 0.0)) r.fail(node["weight"], field + ".weight", "must be > 0");
            links.push_back(link);
        }
    }

    SolverSettings solver;
    if (root["solver"].IsDefined()) {
        const YAML::Node s = root["solver"];
        r.expect_map(s, "solver");
        r.only_keys(s, "solver",
                    {"dt", "decimation", "min_voltage", "residual_tol", "settle_tol", "settle_window", "rank_tol",
                     "fixed_point_tol", "max_iterations"});
        solver.dt = r.number_or(s, "dt", "solver", solver.dt);
        if (s["decimation"].IsDefined()) solver.decimation = r.as_integer(s["decimation"], "solver.decimation");
        solver.min_voltage = r.number_or(s, "min_voltage", "solver", solver.min_voltage);
        solver.residual_tol = r.number_or(s, "residual_tol", "solver", solver.residual_tol);
        solver.settle_tol = r.number_or(s, "settle_tol", "solver", solver.settle_tol);
        solver.settle_window = r.number_or(s, "settle_window", "solver", solver.settle_window);
        solver.rank_tol = r.number_or(s, "rank_tol", "solver", solver.rank_tol);
        solver.fixed_point_tol = r.number_or(s, "fixed_point_tol", "solver", solver.fixed_point_tol);
        if (s["max_iterations"].IsDefined()) {
            solver.max_iterations = r.as_integer(s["max_iterations"], "solver.max_iterations");
        }
        for (const char* key : {"dt", "residual_tol", "settle_tol", "settle_window", "rank_tol", "fixed_point_tol"}) {
            if (s[key].IsDefined() && !(r.as_number(s[key], key) > 0.0)) {
                r.fail(s[key], std::string("solver.") + key, "must be > 0");
            }
        }
        if (solver.min_voltage < 0.0) r.fail(s["min_voltage"], "solver.min_voltage", "must be >= 0");
        if (solver.decimation < 1) r.fail(s["decimation"], "solver.decimation", "must be >= 1");
        if (solver.max_iterations < 1) r.fail(s["max_iterations"], "solver.max_iterations", "must be >= 1");
    }

    Scenario scenario;
    if (root["scenario"].IsDefined()) {
        const YAML::Node s = root["scenario"];
        r.expect_map(s, "scenario");
        r.only_keys(s, "scenario", {"initial", "t_start", "t_end", "events"});
        if (s["initial"].IsDefined()) {
            const std::string initial = r.text(s["initial"], "scenario.initial");
            if (initial == "isolated_primary") {
                scenario.initial = InitialCondition::IsolatedPrimary;
            } else if (initial == "equilibrium") {
                scenario.initial = InitialCondition::Equilibrium;
            } else {
                r.fail(s["initial"], "scenario.initial", "expected isolated_primary or equilibrium");
            }
        }
        scenario.t_start = r.number_or(s, "t_start", "scenario", scenario.t_start);
        scenario.t_end = r.number_or(s, "t_end", "scenario", scenario.t_end);
        if (!(scenario.t_end > scenario.t_start)) r.fail(s, "scenario.t_end", "must exceed t_start");
        if (s["events"].IsDefined()) {
            const YAML::Node events = s["events"];
            r.expect_seq(events, "scenario.events");
            for (std::size_t e = 0; e < events.size(); ++e) {
                const std::string field = Reader::index("scenario.events", e);
                scenario.events.push_back(read_event(r, events[e], field, n, static_cast<int>(lines.size())));
                if (e > 0 && scenario.events[e].time < scenario.events[e - 1].time) {
                    r.fail(events[e], field + ".time", "events must be listed in nondecreasing time order");
                }
            }
        }
    }

    std::string name;
    if (root["name"].IsDefined()) name = r.text(root["name"], "name");

    // Graph-level validation; map library errors to config diagnostics.
    try {
        ElectricalGraph electrical(n, lines);
        CommGraph comm = CommGraph::from_links(n, links);
        MicrogridSpec spec{name, std::move(electrical), std::move(comm), std::move(buses), scenario, solver};
        spec.validate();
        return spec;
    } catch (const Error& err) {
        if (err.kind() == ErrorKind::ConfigError) throw;
        const char* section = "buses";
        if (err.kind() == ErrorKind::InvalidGraph) {
            const std::string what = err.what();
            section = what.find("omm") != std::string::npos ? "comm" : "lines";
        }
        const YAML::Node where = root[section].IsDefined() ? root[section] : root;
        r.fail(where, section, err.what());
    }
}

void emit_load(YAML::Emitter& out, const ZipLoad& load) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "conductance" << YAML::Value << load.conductance;
    out << YAML::Key << "current" << YAML::Value << load.current;
    out << YAML::Key << "power" << YAML::Value << load.power;
    out << YAML::EndMap;
}

}  // namespace

MicrogridSpec parse_config(const std::string& text, const std::string& origin) {
    Reader reader(origin);
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& err) {
        std::ostringstream os;
        os << origin << ':' << err.mark.line + 1 << ':' << err.mark.column + 1 << ": syntax: " << err.msg;
        throw Error(ErrorKind::ConfigError, os.str());
    }
    if (!root.IsDefined() || root.IsNull()) {
        throw Error(ErrorKind::ConfigError, origin + ": empty config");
    }
    return parse_root(reader, root);
}

MicrogridSpec load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::ConfigError, path.string() + ": cannot open file");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.string());
}

std::string emit_config(const MicrogridSpec& spec) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << spec.name;

    out << YAML::Key << "buses" << YAML::Value << YAML::BeginSeq;
    for (std::size_t i = 0; i < spec.buses.size(); ++i) {
        const Bus& bus = spec.buses[i];
        out << YAML::BeginMap;
        out << YAML::Key << "id" << YAML::Value << static_cast<int>(i + 1);
        out << YAML::Key << "dgu" << YAML::Value << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "resistance" << YAML::Value << bus.dgu.resistance;
        out << YAML::Key << "inductance" << YAML::Value << bus.dgu.inductance;
        out << YAML::Key << "capacitance" << YAML::Value << bus.dgu.capacitance;
        out << YAML::Key << "rated_current" << YAML::Value << bus.dgu.rated_current;
        out << YAML::EndMap;
        if (bus.gains) {
            out << YAML::Key << "gains" << YAML::Value << YAML::Flow << YAML::BeginMap;
            out << YAML::Key << "k1" << YAML::Value << bus.gains->k1;
            out << YAML::Key << "k2" << YAML::Value << bus.gains->k2;
            out << YAML::Key << "k3" << YAML::Value << bus.gains->k3;
            out << YAML::Key << "k4" << YAML::Value << bus.gains->k4;
            out << YAML::EndMap;
        }
        out << YAML::Key << "load" << YAML::Value;
        emit_load(out, bus.load);
        out << YAML::Key << "reference" << YAML::Value << bus.reference;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    out << YAML::Key << "lines" << YAML::Value << YAML::BeginSeq;
    for (const Line& line : spec.electrical.lines()) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "from" << YAML::Value << line.source + 1;
        out << YAML::Key << "to" << YAML::Value << line.sink + 1;
        out << YAML::Key << "resistance" << YAML::Value << line.resistance;
        out << YAML::Key << "inductance" << YAML::Value << line.inductance;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    out << YAML::Key << "comm" << YAML::Value << YAML::BeginSeq;
    for (const CommLink& link : spec.comm.links()) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "a" << YAML::Value << link.a + 1;
        out << YAML::Key << "b" << YAML::Value << link.b + 1;
        out << YAML::Key << "weight" << YAML::Value << link.weight;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    const Scenario& sc = spec.scenario;
    out << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "initial" << YAML::Value
        << (sc.initial == InitialCondition::IsolatedPrimary ? "isolated_primary" : "equilibrium");
    out << YAML::Key << "t_start" << YAML::Value << sc.t_start;
    out << YAML::Key << "t_end" << YAML::Value << sc.t_end;
    out << YAML::Key << "events" << YAML::Value << YAML::BeginSeq;
    for (const ScenarioEvent& event : sc.events) {
        out << YAML::BeginMap;
        out << YAML::Key << "time" << YAML::Value << event.time;
        std::visit(
            [&](const auto& ev) {
                using T = std::decay_t<decltype(ev)>;
                if constexpr (std::is_same_v<T, PlugIn>) {
                    out << YAML::Key << "type" << YAML::Value << "plug_in";
                    if (!ev.lines.empty()) {
                        out << YAML::Key << "lines" << YAML::Value << YAML::Flow << YAML::BeginSeq;
                        for (int l : ev.lines) out << l + 1;
                        out << YAML::EndSeq;
                    }
                } else if constexpr (std::is_same_v<T, LoadStep>) {
                    out << YAML::Key << "type" << YAML::Value << "load_step";
                    out << YAML::Key << "bus" << YAML::Value << ev.bus + 1;
                    out << YAML::Key << "load" << YAML::Value;
                    emit_load(out, ev.load);
                } else if constexpr (std::is_same_v<T, CommCollapse>) {
                    out << YAML::Key << "type" << YAML::Value << "comm_collapse";
                } else if constexpr (std::is_same_v<T, CommRestore>) {
                    out << YAML::Key << "type" << YAML::Value << "comm_restore";
                } else {
                    out << YAML::Key << "type" << YAML::Value << "set_reference";
                    out << YAML::Key << "bus" << YAML::Value << ev.bus + 1;
                    out << YAML::Key << "voltage" << YAML::Value << ev.voltage;
                }
            },
            event.action);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::EndMap;

    const SolverSettings& s = spec.solver;
    out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "dt" << YAML::Value << s.dt;
    out << YAML::Key << "decimation" << YAML::Value << s.decimation;
    out << YAML::Key << "min_voltage" << YAML::Value << s.min_voltage;
    out << YAML::Key << "residual_tol" << YAML::Value << s.residual_tol;
    out << YAML::Key << "settle_tol" << YAML::Value << s.settle_tol;
    out << YAML::Key << "settle_window" << YAML::Value << s.settle_window;
    out << YAML::Key << "rank_tol" << YAML::Value << s.rank_tol;
    out << YAML::Key << "fixed_point_tol" << YAML::Value << s.fixed_point_tol;
    out << YAML::Key << "max_iterations" << YAML::Value << s.max_iterations;
    out << YAML::EndMap;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace dcmg
