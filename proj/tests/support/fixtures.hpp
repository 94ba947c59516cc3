#pragma once

#include "dcmg/config.hpp"
#include "dcmg/control.hpp"
#include "dcmg/microgrid.hpp"
#include "dcmg/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

inline std::filesystem::path config_path(const std::string& name) {
    return std::filesystem::path(DCMG_CONFIG_DIR) / name;
}

inline dcmg::MicrogridSpec six_dgu() { return dcmg::load_config(config_path("six_dgu.cfg")); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random spanning tree plus extra edges, as (a, b) pairs with a != b.
inline std::vector<std::pair<int, int>> random_connected_edges(std::mt19937_64& rng, int n, double extra_prob) {
    std::vector<std::pair<int, int>> edges;
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (int k = 1; k < n; ++k) {
        const int parent = std::uniform_int_distribution<int>(0, k - 1)(rng);
        edges.emplace_back(order[static_cast<std::size_t>(parent)], order[static_cast<std::size_t>(k)]);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const bool present = std::any_of(edges.begin(), edges.end(), [&](const auto& e) {
                return (e.first == i && e.second == j) || (e.first == j && e.second == i);
            });
            if (!present && uniform(rng, 0.0, 1.0) < extra_prob) edges.emplace_back(i, j);
        }
    }
    return edges;
}

struct RandomOptions {
    double extra_edge_prob = 0.3;
    /// P_L drawn from [0, load_fraction * Y V_ref^2], which keeps P < Y V^2
    /// with room for the voltage drop.
    double load_fraction = 0.6;
    bool zip = true;
};

/// Desk-scale DCmG with synthesized gains, parameters in the same ranges as
/// the bundled configs.
inline dcmg::MicrogridSpec random_spec(std::mt19937_64& rng, int n, const RandomOptions& opt = {}) {
    using namespace dcmg;
    std::vector<Line> lines;
    for (const auto& [a, b] : random_connected_edges(rng, n, opt.extra_edge_prob)) {
        lines.push_back({a, b, uniform(rng, 0.05, 0.5), uniform(rng, 0.6e-4, 1.5e-4)});
    }
    std::vector<CommLink> links;
    for (const auto& [a, b] : random_connected_edges(rng, n, opt.extra_edge_prob)) {
        links.push_back({a, b, uniform(rng, 2.0, 12.0)});
    }
    std::vector<Bus> buses(static_cast<std::size_t>(n));
    for (auto& bus : buses) {
        bus.dgu = {uniform(rng, 0.1, 0.6), uniform(rng, 1.3e-3, 3e-3), uniform(rng, 1.7e-3, 3e-3),
                   uniform(rng, 0.5, 2.0)};
        bus.gains = synthesize_gains(bus.dgu);
        bus.reference = uniform(rng, 49.5, 50.5);
        if (opt.zip) {
            bus.load.conductance = uniform(rng, 0.05, 0.15);
            bus.load.current = uniform(rng, 0.0, 2.0);
            bus.load.power =
                uniform(rng, 0.0, opt.load_fraction * bus.load.conductance * bus.reference * bus.reference);
        }
    }
    Scenario scenario;
    scenario.initial = InitialCondition::IsolatedPrimary;
    scenario.events = {ScenarioEvent{0.0, PlugIn{}}, ScenarioEvent{0.0, CommRestore{}}};
    return MicrogridSpec{"random", ElectricalGraph(n, lines), CommGraph::from_links(n, links), buses, scenario, {}};
}

/// Relative infinity-norm distance, guarded for blocks that are (nearly) zero.
inline double rel_error(const Eigen::VectorXd& x, const Eigen::VectorXd& ref, double floor = 1e-12) {
    if (x.size() == 0) return 0.0;
    return (x - ref).cwiseAbs().maxCoeff() / std::max(ref.cwiseAbs().maxCoeff(), floor);
}

}  // namespace fixtures
