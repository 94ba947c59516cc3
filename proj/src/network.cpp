#include "dcmg/network.hpp"

#include "dcmg/error.hpp"

#include <cmath>
#include <queue>
#include <string>

namespace dcmg {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidGraph: return "InvalidGraph";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::NonPositiveVoltage: return "NonPositiveVoltage";
    case ErrorKind::MissingGains: return "MissingGains";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::SingularNominal: return "SingularNominal";
    case ErrorKind::NoCertificate: return "NoCertificate";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::OutOfBand: return "OutOfBand";
    case ErrorKind::SingularGamma: return "SingularGamma";
    case ErrorKind::NotSettled: return "NotSettled";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

ElectricalGraph::ElectricalGraph(int node_count, std::vector<Line> lines)
    : node_count_(node_count), lines_(std::move(lines)) {
    if (node_count_ < 1) {
        throw Error(ErrorKind::InvalidGraph, "electrical graph needs at least one node");
    }
    for (std::size_t l = 0; l < lines_.size(); ++l) {
        const Line& line = lines_[l];
        const std::string id = "line " + std::to_string(l + 1);
        if (line.source < 0 || line.source >= node_count_ || line.sink < 0 || line.sink >= node_count_) {
            throw Error(ErrorKind::InvalidGraph, id + " references a node outside 1.." + std::to_string(node_count_));
        }
        if (line.source == line.sink) {
            throw Error(ErrorKind::InvalidGraph, id + " is a self loop");
        }
        if (!(line.resistance > 0.0) || !std::isfinite(line.resistance)) {
            throw Error(ErrorKind::InvalidGraph, id + " must have R > 0");
        }
        if (!(line.inductance > 0.0) || !std::isfinite(line.inductance)) {
            throw Error(ErrorKind::InvalidGraph, id + " must have L > 0");
        }
    }
    if (!check_connected(adjacency_of(*this))) {
        throw Error(ErrorKind::InvalidGraph, "electrical graph is not connected");
    }
}

ElectricalGraph ElectricalGraph::with_scaled_resistances(double factor) const {
    std::vector<Line> scaled = lines_;
    for (Line& line : scaled) {
        line.resistance *= factor;
    }
    return ElectricalGraph(node_count_, std::move(scaled));
}

CommGraph::CommGraph(Eigen::MatrixXd weights) : weights_(std::move(weights)) {
    const Eigen::Index n = weights_.rows();
    if (n < 1 || weights_.cols() != n) {
        throw Error(ErrorKind::InvalidGraph, "communication weights must be a non-empty square matrix");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (weights_(i, i) != 0.0) {
            throw Error(ErrorKind::InvalidGraph, "communication weight a_ii must be zero");
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            if (weights_(i, j) < 0.0 || !std::isfinite(weights_(i, j))) {
                throw Error(ErrorKind::InvalidGraph, "communication weights must be finite and nonnegative");
            }
            if (weights_(i, j) != weights_(j, i)) {
                throw Error(ErrorKind::InvalidGraph, "communication weights must be symmetric");
            }
        }
    }
    if (!check_connected(weights_)) {
        throw Error(ErrorKind::InvalidGraph, "communication graph is not connected");
    }
}

CommGraph CommGraph::from_links(int node_count, const std::vector<CommLink>& links) {
    if (node_count < 1) {
        throw Error(ErrorKind::InvalidGraph, "communication graph needs at least one node");
    }
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(node_count, node_count);
    for (const CommLink& link : links) {
        if (link.a < 0 || link.a >= node_count || link.b < 0 || link.b >= node_count) {
            throw Error(ErrorKind::InvalidGraph, "communication link references an unknown node");
        }
        if (link.a == link.b) {
            throw Error(ErrorKind::InvalidGraph, "communication link is a self loop");
        }
        if (!(link.weight > 0.0)) {
            throw Error(ErrorKind::InvalidGraph, "communication link weight must be positive");
        }
        if (w(link.a, link.b) != 0.0) {
            throw Error(ErrorKind::InvalidGraph, "duplicate communication link");
        }
        w(link.a, link.b) = link.weight;
        w(link.b, link.a) = link.weight;
    }
    return CommGraph(std::move(w));
}

std::vector<CommLink> CommGraph::links() const {
    std::vector<CommLink> out;
    for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < weights_.cols(); ++j) {
            if (weights_(i, j) > 0.0) {
                out.push_back({static_cast<int>(i), static_cast<int>(j), weights_(i, j)});
            }
        }
    }
    return out;
}

IncidenceMatrix build_incidence(const ElectricalGraph& graph) {
    IncidenceMatrix b = IncidenceMatrix::Zero(graph.node_count(), graph.line_count());
    for (int l = 0; l < graph.line_count(); ++l) {
        b(graph.line(l).source, l) = -1;
        b(graph.line(l).sink, l) = 1;
    }
    return b;
}

Eigen::MatrixXd electrical_laplacian(const ElectricalGraph& graph) {
    const Eigen::MatrixXd b = build_incidence(graph).cast<double>();
    Eigen::VectorXd conductance(graph.line_count());
    for (int l = 0; l < graph.line_count(); ++l) {
        conductance(l) = 1.0 / graph.line(l).resistance;
    }
    Eigen::MatrixXd lap = b * conductance.asDiagonal() * b.transpose();
    // Symmetric up to rounding in the product; force exact symmetry.
    return 0.5 * (lap + lap.transpose());
}

Eigen::MatrixXd comm_laplacian(const CommGraph& comm) {
    const Eigen::MatrixXd& w = comm.weights();
    Eigen::MatrixXd lap = -w;
    lap.diagonal() = w.rowwise().sum();
    return lap;
}

bool check_connected(const Eigen::MatrixXd& adjacency) {
    const Eigen::Index n = adjacency.rows();
    if (n == 0 || adjacency.cols() != n) {
        return false;
    }
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::queue<Eigen::Index> frontier;
    frontier.push(0);
    seen[0] = true;
    Eigen::Index visited = 1;
    while (!frontier.empty()) {
        const Eigen::Index i = frontier.front();
        frontier.pop();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!seen[static_cast<std::size_t>(j)] && (adjacency(i, j) != 0.0 || adjacency(j, i) != 0.0)) {
                seen[static_cast<std::size_t>(j)] = true;
                ++visited;
                frontier.push(j);
            }
        }
    }
    return visited == n;
}

Eigen::MatrixXd adjacency_of(const ElectricalGraph& graph) {
    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(graph.node_count(), graph.node_count());
    for (const Line& line : graph.lines()) {
        adj(line.source, line.sink) = 1.0;
        adj(line.sink, line.source) = 1.0;
    }
    return adj;
}

}  // namespace dcmg
