#pragma once

#include <Eigen/Dense>

#include <vector>

namespace dcmg {

/// Power line between two buses. Node indices are zero-based; the orientation
/// source -> sink fixes the sign convention for positive line current.
struct Line {
    int source = 0;
    int sink = 0;
    double resistance = 0.0;  // ohm
    double inductance = 0.0;  // henry

    bool operator==(const Line&) const = default;
};

/// Electrical network. Validated at construction: connected, positive R and L,
/// no self loops. Line l of the vector has id l + 1.
class ElectricalGraph {
public:
    ElectricalGraph(int node_count, std::vector<Line> lines);

    int node_count() const noexcept { return node_count_; }
    int line_count() const noexcept { return static_cast<int>(lines_.size()); }
    const std::vector<Line>& lines() const noexcept { return lines_; }
    const Line& line(int index) const { return lines_.at(static_cast<std::size_t>(index)); }

    /// Copy of the graph with every line resistance multiplied by `factor`.
    ElectricalGraph with_scaled_resistances(double factor) const;

    bool operator==(const ElectricalGraph&) const = default;

private:
    int node_count_;
    std::vector<Line> lines_;
};

struct CommLink {
    int a = 0;
    int b = 0;
    double weight = 1.0;
};

/// Undirected weighted communication graph, a_ij = a_ji >= 0, a_ii = 0,
/// connected.
class CommGraph {
public:
    explicit CommGraph(Eigen::MatrixXd weights);
    static CommGraph from_links(int node_count, const std::vector<CommLink>& links);

    int node_count() const noexcept { return static_cast<int>(weights_.rows()); }
    const Eigen::MatrixXd& weights() const noexcept { return weights_; }
    std::vector<CommLink> links() const;

    bool operator==(const CommGraph& other) const { return weights_ == other.weights_; }

private:
    Eigen::MatrixXd weights_;
};

using IncidenceMatrix = Eigen::MatrixXi;

/// N x M incidence matrix: -1 at the source row, +1 at the sink row.
IncidenceMatrix build_incidence(const ElectricalGraph& graph);

/// B diag(1/R) B^T.
Eigen::MatrixXd electrical_laplacian(const ElectricalGraph& graph);

/// diag(sum_j a_ij) - [a_ij].
Eigen::MatrixXd comm_laplacian(const CommGraph& comm);

/// Breadth-first connectivity test on the nonzero pattern of a square
/// adjacency matrix. An empty matrix is not connected.
bool check_connected(const Eigen::MatrixXd& adjacency);

/// Adjacency pattern (0/1) of an electrical graph.
Eigen::MatrixXd adjacency_of(const ElectricalGraph& graph);

}  // namespace dcmg
