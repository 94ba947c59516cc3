#include <doctest.h>

#include "dcmg/error.hpp"
#include "dcmg/network.hpp"
#include "fixtures.hpp"

#include <Eigen/Eigenvalues>

#include <random>

using namespace dcmg;

namespace {

ElectricalGraph fig3_graph(double r = 0.1) {
    // 1-based: 1-3, 1-2, 3-4, 2-4, 5-4, 1-6, 6-5
    const int pairs[7][2] = {{0, 2}, {0, 1}, {2, 3}, {1, 3}, {4, 3}, {0, 5}, {5, 4}};
    std::vector<Line> lines;
    for (const auto& p : pairs) lines.push_back({p[0], p[1], r, 1e-4});
    return ElectricalGraph(6, lines);
}

// Sum over lines of (e_i - e_j)(e_i - e_j)^T / R.
Eigen::MatrixXd brute_force_laplacian(const ElectricalGraph& g) {
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(g.node_count(), g.node_count());
    for (const Line& line : g.lines()) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(g.node_count());
        e(line.source) = 1.0;
        e(line.sink) = -1.0;
        lap += e * e.transpose() / line.resistance;
    }
    return lap;
}

Eigen::VectorXd sorted_eigenvalues(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    return es.eigenvalues();
}

void check_laplacian_invariants(const Eigen::MatrixXd& lap) {
    const double norm = lap.cwiseAbs().rowwise().sum().maxCoeff();
    CHECK((lap * Eigen::VectorXd::Ones(lap.rows())).cwiseAbs().maxCoeff() <= 1e-12 * norm);
    CHECK(lap == lap.transpose());
    CHECK(sorted_eigenvalues(lap)(0) >= -1e-10);
}

}  // namespace

TEST_CASE("incidence of a single line puts -1 at the source and +1 at the sink") {
    const ElectricalGraph g(2, {{0, 1, 1.0, 1e-4}});
    const IncidenceMatrix b = build_incidence(g);
    REQUIRE(b.rows() == 2);
    REQUIRE(b.cols() == 1);
    CHECK(b(0, 0) == -1);
    CHECK(b(1, 0) == 1);
}

TEST_CASE("meshed six-node incidence has zero column sums") {
    const IncidenceMatrix b = build_incidence(fig3_graph());
    CHECK(b.rows() == 6);
    CHECK(b.cols() == 7);
    CHECK((Eigen::RowVectorXi::Ones(6) * b).isZero());
    for (int l = 0; l < 7; ++l) {
        CHECK((b.col(l).array() == 1).count() == 1);
        CHECK((b.col(l).array() == -1).count() == 1);
    }
}

TEST_CASE("reversing a line negates its incidence column") {
    const ElectricalGraph g(3, {{0, 1, 1.0, 1e-4}, {1, 2, 1.0, 1e-4}});
    const ElectricalGraph flipped(3, {{0, 1, 1.0, 1e-4}, {2, 1, 1.0, 1e-4}});
    const IncidenceMatrix a = build_incidence(g);
    const IncidenceMatrix b = build_incidence(flipped);
    CHECK(a.col(0) == b.col(0));
    CHECK(a.col(1) == -b.col(1));
    CHECK(electrical_laplacian(g) == electrical_laplacian(flipped));
}

TEST_CASE("two-node electrical laplacian with R = 2") {
    const Eigen::MatrixXd lap = electrical_laplacian(ElectricalGraph(2, {{0, 1, 2.0, 1e-4}}));
    Eigen::Matrix2d expected;
    expected << 0.5, -0.5, -0.5, 0.5;
    CHECK(lap.isApprox(expected, 1e-15));
}

TEST_CASE("six-node laplacian has exactly one zero eigenvalue") {
    const Eigen::MatrixXd lap = electrical_laplacian(fig3_graph(0.1));
    check_laplacian_invariants(lap);
    const Eigen::VectorXd ev = sorted_eigenvalues(lap);
    CHECK(std::abs(ev(0)) <= 1e-10);
    CHECK(ev(1) > 1e-10);
    // Null space is span(1).
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
    const Eigen::VectorXd null = es.eigenvectors().col(0);
    CHECK((null.cwiseAbs().array() - 1.0 / std::sqrt(6.0)).abs().maxCoeff() < 1e-10);
}

TEST_CASE("electrical laplacian matches the per-line outer product sum on random graphs") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + trial % 9;
        std::vector<Line> lines;
        for (const auto& [a, b] : fixtures::random_connected_edges(rng, n, 0.4)) {
            lines.push_back({a, b, fixtures::uniform(rng, 0.01, 3.0), 1e-4});
        }
        // A parallel line exercises multigraph accumulation.
        lines.push_back({lines.front().sink, lines.front().source, 0.7, 1e-4});
        const ElectricalGraph g(n, lines);
        const Eigen::MatrixXd lap = electrical_laplacian(g);
        CHECK((lap - brute_force_laplacian(g)).cwiseAbs().maxCoeff() <= 1e-12 * lap.cwiseAbs().maxCoeff());
        check_laplacian_invariants(lap);
        const Eigen::VectorXd ev = sorted_eigenvalues(lap);
        CHECK(ev(1) > 1e-10);
    }
}

TEST_CASE("communication laplacians") {
    SUBCASE("two nodes") {
        const Eigen::MatrixXd lap = comm_laplacian(CommGraph::from_links(2, {{0, 1, 1.0}}));
        Eigen::Matrix2d expected;
        expected << 1, -1, -1, 1;
        CHECK(lap == expected);
    }
    SUBCASE("ring of three") {
        const Eigen::MatrixXd lap = comm_laplacian(CommGraph::from_links(3, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}}));
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) CHECK(lap(i, j) == (i == j ? 2.0 : -1.0));
        }
    }
    SUBCASE("path 1-2-3 has spectrum {0, 1, 3}") {
        // det(L - x I) = -x (x - 1)(x - 3) for the unit path on three nodes.
        const Eigen::MatrixXd lap = comm_laplacian(CommGraph::from_links(3, {{0, 1, 1.0}, {1, 2, 1.0}}));
        const Eigen::VectorXd ev = sorted_eigenvalues(lap);
        CHECK(ev(0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(ev(1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ev(2) == doctest::Approx(3.0).epsilon(1e-12));
        for (double x : {0.0, 1.0, 3.0}) {
            CHECK(std::abs((lap - x * Eigen::Matrix3d::Identity()).determinant()) < 1e-12);
        }
    }
    SUBCASE("weighted graphs keep zero row sums") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 2 + trial % 7;
            std::vector<CommLink> links;
            for (const auto& [a, b] : fixtures::random_connected_edges(rng, n, 0.5)) {
                links.push_back({a, b, fixtures::uniform(rng, 0.1, 20.0)});
            }
            const CommGraph comm = CommGraph::from_links(n, links);
            check_laplacian_invariants(comm_laplacian(comm));
            CHECK(comm.links().size() == links.size());
        }
    }
}

TEST_CASE("connectivity check") {
    Eigen::MatrixXd ring = Eigen::MatrixXd::Zero(4, 4);
    for (int i = 0; i < 4; ++i) {
        ring(i, (i + 1) % 4) = 1.0;
        ring((i + 1) % 4, i) = 1.0;
    }
    CHECK(check_connected(ring));

    Eigen::MatrixXd split = Eigen::MatrixXd::Zero(4, 4);
    split(0, 1) = split(1, 0) = 1.0;
    split(2, 3) = split(3, 2) = 1.0;
    CHECK_FALSE(check_connected(split));
    CHECK_FALSE(check_connected(Eigen::MatrixXd()));
    CHECK(check_connected(Eigen::MatrixXd::Zero(1, 1)));

    const MicrogridSpec spec = fixtures::six_dgu();
    CHECK(check_connected(adjacency_of(spec.electrical)));
    CHECK(check_connected(spec.comm.weights()));
}

TEST_CASE("graph validation rejects bad input") {
    auto kind_of = [](auto&& make) {
        try {
            make();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::ConfigError;  // sentinel: nothing thrown
    };
    CHECK(kind_of([] { ElectricalGraph(3, {{0, 1, 1.0, 1e-4}}); }) == ErrorKind::InvalidGraph);
    CHECK(kind_of([] { ElectricalGraph(2, {{0, 0, 1.0, 1e-4}}); }) == ErrorKind::InvalidGraph);
    CHECK(kind_of([] { ElectricalGraph(2, {{0, 2, 1.0, 1e-4}}); }) == ErrorKind::InvalidGraph);
    CHECK(kind_of([] { ElectricalGraph(2, {{0, 1, 0.0, 1e-4}}); }) == ErrorKind::InvalidGraph);
    CHECK(kind_of([] { ElectricalGraph(2, {{0, 1, 1.0, -1.0}}); }) == ErrorKind::InvalidGraph);
    CHECK(kind_of([] { ElectricalGraph(0, {}); }) == ErrorKind::InvalidGraph);

    Eigen::MatrixXd asym = Eigen::MatrixXd::Zero(2, 2);
    asym(0, 1) = 1.0;
    asym(1, 0) = 2.0;
    CHECK(kind_of([&] { CommGraph{asym}; }) == ErrorKind::InvalidGraph);
    CHECK(kind_of([] { CommGraph::from_links(3, {{0, 1, 1.0}}); }) == ErrorKind::InvalidGraph);
    CHECK(kind_of([] { CommGraph::from_links(2, {{0, 1, 1.0}, {1, 0, 1.0}}); }) == ErrorKind::InvalidGraph);
    CHECK(kind_of([] { CommGraph::from_links(2, {{0, 1, -1.0}}); }) == ErrorKind::InvalidGraph);
    CHECK(kind_of([] { CommGraph::from_links(2, {{0, 1, 1.0}}); }) == ErrorKind::ConfigError);
}

TEST_CASE("scaling line resistances keeps the topology") {
    const ElectricalGraph g = fig3_graph(0.2);
    const ElectricalGraph scaled = g.with_scaled_resistances(10.0);
    CHECK(scaled.line_count() == g.line_count());
    CHECK(build_incidence(scaled) == build_incidence(g));
    CHECK(electrical_laplacian(scaled).isApprox(electrical_laplacian(g) / 10.0, 1e-14));
}
