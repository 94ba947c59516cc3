#include <doctest.h>

#include "dcmg/equilibrium.hpp"
#include "dcmg/error.hpp"
#include "dcmg/plant.hpp"
#include "fixtures.hpp"

#include <Eigen/Eigenvalues>

#include <optional>
#include <random>

using namespace dcmg;

namespace {

// Least squares through the normal equations, independent of the SVD path.
Eigen::VectorXd normal_equations(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    return (a.transpose() * a).ldlt().solve(a.transpose() * b);
}

// Smaller root of 4 d (1 - d) = D by the textbook quadratic formula
// 4 d^2 - 4 d + D = 0.
double quadratic_root(double delta) { return (4.0 - std::sqrt(16.0 - 16.0 * delta)) / 8.0; }

}  // namespace

TEST_CASE("projector annihilates the weighted direction") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const MicrogridSpec spec = fixtures::random_spec(rng, 2 + trial % 7);
        const ConstrainedFlowSystem sys = build_flow_system(spec);
        const int n = spec.bus_count();
        CHECK((Eigen::RowVectorXd::Ones(n) * sys.projector).cwiseAbs().maxCoeff() <= 1e-12 * spec.ratings().maxCoeff());
        CHECK(sys.rank == n);
        CHECK(sys.stacked.rows() == n + 1);
    }
}

TEST_CASE("homogeneous ratings give the centering projector") {
    MicrogridSpec spec = fixtures::six_dgu();
    for (Bus& bus : spec.buses) bus.dgu.rated_current = 1.0;
    const ConstrainedFlowSystem sys = build_flow_system(spec);
    const Eigen::MatrixXd centering = Eigen::MatrixXd::Identity(6, 6) - Eigen::MatrixXd::Constant(6, 6, 1.0 / 6.0);
    CHECK((sys.projector - centering).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("a single bus settles at its reference") {
    const DguParams dgu{0.2, 1.8e-3, 2.2e-3, 1.5};
    Bus bus{dgu, synthesize_gains(dgu), {0.1, 2.0, 40.0}, 48.0};
    MicrogridSpec spec{"one", ElectricalGraph(1, {}), CommGraph(Eigen::MatrixXd::Zero(1, 1)), {bus}, {}, {}};
    const ConstrainedFlowSystem sys = build_flow_system(spec);
    CHECK(sys.projector.isZero(0.0));
    CHECK(sys.injection(1) == doctest::Approx(1.5 * 48.0));
    const ExistenceCertificate cert = certificate(sys, spec.load_powers(), spec.references());
    CHECK(cert.nominal(0) == doctest::Approx(48.0).epsilon(1e-14));
    CHECK(cert.delta == 0.0);
    const VoltageSolution sol = solve_voltage(sys, spec.load_powers(), cert);
    CHECK(sol.voltage(0) == doctest::Approx(48.0).epsilon(1e-14));
}

TEST_CASE("nominal voltage matches the normal equations") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const MicrogridSpec spec = fixtures::random_spec(rng, 2 + trial % 5);
        const ConstrainedFlowSystem sys = build_flow_system(spec);
        const NominalVoltage nominal = nominal_voltage(sys);
        const Eigen::VectorXd oracle = normal_equations(sys.stacked, sys.injection);
        CHECK(fixtures::rel_error(nominal.voltage, oracle) <= 1e-9);
        // The ZI-only system is consistent, so the residual is at round-off level.
        CHECK(nominal.residual <= 1e-9);
    }
}

TEST_CASE("no-load network with uniform references") {
    MicrogridSpec spec = fixtures::six_dgu();
    for (Bus& bus : spec.buses) {
        bus.load = {};
        bus.reference = 50.0;
    }
    const EquilibriumAnalysis eq = analyse_equilibrium(spec, 3.0);
    REQUIRE(eq.point);
    CHECK((eq.cert.nominal.array() - 50.0).abs().maxCoeff() <= 1e-10);
    CHECK(eq.solution->iterations == 1);
    const GlobalState& x = eq.point->state;
    CHECK(eq.point->sharing_level == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(x.line_current().cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((x.consensus().array() - 0.5).abs().maxCoeff() <= 1e-9);  // eta 1 with 1^T Omega = 3
}

TEST_CASE("certificate band radii") {
    const MicrogridSpec spec = fixtures::six_dgu();
    const ConstrainedFlowSystem sys = build_flow_system(spec);

    SUBCASE("no P load: the band collapses onto V*") {
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
        const ExistenceCertificate cert = certificate(sys, zero, spec.references());
        CHECK(cert.delta == 0.0);
        CHECK(cert.delta_minus == 0.0);
        CHECK(cert.delta_plus == 1.0);
        CHECK(cert.exists);
        const VoltageSolution sol = solve_voltage(sys, zero, cert);
        CHECK(sol.iterations == 1);
        CHECK(sol.voltage == cert.nominal);
    }
    SUBCASE("Delta = 0.75 gives 1/4 and 3/4") {
        const ExistenceCertificate base = certificate(sys, spec.load_powers(), spec.references());
        const Eigen::VectorXd power = spec.load_powers() * (0.75 / base.delta);
        const ExistenceCertificate cert = certificate(sys, power, spec.references());
        CHECK(cert.delta == doctest::Approx(0.75).epsilon(1e-13));
        CHECK(cert.delta_minus == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(cert.delta_plus == doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("quadratic identities over a sweep of loads") {
        for (double s : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0}) {
            const ExistenceCertificate cert = certificate(sys, s * spec.load_powers(), spec.references());
            if (cert.delta >= 1.0) {
                CHECK_FALSE(cert.exists);
                CHECK(std::isnan(cert.delta_minus));
                continue;
            }
            CHECK(std::abs(4.0 * cert.delta_minus * (1.0 - cert.delta_minus) - cert.delta) <= 1e-12);
            CHECK(std::abs(4.0 * cert.delta_plus * (1.0 - cert.delta_plus) - cert.delta) <= 1e-12);
            CHECK(std::abs(cert.delta_minus + cert.delta_plus - 1.0) <= 1e-15);
            CHECK(cert.delta_minus == doctest::Approx(quadratic_root(cert.delta)).epsilon(1e-10));
        }
    }
    SUBCASE("the bundled network is far from the limit") {
        const ExistenceCertificate cert = certificate(sys, spec.load_powers(), spec.references());
        CHECK(cert.delta < 0.1);
        CHECK(cert.exists);
        CHECK(cert.low_set_excluded);
        CHECK(cert.abs_delta >= cert.delta);
    }
}

TEST_CASE("certificate is refused when V* is not positive") {
    // A heavy constant-current sink behind a long line drags V* below zero.
    const DguParams dgu{0.2, 1.8e-3, 2.2e-3, 1.0};
    Bus a{dgu, synthesize_gains(dgu), {0.01, 0.0, 1.0}, 50.0};
    Bus b{dgu, synthesize_gains(dgu), {0.01, 500.0, 1.0}, 50.0};
    MicrogridSpec spec{"sink",
                       ElectricalGraph(2, {{0, 1, 1.0, 1e-4}}),
                       CommGraph::from_links(2, {{0, 1, 1.0}}),
                       {a, b},
                       {},
                       {}};
    const ConstrainedFlowSystem sys = build_flow_system(spec);
    const ExistenceCertificate cert = certificate(sys, spec.load_powers(), spec.references());
    REQUIRE(cert.nominal.minCoeff() < 0.0);
    CHECK_FALSE(cert.exists);
    CHECK(cert.nonpositive_buses == std::vector<int>{1});
    CHECK_THROWS_AS(solve_voltage(sys, spec.load_powers(), cert), Error);
}

TEST_CASE("fixed-point solution of the bundled network") {
    const MicrogridSpec spec = fixtures::six_dgu();
    const EquilibriumAnalysis eq = analyse_equilibrium(spec);
    REQUIRE(eq.solution);
    const VoltageSolution& sol = *eq.solution;
    CHECK(sol.residual <= 1e-8);
    CHECK(sol.contraction_ratio < 1.0);
    for (std::size_t k = 1; k < sol.increments.size(); ++k) {
        if (sol.increments[k - 1] > 1e-13) CHECK(sol.increments[k] < sol.increments[k - 1]);
    }
    // Power-flow equations with shared currents, checked row by row.
    const Eigen::VectorXd v = sol.voltage;
    const Eigen::VectorXd load = spec.conductances().cwiseProduct(v) + spec.load_currents() +
                                 spec.load_powers().cwiseQuotient(v);
    const Eigen::VectorXd ratings = spec.ratings();
    const double eps = load.sum() / ratings.sum();
    const Eigen::VectorXd kcl = eps * ratings - load - electrical_laplacian(spec.electrical) * v;
    CHECK(kcl.cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(std::abs(ratings.dot(v - spec.references())) <= 1e-8 * ratings.dot(spec.references()));
    CHECK(sol.in_abs_band);
}

TEST_CASE("the signed band misses the solution of the bundled network") {
    // P_cri has mixed signs here, so ||P_cri P|| under-estimates the
    // deviation; the |P_cri| band still contains the solution.
    const MicrogridSpec spec = fixtures::six_dgu();
    const EquilibriumAnalysis eq = analyse_equilibrium(spec);
    REQUIRE(eq.solution);
    CHECK((eq.cert.critical_power.array() < 0.0).any());
    CHECK_FALSE(eq.solution->in_band);
    CHECK(eq.solution->voltage(5) < eq.cert.lower()(5));
    CHECK(eq.solution->residual <= 1e-10);
    CHECK(eq.cert.in_abs_band(eq.solution->voltage));
    // The limit solves the equations, so the band claim itself is what fails.
    const Eigen::VectorXd newton = *newton_voltage(eq.system, spec.load_powers(), eq.cert.nominal);
    CHECK((newton - eq.solution->voltage).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("the |P_cri| band always contains the fixed point") {
    std::mt19937_64 rng(77);
    int certified = 0;
    for (int trial = 0; trial < 60; ++trial) {
        fixtures::RandomOptions opt;
        opt.load_fraction = fixtures::uniform(rng, 0.1, 1.5);
        const MicrogridSpec spec = fixtures::random_spec(rng, 2 + trial % 7, opt);
        const ConstrainedFlowSystem sys = build_flow_system(spec);
        const ExistenceCertificate cert = certificate(sys, spec.load_powers(), spec.references());
        if (!cert.exists || cert.abs_delta >= 1.0) continue;
        ++certified;
        const VoltageSolution sol = solve_voltage(sys, spec.load_powers(), cert);
        CHECK(sol.in_abs_band);
    }
    CHECK(certified >= 30);
}

TEST_CASE("fixed point is unique in the band") {
    const MicrogridSpec spec = fixtures::six_dgu();
    const ConstrainedFlowSystem sys = build_flow_system(spec);
    const ExistenceCertificate cert = certificate(sys, spec.load_powers(), spec.references());
    const VoltageSolution ref = solve_voltage(sys, spec.load_powers(), cert);
    std::mt19937_64 rng(1234);
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd start(6);
        for (int i = 0; i < 6; ++i) {
            start(i) = fixtures::uniform(rng, cert.lower()(i), cert.upper()(i));
        }
        REQUIRE(cert.in_band(start));
        const VoltageSolution sol = solve_voltage(sys, spec.load_powers(), cert, {}, start);
        CHECK((sol.voltage - ref.voltage).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("Newton probe of the excluded set") {
    const MicrogridSpec six = fixtures::six_dgu();
    const EquilibriumAnalysis eq = analyse_equilibrium(six);
    // Every run lands on the fixed point, which sits just outside the signed
    // band, so the probe counts it.
    const NonexistenceProbe probe = probe_nonexistence(eq.system, six.load_powers(), eq.cert, 50, 99);
    CHECK(probe.attempts == 50);
    CHECK(probe.newton_converged > 0);
    CHECK(probe.solutions_in_excluded_set == probe.newton_converged);
}

TEST_CASE("a low-voltage solution can sit above (1 - delta_plus) V*") {
    // delta_plus is close to one for light loads, so the floor of the
    // excluded set is a fraction of a volt and the low-voltage branch of the
    // power-flow equations fits above it.
    std::mt19937_64 rng(5);
    std::optional<Eigen::VectorXd> low;
    std::optional<MicrogridSpec> found;
    std::optional<EquilibriumAnalysis> analysis;
    for (int trial = 0; trial < 200 && !low; ++trial) {
        found = fixtures::random_spec(rng, 2 + trial % 4);
        analysis = analyse_equilibrium(*found);
        const MicrogridSpec& spec = *found;
        const EquilibriumAnalysis& a = *analysis;
        if (!a.solution || !a.solution->in_band) continue;
        std::mt19937_64 starts(trial);
        for (int k = 0; k < 50 && !low; ++k) {
            Eigen::VectorXd v0(spec.bus_count());
            for (int i = 0; i < v0.size(); ++i) v0(i) = fixtures::uniform(starts, 0.0, 2.0) * a.cert.nominal(i);
            auto v = newton_voltage(a.system, spec.load_powers(), v0);
            if (v && (*v - a.solution->voltage).cwiseAbs().maxCoeff() > 1.0 &&
                (*v - (1.0 - a.cert.delta_plus) * a.cert.nominal).minCoeff() > 0.0) {
                low = v;
            }
        }
    }
    REQUIRE(low);
    const MicrogridSpec& spec = *found;
    const EquilibriumAnalysis& a = *analysis;
    const Eigen::VectorXd& v = *low;
    // Independent check: shared-current KCL and weighted balancing.
    const Eigen::VectorXd load = spec.conductances().cwiseProduct(v) + spec.load_currents() +
                                 spec.load_powers().cwiseQuotient(v);
    const Eigen::VectorXd ratings = spec.ratings();
    const double eps = load.sum() / ratings.sum();
    const Eigen::VectorXd kcl = eps * ratings - load - electrical_laplacian(spec.electrical) * v;
    CHECK(kcl.cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(std::abs(ratings.dot(v - spec.references())) <= 1e-7 * ratings.dot(spec.references()));
    // Positive, above the floor, outside the band: a second solution in the set.
    CHECK((v - (1.0 - a.cert.delta_plus) * a.cert.nominal).minCoeff() > 0.0);
    CHECK_FALSE(a.cert.in_band(v));
    CHECK(v.cwiseQuotient(a.cert.nominal).minCoeff() < 0.1);
}

TEST_CASE("scaling every rating leaves the voltage solution unchanged") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        MicrogridSpec spec = fixtures::random_spec(rng, 2 + trial % 6);
        const EquilibriumAnalysis a = analyse_equilibrium(spec);
        REQUIRE(a.solution);
        const double f = fixtures::uniform(rng, 0.2, 7.0);
        for (Bus& bus : spec.buses) bus.dgu.rated_current *= f;
        const EquilibriumAnalysis b = analyse_equilibrium(spec);
        REQUIRE(b.solution);
        CHECK(fixtures::rel_error(b.solution->voltage, a.solution->voltage) <= 1e-10);
    }
}

TEST_CASE("completed equilibrium") {
    const MicrogridSpec spec = fixtures::six_dgu();
    const EquilibriumAnalysis eq = analyse_equilibrium(spec, 0.0);
    REQUIRE(eq.point);
    const GlobalState& x = eq.point->state;
    const Eigen::VectorXd ratings = spec.ratings();
    const Eigen::VectorXd refs = spec.references();

    // Proportional sharing.
    const Eigen::VectorXd ratio = x.filter_current().cwiseQuotient(ratings);
    CHECK(ratio.maxCoeff() - ratio.minCoeff() <= 1e-10);
    // Weighted balancing.
    CHECK(std::abs(ratings.dot(x.voltage() - refs)) <= 1e-8 * ratings.dot(refs));
    // 1^T Omega matches the requested value.
    CHECK(std::abs(x.consensus().sum()) <= 1e-10);
    // omega at the equilibrium equals V_ref - V.
    const Eigen::VectorXd w = omega(x.consensus(), ratings, comm_laplacian(spec.comm));
    CHECK((w - (refs - x.voltage())).cwiseAbs().maxCoeff() <= 1e-9);
    // Integrator value from 0 = alpha V + beta I_t + gamma v + delta (V_ref - V).
    for (int i = 0; i < 6; ++i) {
        const Bus& bus = spec.buses[static_cast<std::size_t>(i)];
        const ControllerGains& g = *bus.gains;
        const double alpha = (g.k1 - 1.0) / bus.dgu.inductance;
        const double beta = (g.k2 - bus.dgu.resistance) / bus.dgu.inductance;
        const double gamma = g.k3 / bus.dgu.inductance;
        const double delta = g.k4 / bus.dgu.inductance;
        const double expected =
            ((delta - alpha) * x.voltage()(i) - delta * refs(i) - beta * x.filter_current()(i)) / gamma;
        CHECK(x.integrator()(i) == doctest::Approx(expected).epsilon(1e-9));
    }
    // The whole state is a zero of the closed-loop vector field.
    CHECK(full_rhs(assemble_system(spec), x).cwiseAbs().maxCoeff() <= 1e-8);

    const EquilibriumPoint shifted = complete_equilibrium(spec, x.voltage(), 12.0);
    CHECK(shifted.state.consensus().sum() == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(shifted.offset == doctest::Approx(eq.point->offset + 2.0).epsilon(1e-12));
}

TEST_CASE("k3 = 0 cannot be completed") {
    MicrogridSpec spec = fixtures::six_dgu();
    spec.buses[1].gains->k3 = 0.0;
    try {
        complete_equilibrium(spec, spec.references());
        FAIL("expected SingularGamma");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SingularGamma);
    }
}

TEST_CASE("no certificate when line resistances grow") {
    MicrogridSpec spec = fixtures::six_dgu();
    spec.electrical = spec.electrical.with_scaled_resistances(25.0);
    const EquilibriumAnalysis eq = analyse_equilibrium(spec);
    CHECK(eq.cert.delta >= 1.0);
    CHECK_FALSE(eq.cert.exists);
    CHECK_FALSE(eq.solution);
    try {
        solve_voltage(eq.system, spec.load_powers(), eq.cert);
        FAIL("expected NoCertificate");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoCertificate);
    }
}

TEST_CASE("linearized stability of the bundled network") {
    const MicrogridSpec spec = fixtures::six_dgu();
    const EquilibriumAnalysis eq = analyse_equilibrium(spec);
    REQUIRE(eq.point);
    const StabilityReport rep = linearized_stability(spec, *eq.point);
    CHECK(rep.stable);
    CHECK(rep.eigenvalues_near_zero == 1);
    CHECK(rep.zero_mode_residual <= 1e-9);
    CHECK(rep.spectral_abscissa < -1e-9);
    CHECK(rep.equilibrium_residual <= 1e-8);

    // Eigenvalue oracles: sum equals the trace, and each one makes J - lambda I singular.
    const Eigen::MatrixXd jac = closed_loop_jacobian(spec, eq.point->state.voltage());
    CHECK(std::abs(rep.eigenvalues.sum().real() - jac.trace()) <= 1e-8 * jac.cwiseAbs().maxCoeff());
    CHECK(std::abs(rep.eigenvalues.sum().imag()) <= 1e-6);
    const Eigen::MatrixXcd jc = jac.cast<std::complex<double>>();
    for (Eigen::Index k = 0; k < rep.eigenvalues.size(); ++k) {
        const Eigen::MatrixXcd shifted =
            jc - rep.eigenvalues(k) * Eigen::MatrixXcd::Identity(jac.rows(), jac.cols());
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted);
        const auto& sv = svd.singularValues();
        CHECK(sv(sv.size() - 1) <= 1e-7 * sv(0));
    }
    // Jacobian: P load adds +P / (C V^2) on the voltage diagonal.
    const Eigen::MatrixXd a = assemble_system(spec).a;
    for (int i = 0; i < 6; ++i) {
        const Bus& bus = spec.buses[static_cast<std::size_t>(i)];
        const double v = eq.point->state.voltage()(i);
        CHECK(jac(i, i) - a(i, i) ==
              doctest::Approx(bus.load.power / (bus.dgu.capacitance * v * v)).epsilon(1e-12));
    }
}

TEST_CASE("destabilizing gains are reported, not refused") {
    MicrogridSpec spec = fixtures::six_dgu();
    for (Bus& bus : spec.buses) {
        bus.gains->k3 = -bus.gains->k3;  // outside the set
    }
    const EquilibriumAnalysis eq = analyse_equilibrium(spec);
    REQUIRE(eq.point);
    const StabilityReport rep = linearized_stability(spec, *eq.point);
    CHECK_FALSE(rep.stable);
    CHECK(std::real(rep.eigenvalues(0)) > 1e-9);
}
