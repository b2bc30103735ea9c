#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "flexregion/powerflow.hpp"
#include "test_helpers.hpp"

using namespace flexregion;
using namespace testutil;
using powerflow::FixedPointSolver;
using powerflow::InjectionVector;

namespace {

InjectionVector bundled_base_injection(const FixedPointSolver& solver, double scale = 1.0) {
    // Light uniform loading: consumption scaled per terminal, pf 0.95.
    const auto& lay = solver.layout();
    InjectionVector inj = InjectionVector::zeros(lay);
    for (int t = 0; t < lay.n_load(); ++t) inj.add_y(t, -0.006 * scale, -0.002 * scale);
    return inj;
}

}  // namespace

TEST_CASE("zero injections reproduce the no-load voltage at every terminal") {
    FixedPointSolver solver(bundled_feeder());
    const auto res = solver.solve(InjectionVector::zeros(solver.layout()));
    const CVec v_load = solver.restrict_load(res.v_all);
    REQUIRE((v_load - solver.no_load_voltage()).lpNorm<Eigen::Infinity>() < 1e-12);
    REQUIRE(res.iterations == 1);
}

TEST_CASE("two-bus load matches the closed-form quadratic solution") {
    // V(V - 1)/z = -P with real z and P: V = (1 + sqrt(1 - 4 z P)) / 2.
    FixedPointSolver solver(two_bus(0.01, 0.0));
    InjectionVector inj = InjectionVector::zeros(solver.layout());
    inj.add_y(0, -0.1, 0.0);
    const auto res = solver.solve(inj, 1e-12, 100);
    const double expect = (1.0 + std::sqrt(1.0 - 4.0 * 0.01 * 0.1)) / 2.0;
    const int load_term = solver.layout().load_terminals[0];
    REQUIRE(std::abs(res.v_all[load_term] - Complex(expect, 0.0)) < 1e-9);
}

TEST_CASE("loading beyond maximum loadability raises a convergence error") {
    // The closed form caps P at 1/(4z) = 25; ask for 26.
    FixedPointSolver solver(two_bus(0.01, 0.0));
    InjectionVector inj = InjectionVector::zeros(solver.layout());
    inj.add_y(0, -26.0, 0.0);
    try {
        solver.solve(inj);
        FAIL("expected non-convergence");
    } catch (const ConvergenceError& e) {
        REQUIRE(e.mismatch_norm > 0.0);
    }
}

TEST_CASE("alpha equals the no-load solution when linearizing at zero load") {
    FixedPointSolver solver(bundled_feeder());
    const auto model = powerflow::linearize(solver, InjectionVector::zeros(solver.layout()));
    REQUIRE((model.alpha - solver.no_load_voltage()).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("sensitivity columns match central finite differences") {
    FixedPointSolver solver(bundled_feeder());
    const InjectionVector base = bundled_base_injection(solver);
    const auto model = powerflow::linearize(solver, base, 1e-12, 100);

    std::mt19937 rng(7);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(base.x_y.size()) - 1);
    const double h = 1e-4;
    for (int trial = 0; trial < 12; ++trial) {
        const int j = pick(rng);
        InjectionVector up = base, dn = base;
        up.x_y[j] += h;
        dn.x_y[j] -= h;
        const CVec v_up = solver.restrict_load(solver.solve(up, 1e-12, 100).v_all);
        const CVec v_dn = solver.restrict_load(solver.solve(dn, 1e-12, 100).v_all);
        const CVec fd = (v_up - v_dn) / (2.0 * h);
        REQUIRE((fd - model.m_y.col(j)).lpNorm<Eigen::Infinity>() < 1e-4);
    }
}

TEST_CASE("predicted voltage magnitudes track the nonlinear solution within 1e-3") {
    FixedPointSolver solver(bundled_feeder());
    const InjectionVector base = bundled_base_injection(solver);
    const auto model = powerflow::linearize(solver, base);

    std::mt19937 rng(21);
    std::uniform_real_distribution<double> unif(-0.2, 0.2);
    for (int trial = 0; trial < 40; ++trial) {
        InjectionVector x = base;
        for (int i = 0; i < x.x_y.size(); ++i) x.x_y[i] *= 1.0 + unif(rng);
        const CVec v_nl = solver.restrict_load(solver.solve(x, 1e-10, 100).v_all);
        const CVec v_aff = model.predict_voltage(x);
        REQUIRE((v_aff.cwiseAbs() - v_nl.cwiseAbs()).lpNorm<Eigen::Infinity>() < 1e-3);
    }
}

TEST_CASE("affine prediction is exact at the base point and superposes") {
    FixedPointSolver solver(bundled_feeder());
    const InjectionVector base = bundled_base_injection(solver);
    const auto model = powerflow::linearize(solver, base);

    SECTION("base point reproduces stored solutions exactly") {
        REQUIRE((model.predict_voltage(base).array() == model.base_v.array()).all());
        REQUIRE((model.predict_current(base).array() == model.base_i.array()).all());
        // And the stored base is a converged solution of the nonlinear model.
        const CVec v_nl = solver.restrict_load(solver.solve(base).v_all);
        REQUIRE((model.base_v - v_nl).lpNorm<Eigen::Infinity>() < 1e-7);
    }
    SECTION("zero input returns alpha and beta") {
        const InjectionVector zero = InjectionVector::zeros(solver.layout());
        REQUIRE((model.predict_voltage(zero) - model.alpha).lpNorm<Eigen::Infinity>() == 0.0);
        REQUIRE((model.predict_current(zero) - model.beta).lpNorm<Eigen::Infinity>() == 0.0);
    }
    SECTION("superposition holds to rounding") {
        InjectionVector x1 = bundled_base_injection(solver, 0.7);
        InjectionVector x2 = bundled_base_injection(solver, 0.25);
        InjectionVector sum = x1;
        sum.x_y += x2.x_y;
        sum.x_delta += x2.x_delta;
        const CVec lhs = model.predict_voltage(sum) - model.alpha;
        const CVec rhs = (model.predict_voltage(x1) - model.alpha) +
                         (model.predict_voltage(x2) - model.alpha);
        REQUIRE((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-13);
    }
}

TEST_CASE("dimension mismatch is rejected") {
    FixedPointSolver solver(bundled_feeder());
    const auto model = powerflow::linearize(solver, bundled_base_injection(solver));
    InjectionVector bad;
    bad.x_y = Vec::Zero(3);
    bad.x_delta = Vec::Zero(0);
    REQUIRE_THROWS_AS(model.predict_voltage(bad), FlexError);
    REQUIRE_THROWS_AS(solver.solve(bad), FlexError);
}

TEST_CASE("magnitude functionals") {
    FixedPointSolver solver(bundled_feeder());
    const InjectionVector base = bundled_base_injection(solver);
    const auto model = powerflow::linearize(solver, base, 1e-12, 100);
    const auto mag = powerflow::magnitude_affine(model);

    SECTION("exact at the base point") {
        const Vec x = base.stacked();
        for (int n = 0; n < model.base_v.size(); ++n)
            REQUIRE(mag.voltage_at(x, n) ==
                    Catch::Approx(std::abs(model.base_v[n])).margin(1e-12));
        for (int l = 0; l < model.base_i.size(); ++l)
            if (!mag.low_current[l])
                REQUIRE(mag.current_at(x, l) ==
                        Catch::Approx(std::abs(model.base_i[l])).margin(1e-12));
    }
    SECTION("reduces to Re(V) when the base voltage is real positive") {
        FixedPointSolver tb(two_bus(0.01, 0.0));
        InjectionVector b0 = InjectionVector::zeros(tb.layout());
        b0.add_y(0, -0.05, 0.0);
        const auto m2 = powerflow::linearize(tb, b0, 1e-12, 100);
        const auto mg2 = powerflow::magnitude_affine(m2);
        InjectionVector x = b0;
        x.x_y[0] = -0.04;
        REQUIRE(mg2.voltage_at(x.stacked(), 0) ==
                Catch::Approx(m2.predict_voltage(x)[0].real()).margin(1e-12));
    }
    SECTION("within 5e-4 of the affine model's magnitude for +-10% moves") {
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> unif(-0.1, 0.1);
        for (int trial = 0; trial < 25; ++trial) {
            InjectionVector x = base;
            for (int i = 0; i < x.x_y.size(); ++i) x.x_y[i] *= 1.0 + unif(rng);
            const CVec v = model.predict_voltage(x);
            const Vec xs = x.stacked();
            for (int n = 0; n < v.size(); ++n)
                REQUIRE(std::abs(mag.voltage_at(xs, n) - std::abs(v[n])) < 5e-4);
        }
    }
}

TEST_CASE("linearization error grows with the perturbation radius") {
    FixedPointSolver solver(bundled_feeder());
    const InjectionVector base = bundled_base_injection(solver);
    const auto model = powerflow::linearize(solver, base, 1e-12, 100);

    std::mt19937 rng(11);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int ray = 0; ray < 15; ++ray) {
        Vec dir(base.x_y.size());
        for (int i = 0; i < dir.size(); ++i) dir[i] = unif(rng) * 0.004;
        double last = -1.0;
        for (double t : {0.25, 0.5, 0.75, 1.0}) {
            InjectionVector x = base;
            x.x_y += t * dir;
            const CVec v_nl = solver.restrict_load(solver.solve(x, 1e-12, 100).v_all);
            const double err =
                (model.predict_voltage(x).cwiseAbs() - v_nl.cwiseAbs()).lpNorm<Eigen::Infinity>();
            REQUIRE(err >= last - 1e-9);
            last = err;
        }
    }
}

TEST_CASE("mismatch decreases monotonically after the second iteration") {
    FixedPointSolver solver(bundled_feeder());
    const auto res = solver.solve(bundled_base_injection(solver), 1e-12, 100);
    for (std::size_t i = 2; i < res.mismatch_history.size(); ++i)
        REQUIRE(res.mismatch_history[i] <= res.mismatch_history[i - 1]);
}

TEST_CASE("delta-connected injections") {
    // Three-phase two-bus system with one delta source at the load bus.
    netmodel::NetworkModel net;
    net.base_kv = 1.0;
    net.base_kva = 1000.0;
    net.buses = {{"s", PhaseMask::abc(), netmodel::Connection::Wye, 0.5, 1.5, true},
                 {"d", PhaseMask::abc(), netmodel::Connection::Delta, 0.5, 1.5, false}};
    netmodel::Line l;
    l.id = "l1";
    l.from_bus = "s";
    l.to_bus = "d";
    l.phases = PhaseMask::abc();
    l.z = CMat::Zero(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) l.z(i, j) = i == j ? Complex(0.01, 0.02) : Complex(0.002, 0.005);
    l.i_max_amps = 1000.0;
    net.lines = {l};

    FixedPointSolver solver(net);
    REQUIRE(solver.layout().n_delta() == 3);

    InjectionVector inj = InjectionVector::zeros(solver.layout());
    inj.add_delta(0, -0.05, -0.01);  // pair ab
    const auto res = solver.solve(inj, 1e-12, 100);

    // Check the delta power balance by hand: S_ab = V_ab * conj(I_ab) where
    // the pair current is what flows into the load bus terminals a and minus
    // at b.
    const CVec v_load = solver.restrict_load(res.v_all);
    const CVec i_inj = solver.admittance().bottomRows(3) * res.v_all;
    const Complex v_ab = v_load[0] - v_load[1];
    // i_a = I_ab, i_b = -I_ab, i_c = 0 for a single ab-connected source.
    const Complex s_ab = v_ab * std::conj(i_inj[0]);
    REQUIRE(std::abs(s_ab - Complex(-0.05, -0.01)) < 1e-9);
    REQUIRE(std::abs(i_inj[2]) < 1e-9);

    SECTION("delta sensitivity column matches finite differences") {
        const auto model = powerflow::linearize(solver, inj, 1e-12, 100);
        const double h = 1e-4;
        InjectionVector up = inj, dn = inj;
        up.x_delta[0] += h;
        dn.x_delta[0] -= h;
        const CVec v_up = solver.restrict_load(solver.solve(up, 1e-12, 100).v_all);
        const CVec v_dn = solver.restrict_load(solver.solve(dn, 1e-12, 100).v_all);
        const CVec fd = (v_up - v_dn) / (2.0 * h);
        REQUIRE((fd - model.m_delta.col(0)).lpNorm<Eigen::Infinity>() < 1e-4);
    }
}
