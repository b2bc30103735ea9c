#include <catch2/catch_amalgamated.hpp>

#include "flexregion/netmodel.hpp"
#include "test_helpers.hpp"

using namespace flexregion;
using namespace testutil;
using netmodel::NetworkModel;

namespace {

// Adjugate-based inverse for 1x1..3x3 complex matrices; deliberately a
// different code path than the library's LU inverse.
CMat adjugate_inverse(const CMat& z) {
    const int n = static_cast<int>(z.rows());
    CMat inv(n, n);
    if (n == 1) {
        inv(0, 0) = 1.0 / z(0, 0);
    } else if (n == 2) {
        const Complex det = z(0, 0) * z(1, 1) - z(0, 1) * z(1, 0);
        inv << z(1, 1) / det, -z(0, 1) / det, -z(1, 0) / det, z(0, 0) / det;
    } else {
        const Complex det = z(0, 0) * (z(1, 1) * z(2, 2) - z(1, 2) * z(2, 1)) -
                            z(0, 1) * (z(1, 0) * z(2, 2) - z(1, 2) * z(2, 0)) +
                            z(0, 2) * (z(1, 0) * z(2, 1) - z(1, 1) * z(2, 0));
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                const int r1 = (r + 1) % 3, r2 = (r + 2) % 3;
                const int c1 = (c + 1) % 3, c2 = (c + 2) % 3;
                inv(c, r) = (z(r1, c1) * z(r2, c2) - z(r1, c2) * z(r2, c1)) / det;
            }
    }
    return inv;
}

// Independent element-stamping assembly: iterate terminal pairs and sum the
// contribution of every line touching the pair.
CMat oracle_admittance(const NetworkModel& net) {
    const auto lay = netmodel::TerminalLayout::build(net);
    const int nt = lay.n_terminals();
    CMat y = CMat::Zero(nt, nt);
    for (int a = 0; a < nt; ++a) {
        for (int b = 0; b < nt; ++b) {
            const auto ta = lay.terminals[a];
            const auto tb = lay.terminals[b];
            Complex sum = 0.0;
            for (const netmodel::Line& line : net.lines) {
                const int f = net.bus_index(line.from_bus);
                const int t = net.bus_index(line.to_bus);
                const bool touches_a = ta.bus == f || ta.bus == t;
                const bool touches_b = tb.bus == f || tb.bus == t;
                if (!touches_a || !touches_b) continue;
                const std::vector<Phase> ph = line.phases.list();
                int ia = -1, ib = -1;
                for (int i = 0; i < static_cast<int>(ph.size()); ++i) {
                    if (ph[i] == ta.phase) ia = i;
                    if (ph[i] == tb.phase) ib = i;
                }
                if (ia < 0 || ib < 0) continue;
                const CMat yb = adjugate_inverse(line.z / net.z_base_ohm());
                const bool same_side = (ta.bus == tb.bus);
                if (same_side && (ta.bus == f || ta.bus == t))
                    sum += yb(ia, ib);
                else if (!same_side)
                    sum -= yb(ia, ib);
            }
            y(a, b) = sum;
        }
    }
    return y;
}

}  // namespace

TEST_CASE("two-bus admittance blocks follow the closed form") {
    // Base chosen so 1 ohm == 1 p.u.; the entries come out in siemens.
    auto net = two_bus(0.01, 0.01);
    const CMat y = netmodel::build_admittance(net);
    const Complex expect = -1.0 / Complex(0.01, 0.01);
    REQUIRE(y(0, 1).real() == Catch::Approx(expect.real()).margin(1e-9));
    REQUIRE(y(0, 1).imag() == Catch::Approx(expect.imag()).margin(1e-9));
    REQUIRE(y(0, 0) == -y(0, 1));
}

TEST_CASE("admittance is exactly symmetric for random radial feeders") {
    for (unsigned seed = 0; seed < 110; ++seed) {
        const auto net = random_radial(3 + static_cast<int>(seed % 20), seed);
        const CMat y = netmodel::build_admittance(net);
        REQUIRE((y.array() == y.transpose().array()).all());
    }
}

TEST_CASE("shunt-free rows sum to zero") {
    const auto net = bundled_feeder();
    const CMat y = netmodel::build_admittance(net);
    for (int r = 0; r < y.rows(); ++r) {
        const double scale = y.row(r).cwiseAbs().sum();
        REQUIRE(std::abs(y.row(r).sum()) <= 1e-12 * scale);
    }
}

TEST_CASE("bundled feeder matches the independent stamping oracle") {
    const auto net = bundled_feeder();
    const CMat y = netmodel::build_admittance(net);
    const CMat o = oracle_admittance(net);
    REQUIRE(y.rows() == o.rows());
    for (int r = 0; r < y.rows(); ++r)
        for (int c = 0; c < y.cols(); ++c) {
            const double scale = std::max(1e-30, std::abs(o(r, c)));
            REQUIRE(std::abs(y(r, c) - o(r, c)) <= 1e-12 * std::max(1.0, scale));
        }
}

TEST_CASE("removing and re-adding a line reproduces the matrix bit for bit") {
    auto net = bundled_feeder();
    const CMat before = netmodel::build_admittance(net);
    const std::size_t pos = 7;
    const netmodel::Line saved = net.lines[pos];
    net.lines.erase(net.lines.begin() + pos);
    net.lines.insert(net.lines.begin() + pos, saved);
    const CMat after = netmodel::build_admittance(net);
    REQUIRE((before.array() == after.array()).all());
}

TEST_CASE("validation diagnostics") {
    SECTION("well-formed bundled feeder has none") {
        REQUIRE(netmodel::validate_network(bundled_feeder()).empty());
    }
    SECTION("line referencing a missing bus is named") {
        auto net = two_bus(0.01, 0.01);
        net.lines[0].to_bus = "nowhere";
        const auto diags = netmodel::validate_network(net);
        REQUIRE_FALSE(diags.empty());
        bool found = false;
        for (const auto& d : diags) found = found || d.find("l1") != std::string::npos;
        REQUIRE(found);
    }
    SECTION("two slack buses are reported") {
        auto net = two_bus(0.01, 0.01);
        net.buses[1].is_slack = true;
        const auto diags = netmodel::validate_network(net);
        bool found = false;
        for (const auto& d : diags)
            found = found || d.find("multiple slack buses") != std::string::npos;
        REQUIRE(found);
    }
    SECTION("inconsistent line phasing is reported") {
        auto net = two_bus(0.01, 0.01);
        net.lines[0].phases = PhaseMask::of({Phase::A, Phase::B});
        net.lines[0].z = CMat::Identity(2, 2);
        const auto diags = netmodel::validate_network(net);
        REQUIRE_FALSE(diags.empty());
    }
}

TEST_CASE("singular impedance matrix is rejected with the line id") {
    auto net = two_bus(0.01, 0.01);
    net.lines[0].phases = PhaseMask::of({Phase::A});
    net.lines[0].z = CMat::Zero(1, 1);
    // Zero impedance also fails validation-side symmetric checks? No: it is
    // symmetric, so only the inversion trips.
    net.buses[0].phases = PhaseMask::of({Phase::A});
    try {
        netmodel::build_admittance(net);
        FAIL("expected singular impedance to throw");
    } catch (const FlexError& e) {
        REQUIRE(std::string(e.what()).find("l1") != std::string::npos);
        REQUIRE(std::string(e.what()).find("singular") != std::string::npos);
    }
}
