#pragma once

#include <random>
#include <string>

#include "flexregion/io.hpp"
#include "flexregion/netmodel.hpp"

namespace testutil {

using namespace flexregion;

inline std::string data_path(const std::string& name) {
    return std::string(FLEXREGION_DATA_DIR) + "/" + name;
}

inline netmodel::NetworkModel bundled_feeder() {
    return io::load_feeder_file(data_path("feeder25.json"));
}

/// Single-phase two-bus network with series impedance z_pu (per-unit). The
/// base is chosen so that 1 ohm equals 1 p.u. and ohm values can be written
/// directly.
inline netmodel::NetworkModel two_bus(double r_pu, double x_pu, double i_max = 1000.0) {
    netmodel::NetworkModel net;
    net.base_kv = 1.0;
    net.base_kva = 1000.0;  // Z_base = 1 ohm
    netmodel::Bus head{"head", PhaseMask::of({Phase::A}), netmodel::Connection::Wye, 0.5, 1.5, true};
    netmodel::Bus load{"load", PhaseMask::of({Phase::A}), netmodel::Connection::Wye, 0.5, 1.5, false};
    net.buses = {head, load};
    netmodel::Line l;
    l.id = "l1";
    l.from_bus = "head";
    l.to_bus = "load";
    l.phases = PhaseMask::of({Phase::A});
    l.z.resize(1, 1);
    l.z(0, 0) = Complex(r_pu, x_pu);
    l.i_max_amps = i_max;
    net.lines = {l};
    return net;
}

/// Random radial network: bus 0 is a 3-phase slack; every other bus hangs off
/// an earlier bus with a random nonempty subset of the parent's phases.
inline netmodel::NetworkModel random_radial(int n_buses, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    netmodel::NetworkModel net;
    net.base_kv = 4.16;
    net.base_kva = 2000.0;
    std::vector<PhaseMask> phases(n_buses);
    phases[0] = PhaseMask::abc();
    net.buses.push_back({"b0", phases[0], netmodel::Connection::Wye, 0.9, 1.1, true});
    for (int b = 1; b < n_buses; ++b) {
        std::uniform_int_distribution<int> pick(0, b - 1);
        int parent = pick(rng);
        // Random nonempty subset of the parent's phases.
        PhaseMask pm;
        while (pm.empty())
            for (Phase p : phases[parent].list())
                if (unif(rng) < 0.7) pm.add(p);
        phases[b] = pm;
        net.buses.push_back({"b" + std::to_string(b), pm, netmodel::Connection::Wye, 0.9, 1.1,
                             false});
        netmodel::Line l;
        l.id = "l" + std::to_string(b);
        l.from_bus = "b" + std::to_string(parent);
        l.to_bus = "b" + std::to_string(b);
        l.phases = pm;
        const int np = pm.count();
        l.z.resize(np, np);
        const Complex self(0.1 + 0.3 * unif(rng), 0.2 + 0.4 * unif(rng));
        const Complex mutual = 0.3 * self;
        for (int i = 0; i < np; ++i)
            for (int j = 0; j < np; ++j) l.z(i, j) = i == j ? self : mutual;
        l.i_max_amps = 100.0 + 400.0 * unif(rng);
        net.lines.push_back(std::move(l));
    }
    return net;
}

}  // namespace testutil
