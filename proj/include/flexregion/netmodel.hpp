#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "flexregion/common.hpp"

namespace flexregion::netmodel {

enum class Connection : std::uint8_t { Wye, Delta };

struct Bus {
    std::string id;
    PhaseMask phases;
    Connection connection = Connection::Wye;
    double v_min = 0.95;  // p.u.
    double v_max = 1.05;  // p.u.
    bool is_slack = false;
};

/// Series line segment. z is the per-phase impedance matrix in ohm over the
/// line's phase list (square, symmetric); i_max_amps is the per-conductor
/// ampacity.
struct Line {
    std::string id;
    std::string from_bus;
    std::string to_bus;
    PhaseMask phases;
    CMat z;
    double i_max_amps = 0.0;
};

struct NetworkModel {
    std::vector<Bus> buses;
    std::vector<Line> lines;
    double base_kv = 4.16;    // line-to-line
    double base_kva = 1000.0; // three-phase total

    int n_buses() const { return static_cast<int>(buses.size()); }
    int n_lines() const { return static_cast<int>(lines.size()); }

    int bus_index(const std::string& id) const {
        for (int i = 0; i < n_buses(); ++i)
            if (buses[i].id == id) return i;
        return -1;
    }
    int slack_index() const {
        for (int i = 0; i < n_buses(); ++i)
            if (buses[i].is_slack) return i;
        return -1;
    }

    // Per-unit bases. Everything inside the library is per-unit; SI enters
    // and leaves only at ingestion and reporting.
    double z_base_ohm() const { return 1000.0 * base_kv * base_kv / base_kva; }
    double i_base_amps() const { return base_kva / (std::sqrt(3.0) * base_kv); }
    double s_base_1ph_kva() const { return base_kva / 3.0; }
};

/// Flat enumeration of bus-phase terminals, line-phase conductors and
/// delta-connected phase pairs. All vectors and matrices in the power flow
/// and sensitivity code are indexed by these layouts.
struct TerminalLayout {
    struct Terminal {
        int bus;
        Phase phase;
    };
    struct LineTerm {
        int line;
        Phase phase;
    };
    // Delta pair on `bus` between `lead` and `lag` (voltage = V_lead - V_lag),
    // following the ab, bc, ca convention.
    struct DeltaPair {
        int bus;
        Phase lead;
        Phase lag;
    };

    std::vector<Terminal> terminals;    // all bus-phase terminals, bus-major
    std::vector<int> slack_terminals;   // indices into `terminals`
    std::vector<int> load_terminals;    // indices into `terminals` (non-slack)
    std::vector<LineTerm> line_terms;   // line-phase conductors, line-major
    std::vector<DeltaPair> delta_pairs; // non-slack buses only

    int n_terminals() const { return static_cast<int>(terminals.size()); }
    int n_load() const { return static_cast<int>(load_terminals.size()); }
    int n_line_terms() const { return static_cast<int>(line_terms.size()); }
    int n_delta() const { return static_cast<int>(delta_pairs.size()); }

    /// Index into `terminals`; -1 when the bus does not carry the phase.
    int terminal_index(int bus, Phase phase) const {
        auto it = term_map_.find(key(bus, phase));
        return it == term_map_.end() ? -1 : it->second;
    }
    /// Index into `load_terminals` space; -1 for slack or absent phases.
    int load_index(int bus, Phase phase) const {
        int t = terminal_index(bus, phase);
        return t < 0 ? -1 : load_pos_[t];
    }

    static TerminalLayout build(const NetworkModel& net) {
        TerminalLayout lay;
        for (int b = 0; b < net.n_buses(); ++b) {
            for (Phase p : net.buses[b].phases.list()) {
                lay.term_map_[key(b, p)] = static_cast<int>(lay.terminals.size());
                lay.terminals.push_back({b, p});
            }
        }
        lay.load_pos_.assign(lay.terminals.size(), -1);
        for (int t = 0; t < lay.n_terminals(); ++t) {
            if (net.buses[lay.terminals[t].bus].is_slack) {
                lay.slack_terminals.push_back(t);
            } else {
                lay.load_pos_[t] = static_cast<int>(lay.load_terminals.size());
                lay.load_terminals.push_back(t);
            }
        }
        for (int l = 0; l < net.n_lines(); ++l)
            for (Phase p : net.lines[l].phases.list()) lay.line_terms.push_back({l, p});
        for (int b = 0; b < net.n_buses(); ++b) {
            if (net.buses[b].is_slack) continue;
            const PhaseMask ph = net.buses[b].phases;
            const std::pair<Phase, Phase> pairs[3] = {{Phase::A, Phase::B},
                                                      {Phase::B, Phase::C},
                                                      {Phase::C, Phase::A}};
            for (auto [lead, lag] : pairs)
                if (ph.contains(lead) && ph.contains(lag))
                    lay.delta_pairs.push_back({b, lead, lag});
        }
        return lay;
    }

  private:
    static long key(int bus, Phase phase) { return bus * 4L + static_cast<int>(phase); }
    std::unordered_map<long, int> term_map_;
    std::vector<int> load_pos_;
};

/// Structural diagnostics. Returns an empty list iff the network is
/// connected, has exactly one slack bus and every line's phasing is
/// consistent with both endpoints. Never throws.
inline std::vector<std::string> validate_network(const NetworkModel& net) {
    std::vector<std::string> diags;
    if (net.buses.empty()) {
        diags.push_back("network has no buses");
        return diags;
    }
    int n_slack = 0;
    for (const Bus& b : net.buses) {
        if (b.is_slack) ++n_slack;
        if (b.phases.empty()) diags.push_back("bus " + b.id + ": empty phase set");
        if (!(b.v_min < b.v_max))
            diags.push_back("bus " + b.id + ": v_min must be below v_max");
    }
    if (n_slack == 0) diags.push_back("no slack bus");
    if (n_slack > 1) diags.push_back("multiple slack buses");

    std::vector<std::vector<int>> adj(net.buses.size());
    for (const Line& l : net.lines) {
        int f = net.bus_index(l.from_bus);
        int t = net.bus_index(l.to_bus);
        if (f < 0) diags.push_back("line " + l.id + ": unknown from_bus " + l.from_bus);
        if (t < 0) diags.push_back("line " + l.id + ": unknown to_bus " + l.to_bus);
        if (f < 0 || t < 0) continue;
        if (l.phases.empty()) {
            diags.push_back("line " + l.id + ": empty phase set");
            continue;
        }
        if (!l.phases.subset_of(net.buses[f].phases) || !l.phases.subset_of(net.buses[t].phases))
            diags.push_back("line " + l.id + ": phases " + l.phases.str() +
                            " not present at both endpoints");
        if (l.z.rows() != l.phases.count() || l.z.cols() != l.phases.count())
            diags.push_back("line " + l.id + ": impedance matrix size does not match phase count");
        else if (!l.z.isApprox(l.z.transpose()))
            diags.push_back("line " + l.id + ": impedance matrix not symmetric");
        if (!(l.i_max_amps > 0)) diags.push_back("line " + l.id + ": i_max must be positive");
        if (f == t) {
            diags.push_back("line " + l.id + ": connects a bus to itself");
            continue;
        }
        adj[f].push_back(t);
        adj[t].push_back(f);
    }

    // Bus-level connectivity from the slack (or bus 0 when no slack exists).
    std::vector<char> seen(net.buses.size(), 0);
    std::vector<int> stack{std::max(net.slack_index(), 0)};
    seen[stack.back()] = 1;
    while (!stack.empty()) {
        int b = stack.back();
        stack.pop_back();
        for (int nb : adj[b])
            if (!seen[nb]) {
                seen[nb] = 1;
                stack.push_back(nb);
            }
    }
    for (int b = 0; b < net.n_buses(); ++b)
        if (!seen[b]) diags.push_back("bus " + net.buses[b].id + ": not connected to the slack");
    return diags;
}

/// Per-unit series admittance block of one line: inv(z / Z_base).
inline CMat line_admittance_pu(const NetworkModel& net, const Line& line) {
    const CMat z_pu = line.z / net.z_base_ohm();
    Eigen::FullPivLU<CMat> lu(z_pu);
    if (!lu.isInvertible())
        throw FlexError("line " + line.id + ": singular per-phase impedance matrix");
    const CMat y = lu.inverse();
    // Symmetrize bitwise so admittance assembly is exactly symmetric.
    return (y + y.transpose()) / 2.0;
}

/// Bus admittance matrix over all bus-phase terminals (per-unit). For each
/// line the off-diagonal block equals -inv(z) over the shared phases. The
/// result is exactly symmetric by construction; shunt-free rows sum to zero
/// up to rounding.
inline CMat build_admittance(const NetworkModel& net) {
    const std::vector<std::string> diags = validate_network(net);
    if (!diags.empty()) throw FlexError("invalid network: " + diags.front());

    const TerminalLayout lay = TerminalLayout::build(net);
    CMat y = CMat::Zero(lay.n_terminals(), lay.n_terminals());
    for (const Line& line : net.lines) {
        const CMat yb = line_admittance_pu(net, line);
        const int f = net.bus_index(line.from_bus);
        const int t = net.bus_index(line.to_bus);
        const std::vector<Phase> ph = line.phases.list();
        for (int i = 0; i < static_cast<int>(ph.size()); ++i) {
            const int fi = lay.terminal_index(f, ph[i]);
            const int ti = lay.terminal_index(t, ph[i]);
            for (int j = 0; j < static_cast<int>(ph.size()); ++j) {
                const int fj = lay.terminal_index(f, ph[j]);
                const int tj = lay.terminal_index(t, ph[j]);
                y(fi, fj) += yb(i, j);
                y(ti, tj) += yb(i, j);
                y(fi, tj) -= yb(i, j);
                y(ti, fj) -= yb(i, j);
            }
        }
    }
    return y;
}

}  // namespace flexregion::netmodel
