#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexregion/devices.hpp"
#include "flexregion/netmodel.hpp"
#include "flexregion/socp.hpp"
#include "flexregion/uncertainty.hpp"

namespace flexregion::io {

using nlohmann::json;

inline json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FlexError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FlexError(path + ": " + e.what());  // nlohmann reports the byte offset
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FlexError("cannot write " + path);
    out << text;
}

// ---------------------------------------------------------------------------
// Feeder file: {"base": {...}, "buses": [...], "lines": [...]}; impedances in
// ohm as [re, im] pairs per phase pair, ampacities in ampere.
// ---------------------------------------------------------------------------

inline netmodel::NetworkModel load_feeder(const json& j) {
    netmodel::NetworkModel net;
    const json& base = j.at("base");
    net.base_kv = base.at("kv").get<double>();
    net.base_kva = base.at("kva").get<double>();
    for (const json& jb : j.at("buses")) {
        netmodel::Bus b;
        b.id = jb.at("id").get<std::string>();
        b.phases = PhaseMask::parse(jb.at("phases").get<std::string>());
        b.connection = jb.value("connection", std::string("Y")) == "D"
                           ? netmodel::Connection::Delta
                           : netmodel::Connection::Wye;
        b.v_min = jb.value("v_min", 0.95);
        b.v_max = jb.value("v_max", 1.05);
        b.is_slack = jb.value("slack", false);
        net.buses.push_back(std::move(b));
    }
    for (const json& jl : j.at("lines")) {
        netmodel::Line l;
        l.id = jl.at("id").get<std::string>();
        l.from_bus = jl.at("from").get<std::string>();
        l.to_bus = jl.at("to").get<std::string>();
        l.phases = PhaseMask::parse(jl.at("phases").get<std::string>());
        const json& z = jl.at("z");
        const int np = l.phases.count();
        if (static_cast<int>(z.size()) != np)
            throw FlexError("line " + l.id + ": z must have one row per phase");
        l.z.resize(np, np);
        for (int r = 0; r < np; ++r)
            for (int c = 0; c < np; ++c)
                l.z(r, c) = Complex(z.at(r).at(c).at(0).get<double>(),
                                    z.at(r).at(c).at(1).get<double>());
        l.i_max_amps = jl.at("i_max").get<double>();
        net.lines.push_back(std::move(l));
    }
    return net;
}

inline netmodel::NetworkModel load_feeder_file(const std::string& path) {
    return load_feeder(parse_json_file(path));
}

// ---------------------------------------------------------------------------
// Fleet file: device ratings in kW/kVA (converted to per-unit on the feeder's
// single-phase base at ingest). Controllable loads reference the bus-phase
// load they modulate; scheduled values come from the profile row in use.
// ---------------------------------------------------------------------------

/// Raw fleet description before a profile row is applied.
struct FleetSpec {
    struct ClSpec {
        std::string id;
        std::string bus;
        PhaseMask phases;
        double tan_theta = 0.0;
        double low_mult = 0.8;
        double high_mult = 1.2;
        double p_sched_kw = 0.0;  // used when no profile column exists
    };
    struct PvSpec {
        std::string id;
        std::string bus;
        PhaseMask phases;
        double capacity_kw = 0.0;
        double inverter_kva = 0.0;
        std::string q_mode = "full";  // or "ieee1547"
        std::optional<double> pf_tan;
        double sigma_kw = 0.0;  // forecast-error std when no error table is used
    };
    struct BessSpec {
        std::string id;
        std::string bus;
        PhaseMask phases;
        double inverter_kva = 0.0;
        double p_sched_kw = 0.0;
        double q_sched_kvar = 0.0;
    };
    struct NclSpec {
        std::string bus;
        Phase phase = Phase::A;
        double p_kw = 0.0;
        double q_kvar = 0.0;
    };
    std::vector<ClSpec> loads;
    std::vector<PvSpec> pvs;
    std::vector<BessSpec> bess;
    std::vector<NclSpec> ncl;
};

inline FleetSpec load_fleet(const json& j) {
    FleetSpec fs;
    for (const json& jc : j.value("controllable_loads", json::array())) {
        FleetSpec::ClSpec c;
        c.id = jc.at("id").get<std::string>();
        c.bus = jc.at("bus").get<std::string>();
        c.phases = PhaseMask::parse(jc.at("phases").get<std::string>());
        c.tan_theta = jc.value("tan_theta", 0.0);
        c.low_mult = jc.value("low_mult", 0.8);
        c.high_mult = jc.value("high_mult", 1.2);
        c.p_sched_kw = jc.value("p_sched_kw", 0.0);
        fs.loads.push_back(std::move(c));
    }
    for (const json& jp : j.value("pv", json::array())) {
        FleetSpec::PvSpec p;
        p.id = jp.at("id").get<std::string>();
        p.bus = jp.at("bus").get<std::string>();
        p.phases = PhaseMask::parse(jp.at("phases").get<std::string>());
        p.capacity_kw = jp.at("capacity_kw").get<double>();
        p.inverter_kva = jp.at("inverter_kva").get<double>();
        p.q_mode = jp.value("q_mode", std::string("full"));
        if (jp.contains("pf_tan")) p.pf_tan = jp.at("pf_tan").get<double>();
        p.sigma_kw = jp.value("sigma_kw", 0.0);
        fs.pvs.push_back(std::move(p));
    }
    for (const json& jb : j.value("bess", json::array())) {
        FleetSpec::BessSpec b;
        b.id = jb.at("id").get<std::string>();
        b.bus = jb.at("bus").get<std::string>();
        b.phases = PhaseMask::parse(jb.at("phases").get<std::string>());
        b.inverter_kva = jb.at("inverter_kva").get<double>();
        b.p_sched_kw = jb.value("p_sched_kw", 0.0);
        b.q_sched_kvar = jb.value("q_sched_kvar", 0.0);
        fs.bess.push_back(std::move(b));
    }
    for (const json& jn : j.value("ncl", json::array())) {
        FleetSpec::NclSpec n;
        n.bus = jn.at("bus").get<std::string>();
        n.phase = phase_from_char(jn.at("phase").get<std::string>().at(0));
        n.p_kw = jn.value("p_kw", 0.0);
        n.q_kvar = jn.value("q_kvar", 0.0);
        fs.ncl.push_back(std::move(n));
    }
    return fs;
}

inline FleetSpec load_fleet_file(const std::string& path) {
    return load_fleet(parse_json_file(path));
}

// ---------------------------------------------------------------------------
// Profiles CSV: one row per snapshot time at 5-minute native resolution.
// Columns: time, load:<bus>.<phase>:p, load:<bus>.<phase>:q (kW/kvar) and
// pv:<id> (available kW).
// ---------------------------------------------------------------------------

struct ProfileSet {
    std::vector<std::string> times;                       // "HH:MM"
    std::vector<std::string> columns;                     // headers after `time`
    std::vector<std::vector<double>> rows;                // rows x columns
    std::map<std::string, int> column_index;

    int n_rows() const { return static_cast<int>(rows.size()); }
    double at(int row, const std::string& col) const {
        auto it = column_index.find(col);
        if (it == column_index.end()) throw FlexError("profiles: missing column " + col);
        return rows[row][it->second];
    }
    bool has(const std::string& col) const { return column_index.count(col) > 0; }

    /// Row indices at a 30-minute cadence (times ending in :00 or :30).
    std::vector<int> half_hour_rows() const {
        std::vector<int> out;
        for (int r = 0; r < n_rows(); ++r) {
            const std::string& t = times[r];
            const std::string mm = t.substr(t.find(':') + 1);
            if (mm == "00" || mm == "30") out.push_back(r);
        }
        return out;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline ProfileSet load_profiles_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FlexError("cannot open " + path);
    ProfileSet ps;
    std::string line;
    if (!std::getline(in, line)) throw FlexError(path + ": empty profiles file");
    const std::vector<std::string> header = split_csv_line(line);
    if (header.empty() || header[0] != "time")
        throw FlexError(path + ": first column must be `time`");
    for (std::size_t c = 1; c < header.size(); ++c) {
        ps.column_index[header[c]] = static_cast<int>(c - 1);
        ps.columns.push_back(header[c]);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw FlexError(path + ": row has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(header.size()));
        ps.times.push_back(cells[0]);
        std::vector<double> row(cells.size() - 1);
        for (std::size_t c = 1; c < cells.size(); ++c) row[c - 1] = std::stod(cells[c]);
        ps.rows.push_back(std::move(row));
    }
    return ps;
}

// ---------------------------------------------------------------------------
// Error-history CSV: day_type, power_pu, error_pu. Errors are per-unit of
// the PV capacity.
// ---------------------------------------------------------------------------

struct ErrorRecord {
    uncertainty::DayType day = uncertainty::DayType::Sunny;
    double power_pu = 0.0;
    double error_pu = 0.0;
};

inline std::vector<ErrorRecord> load_error_history_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FlexError("cannot open " + path);
    std::vector<ErrorRecord> out;
    std::string line;
    if (!std::getline(in, line)) return out;
    if (line.rfind("day_type", 0) != 0)
        throw FlexError(path + ": expected header day_type,power_pu,error_pu");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != 3) throw FlexError(path + ": malformed row: " + line);
        out.push_back({uncertainty::day_type_from(cells[0]), std::stod(cells[1]),
                       std::stod(cells[2])});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fitted scenario table round trip.
// ---------------------------------------------------------------------------

inline json gmm_to_json(const uncertainty::Gmm& g) {
    return json{{"weights", g.weights},
                {"means", g.means},
                {"variances", g.variances},
                {"log_likelihood", g.log_likelihood},
                {"aic", g.aic},
                {"bic", g.bic}};
}

inline uncertainty::Gmm gmm_from_json(const json& j) {
    uncertainty::Gmm g;
    g.weights = j.at("weights").get<std::vector<double>>();
    g.means = j.at("means").get<std::vector<double>>();
    g.variances = j.at("variances").get<std::vector<double>>();
    g.log_likelihood = j.value("log_likelihood", 0.0);
    g.aic = j.value("aic", 0.0);
    g.bic = j.value("bic", 0.0);
    return g;
}

inline json error_table_to_json(const uncertainty::ErrorScenarioTable& table) {
    json jt = json::object();
    for (const auto& [key, g] : table.fits) {
        const std::string day = uncertainty::day_type_name(
            static_cast<uncertainty::DayType>(key.first));
        jt[day][std::to_string(key.second)] = gmm_to_json(g);
    }
    return json{{"bins", {0.0, 0.25, 0.5, 0.75, 1.0}}, {"tables", jt}};
}

inline uncertainty::ErrorScenarioTable error_table_from_json(const json& j) {
    uncertainty::ErrorScenarioTable table;
    for (const auto& [day, bins] : j.at("tables").items())
        for (const auto& [bin, jg] : bins.items())
            table.set(uncertainty::day_type_from(day), std::stoi(bin), gmm_from_json(jg));
    return table;
}

// ---------------------------------------------------------------------------
// Conic problem dump/load (debugging aid, dense matrices; not a supported
// interchange format).
// ---------------------------------------------------------------------------

inline json matrix_to_json(const Mat& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Mat matrix_from_json(const json& j, int cols_hint = 0) {
    const int rows = static_cast<int>(j.size());
    const int cols = rows > 0 ? static_cast<int>(j.at(0).size()) : cols_hint;
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
    return m;
}

inline json vector_to_json(const Vec& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline Vec vector_from_json(const json& j) {
    Vec v(static_cast<int>(j.size()));
    for (int i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
    return v;
}

inline json conic_problem_to_json(const socp::ConicProblem& p) {
    json socs = json::array();
    for (const socp::SocBlock& s : p.socs)
        socs.push_back(json{{"f", matrix_to_json(s.f)},
                            {"g", vector_to_json(s.g)},
                            {"d", vector_to_json(s.d)},
                            {"h", s.h}});
    return json{{"c", vector_to_json(p.c)},
                {"a_eq", matrix_to_json(p.a_eq)},
                {"b_eq", vector_to_json(p.b_eq)},
                {"a_in", matrix_to_json(p.a_in)},
                {"b_in", vector_to_json(p.b_in)},
                {"socs", socs},
                {"lb", vector_to_json(p.lb)},
                {"ub", vector_to_json(p.ub)}};
}

inline socp::ConicProblem conic_problem_from_json(const json& j) {
    socp::ConicProblem p;
    p.c = vector_from_json(j.at("c"));
    const int n = p.n();
    p.a_eq = matrix_from_json(j.at("a_eq"), n);
    p.b_eq = vector_from_json(j.at("b_eq"));
    p.a_in = matrix_from_json(j.at("a_in"), n);
    p.b_in = vector_from_json(j.at("b_in"));
    for (const json& js : j.at("socs")) {
        socp::SocBlock s;
        s.f = matrix_from_json(js.at("f"), n);
        s.g = vector_from_json(js.at("g"));
        s.d = vector_from_json(js.at("d"));
        s.h = js.at("h").get<double>();
        p.socs.push_back(std::move(s));
    }
    p.lb = vector_from_json(j.at("lb"));
    p.ub = vector_from_json(j.at("ub"));
    return p;
}

}  // namespace flexregion::io
