#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "flexregion/common.hpp"

namespace flexregion::devices {

/// Load that can move its consumption between p_low and p_high around the
/// scheduled value, at a fixed power factor (Q = P * tan_theta). All powers
/// per-unit; multi-phase attachments split the device total equally across
/// the listed phases.
struct ControllableLoad {
    std::string id;
    int bus = -1;
    PhaseMask phases;
    double p_sched = 0.0;
    double p_low = 0.0;
    double p_high = 0.0;
    double tan_theta = 0.0;
};

enum class QMode { FullCircle, Ieee1547 };

struct PvUnit {
    std::string id;
    int bus = -1;
    PhaseMask phases;
    double s_rating = 0.0;       // inverter apparent-power rating
    double forecast_mu = 0.0;    // expected available power
    double forecast_sigma = 0.0; // forecast-error standard deviation
    QMode q_mode = QMode::FullCircle;
    std::optional<double> pf_tan;  // |Q| <= pf_tan * P when set
    // Scheduled base operating point (output convention, generation >= 0).
    double base_p = 0.0;
    double base_q = 0.0;
};

struct BessUnit {
    std::string id;
    int bus = -1;
    PhaseMask phases;
    double s_rating = 0.0;
    double p_sched = 0.0;  // output convention, discharge positive
    double q_sched = 0.0;
};

/// Non-controllable load at a single bus-phase (consumption positive).
struct NclLoad {
    int bus = -1;
    Phase phase = Phase::A;
    double p = 0.0;
    double q = 0.0;
};

struct DerFleet {
    std::vector<ControllableLoad> loads;
    std::vector<PvUnit> pvs;
    std::vector<BessUnit> bess;
    std::vector<NclLoad> ncl;

    int n_cl() const { return static_cast<int>(loads.size()); }
    int n_pv() const { return static_cast<int>(pvs.size()); }
    int n_bess() const { return static_cast<int>(bess.size()); }
};

/// Deterministic box on P with affine Q coupling (Q = P * tan_theta).
struct ClBounds {
    double p_min = 0.0;
    double p_max = 0.0;
    double tan_theta = 0.0;

    bool contains(double p, double q, double tol = 1e-9) const {
        return p >= p_min - tol && p <= p_max + tol &&
               std::abs(q - p * tan_theta) <= tol;
    }
};

inline ClBounds cl_bounds(const ControllableLoad& load) {
    if (!(load.p_low <= load.p_sched && load.p_sched <= load.p_high))
        throw FlexError("controllable load " + load.id + ": scheduled power outside its bounds");
    if (!std::isfinite(load.tan_theta))
        throw FlexError("controllable load " + load.id + ": tan_theta must be finite");
    return {load.p_low, load.p_high, load.tan_theta};
}

/// Chance-tightened PV operating region:
///   0 <= P <= max(0, mu - K*sigma) clipped at S,  P^2 + Q^2 <= S^2,
/// plus |Q| <= 0.44 S in ieee1547 mode and |Q| <= pf_tan * P when a power
/// factor requirement is present. Collapse to p_up = 0 is a valid,
/// fully-curtailed region.
struct PvRegion {
    double p_up = 0.0;
    double s = 0.0;
    std::optional<double> q_cap;   // |Q| <= q_cap
    std::optional<double> pf_tan;  // |Q| <= pf_tan * P

    bool contains(double p, double q, double tol = 1e-9) const {
        if (p < -tol || p > p_up + tol) return false;
        if (p * p + q * q > s * s + tol) return false;
        if (q_cap && std::abs(q) > *q_cap + tol) return false;
        if (pf_tan && std::abs(q) > *pf_tan * p + tol) return false;
        return true;
    }
};

inline PvRegion pv_tightened_region(const PvUnit& pv, double k_eps_p) {
    if (!(k_eps_p >= 0)) throw FlexError("pv " + pv.id + ": tightening coefficient must be >= 0");
    if (!(pv.s_rating > 0)) throw FlexError("pv " + pv.id + ": rating must be positive");
    PvRegion r;
    r.s = pv.s_rating;
    r.p_up = std::clamp(pv.forecast_mu - k_eps_p * pv.forecast_sigma, 0.0, pv.s_rating);
    if (pv.q_mode == QMode::Ieee1547) r.q_cap = 0.44 * pv.s_rating;
    r.pf_tan = pv.pf_tan;
    return r;
}

struct Disk {
    double s = 0.0;
    bool contains(double p, double q, double tol = 1e-9) const {
        return p * p + q * q <= s * s + tol;
    }
};

inline Disk bess_region(const BessUnit& b) {
    if (!(b.s_rating > 0)) throw FlexError("bess " + b.id + ": rating must be positive");
    if (b.p_sched * b.p_sched + b.q_sched * b.q_sched > b.s_rating * b.s_rating * (1 + 1e-12))
        throw FlexError("bess " + b.id + ": schedule outside inverter rating");
    return {b.s_rating};
}

/// Per-device adjustments, in feeder-consumption orientation (a PV
/// curtailment is a positive delta-P because it raises net consumption).
/// Controllable loads carry only a P delta; their Q follows the power
/// factor coupling.
struct FleetDeltas {
    Vec cl_dp;    // n_cl
    Mat pv_dpq;   // n_pv x 2
    Mat bess_dpq; // n_bess x 2
};

/// Aggregate device-level adjustments into the feeder-level pair
/// (dP_F, dQ_F).
inline std::pair<double, double> fleet_delta_aggregate(const DerFleet& fleet,
                                                       const FleetDeltas& d) {
    if (d.cl_dp.size() != fleet.n_cl() || d.pv_dpq.rows() != fleet.n_pv() ||
        d.bess_dpq.rows() != fleet.n_bess())
        throw FlexError("fleet delta dimensions do not match the fleet");
    double dp = 0.0, dq = 0.0;
    for (int i = 0; i < fleet.n_cl(); ++i) {
        dp += d.cl_dp[i];
        dq += d.cl_dp[i] * fleet.loads[i].tan_theta;
    }
    for (int j = 0; j < fleet.n_pv(); ++j) {
        dp += d.pv_dpq(j, 0);
        dq += d.pv_dpq(j, 1);
    }
    for (int k = 0; k < fleet.n_bess(); ++k) {
        dp += d.bess_dpq(k, 0);
        dq += d.bess_dpq(k, 1);
    }
    return {dp, dq};
}

}  // namespace flexregion::devices
