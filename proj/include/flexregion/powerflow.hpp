#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "flexregion/netmodel.hpp"

namespace flexregion::powerflow {

using netmodel::NetworkModel;
using netmodel::TerminalLayout;

/// Stacked real-then-reactive single-phase injections, per-unit, over the
/// existing non-slack terminals (wye) and delta pairs. Consumption is a
/// negative injection.
struct InjectionVector {
    Vec x_y;      // [p; q] over load terminals
    Vec x_delta;  // [p; q] over delta pairs

    static InjectionVector zeros(const TerminalLayout& lay) {
        InjectionVector v;
        v.x_y = Vec::Zero(2 * lay.n_load());
        v.x_delta = Vec::Zero(2 * lay.n_delta());
        return v;
    }
    int n_y() const { return static_cast<int>(x_y.size()) / 2; }
    int n_delta() const { return static_cast<int>(x_delta.size()) / 2; }

    void add_y(int load_term, double p, double q) {
        x_y[load_term] += p;
        x_y[n_y() + load_term] += q;
    }
    void add_delta(int pair, double p, double q) {
        x_delta[pair] += p;
        x_delta[n_delta() + pair] += q;
    }
    Complex s_y(int load_term) const { return {x_y[load_term], x_y[n_y() + load_term]}; }
    Complex s_delta(int pair) const { return {x_delta[pair], x_delta[n_delta() + pair]}; }

    /// Concatenated [x_y; x_delta] as one real vector.
    Vec stacked() const {
        Vec out(x_y.size() + x_delta.size());
        out << x_y, x_delta;
        return out;
    }
};

struct PowerFlowResult {
    CVec v_all;  // all terminals, slack included
    int iterations = 0;
    double mismatch = 0.0;
    std::vector<double> mismatch_history;
};

/// Fixed-point multi-phase power flow. The slack bus holds nominal voltage
/// (1 p.u., phases at 0/-120/+120 degrees); constant-power injections are
/// mapped to currents and the reduced admittance solve is iterated:
///
///   V <- w + Y_LL^-1 [ conj(s_Y)/conj(V) + H^T conj(s_D)/conj(H V) ]
///
/// Y_LL is factored once at construction and reused across iterations,
/// sensitivity columns and repeated solves on the same network.
class FixedPointSolver {
  public:
    explicit FixedPointSolver(const NetworkModel& net)
        : net_(net), lay_(TerminalLayout::build(net)) {
        const std::vector<std::string> diags = netmodel::validate_network(net);
        if (!diags.empty()) throw FlexError("invalid network: " + diags.front());

        y_ = netmodel::build_admittance(net);
        const int nl = lay_.n_load();
        const int ns = static_cast<int>(lay_.slack_terminals.size());

        y_ll_.resize(nl, nl);
        y_l0_.resize(nl, ns);
        for (int i = 0; i < nl; ++i) {
            for (int j = 0; j < nl; ++j)
                y_ll_(i, j) = y_(lay_.load_terminals[i], lay_.load_terminals[j]);
            for (int j = 0; j < ns; ++j)
                y_l0_(i, j) = y_(lay_.load_terminals[i], lay_.slack_terminals[j]);
        }
        y_ll_lu_.compute(y_ll_);
        if (y_ll_lu_.rcond() < 1e-14)
            throw FlexError("reduced admittance matrix is numerically singular");

        v_slack_.resize(ns);
        for (int j = 0; j < ns; ++j)
            v_slack_[j] = nominal_phase_voltage(lay_.terminals[lay_.slack_terminals[j]].phase);
        w_ = y_ll_lu_.solve((-y_l0_ * v_slack_).eval());

        // Delta pair difference operator over load terminals.
        h_ = CMat::Zero(lay_.n_delta(), nl);
        for (int d = 0; d < lay_.n_delta(); ++d) {
            const auto& pr = lay_.delta_pairs[d];
            h_(d, lay_.load_index(pr.bus, pr.lead)) = 1.0;
            h_(d, lay_.load_index(pr.bus, pr.lag)) = -1.0;
        }

        // Line current map over all terminals: I = B V, from-side convention.
        b_rows_ = CMat::Zero(lay_.n_line_terms(), lay_.n_terminals());
        int row = 0;
        for (const netmodel::Line& line : net.lines) {
            const CMat yb = netmodel::line_admittance_pu(net, line);
            const int f = net.bus_index(line.from_bus);
            const int t = net.bus_index(line.to_bus);
            const std::vector<Phase> ph = line.phases.list();
            for (int i = 0; i < static_cast<int>(ph.size()); ++i, ++row) {
                for (int j = 0; j < static_cast<int>(ph.size()); ++j) {
                    b_rows_(row, lay_.terminal_index(f, ph[j])) += yb(i, j);
                    b_rows_(row, lay_.terminal_index(t, ph[j])) -= yb(i, j);
                }
            }
        }
    }

    const NetworkModel& net() const { return net_; }
    const TerminalLayout& layout() const { return lay_; }
    const CVec& no_load_voltage() const { return w_; }
    const CVec& slack_voltage() const { return v_slack_; }

    static Complex nominal_phase_voltage(Phase p) {
        constexpr double deg120 = 2.0 * std::numbers::pi / 3.0;
        switch (p) {
            case Phase::A: return {1.0, 0.0};
            case Phase::B: return std::polar(1.0, -deg120);
            default: return std::polar(1.0, deg120);
        }
    }

    PowerFlowResult solve(const InjectionVector& inj, double tol = 1e-8,
                          int max_iter = 50) const {
        check_dims(inj);
        if (!(tol > 0)) throw FlexError("power flow tolerance must be positive");

        CVec v = w_;
        PowerFlowResult res;
        double mismatch = 0.0;
        for (int it = 1; it <= max_iter; ++it) {
            const CVec v_next = w_ + y_ll_lu_.solve(injection_current(inj, v)).eval();
            v = v_next;
            mismatch = power_mismatch(inj, v);
            res.mismatch_history.push_back(mismatch);
            if (mismatch < tol) {
                res.iterations = it;
                res.mismatch = mismatch;
                res.v_all = expand(v);
                return res;
            }
            if (!std::isfinite(mismatch)) break;
        }
        throw ConvergenceError(
            "power flow did not converge (last mismatch " + std::to_string(mismatch) + " p.u.)",
            mismatch);
    }

    /// One application of the fixed-point map at frozen voltages `v_load`.
    CVec fixed_point_map(const InjectionVector& inj, const CVec& v_load) const {
        return w_ + y_ll_lu_.solve(injection_current(inj, v_load)).eval();
    }

    /// Branch currents from a full terminal voltage vector.
    CVec branch_currents(const CVec& v_all) const { return b_rows_ * v_all; }

    /// Complex feeder-head power, consumption-positive, per-unit on the
    /// single-phase base, summed over the slack phases.
    Complex head_power(const CVec& v_all) const {
        Complex s = 0.0;
        for (int j = 0; j < static_cast<int>(lay_.slack_terminals.size()); ++j) {
            const int t = lay_.slack_terminals[j];
            const Complex i_inj = y_.row(t) * v_all;
            s += v_all[t] * std::conj(i_inj);
        }
        return s;
    }

    /// Series losses: head power plus the (signed) sum of all injections.
    Complex losses(const InjectionVector& inj, const CVec& v_all) const {
        Complex s_inj = 0.0;
        for (int i = 0; i < layout().n_load(); ++i) s_inj += inj.s_y(i);
        for (int d = 0; d < layout().n_delta(); ++d) s_inj += inj.s_delta(d);
        return head_power(v_all) + s_inj;
    }

    CVec expand(const CVec& v_load) const {
        CVec v(lay_.n_terminals());
        for (int j = 0; j < static_cast<int>(lay_.slack_terminals.size()); ++j)
            v[lay_.slack_terminals[j]] = v_slack_[j];
        for (int i = 0; i < lay_.n_load(); ++i) v[lay_.load_terminals[i]] = v_load[i];
        return v;
    }
    CVec restrict_load(const CVec& v_all) const {
        CVec v(lay_.n_load());
        for (int i = 0; i < lay_.n_load(); ++i) v[i] = v_all[lay_.load_terminals[i]];
        return v;
    }

    const Eigen::PartialPivLU<CMat>& y_ll_factor() const { return y_ll_lu_; }
    const CMat& delta_op() const { return h_; }
    const CMat& current_rows() const { return b_rows_; }
    const CMat& admittance() const { return y_; }

  private:
    void check_dims(const InjectionVector& inj) const {
        if (inj.x_y.size() != 2 * lay_.n_load() || inj.x_delta.size() != 2 * lay_.n_delta())
            throw FlexError("injection vector dimension mismatch");
    }

    CVec injection_current(const InjectionVector& inj, const CVec& v_load) const {
        CVec i = CVec::Zero(lay_.n_load());
        for (int t = 0; t < lay_.n_load(); ++t)
            i[t] += std::conj(inj.s_y(t)) / std::conj(v_load[t]);
        if (lay_.n_delta() > 0) {
            const CVec v_pair = h_ * v_load;
            CVec i_pair(lay_.n_delta());
            for (int d = 0; d < lay_.n_delta(); ++d)
                i_pair[d] = std::conj(inj.s_delta(d)) / std::conj(v_pair[d]);
            i += h_.transpose() * i_pair;
        }
        return i;
    }

    /// Max per-terminal power mismatch between specified injections and the
    /// network equations at voltages v_load.
    double power_mismatch(const InjectionVector& inj, const CVec& v_load) const {
        const CVec residual_i =
            y_ll_ * v_load + y_l0_ * v_slack_ - injection_current(inj, v_load);
        double worst = 0.0;
        for (int t = 0; t < lay_.n_load(); ++t)
            worst = std::max(worst, std::abs(v_load[t] * std::conj(residual_i[t])));
        return worst;
    }

    NetworkModel net_;
    TerminalLayout lay_;
    CMat y_, y_ll_, y_l0_;
    Eigen::PartialPivLU<CMat> y_ll_lu_;
    CVec v_slack_, w_;
    CMat h_;       // delta pairs x load terminals
    CMat b_rows_;  // line terms x all terminals
};

/// Affine surrogate V(x) = M_Y x_Y + M_D x_D + alpha, I(x) = N_Y x_Y +
/// N_D x_D + beta built from the fixed-point map at a converged base
/// solution. alpha is the no-load voltage; the model is exact at the base
/// point by construction.
struct SensitivityModel {
    CMat m_y, m_delta;  // load terminals x [p;q] columns
    CVec alpha;         // load terminals
    CMat n_y, n_delta;  // line terms x [p;q] columns
    CVec beta;          // line terms
    InjectionVector base_point;
    CVec base_v;  // load terminals
    CVec base_i;  // line terms

    CVec predict_voltage(const InjectionVector& x) const {
        check(x);
        CVec v = alpha;
        v += m_y * x.x_y;
        if (x.x_delta.size() > 0) v += m_delta * x.x_delta;
        return v;
    }
    CVec predict_current(const InjectionVector& x) const {
        check(x);
        CVec i = beta;
        i += n_y * x.x_y;
        if (x.x_delta.size() > 0) i += n_delta * x.x_delta;
        return i;
    }

  private:
    void check(const InjectionVector& x) const {
        if (x.x_y.size() != m_y.cols() || x.x_delta.size() != m_delta.cols())
            throw FlexError("injection vector does not match sensitivity model dimensions");
    }
};

/// Build the sensitivity model at `base`. The matrices come analytically
/// from the fixed-point map evaluated at the converged base voltages;
/// finite differences are only ever used as a test oracle.
inline SensitivityModel linearize(const FixedPointSolver& solver, const InjectionVector& base,
                                  double tol = 1e-8, int max_iter = 50) {
    const TerminalLayout& lay = solver.layout();
    const PowerFlowResult pf = solver.solve(base, tol, max_iter);
    const CVec v_hat = solver.restrict_load(pf.v_all);

    SensitivityModel m;
    m.base_point = base;
    m.alpha = solver.no_load_voltage();

    const int nl = lay.n_load();
    CMat rhs = CMat::Zero(nl, nl);
    for (int t = 0; t < nl; ++t) rhs(t, t) = 1.0 / std::conj(v_hat[t]);
    const CMat m_p = solver.y_ll_factor().solve(rhs);
    m.m_y.resize(nl, 2 * nl);
    m.m_y << m_p, Complex(0, -1) * m_p;

    const int nd = lay.n_delta();
    m.m_delta.resize(nl, 2 * nd);
    if (nd > 0) {
        const CVec v_pair = solver.delta_op() * v_hat;
        CMat rhs_d = solver.delta_op().transpose();
        for (int d = 0; d < nd; ++d) rhs_d.col(d) /= std::conj(v_pair[d]);
        const CMat m_dp = solver.y_ll_factor().solve(rhs_d);
        m.m_delta << m_dp, Complex(0, -1) * m_dp;
    }

    // Current rows split over slack and load terminal columns.
    const CMat& b = solver.current_rows();
    CMat b_load(lay.n_line_terms(), nl);
    CVec beta_slack = CVec::Zero(lay.n_line_terms());
    for (int i = 0; i < nl; ++i) b_load.col(i) = b.col(lay.load_terminals[i]);
    for (int j = 0; j < static_cast<int>(lay.slack_terminals.size()); ++j)
        beta_slack += b.col(lay.slack_terminals[j]) * solver.slack_voltage()[j];

    m.n_y = b_load * m.m_y;
    m.n_delta = b_load * m.m_delta;
    m.beta = b_load * m.alpha + beta_slack;

    // Base values evaluated through the affine path itself, so that
    // predict_*(base_point) reproduces them bit for bit.
    m.base_v = m.predict_voltage(base);
    m.base_i = m.predict_current(base);
    return m;
}

/// Real affine functionals for |V| per load terminal and |I| per line
/// conductor, over the stacked coordinates [x_y; x_delta]:
///
///   |V_n|(x) ~= Re( conj(V0_n)/|V0_n| * V_n(x) ) = v_const[n] + v_rows.row(n) x
///
/// Exact at the base point. Lines whose base current magnitude falls below
/// `low_current_floor` get flagged; their phase direction is meaningless and
/// callers should fall back to a two-sided bound on the complex current.
struct MagnitudeAffine {
    Mat v_rows;
    Vec v_const;
    Mat i_rows;
    Vec i_const;
    std::vector<char> low_current;  // per line term
    double low_current_floor = 1e-6;

    int n_x() const { return static_cast<int>(v_rows.cols()); }
    double voltage_at(const Vec& x, int n) const { return v_const[n] + v_rows.row(n).dot(x); }
    double current_at(const Vec& x, int l) const { return i_const[l] + i_rows.row(l).dot(x); }
};

inline MagnitudeAffine magnitude_affine(const SensitivityModel& model,
                                        double low_current_floor = 1e-6) {
    const int nl = static_cast<int>(model.base_v.size());
    const int nt = static_cast<int>(model.base_i.size());
    const int nx = static_cast<int>(model.m_y.cols() + model.m_delta.cols());

    MagnitudeAffine out;
    out.low_current_floor = low_current_floor;
    out.v_rows.resize(nl, nx);
    out.v_const.resize(nl);
    for (int n = 0; n < nl; ++n) {
        const double mag = std::abs(model.base_v[n]);
        if (!(mag > 0)) throw FlexError("zero base voltage at load terminal " + std::to_string(n));
        const Complex u = std::conj(model.base_v[n] / mag);
        for (int j = 0; j < model.m_y.cols(); ++j)
            out.v_rows(n, j) = std::real(u * model.m_y(n, j));
        for (int j = 0; j < model.m_delta.cols(); ++j)
            out.v_rows(n, static_cast<int>(model.m_y.cols()) + j) =
                std::real(u * model.m_delta(n, j));
        out.v_const[n] = std::real(u * model.alpha[n]);
    }

    out.i_rows.resize(nt, nx);
    out.i_const.resize(nt);
    out.low_current.assign(nt, 0);
    for (int l = 0; l < nt; ++l) {
        const double mag = std::abs(model.base_i[l]);
        if (mag < low_current_floor) {
            out.low_current[l] = 1;
            // Rows still get a projection along the base direction when one
            // exists; callers flagged this conductor and will not rely on it.
        }
        const Complex u = mag > 0 ? std::conj(model.base_i[l] / mag) : Complex(1.0, 0.0);
        for (int j = 0; j < model.n_y.cols(); ++j)
            out.i_rows(l, j) = std::real(u * model.n_y(l, j));
        for (int j = 0; j < model.n_delta.cols(); ++j)
            out.i_rows(l, static_cast<int>(model.n_y.cols()) + j) =
                std::real(u * model.n_delta(l, j));
        out.i_const[l] = std::real(u * model.beta[l]);
    }
    return out;
}

}  // namespace flexregion::powerflow
