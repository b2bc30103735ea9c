#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "flexregion/common.hpp"

namespace flexregion::socp {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// One second-order cone block: ||F x + g||_2 <= d'x + h.
struct SocBlock {
    Mat f;
    Vec g;
    Vec d;
    double h = 0.0;
};

/// Linear objective (maximize c'x) over linear equalities, linear
/// inequalities, second-order cones and variable bounds.
struct ConicProblem {
    Vec c;
    Mat a_eq;
    Vec b_eq;
    Mat a_in;
    Vec b_in;
    std::vector<SocBlock> socs;
    Vec lb;  // may be -inf
    Vec ub;  // may be +inf

    int n() const { return static_cast<int>(c.size()); }

    static ConicProblem sized(int n) {
        ConicProblem p;
        p.c = Vec::Zero(n);
        p.a_eq.resize(0, n);
        p.b_eq.resize(0);
        p.a_in.resize(0, n);
        p.b_in.resize(0);
        p.lb = Vec::Constant(n, -kInf);
        p.ub = Vec::Constant(n, kInf);
        return p;
    }

    void validate() const {
        if (n() < 1) throw FlexError("conic problem needs at least one variable");
        if (a_eq.rows() != b_eq.size() || (a_eq.rows() > 0 && a_eq.cols() != n()))
            throw FlexError("equality block dimensions inconsistent");
        if (a_in.rows() != b_in.size() || (a_in.rows() > 0 && a_in.cols() != n()))
            throw FlexError("inequality block dimensions inconsistent");
        if (lb.size() != n() || ub.size() != n())
            throw FlexError("bound vectors must match the variable count");
        for (int i = 0; i < n(); ++i)
            if (lb[i] > ub[i]) throw FlexError("variable bound lb > ub");
        for (const SocBlock& s : socs)
            if (s.f.cols() != n() || s.g.size() != s.f.rows() || s.d.size() != n())
                throw FlexError("soc block dimensions inconsistent");
    }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter };

inline std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        default: return "max_iter";
    }
}

struct IterInfo {
    double primal_obj = 0.0;  // minimization orientation
    double dual_obj = 0.0;
    double gap = 0.0;
    double mu = 0.0;
    double kappa_over_tau = 0.0;
    double r4_over_tau = 0.0;
};

struct Solution {
    SolveStatus status = SolveStatus::MaxIter;
    Vec x;
    double objective = 0.0;  // c'x in the maximize orientation
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double duality_gap = 0.0;
    int iterations = 0;
    std::vector<IterInfo> trace;
};

namespace ipm_detail {

// Cone layout: an LP block of dimension n_lp followed by second-order cone
// blocks. Vectors s, z live in this product cone.
struct ConeSpec {
    int n_lp = 0;
    std::vector<int> soc;  // dimensions, each >= 1

    int dim() const {
        int d = n_lp;
        for (int q : soc) d += q;
        return d;
    }
    // Each LP coordinate and each SOC block contributes one to the
    // complementarity degree.
    int degree() const { return n_lp + static_cast<int>(soc.size()); }
};

/// Nesterov-Todd scaling per cone, stored in factored form. For the LP part
/// W = diag(w_lp); for each SOC block W = eta (2 wbar wbar' - J)^(1/2) held as
/// (eta, wbar) with wbar_0^2 - ||wbar_1||^2 = 1.
struct Scaling {
    Vec w_lp;
    std::vector<double> eta;
    std::vector<Vec> wbar;
};

inline double soc_residual(const Vec& u, int off, int q) {
    // u_0 - ||u_1|| for the block starting at `off`.
    double nrm = 0.0;
    for (int i = 1; i < q; ++i) nrm += u[off + i] * u[off + i];
    return u[off] - std::sqrt(nrm);
}

/// Smallest margin of u to the cone boundary (positive when interior).
inline double cone_margin(const ConeSpec& k, const Vec& u) {
    double m = kInf;
    for (int i = 0; i < k.n_lp; ++i) m = std::min(m, u[i]);
    int off = k.n_lp;
    for (int q : k.soc) {
        m = std::min(m, soc_residual(u, off, q));
        off += q;
    }
    return m;
}

/// Shift u into the cone interior: u + a*e with e the cone identity.
inline void bump_into_cone(const ConeSpec& k, Vec& u) {
    const double m = cone_margin(k, u);
    if (m > 1e-8) return;
    const double a = -m + 1.0;
    for (int i = 0; i < k.n_lp; ++i) u[i] += a;
    int off = k.n_lp;
    for (int q : k.soc) {
        u[off] += a;
        off += q;
    }
}

inline Scaling compute_scaling(const ConeSpec& k, const Vec& s, const Vec& z) {
    Scaling w;
    w.w_lp.resize(k.n_lp);
    for (int i = 0; i < k.n_lp; ++i) w.w_lp[i] = std::sqrt(s[i] / z[i]);
    int off = k.n_lp;
    for (int q : k.soc) {
        const auto jdet = [&](const Vec& u) {
            double nrm = 0.0;
            for (int i = 1; i < q; ++i) nrm += u[off + i] * u[off + i];
            return u[off] * u[off] - nrm;
        };
        const double js = jdet(s), jz = jdet(z);
        if (!(js > 0) || !(jz > 0)) throw FlexError("iterate left the cone interior");
        Vec sb(q), zb(q);
        for (int i = 0; i < q; ++i) {
            sb[i] = s[off + i] / std::sqrt(js);
            zb[i] = z[off + i] / std::sqrt(jz);
        }
        const double gamma = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
        Vec wb(q);
        wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
        for (int i = 1; i < q; ++i) wb[i] = (sb[i] - zb[i]) / (2.0 * gamma);
        w.eta.push_back(std::pow(js / jz, 0.25));
        w.wbar.push_back(wb);
        off += q;
    }
    return w;
}

/// Apply W (invert=false) or W^-1 (invert=true) to u.
inline Vec apply_scaling(const ConeSpec& k, const Scaling& w, const Vec& u, bool invert) {
    Vec out(u.size());
    for (int i = 0; i < k.n_lp; ++i) out[i] = invert ? u[i] / w.w_lp[i] : u[i] * w.w_lp[i];
    int off = k.n_lp;
    for (std::size_t b = 0; b < k.soc.size(); ++b) {
        const int q = k.soc[b];
        const Vec& wb = w.wbar[b];
        const double eta = invert ? 1.0 / w.eta[b] : w.eta[b];
        double dot1 = 0.0;
        for (int i = 1; i < q; ++i) dot1 += wb[i] * u[off + i];
        const double u0 = u[off];
        if (!invert) {
            out[off] = eta * (wb[0] * u0 + dot1);
            for (int i = 1; i < q; ++i)
                out[off + i] = eta * (u0 * wb[i] + u[off + i] + wb[i] * dot1 / (1.0 + wb[0]));
        } else {
            out[off] = eta * (wb[0] * u0 - dot1);
            for (int i = 1; i < q; ++i)
                out[off + i] = eta * (-u0 * wb[i] + u[off + i] + wb[i] * dot1 / (1.0 + wb[0]));
        }
        off += q;
    }
    return out;
}

/// Jordan product u o v per cone; for LP elementwise, for SOC
/// (u'v, u0 v1 + v0 u1).
inline Vec jordan_prod(const ConeSpec& k, const Vec& u, const Vec& v) {
    Vec out(u.size());
    for (int i = 0; i < k.n_lp; ++i) out[i] = u[i] * v[i];
    int off = k.n_lp;
    for (int q : k.soc) {
        double dot = 0.0;
        for (int i = 0; i < q; ++i) dot += u[off + i] * v[off + i];
        out[off] = dot;
        for (int i = 1; i < q; ++i) out[off + i] = u[off] * v[off + i] + v[off] * u[off + i];
        off += q;
    }
    return out;
}

/// Solve lambda o x = d for x.
inline Vec jordan_div(const ConeSpec& k, const Vec& lambda, const Vec& d) {
    Vec out(d.size());
    for (int i = 0; i < k.n_lp; ++i) out[i] = d[i] / lambda[i];
    int off = k.n_lp;
    for (int q : k.soc) {
        double jl = lambda[off] * lambda[off];
        double ld = lambda[off] * d[off];
        for (int i = 1; i < q; ++i) {
            jl -= lambda[off + i] * lambda[off + i];
            ld -= lambda[off + i] * d[off + i];
        }
        const double x0 = ld / jl;
        out[off] = x0;
        for (int i = 1; i < q; ++i) out[off + i] = (d[off + i] - x0 * lambda[off + i]) / lambda[off];
        off += q;
    }
    return out;
}

/// Cone identity element e (ones on LP, (1,0,..) per SOC block).
inline Vec cone_identity(const ConeSpec& k) {
    Vec e = Vec::Zero(k.dim());
    for (int i = 0; i < k.n_lp; ++i) e[i] = 1.0;
    int off = k.n_lp;
    for (int q : k.soc) {
        e[off] = 1.0;
        off += q;
    }
    return e;
}

/// Largest step a in [0, cap] with u + a du staying in the cone.
inline double max_step(const ConeSpec& k, const Vec& u, const Vec& du, double cap) {
    double a = cap;
    for (int i = 0; i < k.n_lp; ++i)
        if (du[i] < 0) a = std::min(a, -u[i] / du[i]);
    int off = k.n_lp;
    for (int q : k.soc) {
        // J(u + a du) >= 0 and (u + a du)_0 >= 0.
        double ju = u[off] * u[off], jd = du[off] * du[off], jud = u[off] * du[off];
        for (int i = 1; i < q; ++i) {
            ju -= u[off + i] * u[off + i];
            jd -= du[off + i] * du[off + i];
            jud -= u[off + i] * du[off + i];
        }
        // Quadratic jd a^2 + 2 jud a + ju = 0; find the smallest positive root.
        double root = kInf;
        const double disc = jud * jud - jd * ju;
        if (std::abs(jd) < 1e-300) {
            if (jud < 0) root = -ju / (2.0 * jud);
        } else if (disc >= 0) {
            const double sq = std::sqrt(disc);
            const double r1 = (-jud - sq) / jd;
            const double r2 = (-jud + sq) / jd;
            for (double r : {std::min(r1, r2), std::max(r1, r2)})
                if (r > 0) {
                    root = r;
                    break;
                }
        }
        if (root < a) a = root;
        if (du[off] < 0) a = std::min(a, -u[off] / du[off]);
        off += q;
    }
    return std::max(a, 0.0);
}

/// Reduced KKT solver for
///   [ 0   A'  G'  ] [dx]   [bx]
///   [ A   0   0   ] [dy] = [by]
///   [ G   0  -W^2 ] [dz]   [bz]
/// via the normal equations H = G' W^-2 G (+ regularization), followed by one
/// round of iterative refinement on the full system.
class KktSolver {
  public:
    KktSolver(const Mat& a, const Mat& g, const ConeSpec& cone, double reg = 1e-10)
        : a_(a), g_(g), cone_(cone), reg_(reg) {}

    void factor(const Scaling& w) {
        w_ = &w;
        gs_ = g_;  // W^-1 G, assembled row-block-wise
        for (int c = 0; c < g_.cols(); ++c) gs_.col(c) = apply_scaling(cone_, w, g_.col(c), true);
        const int n = static_cast<int>(g_.cols());
        Mat h = gs_.transpose() * gs_;
        h.diagonal().array() += reg_;
        h_llt_.compute(h);
        if (h_llt_.info() != Eigen::Success) {
            // Fall back to a heavier diagonal shift.
            h.diagonal().array() += 1e-6;
            h_llt_.compute(h);
            if (h_llt_.info() != Eigen::Success)
                throw FlexError("KKT system could not be factorized");
        }
        if (a_.rows() > 0) {
            Mat ah = a_ * h_llt_.solve(a_.transpose());
            ah.diagonal().array() += reg_;
            m_llt_.compute(ah);
            if (m_llt_.info() != Eigen::Success)
                throw FlexError("equality Schur complement could not be factorized");
        }
        (void)n;
    }

    void solve(const Vec& bx, const Vec& by, const Vec& bz, Vec& dx, Vec& dy, Vec& dz) const {
        solve_once(bx, by, bz, dx, dy, dz);
        // One refinement round against the unregularized system.
        Vec rx = bx - a_.transpose() * dy - g_.transpose() * dz;
        Vec ry = by - a_ * dx;
        Vec rz = bz - g_ * dx + apply_scaling(cone_, *w_, apply_scaling(cone_, *w_, dz, false), false);
        Vec ex, ey, ez;
        solve_once(rx, ry, rz, ex, ey, ez);
        dx += ex;
        dy += ey;
        dz += ez;
    }

  private:
    void solve_once(const Vec& bx, const Vec& by, const Vec& bz, Vec& dx, Vec& dy,
                    Vec& dz) const {
        const Vec bz_s = apply_scaling(cone_, *w_, bz, true);  // W^-1 bz
        const Vec f = bx + gs_.transpose() * bz_s;             // bx + G' W^-2 bz
        if (a_.rows() > 0) {
            dy = m_llt_.solve(a_ * h_llt_.solve(f) - by);
            dx = h_llt_.solve(f - a_.transpose() * dy);
        } else {
            dy.resize(0);
            dx = h_llt_.solve(f);
        }
        dz = apply_scaling(cone_, *w_, gs_ * dx - bz_s, true);  // W^-2 (G dx - bz)
    }

    const Mat& a_;
    const Mat& g_;
    ConeSpec cone_;
    double reg_;
    const Scaling* w_ = nullptr;
    Mat gs_;
    Eigen::LLT<Mat> h_llt_;
    Eigen::LLT<Mat> m_llt_;
};

/// Standard-form conic program: min c'x s.t. Ax = b, Gx + s = h, s in K.
struct StandardForm {
    Vec c;
    Mat a;
    Vec b;
    Mat g;
    Vec h;
    ConeSpec cone;
    std::vector<std::string> notes;
};

}  // namespace ipm_detail

/// Homogeneous self-dual primal-dual interior-point solver with
/// Nesterov-Todd scaling and a Mehrotra predictor-corrector step. Small
/// dense problems only; one KKT factorization per iteration, two solves.
class InteriorPointSolver {
  public:
    explicit InteriorPointSolver(double tol = 1e-8, int max_iter = 100)
        : tol_(tol), max_iter_(max_iter) {}

    Solution solve(const ConicProblem& prob) const {
        prob.validate();

        // Presolve: substitute fixed variables out of the problem.
        std::vector<int> keep;
        std::vector<double> fixed(prob.n(), 0.0);
        for (int i = 0; i < prob.n(); ++i) {
            if (prob.lb[i] == prob.ub[i])
                fixed[i] = prob.lb[i];
            else
                keep.push_back(i);
        }
        if (keep.empty()) return solve_all_fixed(prob, fixed);

        const ipm_detail::StandardForm sf = to_standard_form(prob, keep, fixed);
        Solution sol = run(sf);
        // Restore the full variable vector and the maximize orientation.
        Vec x_full(prob.n());
        for (int i = 0; i < prob.n(); ++i) x_full[i] = fixed[i];
        if (sol.x.size() == static_cast<int>(keep.size()))
            for (std::size_t j = 0; j < keep.size(); ++j) x_full[keep[j]] = sol.x[j];
        sol.x = x_full;
        sol.objective = prob.c.dot(sol.x);
        return sol;
    }

  private:
    double tol_;
    int max_iter_;

    static ipm_detail::StandardForm to_standard_form(const ConicProblem& prob,
                                                     const std::vector<int>& keep,
                                                     const std::vector<double>& fixed) {
        using namespace ipm_detail;
        const int n = static_cast<int>(keep.size());
        Vec x_fix = Vec::Zero(prob.n());
        for (int i = 0; i < prob.n(); ++i)
            if (prob.lb[i] == prob.ub[i]) x_fix[i] = fixed[i];

        const auto reduce_row = [&](const Eigen::RowVectorXd& row) {
            Eigen::RowVectorXd out(n);
            for (int j = 0; j < n; ++j) out[j] = row[keep[j]];
            return out;
        };

        StandardForm sf;
        sf.c.resize(n);
        for (int j = 0; j < n; ++j) sf.c[j] = -prob.c[keep[j]];  // minimize -c'x

        // Equalities, dropping rows that became empty.
        std::vector<Eigen::RowVectorXd> eq_rows;
        std::vector<double> eq_rhs;
        for (int r = 0; r < prob.a_eq.rows(); ++r) {
            Eigen::RowVectorXd row = reduce_row(prob.a_eq.row(r));
            const double rhs = prob.b_eq[r] - prob.a_eq.row(r).dot(x_fix);
            if (row.lpNorm<Eigen::Infinity>() < 1e-14) {
                if (std::abs(rhs) > 1e-9) sf.notes.push_back("empty equality row is infeasible");
                continue;
            }
            eq_rows.push_back(row);
            eq_rhs.push_back(rhs);
        }
        sf.a.resize(static_cast<int>(eq_rows.size()), n);
        sf.b.resize(static_cast<int>(eq_rows.size()));
        for (std::size_t r = 0; r < eq_rows.size(); ++r) {
            sf.a.row(static_cast<int>(r)) = eq_rows[r];
            sf.b[static_cast<int>(r)] = eq_rhs[r];
        }

        // LP cone: inequality rows plus finite bounds.
        std::vector<Eigen::RowVectorXd> g_rows;
        std::vector<double> h_vals;
        for (int r = 0; r < prob.a_in.rows(); ++r) {
            Eigen::RowVectorXd row = reduce_row(prob.a_in.row(r));
            const double rhs = prob.b_in[r] - prob.a_in.row(r).dot(x_fix);
            if (row.lpNorm<Eigen::Infinity>() < 1e-14) {
                if (rhs < -1e-9) sf.notes.push_back("empty inequality row is infeasible");
                continue;
            }
            g_rows.push_back(row);
            h_vals.push_back(rhs);
        }
        for (int j = 0; j < n; ++j) {
            const int i = keep[j];
            if (prob.ub[i] < kInf) {
                Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
                row[j] = 1.0;
                g_rows.push_back(row);
                h_vals.push_back(prob.ub[i]);
            }
            if (prob.lb[i] > -kInf) {
                Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
                row[j] = -1.0;
                g_rows.push_back(row);
                h_vals.push_back(-prob.lb[i]);
            }
        }
        sf.cone.n_lp = static_cast<int>(g_rows.size());

        // SOC blocks: s = (d'x + h; F x + g) in Q.
        int soc_dim_total = 0;
        for (const SocBlock& s : prob.socs) soc_dim_total += 1 + static_cast<int>(s.f.rows());
        sf.g.resize(sf.cone.n_lp + soc_dim_total, n);
        sf.h.resize(sf.cone.n_lp + soc_dim_total);
        for (int r = 0; r < sf.cone.n_lp; ++r) {
            sf.g.row(r) = g_rows[r];
            sf.h[r] = h_vals[r];
        }
        int off = sf.cone.n_lp;
        for (const SocBlock& s : prob.socs) {
            const int q = 1 + static_cast<int>(s.f.rows());
            sf.cone.soc.push_back(q);
            Eigen::RowVectorXd drow = reduce_row(s.d.transpose());
            sf.g.row(off) = -drow;
            sf.h[off] = s.h + s.d.dot(x_fix);
            for (int r = 0; r < s.f.rows(); ++r) {
                sf.g.row(off + 1 + r) = -reduce_row(s.f.row(r));
                sf.h[off + 1 + r] = s.g[r] + s.f.row(r).dot(x_fix);
            }
            off += q;
        }
        return sf;
    }

    Solution solve_all_fixed(const ConicProblem& prob, const std::vector<double>& fixed) const {
        Solution sol;
        sol.x.resize(prob.n());
        for (int i = 0; i < prob.n(); ++i) sol.x[i] = fixed[i];
        sol.objective = prob.c.dot(sol.x);
        // Feasibility check of the fully fixed point.
        bool ok = true;
        if (prob.a_eq.rows() > 0)
            ok = ok && ((prob.a_eq * sol.x - prob.b_eq).lpNorm<Eigen::Infinity>() <= 1e-8);
        if (prob.a_in.rows() > 0)
            ok = ok && ((prob.a_in * sol.x - prob.b_in).maxCoeff() <= 1e-8);
        for (const SocBlock& s : prob.socs)
            ok = ok && ((s.f * sol.x + s.g).norm() <= s.d.dot(sol.x) + s.h + 1e-8);
        sol.status = ok ? SolveStatus::Optimal : SolveStatus::Infeasible;
        return sol;
    }

    Solution run(const ipm_detail::StandardForm& sf) const {
        using namespace ipm_detail;
        const int n = static_cast<int>(sf.c.size());
        const int p = static_cast<int>(sf.a.rows());
        const int m = static_cast<int>(sf.g.rows());
        Solution sol;
        for (const std::string& note : sf.notes)
            if (note.find("infeasible") != std::string::npos) {
                sol.status = SolveStatus::Infeasible;
                return sol;
            }
        if (m == 0) return solve_unconstrained(sf);

        const ConeSpec& cone = sf.cone;
        KktSolver kkt(sf.a, sf.g, cone);

        // Initial point from two least-squares style solves with W = I.
        Scaling w_id;
        w_id.w_lp = Vec::Ones(cone.n_lp);
        for (int q : cone.soc) {
            w_id.eta.push_back(1.0);
            Vec wb = Vec::Zero(q);
            wb[0] = 1.0;
            w_id.wbar.push_back(wb);
        }
        kkt.factor(w_id);
        Vec x, y, z, s;
        {
            Vec dx, dy, dz;
            kkt.solve(Vec::Zero(n), sf.b, sf.h, dx, dy, dz);
            x = dx;
            s = -(dz);  // s = -(W^-2)(Gx - h) = h - Gx at W=I
            bump_into_cone(cone, s);
            kkt.solve(-sf.c, Vec::Zero(p), Vec::Zero(m), dx, dy, dz);
            y = dy;
            z = dz;
            bump_into_cone(cone, z);
        }
        double tau = 1.0, kappa = 1.0;

        const double b_scale = std::max(1.0, sf.b.size() ? sf.b.lpNorm<Eigen::Infinity>() : 0.0);
        const double h_scale = std::max(1.0, sf.h.lpNorm<Eigen::Infinity>());
        const double c_scale = std::max(1.0, sf.c.lpNorm<Eigen::Infinity>());

        const int degree = cone.degree() + 1;
        Vec best_x = x / tau;
        double best_res = kInf;

        for (int iter = 0; iter < max_iter_; ++iter) {
            // Residuals of the homogeneous embedding.
            const Vec r1 = sf.a.transpose() * y + sf.g.transpose() * z + sf.c * tau;
            const Vec r2 = -(sf.a * x) + sf.b * tau;
            const Vec r3 = -(sf.g * x) + sf.h * tau - s;
            const double r4 = -sf.c.dot(x) - (p ? sf.b.dot(y) : 0.0) - sf.h.dot(z) - kappa;
            const double mu = (s.dot(z) + tau * kappa) / degree;

            // Convergence bookkeeping on tau-normalized quantities.
            const Vec xh = x / tau;
            const Vec sh = s / tau;
            const double pobj = sf.c.dot(xh);
            const double dobj = -(p ? sf.b.dot(y) : 0.0) / tau - sf.h.dot(z) / tau;
            const double pres =
                std::max(p ? (sf.a * xh - sf.b).lpNorm<Eigen::Infinity>() / b_scale : 0.0,
                         (sf.g * xh + sh - sf.h).lpNorm<Eigen::Infinity>() / h_scale);
            const double dres =
                (sf.a.transpose() * (y / tau) + sf.g.transpose() * (z / tau) + sf.c)
                    .lpNorm<Eigen::Infinity>() /
                c_scale;
            const double gap = std::abs(pobj - dobj) / std::max({1.0, std::abs(pobj), std::abs(dobj)});

            IterInfo info;
            info.primal_obj = pobj;
            info.dual_obj = dobj;
            info.gap = gap;
            info.mu = mu;
            info.kappa_over_tau = kappa / tau;
            info.r4_over_tau = r4 / tau;
            sol.trace.push_back(info);

            if (pres + dres < best_res) {
                best_res = pres + dres;
                best_x = xh;
            }
            sol.iterations = iter;
            sol.primal_residual = pres;
            sol.dual_residual = dres;
            sol.duality_gap = gap;
            if (pres < tol_ && dres < tol_ && gap < tol_) {
                sol.status = SolveStatus::Optimal;
                sol.x = xh;
                return sol;
            }
            // Infeasibility certificates from the homogeneous embedding.
            const double by_hz = (p ? sf.b.dot(y) : 0.0) + sf.h.dot(z);
            if (by_hz < -1e-10) {
                const double cert = (sf.a.transpose() * y + sf.g.transpose() * z)
                                        .lpNorm<Eigen::Infinity>() /
                                    (-by_hz) / c_scale;
                if (cert < tol_ && tau < 1e-6 * std::max(1.0, kappa)) {
                    sol.status = SolveStatus::Infeasible;
                    sol.x = best_x;
                    return sol;
                }
            }
            if (sf.c.dot(x) < -1e-10) {
                const double denom = -sf.c.dot(x);
                const double cert = std::max(p ? (sf.a * x).lpNorm<Eigen::Infinity>() : 0.0,
                                             (sf.g * x + s).lpNorm<Eigen::Infinity>()) /
                                    denom / std::max(b_scale, h_scale);
                if (cert < tol_ && tau < 1e-6 * std::max(1.0, kappa)) {
                    sol.status = SolveStatus::Unbounded;
                    sol.x = best_x;
                    return sol;
                }
            }

            // Nesterov-Todd scaling and the shared per-iteration solve.
            Scaling w;
            try {
                w = compute_scaling(cone, s, z);
            } catch (const FlexError&) {
                break;
            }
            const Vec lambda = apply_scaling(cone, w, z, false);
            kkt.factor(w);
            Vec x2, y2, z2;
            kkt.solve(-sf.c, sf.b, sf.h, x2, y2, z2);

            const auto direction = [&](const Vec& ds_rhs, double dkappa_rhs, double rscale,
                                       Vec& dx, Vec& dy, Vec& dz, Vec& ds, double& dtau,
                                       double& dkappa) {
                Vec x1, y1, z1;
                const Vec wlds = apply_scaling(cone, w, jordan_div(cone, lambda, ds_rhs), false);
                kkt.solve(-rscale * r1, rscale * r2, rscale * r3 - wlds, x1, y1, z1);
                const double num = -rscale * r4 + sf.c.dot(x1) + (p ? sf.b.dot(y1) : 0.0) +
                                   sf.h.dot(z1) + dkappa_rhs / tau;
                const double den = -sf.c.dot(x2) - (p ? sf.b.dot(y2) : 0.0) - sf.h.dot(z2) +
                                   kappa / tau;
                dtau = std::abs(den) > 1e-300 ? num / den : 0.0;
                dx = x1 + dtau * x2;
                dy = y1 + dtau * y2;
                dz = z1 + dtau * z2;
                ds = wlds - apply_scaling(cone, w, apply_scaling(cone, w, dz, false), false);
                dkappa = (dkappa_rhs - kappa * dtau) / tau;
            };

            // Predictor (affine) direction.
            Vec dxa, dya, dza, dsa;
            double dtaua, dkappaa;
            const Vec ll = jordan_prod(cone, lambda, lambda);
            direction(-ll, -tau * kappa, 1.0, dxa, dya, dza, dsa, dtaua, dkappaa);

            double alpha_aff = std::min(
                ipm_detail::max_step(cone, s, dsa, 1.0), ipm_detail::max_step(cone, z, dza, 1.0));
            if (dtaua < 0) alpha_aff = std::min(alpha_aff, -tau / dtaua);
            if (dkappaa < 0) alpha_aff = std::min(alpha_aff, -kappa / dkappaa);
            const double sigma = std::pow(1.0 - std::min(alpha_aff, 1.0), 3.0);

            // Corrector (combined) direction.
            const Vec corr = jordan_prod(cone, apply_scaling(cone, w, dsa, true),
                                         apply_scaling(cone, w, dza, false));
            Vec ds_rhs = -ll - corr;
            const Vec e = cone_identity(cone);
            ds_rhs += (sigma * mu) * e;
            const double dkap_rhs = -tau * kappa - dtaua * dkappaa + sigma * mu;
            Vec dx, dy, dz, ds;
            double dtau, dkappa;
            direction(ds_rhs, dkap_rhs, 1.0 - sigma, dx, dy, dz, ds, dtau, dkappa);

            double alpha = std::min(ipm_detail::max_step(cone, s, ds, 1.0 / 0.99),
                                    ipm_detail::max_step(cone, z, dz, 1.0 / 0.99));
            if (dtau < 0) alpha = std::min(alpha, -tau / dtau);
            if (dkappa < 0) alpha = std::min(alpha, -kappa / dkappa);
            alpha = std::min(0.99 * alpha, 1.0);
            if (!(alpha > 1e-14)) break;

            x += alpha * dx;
            y += alpha * dy;
            z += alpha * dz;
            s += alpha * ds;
            tau += alpha * dtau;
            kappa += alpha * dkappa;
            if (!(tau > 1e-300)) break;
        }
        sol.status = SolveStatus::MaxIter;
        sol.x = best_x;
        return sol;
    }

    /// No cone constraints at all: either an unconstrained LP or equality
    /// constrained; detect unboundedness via the projected gradient.
    Solution solve_unconstrained(const ipm_detail::StandardForm& sf) const {
        Solution sol;
        const int n = static_cast<int>(sf.c.size());
        if (sf.a.rows() == 0) {
            sol.x = Vec::Zero(n);
            sol.status = sf.c.lpNorm<Eigen::Infinity>() < tol_ ? SolveStatus::Optimal
                                                               : SolveStatus::Unbounded;
            return sol;
        }
        // Minimum-norm solution of Ax = b, then check optimality of c over
        // the affine subspace.
        const Mat& a = sf.a;
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(a);
        sol.x = cod.solve(sf.b);
        Eigen::CompleteOrthogonalDecomposition<Mat> cod_t(a.transpose());
        const Vec yls = cod_t.solve(sf.c);
        const double resid = (a.transpose() * yls - sf.c).lpNorm<Eigen::Infinity>();
        sol.status = resid < 1e-8 ? SolveStatus::Optimal : SolveStatus::Unbounded;
        if ((a * sol.x - sf.b).lpNorm<Eigen::Infinity>() > 1e-8)
            sol.status = SolveStatus::Infeasible;
        return sol;
    }
};

/// Solve `p` (maximize c'x). Optimal solutions satisfy KKT residuals and the
/// relative duality gap below `tol`.
inline Solution solve(const ConicProblem& p, double tol = 1e-8, int max_iter = 100) {
    InteriorPointSolver solver(tol, max_iter);
    return solver.solve(p);
}

}  // namespace flexregion::socp
