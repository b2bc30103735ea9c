#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "flexregion/powerflow.hpp"

namespace flexregion::uncertainty {

/// Tightening coefficient K = sqrt((1-eps)/eps) for a moment-based chance
/// constraint at risk level eps. Strictly decreasing in eps; K(0.5) = 1.
inline double k_epsilon(double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw FlexError("risk level must lie in (0, 1)");
    return std::sqrt((1.0 - eps) / eps);
}

/// Risk levels for device (P), voltage (V) and current (I) chance
/// constraints. The K coefficients are always recomputed from the current
/// eps values, never cached.
struct RiskConfig {
    double eps_p = 0.5;
    double eps_v = 0.05;
    double eps_i = 0.05;

    double k_p() const { return k_epsilon(eps_p); }
    double k_v() const { return k_epsilon(eps_v); }
    double k_i() const { return k_epsilon(eps_i); }
};

// ---------------------------------------------------------------------------
// Gaussian mixture model with scalar components.
// ---------------------------------------------------------------------------

struct Gmm {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> variances;
    double log_likelihood = 0.0;
    double aic = 0.0;
    double bic = 0.0;

    int n_components() const { return static_cast<int>(weights.size()); }

    double pdf(double x) const {
        double p = 0.0;
        for (int m = 0; m < n_components(); ++m)
            p += weights[m] * std::exp(-0.5 * (x - means[m]) * (x - means[m]) / variances[m]) /
                 std::sqrt(2.0 * std::numbers::pi * variances[m]);
        return p;
    }
    double cdf(double x) const {
        double c = 0.0;
        for (int m = 0; m < n_components(); ++m)
            c += weights[m] * 0.5 * std::erfc(-(x - means[m]) / std::sqrt(2.0 * variances[m]));
        return c;
    }
};

/// First two moments of the mixture: mean = sum w_m mu_m and
/// variance = sum w_m (sigma_m^2 + mu_m^2) - mean^2.
inline std::pair<double, double> gmm_moments(const Gmm& g) {
    double mean = 0.0, second = 0.0;
    for (int m = 0; m < g.n_components(); ++m) {
        mean += g.weights[m] * g.means[m];
        second += g.weights[m] * (g.variances[m] + g.means[m] * g.means[m]);
    }
    return {mean, second - mean * mean};
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Self-contained RNG so sampled streams are reproducible independent of
/// standard library internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    double uniform() {  // (0, 1)
        const std::uint64_t u = splitmix64(state_);
        return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
    }
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double t = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

  private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline double log_sum_exp(const std::vector<double>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace detail

inline std::vector<double> sample_gmm(const Gmm& g, int n, std::uint64_t seed) {
    std::vector<double> out;
    out.reserve(std::max(n, 0));
    detail::Rng rng(seed);
    std::vector<double> cum(g.weights.size());
    std::partial_sum(g.weights.begin(), g.weights.end(), cum.begin());
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform() * cum.back();
        const int m = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
        const int mm = std::min(m, g.n_components() - 1);
        out.push_back(g.means[mm] + std::sqrt(g.variances[mm]) * rng.normal());
    }
    return out;
}

struct EmOptions {
    int restarts = 10;
    int max_iter = 200;
    double tol = 1e-7;        // stop when the log-likelihood gain drops below
    double var_floor = 1e-10;
    std::uint64_t seed = 12345;
};

namespace detail {

struct EmFit {
    Gmm g;
    bool ok = false;
};

/// One EM run from a k-means++ style initialization. The log-likelihood is
/// checked to be non-decreasing on every iteration.
inline EmFit run_em(const std::vector<double>& x, int k, const EmOptions& opt, Rng& rng) {
    const int n = static_cast<int>(x.size());
    std::vector<double> mu(k), var(k), w(k, 1.0 / k);

    // k-means++ seeding on the scalar samples.
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    mu[0] = x[static_cast<int>(rng.uniform() * n) % n];
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = x[i] - mu[c - 1];
            d2[i] = std::min(d2[i], d * d);
            total += d2[i];
        }
        double u = rng.uniform() * total;
        int pick = n - 1;
        for (int i = 0; i < n; ++i) {
            u -= d2[i];
            if (u <= 0) {
                pick = i;
                break;
            }
        }
        mu[c] = x[pick];
    }
    double gvar = 0.0;
    const double gmean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    for (double xi : x) gvar += (xi - gmean) * (xi - gmean);
    gvar = std::max(gvar / n, opt.var_floor);
    std::fill(var.begin(), var.end(), gvar);

    std::vector<double> resp(static_cast<std::size_t>(n) * k);
    std::vector<double> logp(k), logw(k), inv2v(k), lognorm(k);
    double ll_prev = -std::numeric_limits<double>::infinity();
    double ll = ll_prev;

    for (int it = 0; it < opt.max_iter; ++it) {
        for (int m = 0; m < k; ++m) {
            logw[m] = std::log(std::max(w[m], 1e-300));
            inv2v[m] = 0.5 / var[m];
            lognorm[m] = -0.5 * std::log(2.0 * std::numbers::pi * var[m]);
        }
        // E step in the log domain.
        ll = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int m = 0; m < k; ++m) {
                const double d = x[i] - mu[m];
                logp[m] = logw[m] + lognorm[m] - d * d * inv2v[m];
            }
            const double lse = log_sum_exp(logp);
            ll += lse;
            for (int m = 0; m < k; ++m) resp[static_cast<std::size_t>(i) * k + m] = std::exp(logp[m] - lse);
        }
        if (ll + 1e-9 * (1.0 + std::abs(ll)) < ll_prev)
            throw FlexError("EM log-likelihood decreased, which indicates a bug");
        const double gain = ll - ll_prev;
        ll_prev = ll;
        if (gain >= 0 && gain < opt.tol) break;

        // M step.
        for (int m = 0; m < k; ++m) {
            double nm = 0.0, sm = 0.0;
            for (int i = 0; i < n; ++i) {
                const double r = resp[static_cast<std::size_t>(i) * k + m];
                nm += r;
                sm += r * x[i];
            }
            if (nm < 1e-12) {  // dead component: reseed on the worst-fit point
                mu[m] = x[static_cast<int>(rng.uniform() * n) % n];
                var[m] = gvar;
                w[m] = 1.0 / n;
                continue;
            }
            mu[m] = sm / nm;
            double vm = 0.0;
            for (int i = 0; i < n; ++i) {
                const double d = x[i] - mu[m];
                vm += resp[static_cast<std::size_t>(i) * k + m] * d * d;
            }
            var[m] = std::max(vm / nm, opt.var_floor);
            w[m] = nm / n;
        }
        const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
        for (double& wm : w) wm /= wsum;
    }

    EmFit fit;
    fit.ok = std::isfinite(ll);
    fit.g.weights = w;
    fit.g.means = mu;
    fit.g.variances = var;
    fit.g.log_likelihood = ll;
    const int n_params = 3 * k - 1;
    fit.g.aic = 2.0 * n_params - 2.0 * ll;
    fit.g.bic = n_params * std::log(static_cast<double>(n)) - 2.0 * ll;
    return fit;
}

}  // namespace detail

/// Fit one mixture per component count k = 1..k_max (EM, best of
/// `restarts`) and return the fit minimizing BIC. AIC is reported alongside.
/// `curves`, when given, receives the per-k (aic, bic, log_likelihood).
inline Gmm fit_gmm(const std::vector<double>& samples, int k_max,
                   const EmOptions& opt = {},
                   std::vector<std::array<double, 3>>* curves = nullptr) {
    if (k_max < 1) throw FlexError("k_max must be at least 1");
    if (static_cast<int>(samples.size()) < 10 * k_max)
        throw FlexError("need at least 10*k_max samples to fit a mixture");

    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
    double var = 0.0;
    for (double x : samples) var += (x - mean) * (x - mean);
    var /= samples.size();
    if (var < opt.var_floor) {  // degenerate data: all samples (nearly) equal
        Gmm g;
        g.weights = {1.0};
        g.means = {mean};
        g.variances = {opt.var_floor};
        g.log_likelihood = 0.0;
        g.aic = g.bic = 0.0;
        if (curves) curves->push_back({g.aic, g.bic, g.log_likelihood});
        return g;
    }

    detail::Rng rng(opt.seed);
    std::optional<Gmm> best;
    for (int k = 1; k <= k_max; ++k) {
        std::optional<Gmm> best_k;
        const int restarts = k == 1 ? 1 : opt.restarts;  // k=1 has a closed form
        for (int r = 0; r < restarts; ++r) {
            const detail::EmFit fit = detail::run_em(samples, k, opt, rng);
            if (fit.ok && (!best_k || fit.g.log_likelihood > best_k->log_likelihood))
                best_k = fit.g;
        }
        if (!best_k) continue;
        if (curves) curves->push_back({best_k->aic, best_k->bic, best_k->log_likelihood});
        if (!best || best_k->bic < best->bic) best = *best_k;
    }
    if (!best) throw FlexError("mixture fitting failed for all component counts");
    return *best;
}

// ---------------------------------------------------------------------------
// Scenario table: one mixture per (day type, PV power-level bin).
// ---------------------------------------------------------------------------

enum class DayType : std::uint8_t { Sunny = 0, Cloudy = 1, Overcast = 2 };

inline std::string day_type_name(DayType d) {
    switch (d) {
        case DayType::Sunny: return "sunny";
        case DayType::Cloudy: return "cloudy";
        default: return "overcast";
    }
}
inline DayType day_type_from(const std::string& s) {
    if (s == "sunny") return DayType::Sunny;
    if (s == "cloudy") return DayType::Cloudy;
    if (s == "overcast") return DayType::Overcast;
    throw FlexError("unknown day type '" + s + "'");
}

/// Power-level bins [0,.25), [.25,.5), [.5,.75), [.75,1].
inline int power_bin(double power_pu) {
    if (power_pu < 0.25) return 0;
    if (power_pu < 0.5) return 1;
    if (power_pu < 0.75) return 2;
    return 3;
}
constexpr int kNumPowerBins = 4;

struct ErrorScenarioTable {
    std::map<std::pair<int, int>, Gmm> fits;  // (day, bin) -> mixture

    void set(DayType d, int bin, Gmm g) { fits[{static_cast<int>(d), bin}] = std::move(g); }
    bool has(DayType d, int bin) const { return fits.count({static_cast<int>(d), bin}) > 0; }

    /// Resolve (day, bin) with fallback to the nearest lower bin; bins above
    /// are only used when nothing at or below exists.
    const Gmm& lookup(DayType d, int bin) const {
        for (int b = std::min(bin, kNumPowerBins - 1); b >= 0; --b) {
            auto it = fits.find({static_cast<int>(d), b});
            if (it != fits.end()) return it->second;
        }
        for (int b = bin + 1; b < kNumPowerBins; ++b) {
            auto it = fits.find({static_cast<int>(d), b});
            if (it != fits.end()) return it->second;
        }
        throw FlexError("no fitted error model for day type " + day_type_name(d));
    }
};

// ---------------------------------------------------------------------------
// Uncertain nodal injections and affine propagation.
// ---------------------------------------------------------------------------

enum class SourceTag : std::uint8_t { None = 0, LoadGaussian = 1, PvGmm = 2 };

/// Mean and covariance of the additive injection error, over the same [p; q]
/// wye coordinates as InjectionVector.x_y. Built block-diagonal across
/// sources unless a PV output correlation is requested.
struct UncertainInjection {
    Vec mu;
    Mat sigma;
    std::vector<SourceTag> tags;

    bool zero() const { return sigma.size() == 0 || sigma.isZero(0.0); }

    void validate() const {
        if (sigma.rows() != sigma.cols() || sigma.rows() != mu.size())
            throw FlexError("uncertain injection dimension mismatch");
        if (!sigma.isApprox(sigma.transpose(), 1e-12))
            throw FlexError("injection covariance must be symmetric");
        for (int i = 0; i < sigma.rows(); ++i)
            if (sigma(i, i) < -1e-15) throw FlexError("negative variance in injection covariance");
    }
};

struct PropagatedMoments {
    Vec mu_v, sigma_v;  // per load terminal
    Vec mu_i, sigma_i;  // per line conductor
};

/// Propagate injection uncertainty through the affine magnitude functionals:
/// for f(x) = a + b'(x + xi), mu = a + b'(x + mu_xi) and sigma^2 = b' Sigma b.
/// The standard deviations do not depend on x because the error enters
/// additively.
inline PropagatedMoments propagate(const powerflow::MagnitudeAffine& mag,
                                   const UncertainInjection& u, const Vec& x) {
    if (x.size() != mag.n_x()) throw FlexError("propagate: state dimension mismatch");
    const int ny = static_cast<int>(u.mu.size());
    if (ny > mag.n_x()) throw FlexError("propagate: uncertainty dimension exceeds model");

    PropagatedMoments out;
    const auto moments = [&](const Mat& rows, const Vec& consts, Vec& mu, Vec& sd) {
        mu = consts + rows * x;
        mu += rows.leftCols(ny) * u.mu;
        const Mat gy = rows.leftCols(ny);
        const Mat gs = gy * u.sigma;
        sd.resize(rows.rows());
        for (int r = 0; r < rows.rows(); ++r)
            sd[r] = std::sqrt(std::max(0.0, gs.row(r).dot(gy.row(r))));
    };
    moments(mag.v_rows, mag.v_const, out.mu_v, out.sigma_v);
    moments(mag.i_rows, mag.i_const, out.mu_i, out.sigma_i);
    return out;
}

}  // namespace flexregion::uncertainty
