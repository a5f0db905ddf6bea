#include "modelmix/density.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <stdexcept>
#include <string>

#include "cf_cumulants.hpp"
#include "modelmix/char_fn.hpp"
#include "modelmix/numerics.hpp"

namespace modelmix {

namespace {

using cplx = std::complex<double>;

double gaussian_log_density(double x, double mean, double var) {
    return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * (x - mean) * (x - mean) / var;
}

// log K_nu(z) with the large-argument asymptotic where cyl_bessel_k underflows.
double log_bessel_k(double nu_ord, double z) {
    // Large order: the direct value under/overflows double range long before
    // the order gets here, so use the uniform (Debye) expansion, valid for
    // any argument. Three correction terms keep the log accurate to ~1e-8
    // at the switch point.
    if (nu_ord >= 50.0) {
        const double zr = z / nu_ord;
        const double sq = std::sqrt(1.0 + zr * zr);
        const double eta = sq + std::log(zr / (1.0 + sq));
        const double t = 1.0 / sq, t2 = t * t;
        const double u1 = t * (3.0 - 5.0 * t2) / 24.0;
        const double u2 = t2 * (81.0 - t2 * (462.0 - 385.0 * t2)) / 1152.0;
        const double u3 =
            t * t2 * (30375.0 - t2 * (369603.0 - t2 * (765765.0 - 425425.0 * t2))) / 414720.0;
        const double series =
            1.0 - u1 / nu_ord + u2 / (nu_ord * nu_ord) - u3 / (nu_ord * nu_ord * nu_ord);
        return 0.5 * std::log(M_PI / (2.0 * nu_ord)) - nu_ord * eta - 0.5 * std::log(sq) +
               std::log(series);
    }
    // Small argument at moderate order also overflows; leading term of the
    // ascending series in logs (next term is z^2/(4(order-1)) relative).
    if (nu_ord >= 2.0 && z < 1e-4)
        return std::lgamma(nu_ord) - std::log(2.0) + nu_ord * std::log(2.0 / z);
    if (z < 650.0) {
        const double k = std::cyl_bessel_k(nu_ord, z);
        if (k > 0.0 && std::isfinite(k)) return std::log(k);
    }
    const double mu = 4.0 * nu_ord * nu_ord;
    return 0.5 * std::log(M_PI / (2.0 * z)) - z + std::log1p((mu - 1.0) / (8.0 * z));
}

// Variance-Gamma process density at time t (no drift): subordinated Brownian
// motion with Gamma(t/nu, nu) clock; Bessel-K closed form.
double vg_log_density_raw(double x, double sigma, double theta, double nu, double t) {
    const double a = t / nu;
    const double A = 2.0 * sigma * sigma / nu + theta * theta;
    const double ax = std::max(std::abs(x), 1e-13);
    const double z = ax * std::sqrt(A) / (sigma * sigma);
    return std::log(2.0) + theta * x / (sigma * sigma) - a * std::log(nu) -
           0.5 * std::log(2.0 * M_PI) - std::log(sigma) - std::lgamma(a) +
           (0.5 * a - 0.25) * std::log(ax * ax / A) + log_bessel_k(std::abs(a - 0.5), z);
}

// NIG density at time t (no drift); delta_t = delta * t.
double nig_log_density_raw(double x, double alpha, double beta, double delta_t) {
    const double gamma = std::sqrt(alpha * alpha - beta * beta);
    const double s = std::sqrt(delta_t * delta_t + x * x);
    return std::log(alpha) + std::log(delta_t) - std::log(M_PI) + delta_t * gamma + beta * x +
           log_bessel_k(1.0, alpha * s) - std::log(s);
}

double vg_omega(double sigma, double theta, double nu) {
    return std::log(1.0 - theta * nu - 0.5 * sigma * sigma * nu) / nu;
}

double nig_omega(double alpha, double beta, double delta) {
    const double gamma = std::sqrt(alpha * alpha - beta * beta);
    return delta * (std::sqrt(alpha * alpha - (beta + 1.0) * (beta + 1.0)) - gamma);
}

std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

// f(x_j) = (du/2pi) (-1)^j Re DFT[ phi(u_m) (-1)^m e^{-i(m-N/2) du x_c} ]_j
// on x_j = x_c + (j - N/2) dx with du dx = 2pi/N; N divisible by 4.
std::vector<double> invert_cf(const ModelInstance& m, double h, double x_c, double half_width,
                              int n) {
    const double dx = 2.0 * half_width / n;
    const double du = 2.0 * M_PI / (n * dx);
    std::vector<cplx> buf(n);
    for (int i = 0; i < n; ++i) {
        const double u = (i - n / 2) * du;
        cplx a = frozen_char_fn0(m, u, h) * std::exp(cplx(0.0, -(i - n / 2) * du * x_c));
        if (i % 2 != 0) a = -a;
        buf[i] = a;
    }
    fftw_plan plan;
    {
        // FFTW plan creation is not thread-safe even with FFTW_ESTIMATE.
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(buf.data()),
                                reinterpret_cast<fftw_complex*>(buf.data()), FFTW_FORWARD,
                                FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(plan);
    }
    std::vector<double> f(n);
    const double scale = du / (2.0 * M_PI);
    for (int j = 0; j < n; ++j) {
        double v = scale * buf[j].real();
        if (j % 2 != 0) v = -v;
        f[j] = v;
    }
    return f;
}

}  // namespace

double DensityTable::log_density(double y) const {
    const double t = (y - x.front()) / dx;
    const auto n = static_cast<long>(x.size());
    long c = std::lround(t);
    if (c < 1) c = 1;
    if (c > n - 2) c = n - 2;
    if (t < -0.5 || t > double(n) - 0.5) return log_floor;
    const double lm = logf[c - 1], l0 = logf[c], lp = logf[c + 1];
    if (lm <= log_floor || l0 <= log_floor || lp <= log_floor) return std::max(l0, log_floor);
    const double s = t - double(c);
    const double v = l0 + 0.5 * s * (lp - lm) + 0.5 * s * s * (lp - 2.0 * l0 + lm);
    return v > log_floor ? v : log_floor;
}

double DensityTable::sample(double u) const {
    if (u <= 0.0) return x.front();
    if (u >= 1.0) return x.back();
    const double target = u * cdf.back();
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    if (it == cdf.begin()) return x.front();
    const std::size_t j = std::size_t(it - cdf.begin());
    const double c0 = cdf[j - 1], c1 = cdf[j];
    const double w = c1 > c0 ? (target - c0) / (c1 - c0) : 0.5;
    return x[j - 1] + w * dx;
}

double DensityTable::mean() const {
    std::vector<double> xf(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xf[i] = x[i] * f[i];
    return trapezoid_uniform(xf, dx) / integral;
}

DensityTable density_from_cf(const ModelInstance& m, double h, const InversionConfig& cfg) {
    if (!has_char_fn(m.family))
        throw std::domain_error("density_from_cf: " + to_string(m.family) +
                                " has no characteristic function");
    validate(m);
    if (h <= 0.0) throw std::invalid_argument("density_from_cf: h <= 0");

    const auto cum =
        detail::cf_cumulants([&](double u) { return frozen_char_fn0(m, cplx(u), h); });
    const double base_half =
        cfg.trunc_scale * std::sqrt(std::max(cum.c2, 1e-16) + std::sqrt(std::abs(cum.c4)));

    // Deterministic widen/refine ladder; accept the first clean density.
    static constexpr int kWiden[] = {1, 2, 2, 4, 4, 8, 8};
    static constexpr int kRefine[] = {1, 1, 2, 2, 4, 4, 8};
    double last_integral = 0.0, last_min = 0.0;
    for (std::size_t attempt = 0; attempt < std::size(kWiden); ++attempt) {
        const double half = base_half * kWiden[attempt];
        const int n = std::min(cfg.n_points * kRefine[attempt], cfg.max_points);
        std::vector<double> f = invert_cf(m, h, cum.c1, half, n);
        const double dx = 2.0 * half / n;
        const double integral = trapezoid_uniform(f, dx);
        const double fmin = *std::min_element(f.begin(), f.end());
        const double edge = std::max(std::abs(f.front()), std::abs(f.back())) * dx;
        last_integral = integral;
        last_min = fmin;
        if (std::abs(integral - 1.0) > cfg.integral_tol || fmin < -1e-10 || edge > 1e-9)
            continue;

        DensityTable table;
        table.dx = dx;
        table.log_floor = cfg.log_floor;
        table.x.resize(n);
        for (int j = 0; j < n; ++j) table.x[j] = cum.c1 + (j - n / 2) * dx;
        for (double& v : f) v = std::max(v, 0.0);
        table.f = std::move(f);
        table.integral = integral;
        table.logf.resize(n);
        for (int j = 0; j < n; ++j)
            table.logf[j] =
                table.f[j] > 0.0 ? std::max(std::log(table.f[j]), cfg.log_floor) : cfg.log_floor;
        table.cdf.resize(n);
        table.cdf[0] = 0.0;
        for (int j = 1; j < n; ++j)
            table.cdf[j] = table.cdf[j - 1] + 0.5 * (table.f[j - 1] + table.f[j]) * dx;
        return table;
    }
    throw std::runtime_error("density_from_cf: no clean inversion for " + serialize(m) +
                             " (integral=" + std::to_string(last_integral) +
                             ", min=" + std::to_string(last_min) + ")");
}

namespace {

// Resolves the frozen volatility state, honoring an override and the
// presence rule (state iff stochastic-vol family).
double resolved_state(const ModelInstance& m, const std::optional<VolState>& vstate) {
    if (!is_stochastic_vol(m.family)) {
        if (vstate)
            throw std::invalid_argument("transition_log_density: " + to_string(m.family) +
                                        " takes no volatility state");
        return 0.0;
    }
    if (vstate) {
        if (vstate->value <= 0.0)
            throw std::invalid_argument("transition_log_density: non-positive vol state");
        return vstate->value;
    }
    return vol_state(m)->value;
}

}  // namespace

double transition_log_density(const ModelInstance& m, const std::optional<VolState>& vstate,
                              double x0, double x1, double rate, double h,
                              const DensityTable* table, double log_floor) {
    if (h <= 0.0) throw std::invalid_argument("transition_log_density: h <= 0");
    const auto& p = m.params;
    const double state = resolved_state(m, vstate);
    double v = log_floor;
    switch (m.family) {
        case ModelFamily::BlackScholes: {
            const double var = p[0] * p[0] * h;
            v = gaussian_log_density(x1, x0 + rate * h - 0.5 * var, var);
            break;
        }
        case ModelFamily::CEV: {
            const double sloc = p[0] * std::exp((p[1] - 1.0) * x0);
            const double var = sloc * sloc * h;
            v = gaussian_log_density(x1, x0 + rate * h - 0.5 * var, var);
            break;
        }
        case ModelFamily::Heston: {
            const double var = state * h;  // variance frozen at v0 over the step
            v = gaussian_log_density(x1, x0 + rate * h - 0.5 * var, var);
            break;
        }
        case ModelFamily::SABR: {
            const double sloc = state * std::exp((p[1] - 1.0) * x0);
            const double var = sloc * sloc * h;
            v = gaussian_log_density(x1, x0 + rate * h - 0.5 * var, var);
            break;
        }
        case ModelFamily::VarianceGamma: {
            const double w = x1 - x0 - rate * h;
            v = vg_log_density_raw(w - vg_omega(p[0], p[1], p[2]) * h, p[0], p[1], p[2], h);
            break;
        }
        case ModelFamily::NIG: {
            const double w = x1 - x0 - rate * h;
            v = nig_log_density_raw(w - nig_omega(p[0], p[1], p[2]) * h, p[0], p[1], p[2] * h);
            break;
        }
        case ModelFamily::Merton:
        case ModelFamily::Kou:
        case ModelFamily::Bates: {
            const double y = x1 - x0 - rate * h;
            // A state override on Bates invalidates the cached table.
            const bool own_state =
                m.family != ModelFamily::Bates || !vstate || vstate->value == p[4];
            if (table != nullptr && own_state) {
                v = table->log_density(y);
            } else {
                ModelInstance probe = m;
                if (m.family == ModelFamily::Bates && vstate) probe.params[4] = vstate->value;
                InversionConfig icfg;
                icfg.log_floor = log_floor;
                v = density_from_cf(probe, h, icfg).log_density(y);
            }
            break;
        }
    }
    return v > log_floor ? v : log_floor;
}

double increment_mean(const ModelInstance& m, const std::optional<VolState>& vstate, double x0,
                      double rate, double h) {
    const auto& p = m.params;
    const double state = resolved_state(m, vstate);
    switch (m.family) {
        case ModelFamily::BlackScholes: return (rate - 0.5 * p[0] * p[0]) * h;
        case ModelFamily::CEV: {
            const double sloc = p[0] * std::exp((p[1] - 1.0) * x0);
            return (rate - 0.5 * sloc * sloc) * h;
        }
        case ModelFamily::Heston: return (rate - 0.5 * state) * h;
        case ModelFamily::SABR: {
            const double sloc = state * std::exp((p[1] - 1.0) * x0);
            return (rate - 0.5 * sloc * sloc) * h;
        }
        case ModelFamily::Bates: {
            const double kbar = std::exp(p[6] + 0.5 * p[6] * p[6]) - 1.0;
            return (rate - 0.5 * p[4] - p[5] * kbar + p[5] * p[6]) * h;
        }
        case ModelFamily::Merton: {
            const double kbar = std::exp(p[2] + 0.5 * p[3] * p[3]) - 1.0;
            return (rate - 0.5 * p[0] * p[0] - p[1] * kbar + p[1] * p[2]) * h;
        }
        case ModelFamily::Kou: {
            const double kbar =
                p[2] * p[3] / (p[3] - 1.0) + (1.0 - p[2]) * p[3] / (p[3] + 1.0) - 1.0;
            const double jump_mean = (2.0 * p[2] - 1.0) / p[3];
            return (rate - 0.5 * p[0] * p[0] - p[1] * kbar + p[1] * jump_mean) * h;
        }
        case ModelFamily::VarianceGamma:
            return (rate + vg_omega(p[0], p[1], p[2]) + p[1]) * h;
        case ModelFamily::NIG: {
            const double gamma = std::sqrt(p[0] * p[0] - p[1] * p[1]);
            return (rate + nig_omega(p[0], p[1], p[2])) * h + p[2] * h * p[1] / gamma;
        }
    }
    throw std::logic_error("increment_mean: unknown family");
}

double increment_variance(const ModelInstance& m, const std::optional<VolState>& vstate,
                          double x0, double h) {
    const auto& p = m.params;
    const double state = resolved_state(m, vstate);
    switch (m.family) {
        case ModelFamily::BlackScholes: return p[0] * p[0] * h;
        case ModelFamily::CEV: {
            const double sloc = p[0] * std::exp((p[1] - 1.0) * x0);
            return sloc * sloc * h;
        }
        case ModelFamily::Heston: return state * h;
        case ModelFamily::SABR: {
            const double sloc = state * std::exp((p[1] - 1.0) * x0);
            return sloc * sloc * h;
        }
        case ModelFamily::Bates: return p[4] * h + p[5] * h * 2.0 * p[6] * p[6];
        case ModelFamily::Merton: return p[0] * p[0] * h + p[1] * h * (p[2] * p[2] + p[3] * p[3]);
        case ModelFamily::Kou: return p[0] * p[0] * h + 2.0 * p[1] * h / (p[3] * p[3]);
        case ModelFamily::VarianceGamma:
            return (p[0] * p[0] + p[1] * p[1] * p[2]) * h;
        case ModelFamily::NIG: {
            const double gamma = std::sqrt(p[0] * p[0] - p[1] * p[1]);
            return p[2] * h * p[0] * p[0] / (gamma * gamma * gamma);
        }
    }
    throw std::logic_error("increment_variance: unknown family");
}

}  // namespace modelmix
