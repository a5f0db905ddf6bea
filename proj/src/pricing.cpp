#include "modelmix/pricing.hpp"

#include <boost/math/distributions/non_central_chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "cf_cumulants.hpp"
#include "modelmix/black_scholes.hpp"
#include "modelmix/char_fn.hpp"

namespace modelmix {

namespace {

using cplx = std::complex<double>;

// Instance with the frozen volatility state replaced by an override, when one
// applies (Heston/Bates: v0 slot; SABR: alpha slot).
ModelInstance with_state(const ModelInstance& m, const std::optional<VolState>& vstate) {
    if (!is_stochastic_vol(m.family)) {
        if (vstate)
            throw std::invalid_argument("pricing: " + to_string(m.family) +
                                        " takes no volatility state");
        return m;
    }
    if (!vstate) return m;
    if (vstate->value <= 0.0) throw std::invalid_argument("pricing: non-positive vol state");
    ModelInstance out = m;
    out.params[m.family == ModelFamily::SABR ? 0 : 4] = vstate->value;
    return out;
}

double clamp_z(double z, double k) { return std::clamp(z, std::max(1.0 - k, 0.0), 1.0); }

}  // namespace

std::vector<double> cos_normalized_calls(const ModelInstance& m, double tau,
                                         const std::vector<double>& ks,
                                         const PricerConfig& cfg) {
    if (!has_char_fn(m.family))
        throw std::domain_error("cos_normalized_calls: " + to_string(m.family) +
                                " has no characteristic function");
    validate(m);
    if (!(tau > 0.0)) throw std::invalid_argument("cos_normalized_calls: tau <= 0");
    for (std::size_t j = 0; j + 1 < ks.size(); ++j)
        if (!(ks[j] > 0.0) || !(ks[j] < ks[j + 1]))
            throw std::invalid_argument("cos_normalized_calls: k axis must be positive ascending");
    if (ks.empty()) return {};
    if (!(ks.front() > 0.0))
        throw std::invalid_argument("cos_normalized_calls: k axis must be positive ascending");

    const auto cum = detail::cf_cumulants([&](double u) { return char_fn0(m, cplx(u), tau); });
    const double half = cfg.trunc_scale * std::sqrt(std::max(cum.c2, 1e-16) +
                                                    std::sqrt(std::abs(cum.c4)));
    const double a = cum.c1 - half, b = cum.c1 + half;
    const double w = M_PI / (b - a);

    // Put value per k accumulated over expansion terms; the term frequencies
    // u_n = n*pi/(b-a) do not depend on the order, so doubling just appends.
    const std::size_t nk = ks.size();
    std::vector<double> put(nk, 0.0), d(nk), sin_da(nk), cos_da(nk), ed(nk);
    for (std::size_t j = 0; j < nk; ++j) {
        d[j] = std::clamp(std::log(ks[j]), a, b);
        ed[j] = std::exp(d[j]);
    }

    int n_done = 0;
    int n_target = std::min(cfg.cos_terms, cfg.max_cos_terms);
    double block_max = 0.0;
    while (true) {
        block_max = 0.0;
        for (int n = n_done; n < n_target; ++n) {
            const double un = n * w;
            const double An = (n == 0 ? 1.0 : 2.0) / (b - a) *
                              (char_fn0(m, cplx(un), tau) * std::exp(cplx(0.0, -un * a))).real();
            for (std::size_t j = 0; j < nk; ++j) {
                const double da = d[j] - a;
                double psi, chi;
                if (n == 0) {
                    psi = da;
                    chi = ed[j] - std::exp(a);
                } else {
                    const double s = std::sin(un * da), c = std::cos(un * da);
                    psi = s / un;
                    chi = (ed[j] * (c + un * s) - std::exp(a)) / (1.0 + un * un);
                }
                const double add = An * (ks[j] * psi - chi);
                put[j] += add;
                block_max = std::max(block_max, std::abs(add));
            }
        }
        n_done = n_target;
        if (block_max <= cfg.conv_tol) break;
        if (n_target >= cfg.max_cos_terms) {
            if (block_max <= cfg.tail_tol) break;  // degraded but within tolerance
            throw std::runtime_error("cos_normalized_calls: no convergence for " + serialize(m) +
                                     " at tau " + std::to_string(tau) +
                                     " (last increment " + std::to_string(block_max) + ")");
        }
        n_target = std::min(2 * n_target, cfg.max_cos_terms);
    }

    std::vector<double> z(nk);
    for (std::size_t j = 0; j < nk; ++j) z[j] = clamp_z(put[j] + 1.0 - ks[j], ks[j]);
    return z;
}

double cev_call(double spot, double strike, double tau, double rate, double sigma,
                double exponent) {
    if (!(spot > 0.0) || !(strike > 0.0) || !(tau > 0.0) || !(sigma > 0.0))
        throw std::invalid_argument("cev_call: spot, strike, tau, sigma must be > 0");
    if (!(exponent > 0.0) || exponent > 1.0)
        throw std::invalid_argument("cev_call: exponent outside (0, 1]");
    if (exponent >= 1.0 - 1e-9)
        return black_scholes_call(spot, strike, sigma * std::pow(spot, exponent - 1.0), tau,
                                  rate);
    const double om = 1.0 - exponent;
    const double g = 2.0 * rate * om;
    const double v = std::abs(g) < 1e-14 ? sigma * sigma * tau
                                         : sigma * sigma * std::expm1(g * tau) / g;
    const double fwd = spot * std::exp(rate * tau);
    const double a = std::pow(strike, 2.0 * om) / (om * om * v);
    const double bb = 1.0 / om;
    const double c = std::pow(fwd, 2.0 * om) / (om * om * v);
    if (om < 0.02 || a > 2e9 || c > 2e9) {
        // Near-lognormal regime: the noncentral chi-square series is slow or
        // overflows its integer internals, while the local-vol implied-vol
        // asymptotic is accurate to a few 1e-5 relative. Smooth hand-off.
        const double lfk = std::log(fwd / strike);
        const double fkp = std::pow(fwd * strike, 0.5 * om);
        const double series = 1.0 + om * om * lfk * lfk / 24.0 +
                              om * om * om * om * lfk * lfk * lfk * lfk / 1920.0;
        const double vol =
            sigma / (fkp * series) * (1.0 + om * om * sigma * sigma * tau / (24.0 * fkp * fkp));
        return black_scholes_call(spot, strike, vol, tau, rate);
    }
    const boost::math::non_central_chi_squared upper(bb + 2.0, c), lower(bb, a);
    const double call =
        std::exp(-rate * tau) * (fwd * boost::math::cdf(boost::math::complement(upper, a)) -
                                 strike * boost::math::cdf(lower, c));
    return std::clamp(call, std::max(spot - strike * std::exp(-rate * tau), 0.0), spot);
}

double sabr_implied_vol(double forward, double strike, double tau, double alpha, double beta_exp,
                        double rho, double nu) {
    if (!(forward > 0.0) || !(strike > 0.0) || !(tau > 0.0))
        throw std::invalid_argument("sabr_implied_vol: forward, strike, tau must be > 0");
    if (!(alpha > 0.0) || !(nu > 0.0) || !(std::abs(rho) < 1.0) || !(beta_exp > 0.0) ||
        beta_exp > 1.0)
        throw std::invalid_argument("sabr_implied_vol: parameters outside the admissible set");
    const double om = 1.0 - beta_exp;
    const double lfk = std::log(forward / strike);
    const double fk_pow = std::pow(forward * strike, 0.5 * om);
    const double zz = (nu / alpha) * fk_pow * lfk;
    double z_over_x;
    if (std::abs(zz) < 1e-6) {
        z_over_x = 1.0 + 0.5 * rho * zz;  // series of z / x(z) about 0
    } else {
        const double x = std::log((std::sqrt(1.0 - 2.0 * rho * zz + zz * zz) + zz - rho) /
                                  (1.0 - rho));
        z_over_x = zz / x;
    }
    const double denom =
        fk_pow * (1.0 + om * om * lfk * lfk / 24.0 + om * om * om * om * lfk * lfk * lfk * lfk /
                                                         1920.0);
    const double correction =
        1.0 + tau * (om * om * alpha * alpha / (24.0 * fk_pow * fk_pow) +
                     rho * beta_exp * nu * alpha / (4.0 * fk_pow) +
                     (2.0 - 3.0 * rho * rho) * nu * nu / 24.0);
    return alpha / denom * z_over_x * correction;
}

double call_price(const ModelInstance& m, const std::optional<VolState>& vstate, double spot,
                  double strike, double tau, double rate, const PricerConfig& cfg) {
    const ModelInstance inst = with_state(m, vstate);
    const auto& p = inst.params;
    switch (inst.family) {
        case ModelFamily::BlackScholes:
            return black_scholes_call(spot, strike, p[0], tau, rate);
        case ModelFamily::CEV:
            return cev_call(spot, strike, tau, rate, p[0], p[1]);
        case ModelFamily::SABR: {
            const double fwd = spot * std::exp(rate * tau);
            const double vol = sabr_implied_vol(fwd, strike, tau, p[0], p[1], p[2], p[3]);
            return black_scholes_call(spot, strike, vol, tau, rate);
        }
        default: {
            const double k = strike / (spot * std::exp(rate * tau));
            return spot * cos_normalized_calls(inst, tau, {k}, cfg)[0];
        }
    }
}

namespace {

// z rows for the CF families at arbitrary positive moneyness nodes.
Matrix cf_z_rows(const ModelInstance& inst, const OptionGrid& grid, const std::vector<double>& ks,
                 const PricerConfig& cfg) {
    Matrix z(grid.expiries.size());
    for (std::size_t t = 0; t < grid.expiries.size(); ++t)
        z[t] = cos_normalized_calls(inst, grid.expiries[t], ks, cfg);
    return z;
}

// z rows (no k = 0 column) for any family at moneyness nodes ks.
Matrix z_rows(const ModelInstance& inst, double spot, double rate, const OptionGrid& grid,
              const std::vector<double>& ks, const PricerConfig& cfg) {
    const auto& p = inst.params;
    switch (inst.family) {
        case ModelFamily::BlackScholes: {
            Matrix z(grid.expiries.size(), std::vector<double>(ks.size()));
            for (std::size_t t = 0; t < grid.expiries.size(); ++t) {
                const double w = p[0] * std::sqrt(grid.expiries[t]);
                for (std::size_t j = 0; j < ks.size(); ++j)
                    z[t][j] = black_normalized_call(ks[j], w);
            }
            return z;
        }
        case ModelFamily::CEV: {
            Matrix z(grid.expiries.size(), std::vector<double>(ks.size()));
            for (std::size_t t = 0; t < grid.expiries.size(); ++t) {
                const double tau = grid.expiries[t];
                const double fwd_df = std::exp(rate * tau);
                for (std::size_t j = 0; j < ks.size(); ++j)
                    z[t][j] = clamp_z(
                        cev_call(spot, ks[j] * spot * fwd_df, tau, rate, p[0], p[1]) / spot,
                        ks[j]);
            }
            return z;
        }
        case ModelFamily::SABR: {
            Matrix z(grid.expiries.size(), std::vector<double>(ks.size()));
            for (std::size_t t = 0; t < grid.expiries.size(); ++t) {
                const double tau = grid.expiries[t];
                const double fwd = spot * std::exp(rate * tau);
                for (std::size_t j = 0; j < ks.size(); ++j) {
                    const double vol =
                        sabr_implied_vol(fwd, ks[j] * fwd, tau, p[0], p[1], p[2], p[3]);
                    z[t][j] = black_normalized_call(ks[j], vol * std::sqrt(tau));
                }
            }
            return z;
        }
        default:
            return cf_z_rows(inst, grid, ks, cfg);
    }
}

// Tiny numerical wrinkles are flattened; anything beyond tolerance is a
// pricing bug and must surface as an error, not be silently repaired.  The
// tolerance sits above the quadrature noise floor: near-degenerate but
// admissible parameters (e.g. correlation close to -1) can leave a few
// 1e-8-scale truncation artifacts in deep out-of-the-money cells whose true
// value is below quadrature resolution, while any genuine arbitrage in the
// model surfaces orders of magnitude larger.
void enforce_shape(Matrix& z, const std::vector<double>& ks, const ModelInstance& inst) {
    constexpr double tol = 1e-6;
    for (std::size_t t = 0; t < z.size(); ++t) {
        for (std::size_t j = 1; j < z[t].size(); ++j) {
            if (z[t][j] > z[t][j - 1] + tol)
                throw std::runtime_error("price surface not monotone in strike for " +
                                         serialize(inst));
            z[t][j] = std::min(z[t][j], z[t][j - 1]);
        }
        if (t > 0)
            for (std::size_t j = 0; j < z[t].size(); ++j) {
                if (z[t][j] < z[t - 1][j] - tol)
                    throw std::runtime_error("price surface not monotone in expiry for " +
                                             serialize(inst));
                z[t][j] = std::max(z[t][j], z[t - 1][j]);
            }
        for (std::size_t j = 0; j < z[t].size(); ++j) z[t][j] = clamp_z(z[t][j], ks[j]);
    }
}

}  // namespace

Matrix normalized_call_surface(const ModelInstance& m, const std::optional<VolState>& vstate,
                               double spot, double rate, const OptionGrid& grid,
                               const PricerConfig& cfg) {
    validate(grid);
    if (!(spot > 0.0)) throw std::invalid_argument("normalized_call_surface: spot <= 0");
    const ModelInstance inst = with_state(m, vstate);
    Matrix body = z_rows(inst, spot, rate, grid, grid.moneyness, cfg);
    enforce_shape(body, grid.moneyness, inst);
    Matrix z(grid.expiries.size(), std::vector<double>(grid.moneyness.size() + 1, 1.0));
    for (std::size_t t = 0; t < body.size(); ++t)
        std::copy(body[t].begin(), body[t].end(), z[t].begin() + 1);
    return z;
}

Matrix price_surface(const ModelInstance& m, const std::optional<VolState>& vstate, double spot,
                     double rate, const OptionGrid& grid, const PricerConfig& cfg) {
    Matrix z = normalized_call_surface(m, vstate, spot, rate, grid, cfg);
    Matrix prices(z.size(), std::vector<double>(grid.moneyness.size()));
    for (std::size_t t = 0; t < z.size(); ++t)
        for (std::size_t j = 0; j < grid.moneyness.size(); ++j)
            prices[t][j] = spot * z[t][j + 1];
    return prices;
}

Matrix delta_surface(const ModelInstance& m, const std::optional<VolState>& vstate, double spot,
                     double rate, const OptionGrid& grid, const PricerConfig& cfg) {
    validate(grid);
    if (!(spot > 0.0)) throw std::invalid_argument("delta_surface: spot <= 0");
    const ModelInstance inst = with_state(m, vstate);
    constexpr double eps = 1e-4;
    const double up = spot * (1.0 + eps), dn = spot * (1.0 - eps);

    // Strikes stay at their unbumped values K = k * spot * e^{r tau}; under a
    // bumped spot s they sit at moneyness K / (s e^{r tau}) = k * spot / s,
    // the same rescaling for every expiry.
    auto bumped_ks = [&](double s) {
        std::vector<double> ks = grid.moneyness;
        for (double& k : ks) k *= spot / s;
        return ks;
    };
    const Matrix z_up = z_rows(inst, up, rate, grid, bumped_ks(up), cfg);
    const Matrix z_dn = z_rows(inst, dn, rate, grid, bumped_ks(dn), cfg);

    Matrix delta(grid.expiries.size(), std::vector<double>(grid.moneyness.size()));
    for (std::size_t t = 0; t < delta.size(); ++t)
        for (std::size_t j = 0; j < delta[t].size(); ++j) {
            const double d = (up * z_up[t][j] - dn * z_dn[t][j]) / (2.0 * spot * eps);
            delta[t][j] = std::clamp(d, 0.0, 1.0);
        }
    return delta;
}

}  // namespace modelmix
