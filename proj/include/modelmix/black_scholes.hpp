#pragma once

// Black-Scholes call pricing, delta and implied-volatility inversion.
// Used as the quoting convention for market vols and as the closed-form
// reference the transform-based pricers are tested against.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace modelmix {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// European call, continuous rate, no dividends.
// Degenerate cases: zero vol or zero expiry collapse to discounted intrinsic.
inline double black_scholes_call(double spot, double strike, double vol, double expiry,
                                 double rate) {
    if (spot <= 0.0) throw std::invalid_argument("black_scholes_call: spot <= 0");
    if (strike < 0.0) throw std::invalid_argument("black_scholes_call: strike < 0");
    if (vol < 0.0) throw std::invalid_argument("black_scholes_call: vol < 0");
    if (expiry < 0.0) throw std::invalid_argument("black_scholes_call: expiry < 0");
    const double df = std::exp(-rate * expiry);
    if (strike == 0.0) return spot;
    const double w = vol * std::sqrt(expiry);
    if (w == 0.0) return std::max(spot - strike * df, 0.0);
    const double d1 = (std::log(spot / strike) + (rate + 0.5 * vol * vol) * expiry) / w;
    const double d2 = d1 - w;
    return spot * norm_cdf(d1) - strike * df * norm_cdf(d2);
}

// dC/dS at fixed strike.
inline double black_scholes_delta(double spot, double strike, double vol, double expiry,
                                  double rate) {
    if (strike == 0.0) return 1.0;
    const double w = vol * std::sqrt(expiry);
    if (w == 0.0) return spot >= strike * std::exp(-rate * expiry) ? 1.0 : 0.0;
    const double d1 = (std::log(spot / strike) + (rate + 0.5 * vol * vol) * expiry) / w;
    return norm_cdf(d1);
}

// Undiscounted forward-normalized call: E[(e^Y - k)^+] for lognormal Y with
// total variance w^2, i.e. the Black formula with forward 1 and strike k.
// Equals black_scholes_call(S, k*S*e^{r*tau}, vol, tau, r) / S for any S, r.
inline double black_normalized_call(double k, double total_vol) {
    if (k < 0.0) throw std::invalid_argument("black_normalized_call: k < 0");
    if (k == 0.0) return 1.0;
    if (total_vol <= 0.0) return std::max(1.0 - k, 0.0);
    const double d1 = (-std::log(k) + 0.5 * total_vol * total_vol) / total_vol;
    return norm_cdf(d1) - k * norm_cdf(d1 - total_vol);
}

// Inverts black_normalized_call in total_vol at fixed k > 0 by bisection
// (the map is strictly increasing from (1-k)^+ to 1). Used to re-quote model
// surfaces as implied vols. Throws when z is outside that band.
inline double normalized_implied_vol(double z, double k) {
    if (k <= 0.0) throw std::invalid_argument("normalized_implied_vol: k <= 0");
    const double intrinsic = std::max(1.0 - k, 0.0);
    if (!(z >= intrinsic - 1e-12) || !(z <= 1.0 + 1e-12))
        throw std::domain_error("normalized_implied_vol: z outside [(1-k)+, 1] at k " +
                                std::to_string(k));
    if (z <= intrinsic + 1e-15) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (black_normalized_call(k, hi) < z && hi < 64.0) hi *= 2.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (black_normalized_call(k, mid) < z) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Inverts black_scholes_call in vol. Bisection bracket then Newton polish;
// the round trip price -> vol -> price is accurate to ~1e-12 relative.
// Throws when the price is outside the no-arbitrage band for the inputs.
inline double implied_vol(double price, double spot, double strike, double expiry, double rate) {
    if (expiry <= 0.0) throw std::invalid_argument("implied_vol: expiry <= 0");
    const double df = std::exp(-rate * expiry);
    const double intrinsic = std::max(spot - strike * df, 0.0);
    const double upper = spot;
    if (!(price >= intrinsic - 1e-12 * spot) || !(price <= upper + 1e-12 * spot))
        throw std::domain_error("implied_vol: price outside [intrinsic, spot] at strike " +
                                std::to_string(strike));
    if (price <= intrinsic + 1e-14 * spot) return 0.0;

    double lo = 1e-9, hi = 1.0;
    while (black_scholes_call(spot, strike, hi, expiry, rate) < price && hi < 20.0) hi *= 2.0;
    for (int i = 0; i < 90; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (black_scholes_call(spot, strike, mid, expiry, rate) < price) lo = mid;
        else hi = mid;
    }
    double vol = 0.5 * (lo + hi);
    for (int i = 0; i < 8; ++i) {  // Newton polish; vega > 0 away from the edges
        const double diff = black_scholes_call(spot, strike, vol, expiry, rate) - price;
        const double w = vol * std::sqrt(expiry);
        const double d1 = (std::log(spot / strike) + (rate + 0.5 * vol * vol) * expiry) / w;
        const double vega = spot * norm_pdf(d1) * std::sqrt(expiry);
        if (vega < 1e-14) break;
        const double step = diff / vega;
        vol -= step;
        if (!(vol > lo && vol < hi)) { vol = std::clamp(vol, lo, hi); break; }
        if (std::abs(step) < 1e-16) break;
    }
    return vol;
}

}  // namespace modelmix
