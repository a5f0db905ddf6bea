#pragma once

// Call-surface pricing for every model family.
//
// The central object is the normalized surface z(tau, k) = C(tau, k*S0*e^{r
// tau})/S0 on an OptionGrid, matching the market-data normalization. Routes:
//   * Black-Scholes: closed form.
//   * CEV: noncentral chi-square representation (closed form up to the CDF).
//   * SABR: Hagan's asymptotic implied vol fed through the Black formula.
//   * Heston, Bates, Merton, Kou, VG, NIG: cosine-expansion quadrature of the
//     characteristic function, pricing the (bounded) put and applying parity.
//
// For every family except CEV and SABR the normalized surface is independent
// of spot and rate, which callers exploit by caching it per instance.

#include <optional>
#include <vector>

#include "modelmix/market_data.hpp"
#include "modelmix/models.hpp"

namespace modelmix {

struct PricerConfig {
    int cos_terms = 256;          // starting expansion order
    int max_cos_terms = 1 << 14;  // doubling cap
    double trunc_scale = 10.0;    // expansion range = mean +- scale*sqrt(c2 + sqrt|c4|)
    double conv_tol = 1e-10;      // block increment that counts as converged
    double tail_tol = 1e-6;       // largest increment accepted at the cap
};

// Normalized calls z(tau, k) for one expiry on an ascending k > 0 axis, by
// cosine expansion of the rate-free CF. Throws for non-CF families and on
// non-convergence (carrying family and parameters in the message).
std::vector<double> cos_normalized_calls(const ModelInstance& m, double tau,
                                         const std::vector<double>& ks,
                                         const PricerConfig& cfg = {});

// CEV call under dS = r S dt + sigma S^exponent dW (absorbing at 0), via the
// noncentral chi-square terminal law; exponent ~ 1 dispatches to Black-Scholes
// with the local vol sigma * spot^(exponent-1).
double cev_call(double spot, double strike, double tau, double rate, double sigma,
                double exponent);

// Hagan's lognormal implied-vol asymptotic for SABR.
double sabr_implied_vol(double forward, double strike, double tau, double alpha,
                        double beta_exp, double rho, double nu);

// One call price in currency units at an arbitrary strike.
double call_price(const ModelInstance& m, const std::optional<VolState>& vstate, double spot,
                  double strike, double tau, double rate, const PricerConfig& cfg = {});

// Normalized surface z[m][j] over the grid with the synthetic k = 0 column
// prepended (shape |expiries| x |moneyness|+1). vstate overrides the frozen
// volatility state for stochastic-vol families, as in transition_log_density.
Matrix normalized_call_surface(const ModelInstance& m, const std::optional<VolState>& vstate,
                               double spot, double rate, const OptionGrid& grid,
                               const PricerConfig& cfg = {});

// Call prices spot * z at strikes k_j * spot * e^{r tau_m}, without the k = 0
// column (shape |expiries| x |moneyness|).
Matrix price_surface(const ModelInstance& m, const std::optional<VolState>& vstate, double spot,
                     double rate, const OptionGrid& grid, const PricerConfig& cfg = {});

// dC/dS by central difference with relative bump 1e-4, strikes held at their
// unbumped values; clamped into [0, 1].
Matrix delta_surface(const ModelInstance& m, const std::optional<VolState>& vstate, double spot,
                     double rate, const OptionGrid& grid, const PricerConfig& cfg = {});

}  // namespace modelmix
