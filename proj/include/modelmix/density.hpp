#pragma once

// One-day transition densities.
//
// Families split three ways:
//   * Gaussian one-step laws (BlackScholes, CEV, Heston, SABR): closed form,
//     with stochastic-vol families frozen at their v0/alpha state and local-vol
//     families frozen at the current spot level.
//   * Closed-form Levy densities (VarianceGamma, NIG): Bessel-K expressions;
//     their one-day densities are far too spiked for a uniform tabulation.
//   * Tabulated (Merton, Kou, Bates): Fourier inversion of the increment
//     characteristic function once per instance, then interpolation.
//
// All log-densities are floored at a configurable value (default -7000) so a
// hopeless move disqualifies an instance without producing -inf arithmetic.

#include <optional>
#include <vector>

#include "modelmix/models.hpp"

namespace modelmix {

inline constexpr double kDefaultLogDensityFloor = -7000.0;

// Density of the rate-free one-step log-price increment on a uniform grid.
// Evaluation adds the rate*h shift, so one table serves every observation date.
struct DensityTable {
    std::vector<double> x;     // uniform grid
    std::vector<double> f;     // density values, >= 0
    std::vector<double> logf;  // floored log of f
    std::vector<double> cdf;   // running trapezium of f, cdf.front() = 0
    double dx = 0.0;
    double integral = 0.0;     // trapezium of f over the grid, ~1
    double log_floor = kDefaultLogDensityFloor;

    // Local quadratic interpolation of log f (exact for Gaussian logs);
    // outside the grid or where f has underflowed returns log_floor.
    double log_density(double y) const;

    // Inverse of the tabulated CDF at u in [0,1]; linear within cells.
    double sample(double u) const;

    // Mean of the tabulated density (trapezium), for moment checks.
    double mean() const;
};

struct InversionConfig {
    int n_points = 1 << 12;      // starting grid size
    int max_points = 1 << 16;    // refinement cap
    double trunc_scale = 10.0;   // half-width = trunc_scale*sqrt(c2 + sqrt|c4|)
    double integral_tol = 1e-5;  // |trapezium - 1| accepted
    double log_floor = kDefaultLogDensityFloor;
};

// Tabulates the rate-free one-step density by FFT inversion of the frozen
// characteristic function, widening/refining the grid deterministically until
// the mass check passes. Throws on non-CF families or when no parameter
// choice within the caps yields a clean density.
DensityTable density_from_cf(const ModelInstance& m, double h, const InversionConfig& cfg = {});

// ln p(x0 -> x1) over step h at the given riskless rate.
// vstate overrides the instance's own volatility state when present (must be
// absent for non-stochastic-vol families). For tabulated families, pass the
// instance's cached table to avoid rebuilding it per call.
double transition_log_density(const ModelInstance& m, const std::optional<VolState>& vstate,
                              double x0, double x1, double rate, double h,
                              const DensityTable* table = nullptr,
                              double log_floor = kDefaultLogDensityFloor);

// Mean and variance of the one-step increment (rate included in the mean);
// used for predictive-density summaries and synthetic-data moment checks.
double increment_mean(const ModelInstance& m, const std::optional<VolState>& vstate, double x0,
                      double rate, double h);
double increment_variance(const ModelInstance& m, const std::optional<VolState>& vstate,
                          double x0, double h);

}  // namespace modelmix
