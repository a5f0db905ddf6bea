#pragma once

// Quadratic surface-fit penalty between a model and a market surface.
//
// The structured form works on strike slopes of normalized calls: on each
// expiry row the slope of z over (k_{j-1}, k_j] is a distribution tail value
// in [-1, 0], the inner integral accumulates (slope difference)^2 against dk,
// and the expiry axis is integrated by the trapezium rule with the leading
// [0, tau_1] panel held at the tau_1 integrand. This makes the penalty stable
// under strike-grid refinement and bounded by 2*lambda*T, in contrast to the
// naive weighted sum of squared price differences, which grows without bound
// as instruments are added.

#include <vector>

#include "modelmix/market_data.hpp"
#include "modelmix/models.hpp"

namespace modelmix {

enum class PenaltyMode { Structured, Naive };

struct PenaltyConfig {
    double lambda = 1.0;
    PenaltyMode mode = PenaltyMode::Structured;
    // Naive mode only: per-instrument scales w_a; empty means default_weight
    // everywhere (a bid-ask-sized constant on normalized prices).
    std::vector<double> weights;
    double default_weight = 0.005;
};

// Piecewise slopes (z_j - z_{j-1}) / (k_j - k_{j-1}) per expiry row, including
// the segment from the synthetic k = 0 column; slopes are identically zero
// beyond the last strike and must land in [-1, 0]. Violations up to
// repair_tolerance are clamped; larger ones throw (data beyond repair).
Matrix strike_slopes(const NormalizedSurface& s, double repair_tolerance = 0.05);

// Core quadrature on precomputed slope matrices sharing one grid.
double structured_from_slopes(const Matrix& a, const Matrix& b, const OptionGrid& grid,
                              double lambda);

// Q(model, market): slopes, squared differences, trapezium over expiries,
// times lambda. Symmetric in its arguments; zero iff the slopes coincide.
double penalty_structured(const NormalizedSurface& model, const NormalizedSurface& market,
                          const PenaltyConfig& cfg);

// Sum of |y_a - z_a|^2 / w_a^2 over instruments (the naive comparison form).
double penalty_naive(const std::vector<double>& model_prices,
                     const std::vector<double>& market_prices, const PenaltyConfig& cfg);

struct LambdaDiagnostics {
    double mean_abs_log_density = 0.0;  // mean |log p| per instance-day
    double mean_unit_penalty = 0.0;     // mean Q at lambda = 1 per instance-day
    double lambda = 0.0;
};

// Balances the two likelihood contributions: lambda = mean |log p| / mean
// Q(lambda=1), averaged over the universe (or its Black-Scholes members only)
// and all consecutive training pairs. Deterministic given inputs; throws when
// the training window has fewer than two observations or every model fits the
// surfaces exactly. Implemented with the engine's day evaluation.
double calibrate_lambda(const std::vector<SurfaceObservation>& training,
                        const std::vector<ModelInstance>& universe, const OptionGrid& grid,
                        bool black_scholes_only = false, LambdaDiagnostics* diag = nullptr);

}  // namespace modelmix
