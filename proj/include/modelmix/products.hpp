#pragma once

// Decision products derived from a posterior over the model universe:
// predictive density of the next log-price, posterior-mixture prices with a
// full price distribution, and posterior-mixture hedge ratios. Everything
// here is a convex combination, so outputs are bounded by the per-instance
// extremes and collapse to the single instance under a degenerate posterior.

#include <functional>
#include <optional>
#include <vector>

#include "modelmix/engine.hpp"
#include "modelmix/models.hpp"

namespace modelmix {

// Posterior-weighted value distribution: weight w_j on value v_j, plus the
// exact weighted mean. Quantiles invert the left-continuous weighted
// empirical CDF (no interpolation), so they are deterministic and always
// coincide with one of the input values.
struct PriceDistribution {
    std::vector<double> values;
    std::vector<double> weights;
    double mean = 0.0;

    double quantile(double p) const;
};

// Distribution of caller-supplied per-instance values under the posterior.
// Throws std::invalid_argument on length mismatch or empty input.
PriceDistribution mixture_price(const Posterior& post, const std::vector<double>& values);

// Posterior-weighted hedge ratio (same contract as the mixture-price mean).
double mixture_delta(const Posterior& post, const std::vector<double>& deltas);

// Mixture of one-step transition densities: x -> sum_j w_j p_j(x_t, x).
// vstates, when non-empty, overrides the variance state per instance (same
// semantics as transition_log_density); pass {} to use each instance's own
// parameters. Jump-diffusion tables are built once, so the returned callable
// is cheap to evaluate and safe to call concurrently.
std::function<double(double)> predictive_density(const Posterior& post,
                                                 const std::vector<ModelInstance>& universe,
                                                 double x_t,
                                                 const std::vector<std::optional<VolState>>& vstates,
                                                 double rate, double h);

}  // namespace modelmix
