#include "modelmix/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace modelmix {

Matrix strike_slopes(const NormalizedSurface& s, double repair_tolerance) {
    const std::size_t cols = s.cols();
    if (s.z.empty() || s.z.front().size() != cols)
        throw std::invalid_argument("strike_slopes: surface missing the k = 0 column");
    Matrix slopes(s.z.size(), std::vector<double>(cols - 1));
    for (std::size_t m = 0; m < s.z.size(); ++m) {
        if (s.z[m].size() != cols) throw std::invalid_argument("strike_slopes: ragged surface");
        for (std::size_t j = 1; j < cols; ++j) {
            const double dk = s.k(j) - s.k(j - 1);
            double sl = (s.z[m][j] - s.z[m][j - 1]) / dk;
            if (sl > repair_tolerance / dk || sl < -1.0 - repair_tolerance / dk)
                throw std::runtime_error("strike_slopes: slope " + std::to_string(sl) +
                                         " outside [-1, 0] beyond repair at expiry " +
                                         std::to_string(s.grid.expiries[m]));
            slopes[m][j - 1] = std::clamp(sl, -1.0, 0.0);
        }
    }
    return slopes;
}

double structured_from_slopes(const Matrix& a, const Matrix& b, const OptionGrid& grid,
                              double lambda) {
    const std::size_t rows = grid.expiries.size(), segs = grid.moneyness.size();
    if (a.size() != rows || b.size() != rows)
        throw std::invalid_argument("structured_from_slopes: expiry count mismatch");
    std::vector<double> inner(rows, 0.0);
    for (std::size_t m = 0; m < rows; ++m) {
        if (a[m].size() != segs || b[m].size() != segs)
            throw std::invalid_argument("structured_from_slopes: strike count mismatch");
        double acc = 0.0, k_prev = 0.0;
        for (std::size_t j = 0; j < segs; ++j) {
            const double dk = grid.moneyness[j] - k_prev;
            const double d = a[m][j] - b[m][j];
            acc += dk * d * d;
            k_prev = grid.moneyness[j];
        }
        inner[m] = acc;
    }
    // Expiry quadrature: leading [0, tau_1] rectangle at the tau_1 integrand,
    // then trapezium across the quoted expiries.
    double outer = grid.expiries.front() * inner.front();
    for (std::size_t m = 1; m < rows; ++m)
        outer += 0.5 * (grid.expiries[m] - grid.expiries[m - 1]) * (inner[m] + inner[m - 1]);
    return lambda * outer;
}

double penalty_structured(const NormalizedSurface& model, const NormalizedSurface& market,
                          const PenaltyConfig& cfg) {
    if (cfg.mode != PenaltyMode::Structured)
        throw std::invalid_argument("penalty_structured: config mode is not Structured");
    if (!(cfg.lambda > 0.0)) throw std::invalid_argument("penalty_structured: lambda <= 0");
    if (!grids_equal(model.grid, market.grid))
        throw std::invalid_argument("penalty_structured: surfaces on different grids");
    return structured_from_slopes(strike_slopes(model), strike_slopes(market), model.grid,
                                  cfg.lambda);
}

double penalty_naive(const std::vector<double>& model_prices,
                     const std::vector<double>& market_prices, const PenaltyConfig& cfg) {
    if (cfg.mode != PenaltyMode::Naive)
        throw std::invalid_argument("penalty_naive: config mode is not Naive");
    if (model_prices.size() != market_prices.size())
        throw std::invalid_argument("penalty_naive: length mismatch");
    if (!cfg.weights.empty() && cfg.weights.size() != model_prices.size())
        throw std::invalid_argument("penalty_naive: weight vector length mismatch");
    double q = 0.0;
    for (std::size_t i = 0; i < model_prices.size(); ++i) {
        const double w = cfg.weights.empty() ? cfg.default_weight : cfg.weights[i];
        if (!(w > 0.0)) throw std::invalid_argument("penalty_naive: non-positive weight");
        const double d = model_prices[i] - market_prices[i];
        q += d * d / (w * w);
    }
    return q;
}

}  // namespace modelmix
