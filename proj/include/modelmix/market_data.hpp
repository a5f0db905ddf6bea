#pragma once

// Market-data ingestion: implied-vol surfaces in, normalized call surfaces out.
//
// A normalized surface holds z(tau, k) = C(tau, k*S0*e^{r tau}) / S0 on a fixed
// grid of expiries and forward-moneyness levels, with the exact zero-strike
// column z = 1 at k = 0 prepended. Reading strikes forward keeps z in [0,1]
// and -dz/dk a distribution tail at any riskless rate; at rate 0 it coincides
// with plain moneyness.

#include <cstddef>
#include <string>
#include <vector>

namespace modelmix {

using Matrix = std::vector<std::vector<double>>;

// One day between consecutive observations, in years; calendar gaps
// (weekends, holidays) still count as a single step.
inline constexpr double kDayStep = 1.0 / 252.0;

struct OptionGrid {
    std::vector<double> expiries = {1.0 / 12, 2.0 / 12, 3.0 / 12, 6.0 / 12, 1.0, 1.5, 2.0};
    std::vector<double> moneyness = {0.80, 0.90, 0.95, 1.00, 1.05, 1.10, 1.20};

    double T() const { return expiries.back(); }
    std::size_t instrument_count() const { return expiries.size() * moneyness.size(); }
};

// Throws invalid_argument unless both axes are strictly increasing and positive.
void validate(const OptionGrid& grid);
bool grids_equal(const OptionGrid& a, const OptionGrid& b);

struct SurfaceObservation {
    std::string date;  // ISO-8601 calendar day
    double spot = 0.0;
    double rate = 0.0;
    Matrix vols;  // |expiries| x |moneyness| implied volatilities
    double log_price = 0.0;
};

struct NormalizedSurface {
    OptionGrid grid;
    Matrix z;  // |expiries| x (|moneyness| + 1); column 0 is k = 0, z = 1

    // Strike axis including the synthetic zero-strike node.
    double k(std::size_t j) const { return j == 0 ? 0.0 : grid.moneyness[j - 1]; }
    std::size_t cols() const { return grid.moneyness.size() + 1; }
};

// Black-Scholes call value of one implied-vol quote.
double vol_to_price(double vol, double spot, double strike, double expiry, double rate);

// Reads a CSV with header date,spot,rate,expiry,moneyness,vol (rows in any
// order) and returns date-sorted observations with complete grids. Dates with
// missing cells are dropped with a warning; malformed rows, non-positive
// spots/vols, duplicate cells and inconsistent per-date spot or rate are hard
// errors naming the offending row.
std::vector<SurfaceObservation> load_series(const std::string& path, const OptionGrid& grid = {},
                                            std::vector<std::string>* warnings = nullptr);

// Writes observations in the same CSV schema (used by the synthetic generator).
void write_series(const std::string& path, const std::vector<SurfaceObservation>& series,
                  const OptionGrid& grid);

// Converts one observation to a normalized surface. Monotonicity violations
// in k up to repair_tolerance are projected onto the nearest non-increasing
// sequence (violations below 1e-6 are left untouched); larger ones are data
// errors. A final pass enforces the no-arbitrage slope floor dz/dk >= -1.
NormalizedSurface normalize(const SurfaceObservation& obs, const OptionGrid& grid = {},
                            double repair_tolerance = 0.05);

}  // namespace modelmix
