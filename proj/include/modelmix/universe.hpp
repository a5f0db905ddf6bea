#pragma once

// Universe construction: snapshot calibration, grid spanning, pruning.
//
// The universe is built once and then held fixed:
//   (i)   calibrate every family to a handful of surface snapshots plus a
//         histogram of daily log-returns (least-squares, derivative-free),
//   (ii)  span each parameter between its lowest and highest fitted value
//         with a rough grid (log-spaced for scale-like parameters),
//   (iii) take the Cartesian product per family, dropping inadmissible
//         combinations,
//   (iv)  run the likelihood engine over a data window per family,
//   (v)   keep the instances that were ever best-of-family, plus those within
//         an ell-gap distance d of the per-date best, with d bisected so the
//         per-family count approaches a target without exceeding it.
//
// Snapshot dates are surfaced so run manifests can disclose the look-ahead
// inherent in the procedure.

#include <map>
#include <string>
#include <vector>

#include "modelmix/engine.hpp"
#include "modelmix/market_data.hpp"
#include "modelmix/models.hpp"

namespace modelmix {

struct FitConfig {
    int max_iter = 500;      // simplex iterations per restart
    int restarts = 5;        // jittered restarts, best-of
    std::uint64_t seed = 20240901;  // jitter stream seed
    int histogram_bins = 41;
    double histogram_span = 6.0;  // half-width in sample standard deviations
    double sabr_beta = 0.5;       // SABR exponent is held fixed at this value
    double repair_tolerance = 0.05;
    PricerConfig pricer;
};

struct FitResult {
    ModelInstance instance;
    double objective = 0.0;           // surface + histogram residual
    double surface_residual = 0.0;    // structured penalty at lambda = 1
    double histogram_residual = 0.0;  // sum over bins of (model - empirical)^2
    bool converged = false;           // simplex met its tolerance within budget
};

struct CalibrationSnapshot {
    std::string date;
    std::map<ModelFamily, FitResult> fits;
};

// Least-squares calibration of one family to one observation: structured
// surface penalty at lambda = 1 plus, with equal weight, the squared mismatch
// between model bin probabilities and the empirical histogram of the daily
// log-returns in returns_window (>= 61 log-prices). Derivative-free simplex
// from a family-typical start; deterministic given the config.
FitResult least_squares_fit(ModelFamily family, const SurfaceObservation& obs,
                            const std::vector<double>& returns_window, const OptionGrid& grid,
                            const FitConfig& cfg = {});

// All nine families against one observation (parallel across families).
CalibrationSnapshot calibrate_snapshot(const SurfaceObservation& obs,
                                       const std::vector<double>& returns_window,
                                       const OptionGrid& grid, const FitConfig& cfg = {});

struct AxisSpec {
    double low = 0.0;
    double high = 0.0;
    int n_points = 0;       // 0 = auto from family dimension
    bool log_scale = false;
};

struct UniverseSpec {
    int max_per_family = 100;  // pruning target
    // Grid points per axis; 0 picks the largest n in [2, 10] with n^dims of
    // the same order as a few thousand combinations per family.
    std::map<ModelFamily, int> points_override;
};

// Number of grid points per axis for a family with `dims` non-degenerate axes.
int auto_axis_points(int dims);

// Axes spanned by the snapshot fits for one family (min to max per slot,
// log-spaced where the parameter is scale-like and stays positive).
std::vector<AxisSpec> spanned_axes(const std::vector<CalibrationSnapshot>& snapshots,
                                   ModelFamily family, const UniverseSpec& spec);

// Cartesian product of the spanned axes over all families with at least one
// snapshot fit; inadmissible parameter combinations are dropped. Throws if a
// family's product is entirely inadmissible.
std::vector<ModelInstance> span_grid(const std::vector<CalibrationSnapshot>& snapshots,
                                     const UniverseSpec& spec);

struct PruneLogRow {
    std::string date;
    ModelFamily family = ModelFamily::BlackScholes;
    std::string best_instance_id;  // FNV-1a hash (hex) of the serialization
    double ell_best = 0.0;
};

struct PruneResult {
    std::vector<ModelInstance> kept;
    std::map<ModelFamily, double> distance;  // the bisected ell-gap per family
    std::vector<PruneLogRow> log;
};

// Hex instance id used in pruning logs.
std::string instance_id(const ModelInstance& m);

// Likelihood-based pruning, per family, over the given data window. Keeps
// every per-date best and everything within the bisected ell-gap; determinism
// comes from the fixed candidate order. Engine settings (beta, lambda, mode)
// are taken from engine_cfg; target counts from spec.max_per_family.
PruneResult prune(const std::vector<ModelInstance>& candidates,
                  const std::vector<SurfaceObservation>& data, const OptionGrid& grid,
                  const UniverseSpec& spec, const EngineConfig& engine_cfg = {});

}  // namespace modelmix
