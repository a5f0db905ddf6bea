#pragma once

// Per-instance log-likelihood recursion and posterior weights.
//
//   ell_j(t) = beta * ell_j(t-h) + log p_j(X_{t-h}, X_t) - Q(phi_j(X_t), Y_t)
//
// with ell_j(0) = 0 and pi_j(t) proportional to exp(ell_j(t)). The moves term
// and the options term can be switched on independently (MovesOnly /
// OptionsOnly / Combined), and the per-day components are computed once and
// shared across modes and beta/lambda choices.
//
// The per-day, per-instance evaluation is embarrassingly parallel: every
// instance writes only its own slot, so the OpenMP kernel is bitwise
// identical to the serial reference kept for testing and benchmarking.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modelmix/density.hpp"
#include "modelmix/market_data.hpp"
#include "modelmix/models.hpp"
#include "modelmix/penalty.hpp"
#include "modelmix/pricing.hpp"

namespace modelmix {

enum class Mode { MovesOnly, OptionsOnly, Combined };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct EngineConfig {
    double beta = 0.99;  // forgetting factor in (0, 1]
    double h = kDayStep;
    double lambda = 1.0;
    Mode mode = Mode::Combined;
    double log_floor = kDefaultLogDensityFloor;
    double repair_tolerance = 0.05;
    PricerConfig pricer;
    // Optional per-family log-prior offsets applied at t = 0, so families with
    // more grid points are not advantaged purely by count. Default: off
    // (uniform over instances).
    std::map<ModelFamily, double> family_log_prior;
    bool parallel = true;
    // Universe construction only: instances whose evaluators fail to build
    // (e.g. a quadrature artifact breaks surface monotonicity at an extreme
    // spanned parameter combination) are dropped instead of failing the
    // engine; survivors are visible through universe(). Backtest runs keep
    // the default strict behavior so a universe file either runs exactly as
    // written or errors.
    bool drop_unpriceable = false;
};

struct LikelihoodState {
    std::vector<double> ell;
    long t = 0;
    EngineConfig config;
};

struct Posterior {
    std::vector<double> weights;               // per instance, sums to 1
    std::map<ModelFamily, double> by_family;   // aggregated, sums to 1
};

// Per-day increments shared by all modes: the transition log-density and the
// structured penalty at lambda = 1.
struct DayComponents {
    std::vector<double> log_p;
    std::vector<double> unit_q;
};

// One model instance prepared for repeated daily evaluation: the transition
// density table for the jump-diffusion families is built once, and for
// spot/rate-invariant families the normalized surface slopes are cached.
class InstanceEvaluator {
  public:
    InstanceEvaluator(ModelInstance m, const OptionGrid& grid, const EngineConfig& cfg);

    double log_p(double x0, double x1, double rate) const;

    // Q at lambda = 1 against precomputed market slopes.
    double unit_penalty(const Matrix& market_slopes, double spot, double rate) const;

    // Normalized model surface for the day (cached when spot/rate-invariant).
    Matrix surface(double spot, double rate) const;

    const ModelInstance& instance() const { return inst_; }

  private:
    ModelInstance inst_;
    OptionGrid grid_;
    double h_;
    double log_floor_;
    double repair_tolerance_;
    PricerConfig pricer_;
    std::optional<DensityTable> table_;   // Merton/Kou/Bates
    std::optional<Matrix> cached_z_;      // all families except CEV/SABR
    std::optional<Matrix> cached_slopes_;
};

class Engine {
  public:
    Engine(std::vector<ModelInstance> universe, OptionGrid grid, EngineConfig cfg);

    LikelihoodState init() const;

    // log p and unit Q for every instance over one observation pair; parallel
    // per config, with errors re-thrown deterministically and tagged with the
    // offending instance.
    DayComponents day_components(const SurfaceObservation& prev,
                                 const SurfaceObservation& curr) const;
    DayComponents day_components_serial(const SurfaceObservation& prev,
                                        const SurfaceObservation& curr) const;

    // Forgetting-recursion fold of one day's components into the state.
    static LikelihoodState advance(const LikelihoodState& state, const DayComponents& dc);

    LikelihoodState step(const LikelihoodState& state, const SurfaceObservation& prev,
                         const SurfaceObservation& curr) const;

    Posterior posterior(const LikelihoodState& state) const;

    const std::vector<ModelInstance>& universe() const { return universe_; }
    const OptionGrid& grid() const { return grid_; }
    const EngineConfig& config() const { return config_; }
    const std::vector<InstanceEvaluator>& evaluators() const { return evaluators_; }

  private:
    DayComponents components_impl(const SurfaceObservation& prev, const SurfaceObservation& curr,
                                  bool parallel) const;

    std::vector<ModelInstance> universe_;
    OptionGrid grid_;
    EngineConfig config_;
    std::vector<InstanceEvaluator> evaluators_;
};

// Posterior weights from a state alone (softmax with max subtraction, family
// aggregation over the matching universe).
Posterior make_posterior(const LikelihoodState& state, const std::vector<ModelInstance>& universe);

}  // namespace modelmix
