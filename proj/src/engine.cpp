#include "modelmix/engine.hpp"

#include <cmath>
#include <stdexcept>

#include "modelmix/numerics.hpp"

namespace modelmix {

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::MovesOnly: return "moves_only";
        case Mode::OptionsOnly: return "options_only";
        case Mode::Combined: return "combined";
    }
    throw std::logic_error("to_string(Mode): unknown mode");
}

Mode mode_from_string(const std::string& s) {
    if (s == "moves_only") return Mode::MovesOnly;
    if (s == "options_only") return Mode::OptionsOnly;
    if (s == "combined") return Mode::Combined;
    throw std::invalid_argument("unknown mode '" + s +
                                "' (expected moves_only, options_only or combined)");
}

InstanceEvaluator::InstanceEvaluator(ModelInstance m, const OptionGrid& grid,
                                     const EngineConfig& cfg)
    : inst_(std::move(m)),
      grid_(grid),
      h_(cfg.h),
      log_floor_(cfg.log_floor),
      repair_tolerance_(cfg.repair_tolerance),
      pricer_(cfg.pricer) {
    validate(inst_);
    validate(grid_);
    if (uses_density_table(inst_.family)) {
        InversionConfig icfg;
        icfg.log_floor = log_floor_;
        table_ = density_from_cf(inst_, h_, icfg);
    }
    if (is_scale_invariant(inst_.family)) {
        // z(tau, k) does not depend on spot or rate for these families; the
        // surface and its slopes are computed once per instance.
        cached_z_ = normalized_call_surface(inst_, std::nullopt, 1.0, 0.0, grid_, pricer_);
        NormalizedSurface s;
        s.grid = grid_;
        s.z = *cached_z_;
        cached_slopes_ = strike_slopes(s, repair_tolerance_);
    }
}

double InstanceEvaluator::log_p(double x0, double x1, double rate) const {
    return transition_log_density(inst_, std::nullopt, x0, x1, rate, h_,
                                  table_ ? &*table_ : nullptr, log_floor_);
}

Matrix InstanceEvaluator::surface(double spot, double rate) const {
    if (cached_z_) return *cached_z_;
    return normalized_call_surface(inst_, std::nullopt, spot, rate, grid_, pricer_);
}

double InstanceEvaluator::unit_penalty(const Matrix& market_slopes, double spot,
                                       double rate) const {
    if (cached_slopes_) return structured_from_slopes(*cached_slopes_, market_slopes, grid_, 1.0);
    NormalizedSurface s;
    s.grid = grid_;
    s.z = normalized_call_surface(inst_, std::nullopt, spot, rate, grid_, pricer_);
    return structured_from_slopes(strike_slopes(s, repair_tolerance_), market_slopes, grid_, 1.0);
}

Engine::Engine(std::vector<ModelInstance> universe, OptionGrid grid, EngineConfig cfg)
    : universe_(std::move(universe)), grid_(std::move(grid)), config_(std::move(cfg)) {
    if (universe_.empty()) throw std::invalid_argument("Engine: empty universe");
    if (!(config_.beta > 0.0) || config_.beta > 1.0)
        throw std::invalid_argument("Engine: beta outside (0, 1]");
    if (!(config_.lambda > 0.0)) throw std::invalid_argument("Engine: lambda <= 0");
    validate(grid_);

    const std::size_t n = universe_.size();
    std::vector<std::optional<InstanceEvaluator>> built(n);
    std::vector<std::string> errors(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (config_.parallel)
#endif
    for (long i = 0; i < long(n); ++i) {
        try {
            built[i].emplace(universe_[i], grid_, config_);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    if (config_.drop_unpriceable) {
        std::vector<ModelInstance> survivors;
        survivors.reserve(n);
        evaluators_.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!errors[i].empty()) continue;
            survivors.push_back(std::move(universe_[i]));
            evaluators_.push_back(std::move(*built[i]));
        }
        if (survivors.empty())
            throw std::runtime_error("Engine: instance " + serialize(universe_[0]) + ": " +
                                     errors[0]);
        universe_ = std::move(survivors);
    } else {
        for (std::size_t i = 0; i < n; ++i)
            if (!errors[i].empty())
                throw std::runtime_error("Engine: instance " + serialize(universe_[i]) + ": " +
                                         errors[i]);
        evaluators_.reserve(n);
        for (auto& b : built) evaluators_.push_back(std::move(*b));
    }
}

LikelihoodState Engine::init() const {
    LikelihoodState s;
    s.ell.assign(universe_.size(), 0.0);
    s.t = 0;
    s.config = config_;
    if (!config_.family_log_prior.empty())
        for (std::size_t i = 0; i < universe_.size(); ++i) {
            const auto it = config_.family_log_prior.find(universe_[i].family);
            if (it != config_.family_log_prior.end()) s.ell[i] = it->second;
        }
    return s;
}

DayComponents Engine::components_impl(const SurfaceObservation& prev,
                                      const SurfaceObservation& curr, bool parallel) const {
    const std::size_t n = evaluators_.size();
    DayComponents dc;
    dc.log_p.assign(n, 0.0);
    dc.unit_q.assign(n, 0.0);

    const NormalizedSurface market = normalize(curr, grid_, config_.repair_tolerance);
    const Matrix market_slopes = strike_slopes(market, config_.repair_tolerance);

    std::vector<std::string> errors(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#else
    (void)parallel;
#endif
    for (long i = 0; i < long(n); ++i) {
        try {
            dc.log_p[i] = evaluators_[i].log_p(prev.log_price, curr.log_price, prev.rate);
            dc.unit_q[i] = evaluators_[i].unit_penalty(market_slopes, curr.spot, curr.rate);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!errors[i].empty())
            throw std::runtime_error("day update: instance " + serialize(universe_[i]) + ": " +
                                     errors[i]);
    return dc;
}

DayComponents Engine::day_components(const SurfaceObservation& prev,
                                     const SurfaceObservation& curr) const {
    return components_impl(prev, curr, config_.parallel);
}

DayComponents Engine::day_components_serial(const SurfaceObservation& prev,
                                            const SurfaceObservation& curr) const {
    return components_impl(prev, curr, false);
}

LikelihoodState Engine::advance(const LikelihoodState& state, const DayComponents& dc) {
    if (dc.log_p.size() != state.ell.size() || dc.unit_q.size() != state.ell.size())
        throw std::invalid_argument("advance: component length mismatch");
    LikelihoodState out = state;
    const bool moves = state.config.mode != Mode::OptionsOnly;
    const bool options = state.config.mode != Mode::MovesOnly;
    for (std::size_t i = 0; i < out.ell.size(); ++i) {
        double e = state.config.beta * state.ell[i];
        if (moves) e += dc.log_p[i];
        if (options) e -= state.config.lambda * dc.unit_q[i];
        out.ell[i] = e;
    }
    out.t = state.t + 1;
    return out;
}

LikelihoodState Engine::step(const LikelihoodState& state, const SurfaceObservation& prev,
                             const SurfaceObservation& curr) const {
    if (state.ell.size() != universe_.size())
        throw std::invalid_argument("step: state does not match the universe");
    return advance(state, day_components(prev, curr));
}

Posterior make_posterior(const LikelihoodState& state,
                         const std::vector<ModelInstance>& universe) {
    if (state.ell.size() != universe.size())
        throw std::invalid_argument("posterior: state does not match the universe");
    Posterior p;
    p.weights = softmax(state.ell);
    for (std::size_t i = 0; i < universe.size(); ++i)
        p.by_family[universe[i].family] += p.weights[i];
    return p;
}

Posterior Engine::posterior(const LikelihoodState& state) const {
    return make_posterior(state, universe_);
}

double calibrate_lambda(const std::vector<SurfaceObservation>& training,
                        const std::vector<ModelInstance>& universe, const OptionGrid& grid,
                        bool black_scholes_only, LambdaDiagnostics* diag) {
    if (training.size() < 2)
        throw std::invalid_argument("calibrate_lambda: need at least two training observations");
    std::vector<ModelInstance> members;
    for (const auto& m : universe)
        if (!black_scholes_only || m.family == ModelFamily::BlackScholes) members.push_back(m);
    if (members.empty())
        throw std::invalid_argument(black_scholes_only
                                        ? "calibrate_lambda: no Black-Scholes instances"
                                        : "calibrate_lambda: empty universe");

    EngineConfig cfg;  // beta/lambda/mode irrelevant: only raw components are read
    Engine engine(members, grid, cfg);
    double sum_abs_logp = 0.0, sum_q = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 1; t < training.size(); ++t) {
        const DayComponents dc = engine.day_components(training[t - 1], training[t]);
        for (std::size_t i = 0; i < dc.log_p.size(); ++i) {
            sum_abs_logp += std::abs(dc.log_p[i]);
            sum_q += dc.unit_q[i];
            ++count;
        }
    }
    const double mean_abs_logp = sum_abs_logp / double(count);
    const double mean_q = sum_q / double(count);
    if (!(mean_q > 0.0))
        throw std::runtime_error(
            "calibrate_lambda: zero mean penalty over the training window (degenerate set)");
    const double lambda = mean_abs_logp / mean_q;
    if (diag) {
        diag->mean_abs_log_density = mean_abs_logp;
        diag->mean_unit_penalty = mean_q;
        diag->lambda = lambda;
    }
    return lambda;
}

}  // namespace modelmix
