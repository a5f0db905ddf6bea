#include "modelmix/universe.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/inverse_gaussian.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <stdexcept>

#include "modelmix/black_scholes.hpp"
#include "modelmix/density.hpp"
#include "modelmix/numerics.hpp"
#include "modelmix/penalty.hpp"
#include "modelmix/pricing.hpp"

namespace modelmix {

namespace {

constexpr double kBigObjective = 1e10;

// ---------------------------------------------------------------------------
// Parameter-space transforms so the simplex search runs unconstrained.
// ---------------------------------------------------------------------------

enum class Warp { Log, Atanh, Logit, LogShift1, Identity };

double to_unconstrained(double v, Warp w) {
    switch (w) {
        case Warp::Log: return std::log(v);
        case Warp::Atanh: return std::atanh(std::clamp(v, -1.0 + 1e-12, 1.0 - 1e-12));
        case Warp::Logit: {
            const double p = std::clamp(v, 1e-12, 1.0 - 1e-12);
            return std::log(p / (1.0 - p));
        }
        case Warp::LogShift1: return std::log(v - 1.0);
        case Warp::Identity: return v;
    }
    throw std::logic_error("to_unconstrained: bad warp");
}

double to_constrained(double u, Warp w) {
    switch (w) {
        case Warp::Log: return std::exp(std::clamp(u, -60.0, 60.0));
        case Warp::Atanh: return std::tanh(u);
        case Warp::Logit: return 1.0 / (1.0 + std::exp(-std::clamp(u, -60.0, 60.0)));
        case Warp::LogShift1: return 1.0 + std::exp(std::clamp(u, -60.0, 60.0));
        case Warp::Identity: return u;
    }
    throw std::logic_error("to_constrained: bad warp");
}

std::vector<Warp> slot_warps(ModelFamily f) {
    switch (f) {
        case ModelFamily::BlackScholes: return {Warp::Log};
        case ModelFamily::CEV: return {Warp::Log, Warp::Logit};
        case ModelFamily::Heston:
            return {Warp::Log, Warp::Log, Warp::Log, Warp::Atanh, Warp::Log};
        case ModelFamily::SABR: return {Warp::Log, Warp::Logit, Warp::Atanh, Warp::Log};
        case ModelFamily::Bates:
            return {Warp::Log, Warp::Log, Warp::Log, Warp::Atanh,
                    Warp::Log, Warp::Log, Warp::Identity};
        case ModelFamily::Merton: return {Warp::Log, Warp::Log, Warp::Identity, Warp::Log};
        case ModelFamily::Kou: return {Warp::Log, Warp::Log, Warp::Logit, Warp::LogShift1};
        case ModelFamily::VarianceGamma: return {Warp::Log, Warp::Identity, Warp::Log};
        case ModelFamily::NIG: return {Warp::Log, Warp::Identity, Warp::Log};
    }
    throw std::logic_error("slot_warps: unknown family");
}

// Slots the optimizer moves; SABR's exponent is held fixed.
std::vector<std::size_t> active_slots(ModelFamily f) {
    if (f == ModelFamily::SABR) return {0, 2, 3};
    std::vector<std::size_t> all(param_names(f).size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
}

// Family-typical starting point, anchored to the observation's at-the-money
// vol level so the search begins in the right decade.
ModelInstance typical_start(ModelFamily f, const SurfaceObservation& obs, const OptionGrid& grid,
                            const FitConfig& cfg) {
    const double atm = obs.vols[grid.expiries.size() / 2][grid.moneyness.size() / 2];
    const double var = atm * atm;
    switch (f) {
        case ModelFamily::BlackScholes: return make_instance(f, {atm});
        case ModelFamily::CEV:
            return make_instance(f, {atm * std::pow(obs.spot, 0.3), 0.7});
        case ModelFamily::Heston: return make_instance(f, {3.0, var, 0.5, -0.5, var});
        case ModelFamily::SABR:
            return make_instance(
                f, {atm * std::pow(obs.spot, 1.0 - cfg.sabr_beta), cfg.sabr_beta, -0.3, 0.5});
        case ModelFamily::Bates:
            return make_instance(f, {3.0, var, 0.5, -0.5, var, 0.3, -0.05});
        case ModelFamily::Merton: return make_instance(f, {0.9 * atm, 0.3, -0.05, 0.1});
        case ModelFamily::Kou: return make_instance(f, {0.9 * atm, 1.0, 0.4, 15.0});
        case ModelFamily::VarianceGamma: return make_instance(f, {atm, -0.1, 0.2});
        case ModelFamily::NIG: {
            const double alpha = 12.0, beta = -3.0;
            const double gamma = std::sqrt(alpha * alpha - beta * beta);
            return make_instance(f, {alpha, beta, var * gamma * gamma * gamma / (alpha * alpha)});
        }
    }
    throw std::logic_error("typical_start: unknown family");
}

// ---------------------------------------------------------------------------
// Histogram term: empirical daily-return frequencies vs model bin masses.
// ---------------------------------------------------------------------------

struct ReturnHistogram {
    std::vector<double> edges;  // bins + 1 ascending edges
    std::vector<double> freq;   // empirical masses, sum 1
};

ReturnHistogram empirical_histogram(const std::vector<double>& log_prices, int bins,
                                    double span) {
    std::vector<double> r(log_prices.size() - 1);
    for (std::size_t i = 1; i < log_prices.size(); ++i) r[i - 1] = log_prices[i] - log_prices[i - 1];
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= double(r.size());
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    const double sd = std::max(std::sqrt(var / double(r.size())), 1e-8);

    ReturnHistogram h;
    h.edges.resize(bins + 1);
    const double lo = mean - span * sd, width = 2.0 * span * sd / bins;
    for (int i = 0; i <= bins; ++i) h.edges[i] = lo + i * width;
    h.freq.assign(bins, 0.0);
    for (double v : r) {
        int idx = int(std::floor((v - lo) / width));
        idx = std::clamp(idx, 0, bins - 1);
        h.freq[idx] += 1.0;
    }
    for (double& fq : h.freq) fq /= double(r.size());
    return h;
}

// Gauss-Legendre nodes/weights mapped to (0, 1), for the subordinated-clock
// CDF integrals of the pure-jump families.
const std::vector<std::pair<double, double>>& unit_gauss_nodes() {
    static const std::vector<std::pair<double, double>> nodes = [] {
        using G = boost::math::quadrature::gauss<double, 128>;
        std::vector<std::pair<double, double>> out;
        for (std::size_t i = 0; i < G::abscissa().size(); ++i) {
            const double t = G::abscissa()[i], w = G::weights()[i];
            out.emplace_back(0.5 * (1.0 + t), 0.5 * w);
            if (t != 0.0) out.emplace_back(0.5 * (1.0 - t), 0.5 * w);
        }
        return out;
    }();
    return nodes;
}

// One-day increment CDF evaluator for the fit objective. Gaussian-step
// families are exact; Merton/Bates use the Poisson mixture of Gaussians;
// Kou interpolates the tabulated CDF; VG/NIG integrate the normal CDF over
// the subordinator quantile function.
class IncrementCdf {
  public:
    IncrementCdf(const ModelInstance& m, double x0, double rate, double h) : m_(m) {
        const auto& p = m.params;
        mean_ = increment_mean(m, std::nullopt, x0, rate, h);
        switch (m.family) {
            case ModelFamily::BlackScholes:
            case ModelFamily::CEV:
            case ModelFamily::Heston:
            case ModelFamily::SABR:
                sd_ = std::sqrt(increment_variance(m, std::nullopt, x0, h));
                break;
            case ModelFamily::Merton:
            case ModelFamily::Bates: {
                const bool bates = m.family == ModelFamily::Bates;
                lam_ = bates ? p[5] : p[1];
                mu_j_ = bates ? p[6] : p[2];
                sd_j_ = bates ? std::abs(p[6]) : p[3];
                base_var_ = (bates ? p[4] : p[0] * p[0]) * h;
                base_mean_ = mean_ - lam_ * h * mu_j_;
                lam_ *= h;
                break;
            }
            case ModelFamily::Kou: {
                InversionConfig icfg;
                table_ = density_from_cf(m, h, icfg);
                rate_h_ = rate * h;
                break;
            }
            case ModelFamily::VarianceGamma: {
                const boost::math::gamma_distribution<double> clock(h / p[2], p[2]);
                for (const auto& [u, w] : unit_gauss_nodes())
                    nodes_.emplace_back(boost::math::quantile(clock, u), w);
                drift_ = p[1];
                clock_mean_ = h;
                vol_ = p[0];
                break;
            }
            case ModelFamily::NIG: {
                const double gamma = std::sqrt(p[0] * p[0] - p[1] * p[1]);
                const double dt = p[2] * h;
                const boost::math::inverse_gaussian_distribution<double> clock(dt / gamma,
                                                                               dt * dt);
                for (const auto& [u, w] : unit_gauss_nodes())
                    nodes_.emplace_back(boost::math::quantile(clock, u), w);
                drift_ = p[1];
                clock_mean_ = dt / gamma;
                vol_ = 1.0;
                break;
            }
        }
    }

    double operator()(double x) const {
        switch (m_.family) {
            case ModelFamily::BlackScholes:
            case ModelFamily::CEV:
            case ModelFamily::Heston:
            case ModelFamily::SABR:
                return norm_cdf((x - mean_) / sd_);
            case ModelFamily::Merton:
            case ModelFamily::Bates: {
                double f = 0.0, w = std::exp(-lam_);
                for (int n = 0; n <= 8; ++n) {
                    f += w * norm_cdf((x - base_mean_ - n * mu_j_) /
                                      std::sqrt(base_var_ + n * sd_j_ * sd_j_));
                    w *= lam_ / double(n + 1);
                }
                return f;
            }
            case ModelFamily::Kou: {
                const double y = x - rate_h_;
                const auto& t = *table_;
                if (y <= t.x.front()) return 0.0;
                if (y >= t.x.back()) return 1.0;
                const double s = (y - t.x.front()) / t.dx;
                const std::size_t j = std::size_t(s);
                const double fr = s - double(j);
                return std::clamp(
                    (t.cdf[j] + fr * (t.cdf[j + 1] - t.cdf[j])) / t.integral, 0.0, 1.0);
            }
            case ModelFamily::VarianceGamma:
            case ModelFamily::NIG: {
                // x - mean_ - drift*(q - E[clock]) is the centered Gaussian
                // argument given the subordinator at quantile node q.
                double f = 0.0;
                for (const auto& [q, w] : nodes_)
                    f += w * norm_cdf((x - mean_ - drift_ * (q - clock_mean_)) /
                                      (vol_ * std::sqrt(q)));
                return f;
            }
        }
        throw std::logic_error("IncrementCdf: unknown family");
    }

  private:
    ModelInstance m_;
    double mean_ = 0.0, sd_ = 0.0;
    double lam_ = 0.0, mu_j_ = 0.0, sd_j_ = 0.0, base_mean_ = 0.0, base_var_ = 0.0;
    std::optional<DensityTable> table_;
    double rate_h_ = 0.0;
    std::vector<std::pair<double, double>> nodes_;
    double drift_ = 0.0, clock_mean_ = 0.0, vol_ = 1.0;
};

double histogram_residual_for(const ModelInstance& m, const ReturnHistogram& hist, double x0,
                              double rate, double h) {
    const IncrementCdf cdf(m, x0, rate, h);
    double acc = 0.0;
    double prev = cdf(hist.edges.front());
    for (std::size_t i = 0; i + 1 < hist.edges.size(); ++i) {
        const double next = cdf(hist.edges[i + 1]);
        const double d = (next - prev) - hist.freq[i];
        acc += d * d;
        prev = next;
    }
    return acc;
}

double surface_residual_for(const ModelInstance& m, const Matrix& market_slopes,
                            const SurfaceObservation& obs, const OptionGrid& grid,
                            const FitConfig& cfg) {
    NormalizedSurface s;
    s.grid = grid;
    s.z = normalized_call_surface(m, std::nullopt, obs.spot, obs.rate, grid, cfg.pricer);
    return structured_from_slopes(strike_slopes(s, cfg.repair_tolerance), market_slopes, grid,
                                  1.0);
}

}  // namespace

FitResult least_squares_fit(ModelFamily family, const SurfaceObservation& obs,
                            const std::vector<double>& returns_window, const OptionGrid& grid,
                            const FitConfig& cfg) {
    validate(grid);
    if (returns_window.size() < 61)
        throw std::invalid_argument(
            "least_squares_fit: need >= 61 log-prices for the histogram term");
    if (obs.vols.size() != grid.expiries.size())
        throw std::invalid_argument("least_squares_fit: observation does not match the grid");

    const ReturnHistogram hist =
        empirical_histogram(returns_window, cfg.histogram_bins, cfg.histogram_span);
    const NormalizedSurface market = normalize(obs, grid, cfg.repair_tolerance);
    const Matrix market_slopes = strike_slopes(market, cfg.repair_tolerance);

    const std::vector<Warp> warps = slot_warps(family);
    const std::vector<std::size_t> active = active_slots(family);
    ModelInstance base = typical_start(family, obs, grid, cfg);

    auto decode = [&](const std::vector<double>& u) {
        ModelInstance m = base;
        for (std::size_t i = 0; i < active.size(); ++i)
            m.params[active[i]] = to_constrained(u[i], warps[active[i]]);
        return m;
    };
    auto objective = [&](const std::vector<double>& u) {
        const ModelInstance m = decode(u);
        if (!admissible(m)) return kBigObjective;
        try {
            return surface_residual_for(m, market_slopes, obs, grid, cfg) +
                   histogram_residual_for(m, hist, obs.log_price, obs.rate, kDayStep);
        } catch (const std::exception&) {
            return kBigObjective;
        }
    };

    std::vector<double> start_u(active.size());
    for (std::size_t i = 0; i < active.size(); ++i)
        start_u[i] = to_unconstrained(base.params[active[i]], warps[active[i]]);

    std::mt19937_64 rng(cfg.seed ^ fnv1a64(to_string(family) + "|" + obs.date));
    NelderMeadResult best;
    bool best_converged = false;
    for (int r = 0; r < std::max(cfg.restarts, 1); ++r) {
        std::vector<double> u = start_u;
        if (r > 0)
            for (double& v : u) v += (uniform_open01(rng) - 0.5);
        NelderMeadResult res = nelder_mead(objective, u, cfg.max_iter);
        if (res.f < best.f) {
            best = res;
            best_converged = res.iterations < cfg.max_iter;
        }
    }

    FitResult out;
    out.instance = decode(best.x);
    if (!admissible(out.instance))
        throw std::runtime_error("least_squares_fit: search ended inadmissible for " +
                                 to_string(family));
    out.surface_residual = surface_residual_for(out.instance, market_slopes, obs, grid, cfg);
    out.histogram_residual =
        histogram_residual_for(out.instance, hist, obs.log_price, obs.rate, kDayStep);
    out.objective = out.surface_residual + out.histogram_residual;
    out.converged = best_converged;
    return out;
}

CalibrationSnapshot calibrate_snapshot(const SurfaceObservation& obs,
                                       const std::vector<double>& returns_window,
                                       const OptionGrid& grid, const FitConfig& cfg) {
    CalibrationSnapshot snap;
    snap.date = obs.date;
    constexpr std::size_t n_families = std::size(kAllFamilies);
    std::vector<FitResult> results(n_families);
    std::vector<std::string> errors(n_families);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long i = 0; i < long(n_families); ++i) {
        try {
            results[i] = least_squares_fit(kAllFamilies[i], obs, returns_window, grid, cfg);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (std::size_t i = 0; i < n_families; ++i) {
        if (!errors[i].empty())
            throw std::runtime_error("calibrate_snapshot: " + to_string(kAllFamilies[i]) + ": " +
                                     errors[i]);
        snap.fits.emplace(kAllFamilies[i], std::move(results[i]));
    }
    return snap;
}

int auto_axis_points(int dims) {
    if (dims <= 0) return 2;
    const int n = int(std::floor(std::pow(4000.0, 1.0 / dims)));
    return std::clamp(n, 2, 10);
}

namespace {

// Scale-like slots get log-spaced axes; signed/shape slots stay uniform.
bool log_axis_slot(ModelFamily f, std::size_t slot) {
    switch (f) {
        case ModelFamily::BlackScholes: return true;
        case ModelFamily::CEV: return slot == 0;
        case ModelFamily::Heston: return slot != 3;
        case ModelFamily::SABR: return slot == 0 || slot == 3;
        case ModelFamily::Bates: return slot != 3 && slot != 6;
        case ModelFamily::Merton: return slot != 2;
        case ModelFamily::Kou: return slot == 0 || slot == 1 || slot == 3;
        case ModelFamily::VarianceGamma: return slot != 1;
        case ModelFamily::NIG: return slot != 1;
    }
    return false;
}

std::vector<double> axis_values(const AxisSpec& axis) {
    if (axis.high <= axis.low * (1.0 + 1e-12) && axis.high >= axis.low * (1.0 - 1e-12) &&
        std::abs(axis.high - axis.low) < 1e-12 + 1e-9 * std::abs(axis.low))
        return {axis.low};
    const int n = std::max(axis.n_points, 2);
    std::vector<double> v(n);
    if (axis.log_scale) {
        const double llo = std::log(axis.low), lhi = std::log(axis.high);
        for (int i = 0; i < n; ++i)
            v[i] = std::exp(llo + (lhi - llo) * double(i) / double(n - 1));
        v.front() = axis.low;
        v.back() = axis.high;
    } else {
        for (int i = 0; i < n; ++i)
            v[i] = axis.low + (axis.high - axis.low) * double(i) / double(n - 1);
    }
    return v;
}

}  // namespace

std::vector<AxisSpec> spanned_axes(const std::vector<CalibrationSnapshot>& snapshots,
                                   ModelFamily family, const UniverseSpec& spec) {
    if (snapshots.size() < 2)
        throw std::invalid_argument("spanned_axes: need at least two snapshots");
    const std::size_t slots = param_names(family).size();
    std::vector<AxisSpec> axes(slots);
    bool any = false;
    for (std::size_t s = 0; s < slots; ++s) {
        axes[s].low = std::numeric_limits<double>::infinity();
        axes[s].high = -std::numeric_limits<double>::infinity();
    }
    for (const auto& snap : snapshots) {
        const auto it = snap.fits.find(family);
        if (it == snap.fits.end()) continue;
        any = true;
        for (std::size_t s = 0; s < slots; ++s) {
            axes[s].low = std::min(axes[s].low, it->second.instance.params[s]);
            axes[s].high = std::max(axes[s].high, it->second.instance.params[s]);
        }
    }
    if (!any) throw std::invalid_argument("spanned_axes: no snapshot fits for " + to_string(family));

    int dims = 0;
    for (const auto& a : axes)
        if (a.high > a.low) ++dims;
    const auto over = spec.points_override.find(family);
    const int n = over != spec.points_override.end() && over->second > 0 ? over->second
                                                                         : auto_axis_points(dims);
    for (std::size_t s = 0; s < slots; ++s) {
        axes[s].n_points = n;
        axes[s].log_scale = log_axis_slot(family, s) && axes[s].low > 0.0;
    }
    return axes;
}

std::vector<ModelInstance> span_grid(const std::vector<CalibrationSnapshot>& snapshots,
                                     const UniverseSpec& spec) {
    std::vector<ModelInstance> out;
    for (ModelFamily family : kAllFamilies) {
        bool have = false;
        for (const auto& snap : snapshots) have = have || snap.fits.count(family) > 0;
        if (!have) continue;
        const std::vector<AxisSpec> axes = spanned_axes(snapshots, family, spec);
        std::vector<std::vector<double>> values;
        values.reserve(axes.size());
        for (const auto& a : axes) values.push_back(axis_values(a));

        std::vector<std::size_t> idx(axes.size(), 0);
        std::size_t admissible_count = 0;
        while (true) {
            std::vector<double> params(axes.size());
            for (std::size_t s = 0; s < axes.size(); ++s) params[s] = values[s][idx[s]];
            ModelInstance m{family, params};
            if (admissible(m)) {
                out.push_back(std::move(m));
                ++admissible_count;
            }
            // odometer increment, last axis fastest
            std::size_t s = axes.size();
            while (s > 0) {
                --s;
                if (++idx[s] < values[s].size()) break;
                idx[s] = 0;
                if (s == 0) goto done_family;
            }
        }
    done_family:
        if (admissible_count == 0)
            throw std::runtime_error("span_grid: every " + to_string(family) +
                                     " combination is inadmissible");
    }
    return out;
}

std::string instance_id(const ModelInstance& m) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(serialize(m))));
    return buf;
}

PruneResult prune(const std::vector<ModelInstance>& candidates,
                  const std::vector<SurfaceObservation>& data, const OptionGrid& grid,
                  const UniverseSpec& spec, const EngineConfig& engine_cfg) {
    if (candidates.empty()) throw std::invalid_argument("prune: empty candidate list");
    if (data.size() < 2) throw std::invalid_argument("prune: need at least two observations");

    PruneResult out;
    std::vector<char> keep(candidates.size(), 0);
    for (ModelFamily family : kAllFamilies) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < candidates.size(); ++i)
            if (candidates[i].family == family) members.push_back(i);
        if (members.empty()) continue;

        std::vector<ModelInstance> sub;
        sub.reserve(members.size());
        for (std::size_t i : members) sub.push_back(candidates[i]);
        // Spanned combinations whose evaluators cannot be built are dropped
        // from the universe the same way inadmissible ones never enter it.
        EngineConfig cfg = engine_cfg;
        cfg.drop_unpriceable = true;
        Engine engine(sub, grid, cfg);
        if (engine.universe().size() != sub.size()) {
            std::vector<std::size_t> alive;
            alive.reserve(engine.universe().size());
            std::size_t j = 0;
            for (std::size_t i = 0; i < sub.size() && j < engine.universe().size(); ++i)
                if (serialize(sub[i]) == serialize(engine.universe()[j])) {
                    alive.push_back(members[i]);
                    ++j;
                }
            members = std::move(alive);
            sub.assign(engine.universe().begin(), engine.universe().end());
        }
        LikelihoodState state = engine.init();

        // gap_i = min over dates of (best ell that date - ell_i); attainers
        // of a per-date maximum end up with gap 0.
        std::vector<double> gap(members.size(), std::numeric_limits<double>::infinity());
        for (std::size_t t = 1; t < data.size(); ++t) {
            state = engine.step(state, data[t - 1], data[t]);
            std::size_t best = 0;
            for (std::size_t i = 1; i < state.ell.size(); ++i)
                if (state.ell[i] > state.ell[best]) best = i;
            for (std::size_t i = 0; i < state.ell.size(); ++i)
                gap[i] = std::min(gap[i], state.ell[best] - state.ell[i]);
            out.log.push_back(
                {data[t].date, family, instance_id(sub[best]), state.ell[best]});
        }

        const std::size_t target = std::size_t(std::max(spec.max_per_family, 1));
        auto count_within = [&](double d) {
            std::size_t c = 0;
            for (double g : gap)
                if (g <= d) ++c;
            return c;
        };
        double dist;
        if (members.size() <= target) {
            dist = *std::max_element(gap.begin(), gap.end());
        } else {
            double lo = 0.0, hi = *std::max_element(gap.begin(), gap.end());
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (count_within(mid) > target) hi = mid;
                else lo = mid;
            }
            dist = lo;
        }
        out.distance[family] = dist;
        for (std::size_t i = 0; i < members.size(); ++i)
            if (gap[i] <= dist) keep[members[i]] = 1;
    }
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (keep[i]) out.kept.push_back(candidates[i]);
    return out;
}

}  // namespace modelmix
