#include "modelmix/backtest.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/inverse_gaussian.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include "modelmix/black_scholes.hpp"
#include "modelmix/density.hpp"
#include "modelmix/engine.hpp"
#include "modelmix/numerics.hpp"
#include "modelmix/penalty.hpp"
#include "modelmix/pricing.hpp"
#include "modelmix/products.hpp"

namespace modelmix {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void config_error(const std::string& path, std::size_t line,
                               const std::string& what) {
    throw std::invalid_argument(path + ":" + std::to_string(line) + ": " + what);
}

double to_double(const std::string& v, const std::string& path, std::size_t line) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        config_error(path, line, "not a number: '" + v + "'");
    }
}

long to_long(const std::string& v, const std::string& path, std::size_t line) {
    try {
        std::size_t used = 0;
        const long n = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        config_error(path, line, "not an integer: '" + v + "'");
    }
}

bool to_bool(const std::string& v, const std::string& path, std::size_t line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    config_error(path, line, "not a boolean (true/false): '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> to_double_list(const std::string& v, const std::string& path,
                                   std::size_t line) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(to_double(item, path, line));
    if (out.empty()) config_error(path, line, "empty list");
    return out;
}

// Proleptic-Gregorian civil-date arithmetic (Howard Hinnant's algorithms) so
// the synthetic generator can emit valid consecutive ISO dates.
long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

std::string civil_from_days(long z) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04ld-%02u-%02u", y + (m <= 2), m, d);
    return buf;
}

}  // namespace

OptionGrid Config::grid() const {
    OptionGrid g;
    if (!expiries.empty()) g.expiries = expiries;
    if (!moneyness.empty()) g.moneyness = moneyness;
    validate(g);
    return g;
}

Config parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    Config cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) config_error(path, lineno, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) config_error(path, lineno, "empty key");
        if (value.empty()) config_error(path, lineno, "empty value for key '" + key + "'");
        if (cfg.raw.count(key)) config_error(path, lineno, "duplicate key '" + key + "'");
        cfg.raw[key] = value;

        if (key == "data") cfg.data_file = value;
        else if (key == "expiries") cfg.expiries = to_double_list(value, path, lineno);
        else if (key == "moneyness") cfg.moneyness = to_double_list(value, path, lineno);
        else if (key == "repair_tolerance") cfg.repair_tolerance = to_double(value, path, lineno);
        else if (key == "universe") cfg.universe_file = value;
        else if (key == "beta") cfg.beta = to_double(value, path, lineno);
        else if (key == "lambda") cfg.lambda = to_double(value, path, lineno);
        else if (key == "lambda_auto") cfg.lambda_auto = to_bool(value, path, lineno);
        else if (key == "training_days") cfg.training_days = int(to_long(value, path, lineno));
        else if (key == "modes") {
            cfg.modes = split_list(value);
            for (const auto& m : cfg.modes) mode_from_string(m);  // validates
            if (cfg.modes.empty()) config_error(path, lineno, "empty mode list");
        } else if (key == "write_products") cfg.write_products = to_bool(value, path, lineno);
        else if (key == "product_weight_floor")
            cfg.product_weight_floor = to_double(value, path, lineno);
        else if (key == "gnuplot") cfg.gnuplot = to_bool(value, path, lineno);
        else if (key == "universe_out") cfg.universe_out = value;
        else if (key == "prune_log") cfg.prune_log = value;
        else if (key == "snapshot_count") cfg.snapshot_count = int(to_long(value, path, lineno));
        else if (key == "snapshot_dates") cfg.snapshot_dates = split_list(value);
        else if (key == "max_per_family") cfg.max_per_family = int(to_long(value, path, lineno));
        else if (key == "fit_iterations") cfg.fit_iterations = int(to_long(value, path, lineno));
        else if (key == "fit_restarts") cfg.fit_restarts = int(to_long(value, path, lineno));
        else if (key == "fit_seed")
            cfg.fit_seed = std::uint64_t(to_long(value, path, lineno));
        else config_error(path, lineno, "unknown key '" + key + "'");
    }
    if (cfg.beta < 0.0 || cfg.beta > 1.0)
        throw std::invalid_argument(path + ": beta must lie in [0, 1]");
    if (cfg.lambda < 0.0) throw std::invalid_argument(path + ": lambda must be >= 0");
    return cfg;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

namespace {

// One-step increment sampler; consumes a fixed number of uniforms per call so
// paths are reproducible across platforms.
class IncrementSampler {
  public:
    IncrementSampler(const ModelInstance& m, double h) : m_(m), h_(h) {
        if (uses_density_table(m.family)) table_ = density_from_cf(m, h);
        if (m.family == ModelFamily::VarianceGamma)
            clock_.emplace(Clock{m.params[2], h / m.params[2]});
        if (m.family == ModelFamily::NIG) {
            const double gamma = std::sqrt(m.params[0] * m.params[0] - m.params[1] * m.params[1]);
            const double dt = m.params[2] * h;
            clock_.emplace(Clock{dt / gamma, dt * dt});
        }
    }

    double operator()(double x0, double rate, std::mt19937_64& rng) const {
        const double mean = increment_mean(m_, std::nullopt, x0, rate, h_);
        switch (m_.family) {
            case ModelFamily::BlackScholes:
            case ModelFamily::CEV:
            case ModelFamily::Heston:
            case ModelFamily::SABR: {
                const double sd = std::sqrt(increment_variance(m_, std::nullopt, x0, h_));
                return mean + sd * normal_draw(rng);
            }
            case ModelFamily::Merton:
            case ModelFamily::Kou:
            case ModelFamily::Bates:
                return rate * h_ + table_->sample(uniform_open01(rng));
            case ModelFamily::VarianceGamma: {
                const boost::math::gamma_distribution<double> g(h_ / m_.params[2], m_.params[2]);
                const double q = boost::math::quantile(g, uniform_open01(rng));
                return mean + m_.params[1] * (q - h_) +
                       m_.params[0] * std::sqrt(q) * normal_draw(rng);
            }
            case ModelFamily::NIG: {
                const boost::math::inverse_gaussian_distribution<double> ig(clock_->mean,
                                                                            clock_->shape);
                const double q = boost::math::quantile(ig, uniform_open01(rng));
                return mean + m_.params[1] * (q - clock_->mean) + std::sqrt(q) * normal_draw(rng);
            }
        }
        throw std::logic_error("IncrementSampler: unknown family");
    }

  private:
    struct Clock {
        double mean = 0.0, shape = 0.0;
    };
    ModelInstance m_;
    double h_;
    std::optional<DensityTable> table_;
    std::optional<Clock> clock_;
};

}  // namespace

void generate_synthetic(const ModelInstance& m, const SynthConfig& cfg,
                        const std::string& out_path) {
    if (!admissible(m))
        throw std::invalid_argument("generate_synthetic: inadmissible instance " + serialize(m));
    if (cfg.days < 1) throw std::invalid_argument("generate_synthetic: days must be >= 1");
    if (cfg.noise < 0.0) throw std::invalid_argument("generate_synthetic: negative noise");
    if (!(cfg.spot0 > 0.0)) throw std::invalid_argument("generate_synthetic: spot0 must be > 0");
    const OptionGrid& grid = cfg.grid;
    validate(grid);

    std::mt19937_64 rng(cfg.seed);
    const IncrementSampler sampler(m, kDayStep);

    std::vector<double> x(cfg.days);
    x[0] = std::log(cfg.spot0);
    for (long t = 1; t < cfg.days; ++t) x[t] = x[t - 1] + sampler(x[t - 1], cfg.rate, rng);

    const long day0 = days_from_civil(2015, 1, 2);
    // The normalized surface of a scale-invariant family is the same every
    // day (the rate is flat), so it is priced once outside the loop.
    std::optional<Matrix> fixed_z;
    if (is_scale_invariant(m.family))
        fixed_z = normalized_call_surface(m, std::nullopt, cfg.spot0, cfg.rate, grid,
                                          PricerConfig{});
    std::vector<SurfaceObservation> series(cfg.days);
    for (long t = 0; t < cfg.days; ++t) {
        SurfaceObservation& obs = series[t];
        obs.date = civil_from_days(day0 + t);
        obs.log_price = x[t];
        obs.spot = std::exp(x[t]);
        obs.rate = cfg.rate;
        const Matrix z = fixed_z ? *fixed_z
                                 : normalized_call_surface(m, std::nullopt, obs.spot, cfg.rate,
                                                           grid, PricerConfig{});
        obs.vols.assign(grid.expiries.size(), std::vector<double>(grid.moneyness.size(), 0.0));
        for (std::size_t i = 0; i < grid.expiries.size(); ++i)
            for (std::size_t j = 0; j < grid.moneyness.size(); ++j) {
                double vol;
                try {
                    vol = normalized_implied_vol(z[i][j + 1], grid.moneyness[j]) /
                          std::sqrt(grid.expiries[i]);
                } catch (const std::exception& e) {
                    throw std::runtime_error(
                        "generate_synthetic: implied-vol inversion failed at date " + obs.date +
                        " expiry " + fmt(grid.expiries[i]) + " moneyness " +
                        fmt(grid.moneyness[j]) + ": " + e.what());
                }
                vol += cfg.noise * normal_draw(rng);
                obs.vols[i][j] = std::max(vol, 1e-4);
            }
    }
    write_series(out_path, series, grid);
}

// ---------------------------------------------------------------------------
// Universe construction
// ---------------------------------------------------------------------------

std::vector<ModelInstance> build_universe(const Config& cfg) {
    if (cfg.data_file.empty()) throw std::invalid_argument("build_universe: 'data' not set");
    if (cfg.universe_out.empty())
        throw std::invalid_argument("build_universe: 'universe_out' not set");
    const OptionGrid grid = cfg.grid();
    std::vector<std::string> warnings;
    const std::vector<SurfaceObservation> data = load_series(cfg.data_file, grid, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    if (data.size() < 2)
        throw std::runtime_error("build_universe: need at least two observations");

    // Snapshot selection: explicit dates, else evenly spaced through the data.
    std::vector<std::size_t> snap_idx;
    if (!cfg.snapshot_dates.empty()) {
        for (const auto& d : cfg.snapshot_dates) {
            const auto it = std::find_if(data.begin(), data.end(),
                                         [&](const auto& o) { return o.date == d; });
            if (it == data.end())
                throw std::invalid_argument("build_universe: snapshot date " + d +
                                            " not present in the data");
            snap_idx.push_back(std::size_t(it - data.begin()));
        }
    } else {
        const int n = std::max(cfg.snapshot_count, 2);
        for (int i = 0; i < n; ++i)
            snap_idx.push_back(std::size_t(std::llround(double(i) * double(data.size() - 1) /
                                                        double(n - 1))));
    }
    std::sort(snap_idx.begin(), snap_idx.end());
    snap_idx.erase(std::unique(snap_idx.begin(), snap_idx.end()), snap_idx.end());
    if (snap_idx.size() < 2)
        throw std::invalid_argument("build_universe: need at least two distinct snapshots");

    std::vector<double> log_prices;
    log_prices.reserve(data.size());
    for (const auto& obs : data) log_prices.push_back(obs.log_price);

    FitConfig fit;
    fit.max_iter = cfg.fit_iterations;
    fit.restarts = cfg.fit_restarts;
    fit.seed = cfg.fit_seed;
    fit.repair_tolerance = cfg.repair_tolerance;

    std::vector<CalibrationSnapshot> snapshots;
    for (std::size_t idx : snap_idx)
        snapshots.push_back(calibrate_snapshot(data[idx], log_prices, grid, fit));

    UniverseSpec spec;
    spec.max_per_family = cfg.max_per_family;
    const std::vector<ModelInstance> candidates = span_grid(snapshots, spec);

    EngineConfig prune_cfg;
    prune_cfg.repair_tolerance = cfg.repair_tolerance;
    const PruneResult pruned = prune(candidates, data, grid, spec, prune_cfg);

    std::ofstream out(cfg.universe_out);
    if (!out) throw std::runtime_error("cannot write universe file: " + cfg.universe_out);
    for (const auto& snap : snapshots) out << "# snapshot " << snap.date << "\n";
    for (const auto& inst : pruned.kept) out << serialize(inst) << "\n";
    out.close();

    const std::string log_path =
        cfg.prune_log.empty() ? cfg.universe_out + ".prunelog.csv" : cfg.prune_log;
    std::ofstream log(log_path);
    if (!log) throw std::runtime_error("cannot write prune log: " + log_path);
    log << "date,family,best_instance_id,ell_best\n";
    for (const auto& row : pruned.log)
        log << row.date << ',' << to_string(row.family) << ',' << row.best_instance_id << ','
            << fmt(row.ell_best) << "\n";
    return pruned.kept;
}

std::vector<std::string> universe_snapshot_dates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open universe file: " + path);
    std::vector<std::string> dates;
    std::string line;
    while (std::getline(in, line)) {
        const std::string prefix = "# snapshot ";
        if (line.rfind(prefix, 0) == 0) dates.push_back(trim(line.substr(prefix.size())));
    }
    return dates;
}

std::string universe_hash(const std::vector<ModelInstance>& universe) {
    std::string joined;
    for (const auto& m : universe) {
        joined += serialize(m);
        joined += '\n';
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(joined)));
    return buf;
}

// ---------------------------------------------------------------------------
// Backtest run
// ---------------------------------------------------------------------------

namespace {

struct ModeOutputs {
    Mode mode;
    LikelihoodState state;
    std::ofstream posterior_csv;
    std::ofstream family_csv;
    std::ofstream products_csv;
};

void write_gnuplot_script(const std::string& out_dir, const std::vector<std::string>& modes,
                          const std::vector<ModelFamily>& families) {
    std::ofstream gp(out_dir + "/plots.gp");
    gp << "# Family posterior weights per mode; run: gnuplot plots.gp\n"
       << "set datafile separator ','\n"
       << "set key outside\nset yrange [0:1]\nset xtics rotate by -45\n"
       << "set terminal pngcairo size 1200,700\n";
    for (const auto& mode : modes) {
        gp << "set output 'by_family_" << mode << ".png'\n"
           << "set title 'Posterior by family - " << mode << "'\n"
           << "plot ";
        for (std::size_t i = 0; i < families.size(); ++i)
            gp << (i ? ", " : "") << "'by_family_" << mode << ".csv' using "
               << i + 2 << ":xtic(int($0) % 50 == 0 ? strcol(1) : '') with lines title '"
               << to_string(families[i]) << "'";
        gp << "\n";
    }
}

}  // namespace

void run_backtest(const Config& cfg, const std::string& out_dir) {
    if (cfg.data_file.empty()) throw std::invalid_argument("run_backtest: 'data' not set");
    if (cfg.universe_file.empty()) throw std::invalid_argument("run_backtest: 'universe' not set");
    const OptionGrid grid = cfg.grid();

    std::vector<std::string> warnings;
    const std::vector<SurfaceObservation> data = load_series(cfg.data_file, grid, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    const std::vector<ModelInstance> universe = load_universe(cfg.universe_file);
    const std::vector<std::string> snapshot_dates = universe_snapshot_dates(cfg.universe_file);

    double lambda = cfg.lambda;
    LambdaDiagnostics lambda_diag;
    if (cfg.lambda_auto) {
        const std::size_t train = std::min<std::size_t>(std::size_t(cfg.training_days) + 1,
                                                        data.size());
        lambda = calibrate_lambda({data.begin(), data.begin() + train}, universe, grid, false,
                                  &lambda_diag);
    }

    EngineConfig ecfg;
    ecfg.beta = cfg.beta;
    ecfg.lambda = lambda;
    ecfg.repair_tolerance = cfg.repair_tolerance;
    const Engine engine(universe, grid, ecfg);

    std::vector<ModelFamily> families;
    for (ModelFamily f : kAllFamilies)
        if (std::any_of(universe.begin(), universe.end(),
                        [&](const auto& m) { return m.family == f; }))
            families.push_back(f);
    std::vector<std::string> ids, family_names;
    for (const auto& m : universe) {
        ids.push_back(instance_id(m));
        family_names.push_back(to_string(m.family));
    }

    std::filesystem::create_directories(out_dir);
    std::vector<ModeOutputs> runs;
    for (const auto& mode_name : cfg.modes) {
        ModeOutputs mo;
        mo.mode = mode_from_string(mode_name);
        mo.state = engine.init();
        mo.state.config.mode = mo.mode;
        mo.posterior_csv.open(out_dir + "/posterior_" + mode_name + ".csv");
        mo.posterior_csv << "date,instance_id,family,ell,weight\n";
        mo.family_csv.open(out_dir + "/by_family_" + mode_name + ".csv");
        mo.family_csv << "date";
        for (ModelFamily f : families) mo.family_csv << ',' << to_string(f);
        mo.family_csv << "\n";
        if (cfg.write_products) {
            mo.products_csv.open(out_dir + "/products_" + mode_name + ".csv");
            mo.products_csv << "date,expiry,moneyness,mixture_price,q10,q90,mixture_delta\n";
        }
        runs.push_back(std::move(mo));
    }

    const std::size_t n = universe.size();
    std::vector<Matrix> prices(n), deltas(n);
    auto emit = [&](std::size_t t) {
        std::vector<Posterior> posts;
        posts.reserve(runs.size());
        for (auto& mo : runs) posts.push_back(engine.posterior(mo.state));

        std::vector<char> active(n, 0);
        if (cfg.write_products) {
            for (const auto& post : posts)
                for (std::size_t j = 0; j < n; ++j)
                    if (post.weights[j] >= cfg.product_weight_floor) active[j] = 1;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
            for (long j = 0; j < long(n); ++j) {
                if (!active[j]) continue;
                prices[j] = price_surface(universe[j], std::nullopt, data[t].spot, data[t].rate,
                                          grid, ecfg.pricer);
                deltas[j] = delta_surface(universe[j], std::nullopt, data[t].spot, data[t].rate,
                                          grid, ecfg.pricer);
            }
        }

        for (std::size_t r = 0; r < runs.size(); ++r) {
            auto& mo = runs[r];
            const Posterior& post = posts[r];
            for (std::size_t j = 0; j < n; ++j)
                mo.posterior_csv << data[t].date << ',' << ids[j] << ',' << family_names[j]
                                 << ',' << fmt(mo.state.ell[j]) << ',' << fmt(post.weights[j])
                                 << "\n";
            mo.family_csv << data[t].date;
            for (ModelFamily f : families) mo.family_csv << ',' << fmt(post.by_family.at(f));
            mo.family_csv << "\n";
            if (!cfg.write_products) continue;
            std::vector<double> cell_price(n, 0.0), cell_delta(n, 0.0);
            for (std::size_t i = 0; i < grid.expiries.size(); ++i)
                for (std::size_t k = 0; k < grid.moneyness.size(); ++k) {
                    for (std::size_t j = 0; j < n; ++j) {
                        cell_price[j] = active[j] ? prices[j][i][k] : 0.0;
                        cell_delta[j] = active[j] ? deltas[j][i][k] : 0.0;
                    }
                    const PriceDistribution dist = mixture_price(post, cell_price);
                    mo.products_csv << data[t].date << ',' << fmt(grid.expiries[i]) << ','
                                    << fmt(grid.moneyness[k]) << ',' << fmt(dist.mean) << ','
                                    << fmt(dist.quantile(0.10)) << ',' << fmt(dist.quantile(0.90))
                                    << ',' << fmt(mixture_delta(post, cell_delta)) << "\n";
                }
        }
    };

    emit(0);
    for (std::size_t t = 1; t < data.size(); ++t) {
        const DayComponents dc = engine.day_components(data[t - 1], data[t]);
        for (auto& mo : runs) mo.state = Engine::advance(mo.state, dc);
        emit(t);
    }

    nlohmann::ordered_json manifest;
    manifest["version"] = kVersion;
    manifest["config"] = cfg.raw;
    nlohmann::ordered_json resolved;
    resolved["beta"] = cfg.beta;
    resolved["lambda"] = lambda;
    resolved["lambda_auto"] = cfg.lambda_auto;
    if (cfg.lambda_auto) {
        resolved["lambda_mean_abs_log_density"] = lambda_diag.mean_abs_log_density;
        resolved["lambda_mean_unit_penalty"] = lambda_diag.mean_unit_penalty;
    }
    resolved["h"] = kDayStep;
    resolved["modes"] = cfg.modes;
    resolved["repair_tolerance"] = cfg.repair_tolerance;
    resolved["expiries"] = grid.expiries;
    resolved["moneyness"] = grid.moneyness;
    if (cfg.write_products) resolved["product_weight_floor"] = cfg.product_weight_floor;
    manifest["resolved"] = std::move(resolved);
    nlohmann::ordered_json uni;
    uni["file"] = cfg.universe_file;
    uni["hash"] = universe_hash(universe);
    uni["instances"] = universe.size();
    uni["snapshot_dates"] = snapshot_dates;
    manifest["universe"] = std::move(uni);
    nlohmann::ordered_json dataj;
    dataj["file"] = cfg.data_file;
    dataj["first_date"] = data.front().date;
    dataj["last_date"] = data.back().date;
    dataj["days"] = data.size();
    manifest["data"] = std::move(dataj);
    std::ofstream mf(out_dir + "/manifest.json");
    mf << manifest.dump(2) << "\n";

    if (cfg.gnuplot) write_gnuplot_script(out_dir, cfg.modes, families);
}

}  // namespace modelmix
