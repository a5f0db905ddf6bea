// Day-update kernel benchmark: OpenMP fan-out vs the serial reference that
// the tests hold it to. The two paths must agree bitwise; the table reports
// per-day timings and the speedup on this machine.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "modelmix/engine.hpp"
#include "modelmix/market_data.hpp"
#include "modelmix/models.hpp"

using namespace modelmix;

namespace {

SurfaceObservation flat_observation(const OptionGrid& grid, const std::string& date,
                                    double spot, double vol) {
    SurfaceObservation obs;
    obs.date = date;
    obs.spot = spot;
    obs.rate = 0.02;
    obs.log_price = std::log(spot);
    obs.vols.assign(grid.expiries.size(),
                    std::vector<double>(grid.moneyness.size(), vol));
    return obs;
}

std::vector<ModelInstance> bench_universe(int replicas) {
    // One seed instance per family, replicated with small parameter tilts so
    // the fan-out has realistic per-instance work (tables, COS sweeps).
    std::vector<ModelInstance> seeds = {
        make_instance(ModelFamily::BlackScholes, {0.2}),
        make_instance(ModelFamily::CEV, {0.8, 0.7}),
        make_instance(ModelFamily::Heston, {3.0, 0.04, 0.5, -0.6, 0.04}),
        make_instance(ModelFamily::SABR, {1.6, 0.5, -0.3, 0.6}),
        make_instance(ModelFamily::Bates, {3.0, 0.04, 0.5, -0.6, 0.04, 0.3, -0.05}),
        make_instance(ModelFamily::Merton, {0.18, 0.4, -0.06, 0.12}),
        make_instance(ModelFamily::Kou, {0.18, 0.8, 0.45, 18.0}),
        make_instance(ModelFamily::VarianceGamma, {0.2, -0.12, 0.25}),
        make_instance(ModelFamily::NIG, {10.0, -3.0, 0.3}),
    };
    std::vector<ModelInstance> out;
    for (int r = 0; r < replicas; ++r)
        for (ModelInstance m : seeds) {
            m.params[0] *= 1.0 + 0.01 * r;
            if (admissible(m)) out.push_back(std::move(m));
        }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    const int replicas = argc > 1 ? std::atoi(argv[1]) : 40;
    const int reps = argc > 2 ? std::atoi(argv[2]) : 5;
    const OptionGrid grid;
    const std::vector<ModelInstance> universe = bench_universe(replicas);

    EngineConfig cfg;
    const Engine engine(universe, grid, cfg);
    const SurfaceObservation prev = flat_observation(grid, "2015-01-02", 100.0, 0.2);
    const SurfaceObservation curr = flat_observation(grid, "2015-01-03", 101.0, 0.21);

    // Warm-up also provides the reference for the identity check.
    const DayComponents serial_dc = engine.day_components_serial(prev, curr);
    const DayComponents parallel_dc = engine.day_components(prev, curr);
    bool identical = serial_dc.log_p == parallel_dc.log_p &&
                     serial_dc.unit_q == parallel_dc.unit_q;

    auto time_ms = [&](auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < reps; ++i) fn();
        const auto t1 = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
    };
    const double serial_ms = time_ms([&] { engine.day_components_serial(prev, curr); });
    const double parallel_ms = time_ms([&] { engine.day_components(prev, curr); });

    std::printf("instances        %zu\n", universe.size());
    std::printf("serial           %9.3f ms/day\n", serial_ms);
    std::printf("parallel         %9.3f ms/day\n", parallel_ms);
    std::printf("speedup          %9.2fx\n", serial_ms / parallel_ms);
    std::printf("bitwise match    %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
}
