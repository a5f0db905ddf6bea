#include "modelmix/market_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "modelmix/black_scholes.hpp"
#include "modelmix/numerics.hpp"

namespace modelmix {

void validate(const OptionGrid& grid) {
    auto check_axis = [](const std::vector<double>& axis, const char* name) {
        if (axis.empty()) throw std::invalid_argument(std::string("OptionGrid: empty ") + name);
        double prev = 0.0;
        for (double v : axis) {
            if (!(v > prev))
                throw std::invalid_argument(std::string("OptionGrid: ") + name +
                                            " must be positive and strictly increasing");
            prev = v;
        }
    };
    check_axis(grid.expiries, "expiries");
    check_axis(grid.moneyness, "moneyness");
}

bool grids_equal(const OptionGrid& a, const OptionGrid& b) {
    return a.expiries == b.expiries && a.moneyness == b.moneyness;
}

double vol_to_price(double vol, double spot, double strike, double expiry, double rate) {
    if (!(vol > 0.0) || !(spot > 0.0) || !(strike > 0.0) || !(expiry > 0.0))
        throw std::invalid_argument("vol_to_price: vol, spot, strike and expiry must be > 0");
    return black_scholes_call(spot, strike, vol, expiry, rate);
}

namespace {

bool iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

double parse_number(const std::string& field, const std::string& what, std::size_t line_no) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != field.size() || !std::isfinite(v))
        throw std::runtime_error("load_series: bad " + what + " '" + field + "' at line " +
                                 std::to_string(line_no));
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Grid-node lookup with tolerance for decimal round-tripping.
long axis_index(const std::vector<double>& axis, double v) {
    for (std::size_t i = 0; i < axis.size(); ++i)
        if (std::abs(v - axis[i]) <= 1e-8 * std::max(1.0, std::abs(axis[i]))) return long(i);
    return -1;
}

struct PendingDate {
    double spot = 0.0;
    double rate = 0.0;
    Matrix vols;
    std::vector<std::vector<bool>> seen;
    std::size_t filled = 0;
};

}  // namespace

std::vector<SurfaceObservation> load_series(const std::string& path, const OptionGrid& grid,
                                            std::vector<std::string>* warnings) {
    validate(grid);
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_series: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_series: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_csv(line) != std::vector<std::string>{"date", "spot", "rate", "expiry",
                                                    "moneyness", "vol"})
        throw std::runtime_error("load_series: expected header date,spot,rate,expiry,moneyness,vol");

    std::map<std::string, PendingDate> by_date;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 6)
            throw std::runtime_error("load_series: expected 6 fields at line " +
                                     std::to_string(line_no));
        const std::string& date = f[0];
        if (!iso_date(date))
            throw std::runtime_error("load_series: bad date '" + date + "' at line " +
                                     std::to_string(line_no));
        const double spot = parse_number(f[1], "spot", line_no);
        const double rate = parse_number(f[2], "rate", line_no);
        const double expiry = parse_number(f[3], "expiry", line_no);
        const double mny = parse_number(f[4], "moneyness", line_no);
        const double vol = parse_number(f[5], "vol", line_no);
        if (!(spot > 0.0))
            throw std::runtime_error("load_series: non-positive spot at line " +
                                     std::to_string(line_no));
        if (!(vol > 0.0))
            throw std::runtime_error("load_series: non-positive vol at line " +
                                     std::to_string(line_no));

        const long mi = axis_index(grid.expiries, expiry);
        const long ji = axis_index(grid.moneyness, mny);
        if (mi < 0 || ji < 0)
            throw std::runtime_error("load_series: (expiry, moneyness) off the grid at line " +
                                     std::to_string(line_no));

        auto [it, fresh] = by_date.try_emplace(date);
        PendingDate& pd = it->second;
        if (fresh) {
            pd.spot = spot;
            pd.rate = rate;
            pd.vols.assign(grid.expiries.size(), std::vector<double>(grid.moneyness.size(), 0.0));
            pd.seen.assign(grid.expiries.size(),
                           std::vector<bool>(grid.moneyness.size(), false));
        } else if (pd.spot != spot || pd.rate != rate) {
            throw std::runtime_error("load_series: inconsistent spot/rate for " + date +
                                     " at line " + std::to_string(line_no));
        }
        if (pd.seen[mi][ji])
            throw std::runtime_error("load_series: duplicate cell for " + date + " at line " +
                                     std::to_string(line_no));
        pd.seen[mi][ji] = true;
        pd.vols[mi][ji] = vol;
        ++pd.filled;
    }

    std::vector<SurfaceObservation> series;
    for (auto& [date, pd] : by_date) {
        if (pd.filled != grid.instrument_count()) {
            if (warnings)
                warnings->push_back("load_series: dropping " + date + " (" +
                                    std::to_string(pd.filled) + " of " +
                                    std::to_string(grid.instrument_count()) + " cells)");
            continue;
        }
        SurfaceObservation obs;
        obs.date = date;
        obs.spot = pd.spot;
        obs.rate = pd.rate;
        obs.vols = std::move(pd.vols);
        obs.log_price = std::log(pd.spot);
        series.push_back(std::move(obs));
    }
    // std::map already iterates dates in ascending (ISO-8601 = lexicographic) order.
    return series;
}

void write_series(const std::string& path, const std::vector<SurfaceObservation>& series,
                  const OptionGrid& grid) {
    validate(grid);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_series: cannot open " + path);
    out << "date,spot,rate,expiry,moneyness,vol\n";
    char buf[512];
    for (const auto& obs : series) {
        for (std::size_t m = 0; m < grid.expiries.size(); ++m)
            for (std::size_t j = 0; j < grid.moneyness.size(); ++j) {
                std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                              obs.date.c_str(), obs.spot, obs.rate, grid.expiries[m],
                              grid.moneyness[j], obs.vols[m][j]);
                out << buf;
            }
    }
    if (!out) throw std::runtime_error("write_series: write failed for " + path);
}

NormalizedSurface normalize(const SurfaceObservation& obs, const OptionGrid& grid,
                            double repair_tolerance) {
    validate(grid);
    if (obs.vols.size() != grid.expiries.size())
        throw std::invalid_argument("normalize: vol matrix does not match the grid");
    NormalizedSurface s;
    s.grid = grid;
    s.z.assign(grid.expiries.size(), std::vector<double>(grid.moneyness.size() + 1, 1.0));
    for (std::size_t m = 0; m < grid.expiries.size(); ++m) {
        if (obs.vols[m].size() != grid.moneyness.size())
            throw std::invalid_argument("normalize: vol matrix does not match the grid");
        const double tau = grid.expiries[m];
        auto& row = s.z[m];
        for (std::size_t j = 0; j < grid.moneyness.size(); ++j) {
            const double vol = obs.vols[m][j];
            if (!(vol > 0.0) || !std::isfinite(vol))
                throw std::invalid_argument("normalize: non-positive vol at expiry " +
                                            std::to_string(tau));
            row[j + 1] = black_normalized_call(grid.moneyness[j], vol * std::sqrt(tau));
        }
        // Monotonicity repair: small upticks are quote noise, large ones data errors.
        double worst = 0.0;
        for (std::size_t j = 0; j + 1 < row.size(); ++j)
            worst = std::max(worst, row[j + 1] - row[j]);
        if (worst > repair_tolerance)
            throw std::runtime_error("normalize: monotonicity violation " +
                                     std::to_string(worst) + " exceeds repair tolerance");
        if (worst > 1e-6) project_non_increasing(row);
        // Slope floor dz/dk >= -1 (call spreads cannot exceed the strike gap),
        // restoring the distribution-tail reading of the slopes.
        for (std::size_t j = 1; j < row.size(); ++j) {
            const double floor_v = row[j - 1] - (s.k(j) - s.k(j - 1));
            if (row[j] < floor_v) row[j] = floor_v;
            if (row[j] < 0.0) row[j] = 0.0;
            if (row[j] > 1.0) row[j] = 1.0;
        }
    }
    return s;
}

}  // namespace modelmix
