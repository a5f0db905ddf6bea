#pragma once

// Small numerical utilities shared across the library.
// Everything here is deterministic: no hidden state, no wall clock.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace modelmix {

// Overflow-safe log(sum(exp(v))) via max subtraction.
// Invariant under a common shift of all entries (up to rounding).
inline double log_sum_exp(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;  // all -inf stays -inf
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - m);
    return m + std::log(sum);
}

// softmax(v)[i] = exp(v_i) / sum_j exp(v_j), computed with max subtraction.
// Output sums to 1 up to rounding even when entries are ~ +-1e4 apart.
inline std::vector<double> softmax(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("softmax: empty input");
    const double m = *std::max_element(v.begin(), v.end());
    std::vector<double> w(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        w[i] = std::exp(v[i] - m);
        sum += w[i];
    }
    for (double& x : w) x /= sum;
    return w;
}

// Trapezium rule on a uniform grid with spacing dx.
inline double trapezoid_uniform(const std::vector<double>& f, double dx) {
    if (f.size() < 2) throw std::invalid_argument("trapezoid_uniform: need >= 2 points");
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
    return s * dx;
}

// Pool-adjacent-violators projection of y onto non-increasing sequences
// (least-squares, unit weights). Classical PAVA, O(n).
inline std::vector<double> project_non_increasing(const std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<double> level(n), weight(n);
    std::vector<std::size_t> count(n);
    std::size_t blocks = 0;
    for (std::size_t i = 0; i < n; ++i) {
        level[blocks] = y[i];
        weight[blocks] = 1.0;
        count[blocks] = 1;
        ++blocks;
        // merge while the tail violates non-increase
        while (blocks > 1 && level[blocks - 2] < level[blocks - 1]) {
            const double w = weight[blocks - 2] + weight[blocks - 1];
            level[blocks - 2] =
                (level[blocks - 2] * weight[blocks - 2] + level[blocks - 1] * weight[blocks - 1]) / w;
            weight[blocks - 2] = w;
            count[blocks - 2] += count[blocks - 1];
            --blocks;
        }
    }
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t b = 0; b < blocks; ++b)
        out.insert(out.end(), count[b], level[b]);
    return out;
}

// Left-continuous inverse of the weighted empirical CDF:
// smallest value x_(i) with cumulative weight >= q * total.
// Weights must be non-negative with a positive sum; q in [0, 1].
inline double weighted_quantile(std::vector<double> values, std::vector<double> weights, double q) {
    if (values.size() != weights.size() || values.empty())
        throw std::invalid_argument("weighted_quantile: size mismatch or empty");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("weighted_quantile: q outside [0,1]");
    std::vector<std::size_t> idx(values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("weighted_quantile: negative weight");
        total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("weighted_quantile: zero total weight");
    double cum = 0.0;
    for (std::size_t i : idx) {
        cum += weights[i];
        if (cum >= q * total - 1e-15 * total) return values[i];
    }
    return values[idx.back()];
}

// Standard-normal quantile (Acklam's rational approximation, ~1e-9 absolute,
// refined by one Halley step to near machine precision). Implemented here
// because the distribution adapters in <random> are implementation-defined,
// and synthetic series must be bit-identical across standard libraries.
inline double norm_inv(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("norm_inv: p outside (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= phigh) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley refinement against the exact CDF.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

// Deterministic uniform draws on (0,1) from mt19937_64: top 53 bits, shifted
// into (0,1) by half an ulp so norm_inv never sees an endpoint. The raw
// engine is seeded and stepped identically everywhere; only the engine's
// (standardized) output sequence is consumed, never <random> distributions.
inline double uniform_open01(std::mt19937_64& rng) {
    return (double(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline double normal_draw(std::mt19937_64& rng) { return norm_inv(uniform_open01(rng)); }

// FNV-1a 64-bit hash of a byte string; stable across platforms and runs.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Nelder-Mead simplex minimizer.
//
// Deterministic given the start point and rng seed (used only for restart
// jitter by callers; the core iteration is jitter-free). Standard reflection/
// expansion/contraction/shrink coefficients; converges when the simplex
// spread in f falls below f_tol or iteration budget is exhausted.
// ---------------------------------------------------------------------------
struct NelderMeadResult {
    std::vector<double> x;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    const std::vector<double>& start, int max_iter = 500,
                                    double f_tol = 1e-10, double initial_step = 0.25) {
    const std::size_t n = start.size();
    if (n == 0) throw std::invalid_argument("nelder_mead: empty start point");

    std::vector<std::vector<double>> xs(n + 1, start);
    for (std::size_t i = 0; i < n; ++i)
        xs[i + 1][i] += (start[i] != 0.0 ? initial_step * std::abs(start[i]) : initial_step);
    std::vector<double> fs(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fs[i] = f(xs[i]);

    NelderMeadResult res;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        // order: xs[order[0]] best, xs[order[n]] worst
        std::vector<std::size_t> order(n + 1);
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        const std::size_t best = order[0], worst = order[n], second_worst = order[n - 1];
        if (std::abs(fs[worst] - fs[best]) <= f_tol * (std::abs(fs[best]) + f_tol)) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += xs[i][j] / double(n);
        }
        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j)
                p[j] = centroid[j] + t * (xs[worst][j] - centroid[j]);
            return p;
        };

        std::vector<double> xr = blend(-1.0);  // reflection
        const double fr = f(xr);
        if (fr < fs[best]) {
            std::vector<double> xe = blend(-2.0);  // expansion
            const double fe = f(xe);
            if (fe < fr) { xs[worst] = std::move(xe); fs[worst] = fe; }
            else         { xs[worst] = std::move(xr); fs[worst] = fr; }
        } else if (fr < fs[second_worst]) {
            xs[worst] = std::move(xr); fs[worst] = fr;
        } else {
            const bool outside = fr < fs[worst];
            std::vector<double> xc = blend(outside ? -0.5 : 0.5);  // contraction
            const double fc = f(xc);
            if (fc < std::min(fr, fs[worst])) {
                xs[worst] = std::move(xc); fs[worst] = fc;
            } else {
                // shrink toward the best vertex
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t j = 0; j < n; ++j)
                        xs[i][j] = xs[best][j] + 0.5 * (xs[i][j] - xs[best][j]);
                    fs[i] = f(xs[i]);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fs[i] < fs[best]) best = i;
    res.x = xs[best];
    res.f = fs[best];
    res.iterations = iter;
    return res;
}

}  // namespace modelmix
