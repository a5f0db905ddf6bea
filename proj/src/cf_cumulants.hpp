#pragma once

// Internal: log-CF cumulant estimates used to size Fourier-inversion grids
// and cosine-expansion truncation ranges. Probes ln phi by finite differences
// at a step where the CF has decayed noticeably, so the differences are well
// conditioned across horizons from one day to two years.

#include <cmath>
#include <complex>

namespace modelmix::detail {

struct CfCumulants {
    double c1 = 0.0;  // mean
    double c2 = 0.0;  // variance
    double c4 = 0.0;  // fourth cumulant (rough; only widens truncation)
};

template <typename Cf>
CfCumulants cf_cumulants(const Cf& cf) {
    double du = 1e-4;
    for (int i = 0; i < 64; ++i) {
        if (std::log(cf(du)).real() < -0.1) break;
        du *= 2.0;
    }
    const std::complex<double> l1 = std::log(cf(du));
    const std::complex<double> l2 = std::log(cf(2.0 * du));
    CfCumulants c;
    c.c1 = l1.imag() / du;
    c.c2 = -2.0 * l1.real() / (du * du);
    c.c4 = -(2.0 * l2.real() - 8.0 * l1.real()) / (du * du * du * du);
    return c;
}

}  // namespace modelmix::detail
