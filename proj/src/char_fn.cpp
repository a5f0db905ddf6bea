#include "modelmix/char_fn.hpp"

#include <cmath>
#include <stdexcept>

namespace modelmix {

namespace {

using cplx = std::complex<double>;
constexpr cplx I{0.0, 1.0};

// Gaussian diffusion leg with martingale drift: exp(-iu sigma^2 tau/2 - u^2 sigma^2 tau/2).
cplx gauss_leg(cplx u, double var_tau) {
    return std::exp(-0.5 * var_tau * (I * u + u * u));
}

// Merton-style lognormal jump leg: intensity lam, log-jump N(mu, del^2),
// compensated so the leg is 1 at u = -i.
cplx merton_jump_leg(cplx u, double lam, double mu, double del, double tau) {
    if (lam == 0.0) return 1.0;
    const double kbar = std::exp(mu + 0.5 * del * del) - 1.0;
    const cplx jump_cf = std::exp(I * u * mu - 0.5 * del * del * u * u);
    return std::exp(lam * tau * (jump_cf - 1.0 - I * u * kbar));
}

// Heston variance leg conditional on v0, in the branch-cut-safe ("little
// trap") form; includes the -v/2 dt drift so the whole factor is 1 at u = -i.
cplx heston_leg(cplx u, double kappa, double theta, double sigma_v, double rho, double v0,
                double tau) {
    const cplx beta = kappa - I * rho * sigma_v * u;
    const cplx d = std::sqrt(beta * beta + sigma_v * sigma_v * (I * u + u * u));
    const cplx g = (beta - d) / (beta + d);
    const cplx edt = std::exp(-d * tau);
    const cplx log_ratio = std::log((1.0 - g * edt) / (1.0 - g));
    const cplx C = kappa * theta / (sigma_v * sigma_v) * ((beta - d) * tau - 2.0 * log_ratio);
    const cplx D = (beta - d) / (sigma_v * sigma_v) * (1.0 - edt) / (1.0 - g * edt);
    return std::exp(C + D * v0);
}

cplx kou_leg(cplx u, double sigma, double lam, double p_up, double eta, double tau) {
    cplx diffusion = gauss_leg(u, sigma * sigma * tau);
    if (lam == 0.0) return diffusion;
    // double-exponential jumps, one tail rate eta (> 1) both sides
    const cplx jump_cf = p_up * eta / (eta - I * u) + (1.0 - p_up) * eta / (eta + I * u);
    const double kbar = p_up * eta / (eta - 1.0) + (1.0 - p_up) * eta / (eta + 1.0) - 1.0;
    return diffusion * std::exp(lam * tau * (jump_cf - 1.0 - I * u * kbar));
}

cplx vg_leg(cplx u, double sigma, double theta, double nu, double tau) {
    // subordinated Brownian motion; omega makes E[e^Y] = 1
    const double omega = std::log(1.0 - theta * nu - 0.5 * sigma * sigma * nu) / nu;
    const cplx base = 1.0 - I * u * theta * nu + 0.5 * sigma * sigma * nu * u * u;
    return std::exp(I * u * omega * tau) * std::pow(base, -tau / nu);
}

cplx nig_leg(cplx u, double alpha, double beta, double delta, double tau) {
    const double gamma = std::sqrt(alpha * alpha - beta * beta);
    const double omega =
        delta * (std::sqrt(alpha * alpha - (beta + 1.0) * (beta + 1.0)) - gamma);
    const cplx root = std::sqrt(alpha * alpha - (beta + I * u) * (beta + I * u));
    return std::exp(I * u * omega * tau + delta * tau * (gamma - root));
}

}  // namespace

std::complex<double> char_fn0(const ModelInstance& m, std::complex<double> u, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("char_fn0: tau <= 0");
    const auto& p = m.params;
    switch (m.family) {
        case ModelFamily::BlackScholes:
            return gauss_leg(u, p[0] * p[0] * tau);
        case ModelFamily::Heston:
            return heston_leg(u, p[0], p[1], p[2], p[3], p[4], tau);
        case ModelFamily::Bates:
            return heston_leg(u, p[0], p[1], p[2], p[3], p[4], tau) *
                   merton_jump_leg(u, p[5], p[6], std::abs(p[6]), tau);
        case ModelFamily::Merton:
            return gauss_leg(u, p[0] * p[0] * tau) * merton_jump_leg(u, p[1], p[2], p[3], tau);
        case ModelFamily::Kou:
            return kou_leg(u, p[0], p[1], p[2], p[3], tau);
        case ModelFamily::VarianceGamma:
            return vg_leg(u, p[0], p[1], p[2], tau);
        case ModelFamily::NIG:
            return nig_leg(u, p[0], p[1], p[2], tau);
        case ModelFamily::CEV:
        case ModelFamily::SABR:
            throw std::domain_error("char_fn: " + to_string(m.family) +
                                    " has no characteristic function");
    }
    throw std::logic_error("char_fn0: unknown family");
}

std::complex<double> char_fn(const ModelInstance& m, std::complex<double> u, double tau,
                             double rate) {
    return std::exp(I * u * (rate * tau)) * char_fn0(m, u, tau);
}

std::complex<double> frozen_char_fn0(const ModelInstance& m, std::complex<double> u, double h) {
    const auto& p = m.params;
    switch (m.family) {
        case ModelFamily::Heston:
            return gauss_leg(u, p[4] * h);  // variance frozen at v0
        case ModelFamily::Bates:
            return gauss_leg(u, p[4] * h) * merton_jump_leg(u, p[5], p[6], std::abs(p[6]), h);
        default:
            return char_fn0(m, u, h);  // Levy increments are exact at any horizon
    }
}

}  // namespace modelmix
