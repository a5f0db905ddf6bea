#pragma once

// Characteristic functions of the risk-neutral log-price increment.
//
// char_fn(m, u, tau, rate) = E[exp(iu (X_tau - X_0))] with the martingale
// drift included, so char_fn(m, 0, tau, r) = 1 and char_fn(m, -i, tau, r)
// = e^{r tau} (the forward condition). char_fn0 is the rate-0 version:
// char_fn = exp(iu r tau) * char_fn0, and char_fn0(-i) = 1.
//
// Stochastic-volatility families read their state from the instance (v0);
// the Bates jump leg uses sigma_j = |mu_j|.

#include <complex>

#include "modelmix/models.hpp"

namespace modelmix {

std::complex<double> char_fn0(const ModelInstance& m, std::complex<double> u, double tau);

std::complex<double> char_fn(const ModelInstance& m, std::complex<double> u, double tau,
                             double rate);

// Rate-0 characteristic function of the one-step increment under the frozen-
// volatility convention: Heston/Bates freeze the variance at v0 over [0, h],
// which turns the diffusion part into a Gaussian. Identical to char_fn0 for
// the Levy families; used to tabulate one-day transition densities.
std::complex<double> frozen_char_fn0(const ModelInstance& m, std::complex<double> u, double h);

}  // namespace modelmix
