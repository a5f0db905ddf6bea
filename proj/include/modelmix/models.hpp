#pragma once

// The fixed catalogue of model families and their parameterizations.
//
// Parameter slots per family (names as serialized):
//   BlackScholes   sigma
//   CEV            sigma, exponent            dS = r S dt + sigma S^exponent dW;
//                                             sigma carries units S^(1-exponent)/sqrt(yr)
//   Heston         kappa, theta, sigma_v, rho, v0
//   SABR           alpha, beta_exp, rho, nu   alpha carries units F^(1-beta_exp)/sqrt(yr);
//                                             beta_exp conventionally fixed (0.5)
//   Bates          kappa, theta, sigma_v, rho, v0, lambda_j, mu_j   (jump vol = |mu_j|)
//   Merton         sigma, lambda_j, mu_j, sigma_j
//   Kou            sigma, lambda_j, p_up, eta (one tail rate both sides, eta > 1)
//   VarianceGamma  sigma, theta_vg, nu
//   NIG            alpha_nig, beta_nig, delta_nig
//
// v0 (Heston/Bates) and alpha (SABR) double as the instantaneous volatility
// state: the one-day transition freezes it, so it is just another parameter.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace modelmix {

enum class ModelFamily {
    BlackScholes,
    CEV,
    Heston,
    SABR,
    Bates,
    Merton,
    Kou,
    VarianceGamma,
    NIG,
};

inline constexpr ModelFamily kAllFamilies[] = {
    ModelFamily::BlackScholes, ModelFamily::CEV,      ModelFamily::Heston,
    ModelFamily::SABR,         ModelFamily::Bates,    ModelFamily::Merton,
    ModelFamily::Kou,          ModelFamily::VarianceGamma, ModelFamily::NIG,
};

std::string to_string(ModelFamily f);
ModelFamily family_from_string(const std::string& name);

// All parameter slots, in serialization order.
const std::vector<std::string>& param_names(ModelFamily f);

// Number of free parameters in the family's usual counting: 1, 2, 4, 3, 6,
// 4, 4, 3, 3. Auxiliary state slots (v0) and the conventionally fixed SABR
// beta_exp are not counted.
std::size_t free_param_count(ModelFamily f);

// Families whose transition density depends on a volatility state.
bool is_stochastic_vol(ModelFamily f);

// Families with a characteristic function for the log-price (all but CEV and SABR).
bool has_char_fn(ModelFamily f);

// Families whose normalized forward call surface depends on moneyness only,
// not on the spot level (all but CEV and SABR, whose vol scale is absolute).
bool is_scale_invariant(ModelFamily f);

// Families whose one-day transition is evaluated from a tabulated Fourier
// inversion rather than a closed form.
bool uses_density_table(ModelFamily f);

struct VolState {
    double value = 0.0;  // variance (Heston/Bates) or SABR alpha; > 0
};

struct ModelInstance {
    ModelFamily family = ModelFamily::BlackScholes;
    std::vector<double> params;  // aligned with param_names(family)

    double param(const std::string& name) const;
};

// Construction helper that validates slot count.
ModelInstance make_instance(ModelFamily f, std::vector<double> params);

// Family-specific admissibility: positivity, |rho| < 1, CEV exponent in (0,1],
// Kou p_up in [0,1] and eta > 1, and the analyticity-strip conditions that keep
// the characteristic function finite at u = -i (VG: 1 - theta*nu - sigma^2*nu/2 > 0;
// NIG: |beta_nig + 1| < alpha_nig).
bool admissible(const ModelInstance& m);

// Throws std::invalid_argument with the failing condition when inadmissible.
void validate(const ModelInstance& m);

// The instance's volatility state (v0 or alpha) when the family carries one.
std::optional<VolState> vol_state(const ModelInstance& m);

// Text form: `family,name=value,...`; doubles round-trip exactly.
std::string serialize(const ModelInstance& m);
ModelInstance parse_instance(const std::string& line);

std::vector<ModelInstance> load_universe(const std::string& path);
void save_universe(const std::string& path, const std::vector<ModelInstance>& universe);

}  // namespace modelmix
