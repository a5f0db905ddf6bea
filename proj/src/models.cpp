#include "modelmix/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace modelmix {

std::string to_string(ModelFamily f) {
    switch (f) {
        case ModelFamily::BlackScholes: return "BlackScholes";
        case ModelFamily::CEV: return "CEV";
        case ModelFamily::Heston: return "Heston";
        case ModelFamily::SABR: return "SABR";
        case ModelFamily::Bates: return "Bates";
        case ModelFamily::Merton: return "Merton";
        case ModelFamily::Kou: return "Kou";
        case ModelFamily::VarianceGamma: return "VarianceGamma";
        case ModelFamily::NIG: return "NIG";
    }
    throw std::logic_error("to_string: unknown family");
}

ModelFamily family_from_string(const std::string& name) {
    for (ModelFamily f : kAllFamilies)
        if (to_string(f) == name) return f;
    throw std::invalid_argument("unknown model family: '" + name + "'");
}

const std::vector<std::string>& param_names(ModelFamily f) {
    static const std::vector<std::string> bs = {"sigma"};
    static const std::vector<std::string> cev = {"sigma", "exponent"};
    static const std::vector<std::string> heston = {"kappa", "theta", "sigma_v", "rho", "v0"};
    static const std::vector<std::string> sabr = {"alpha", "beta_exp", "rho", "nu"};
    static const std::vector<std::string> bates = {"kappa",  "theta", "sigma_v", "rho",
                                                   "v0",     "lambda_j", "mu_j"};
    static const std::vector<std::string> merton = {"sigma", "lambda_j", "mu_j", "sigma_j"};
    static const std::vector<std::string> kou = {"sigma", "lambda_j", "p_up", "eta"};
    static const std::vector<std::string> vg = {"sigma", "theta_vg", "nu"};
    static const std::vector<std::string> nig = {"alpha_nig", "beta_nig", "delta_nig"};
    switch (f) {
        case ModelFamily::BlackScholes: return bs;
        case ModelFamily::CEV: return cev;
        case ModelFamily::Heston: return heston;
        case ModelFamily::SABR: return sabr;
        case ModelFamily::Bates: return bates;
        case ModelFamily::Merton: return merton;
        case ModelFamily::Kou: return kou;
        case ModelFamily::VarianceGamma: return vg;
        case ModelFamily::NIG: return nig;
    }
    throw std::logic_error("param_names: unknown family");
}

std::size_t free_param_count(ModelFamily f) {
    switch (f) {
        case ModelFamily::BlackScholes: return 1;
        case ModelFamily::CEV: return 2;
        case ModelFamily::Heston: return 4;   // + auxiliary state v0
        case ModelFamily::SABR: return 3;     // alpha, rho, nu; beta_exp held fixed
        case ModelFamily::Bates: return 6;    // + auxiliary state v0; jump vol tied to mu_j
        case ModelFamily::Merton: return 4;
        case ModelFamily::Kou: return 4;
        case ModelFamily::VarianceGamma: return 3;
        case ModelFamily::NIG: return 3;
    }
    throw std::logic_error("free_param_count: unknown family");
}

bool is_stochastic_vol(ModelFamily f) {
    return f == ModelFamily::Heston || f == ModelFamily::SABR || f == ModelFamily::Bates;
}

bool has_char_fn(ModelFamily f) { return f != ModelFamily::CEV && f != ModelFamily::SABR; }

bool is_scale_invariant(ModelFamily f) { return f != ModelFamily::CEV && f != ModelFamily::SABR; }

bool uses_density_table(ModelFamily f) {
    return f == ModelFamily::Merton || f == ModelFamily::Kou || f == ModelFamily::Bates;
}

double ModelInstance::param(const std::string& name) const {
    const auto& names = param_names(family);
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return params[i];
    throw std::invalid_argument("instance of " + to_string(family) + " has no parameter '" +
                                name + "'");
}

ModelInstance make_instance(ModelFamily f, std::vector<double> params) {
    if (params.size() != param_names(f).size())
        throw std::invalid_argument(to_string(f) + " takes " +
                                    std::to_string(param_names(f).size()) + " parameters, got " +
                                    std::to_string(params.size()));
    return ModelInstance{f, std::move(params)};
}

namespace {

// Returns the first violated condition, or nullptr.
const char* admissibility_violation(const ModelInstance& m) {
    const auto& p = m.params;
    for (double v : p)
        if (!std::isfinite(v)) return "non-finite parameter";
    switch (m.family) {
        case ModelFamily::BlackScholes:
            if (p[0] <= 0.0) return "sigma <= 0";
            return nullptr;
        case ModelFamily::CEV:
            if (p[0] <= 0.0) return "sigma <= 0";
            if (p[1] <= 0.0 || p[1] > 1.0) return "exponent outside (0,1]";
            return nullptr;
        case ModelFamily::Heston:
        case ModelFamily::Bates:
            if (p[0] <= 0.0) return "kappa <= 0";
            if (p[1] <= 0.0) return "theta <= 0";
            if (p[2] <= 0.0) return "sigma_v <= 0";
            if (std::abs(p[3]) >= 1.0) return "|rho| >= 1";
            if (p[4] <= 0.0) return "v0 <= 0";
            if (m.family == ModelFamily::Bates && p[5] < 0.0) return "lambda_j < 0";
            return nullptr;
        case ModelFamily::SABR:
            if (p[0] <= 0.0) return "alpha <= 0";
            if (p[1] < 0.0 || p[1] > 1.0) return "beta_exp outside [0,1]";
            if (std::abs(p[2]) >= 1.0) return "|rho| >= 1";
            if (p[3] < 0.0) return "nu < 0";
            return nullptr;
        case ModelFamily::Merton:
            if (p[0] <= 0.0) return "sigma <= 0";
            if (p[1] < 0.0) return "lambda_j < 0";
            if (p[3] < 0.0) return "sigma_j < 0";
            return nullptr;
        case ModelFamily::Kou:
            if (p[0] <= 0.0) return "sigma <= 0";
            if (p[1] < 0.0) return "lambda_j < 0";
            if (p[2] < 0.0 || p[2] > 1.0) return "p_up outside [0,1]";
            if (p[3] <= 1.0) return "eta <= 1 (up-jump mean size must be finite)";
            return nullptr;
        case ModelFamily::VarianceGamma:
            if (p[0] <= 0.0) return "sigma <= 0";
            if (p[2] <= 0.0) return "nu <= 0";
            if (1.0 - p[1] * p[2] - 0.5 * p[0] * p[0] * p[2] <= 0.0)
                return "1 - theta_vg*nu - sigma^2*nu/2 <= 0 (CF strip fails at u = -i)";
            return nullptr;
        case ModelFamily::NIG:
            if (p[0] <= 0.0) return "alpha_nig <= 0";
            if (p[2] <= 0.0) return "delta_nig <= 0";
            if (std::abs(p[1]) >= p[0]) return "|beta_nig| >= alpha_nig";
            if (std::abs(p[1] + 1.0) >= p[0])
                return "|beta_nig + 1| >= alpha_nig (CF strip fails at u = -i)";
            return nullptr;
    }
    return "unknown family";
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

bool admissible(const ModelInstance& m) {
    if (m.params.size() != param_names(m.family).size()) return false;
    return admissibility_violation(m) == nullptr;
}

void validate(const ModelInstance& m) {
    if (m.params.size() != param_names(m.family).size())
        throw std::invalid_argument(to_string(m.family) + ": wrong parameter count");
    if (const char* why = admissibility_violation(m))
        throw std::invalid_argument(to_string(m.family) + ": " + why + " in " + serialize(m));
}

std::optional<VolState> vol_state(const ModelInstance& m) {
    switch (m.family) {
        case ModelFamily::Heston:
        case ModelFamily::Bates: return VolState{m.param("v0")};
        case ModelFamily::SABR: return VolState{m.param("alpha")};
        default: return std::nullopt;
    }
}

std::string serialize(const ModelInstance& m) {
    std::string out = to_string(m.family);
    const auto& names = param_names(m.family);
    for (std::size_t i = 0; i < names.size(); ++i)
        out += "," + names[i] + "=" + format_double(m.params[i]);
    return out;
}

ModelInstance parse_instance(const std::string& line) {
    std::stringstream ss(line);
    std::string tok;
    if (!std::getline(ss, tok, ',')) throw std::invalid_argument("empty instance line");
    const ModelFamily f = family_from_string(tok);
    const auto& names = param_names(f);
    std::vector<double> params(names.size(),
                               std::numeric_limits<double>::quiet_NaN());
    while (std::getline(ss, tok, ',')) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("bad token '" + tok + "' in instance line: " + line);
        const std::string name = tok.substr(0, eq);
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end())
            throw std::invalid_argument(to_string(f) + " has no parameter '" + name + "'");
        params[std::size_t(it - names.begin())] = std::stod(tok.substr(eq + 1));
    }
    for (std::size_t i = 0; i < params.size(); ++i)
        if (std::isnan(params[i]))
            throw std::invalid_argument(to_string(f) + ": missing parameter '" + names[i] +
                                        "' in line: " + line);
    return ModelInstance{f, std::move(params)};
}

std::vector<ModelInstance> load_universe(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open universe file: " + path);
    std::vector<ModelInstance> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        out.push_back(parse_instance(line));
    }
    if (out.empty()) throw std::runtime_error("universe file has no instances: " + path);
    return out;
}

void save_universe(const std::string& path, const std::vector<ModelInstance>& universe) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write universe file: " + path);
    for (const auto& m : universe) out << serialize(m) << "\n";
}

}  // namespace modelmix
