#include "modelmix/products.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "modelmix/density.hpp"
#include "modelmix/numerics.hpp"

namespace modelmix {

double PriceDistribution::quantile(double p) const {
    return weighted_quantile(values, weights, p);
}

PriceDistribution mixture_price(const Posterior& post, const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("mixture_price: empty value list");
    if (values.size() != post.weights.size())
        throw std::invalid_argument("mixture_price: values/posterior length mismatch");
    PriceDistribution dist;
    dist.values = values;
    dist.weights = post.weights;
    for (std::size_t j = 0; j < values.size(); ++j) dist.mean += post.weights[j] * values[j];
    return dist;
}

double mixture_delta(const Posterior& post, const std::vector<double>& deltas) {
    if (deltas.empty()) throw std::invalid_argument("mixture_delta: empty delta list");
    if (deltas.size() != post.weights.size())
        throw std::invalid_argument("mixture_delta: deltas/posterior length mismatch");
    double out = 0.0;
    for (std::size_t j = 0; j < deltas.size(); ++j) out += post.weights[j] * deltas[j];
    return out;
}

std::function<double(double)> predictive_density(const Posterior& post,
                                                 const std::vector<ModelInstance>& universe,
                                                 double x_t,
                                                 const std::vector<std::optional<VolState>>& vstates,
                                                 double rate, double h) {
    if (universe.empty()) throw std::invalid_argument("predictive_density: empty universe");
    if (universe.size() != post.weights.size())
        throw std::invalid_argument("predictive_density: universe/posterior length mismatch");
    if (!vstates.empty() && vstates.size() != universe.size())
        throw std::invalid_argument("predictive_density: vstates length mismatch");

    struct Component {
        ModelInstance instance;
        std::optional<VolState> vstate;
        double weight;
        std::shared_ptr<const DensityTable> table;  // jump-diffusion families only
    };
    auto components = std::make_shared<std::vector<Component>>();
    components->reserve(universe.size());
    for (std::size_t j = 0; j < universe.size(); ++j) {
        if (post.weights[j] <= 0.0) continue;
        Component c{universe[j], vstates.empty() ? std::nullopt : vstates[j], post.weights[j],
                    nullptr};
        if (uses_density_table(c.instance.family)) {
            // Bake a Bates state override into the instance so the one-off
            // table below is the one the evaluator consults.
            if (c.vstate && c.instance.family == ModelFamily::Bates) {
                c.instance.params[4] = c.vstate->value;
                c.vstate.reset();
            }
            c.table = std::make_shared<const DensityTable>(density_from_cf(c.instance, h));
        }
        components->push_back(std::move(c));
    }

    return [components, x_t, rate, h](double x) {
        double acc = 0.0;
        for (const auto& c : *components)
            acc += c.weight * std::exp(transition_log_density(c.instance, c.vstate, x_t, x,
                                                              rate, h, c.table.get()));
        return acc;
    };
}

}  // namespace modelmix
