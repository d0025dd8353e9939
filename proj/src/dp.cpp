#include "ppbfl/dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ppbfl/error.hpp"

namespace ppbfl {

namespace {

// All branch math uses t = e^-eps so large budgets stay finite.
double expm(const PrivacyBudget& b) { return std::exp(-b.epsilon); }

PerturbationReport apply_branch(double w, const LayerGeometry& geom, double factor,
                                bool coin) {
  if (!std::isfinite(w)) {
    throw Error(Errc::non_finite_weight, "perturbation input is not finite");
  }
  PerturbationReport r;
  r.original = w;
  r.delta = w - geom.center;
  r.branch = coin ? 1 : 0;
  r.output = geom.center + r.delta * factor;
  r.outside_radius = std::abs(r.delta) > geom.radius;
  return r;
}

void check_same_shape(const ModelParams& a, const ModelParams& b) {
  if (a.layers.size() != b.layers.size()) {
    throw Error(Errc::shape_mismatch, "reference model has different layer count");
  }
  for (size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].rows != b.layers[i].rows || a.layers[i].cols != b.layers[i].cols) {
      throw Error(Errc::shape_mismatch, "reference model layer shape differs");
    }
  }
}

// Geometry over a layer's full parameter pool (weights and bias together).
LayerGeometry layer_pool_geometry(const Layer& layer, GeometrySource source) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  size_t n = 0;
  for (const auto* v : {&layer.weights, &layer.bias}) {
    for (double x : *v) {
      if (!std::isfinite(x)) {
        throw Error(Errc::non_finite_weight, "layer contains a non-finite value");
      }
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      ++n;
    }
  }
  if (n == 0) throw Error(Errc::empty_layer, "layer has no parameters");
  const double center = (hi + lo) / 2.0;
  return LayerGeometry{center, std::max(hi - center, center - lo), source};
}

}  // namespace

PrivacyBudget::PrivacyBudget(double eps) : epsilon(eps) {
  if (!std::isfinite(eps) || eps <= 0.0) {
    throw Error(Errc::invalid_budget, "epsilon must be positive and finite");
  }
}

LayerGeometry layer_geometry(std::span<const double> pool, GeometrySource source) {
  if (pool.empty()) throw Error(Errc::empty_layer, "empty parameter pool");
  double lo = pool[0], hi = pool[0];
  for (double x : pool) {
    if (!std::isfinite(x)) {
      throw Error(Errc::non_finite_weight, "pool contains a non-finite value");
    }
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double center = (hi + lo) / 2.0;
  return LayerGeometry{center, std::max(hi - center, center - lo), source};
}

BernoulliSplit bernoulli_split(const PrivacyBudget& budget) {
  // Pr[m=1] = e^eps / (2 e^eps + 1) = 1 / (2 + e^-eps)
  const double p_one = 1.0 / (2.0 + expm(budget));
  return BernoulliSplit{p_one, 1.0 - p_one};
}

BernoulliSplit cafl_bernoulli_split(const PrivacyBudget& budget) {
  // Pr[b=1] = (e^eps - 1) / (2 e^eps) = (1 - e^-eps) / 2
  const double p_one = (1.0 - expm(budget)) / 2.0;
  return BernoulliSplit{p_one, 1.0 - p_one};
}

double local_branch_factor(const PrivacyBudget& budget, bool one) {
  const double t = expm(budget);
  return one ? 1.0 + t             // (e^eps + 1) / e^eps
             : 1.0 / (1.0 + t);    // e^eps / (e^eps + 1)
}

double global_branch_factor(const PrivacyBudget& budget, bool one) {
  const double t = expm(budget);
  return one ? 1.0 - t             // (e^eps - 1) / e^eps
             : 1.0 + t / (1.0 + t);  // (e^eps + 2) / (e^eps + 1)
}

double cafl_branch_factor(const PrivacyBudget& budget, bool one) {
  const double t = expm(budget);
  return one ? (1.0 + t) / (1.0 - t)   // (e^eps + 1) / (e^eps - 1)
             : (1.0 - t) / (1.0 + t);  // (e^eps - 1) / (e^eps + 1)
}

PerturbationReport perturb_local(double w, const LayerGeometry& geom,
                                 const PrivacyBudget& budget, bool coin) {
  return apply_branch(w, geom, local_branch_factor(budget, coin), coin);
}

PerturbationReport perturb_global(double w, const LayerGeometry& geom,
                                  const PrivacyBudget& budget, bool coin) {
  return apply_branch(w, geom, global_branch_factor(budget, coin), coin);
}

PerturbationReport perturb_cafl(double w, const LayerGeometry& geom,
                                const PrivacyBudget& budget, bool coin,
                                double epsilon_floor) {
  if (budget.epsilon < epsilon_floor) {
    throw Error(Errc::invalid_budget, "epsilon below the baseline mechanism floor");
  }
  return apply_branch(w, geom, cafl_branch_factor(budget, coin), coin);
}

ModelParams perturb_model(const ModelParams& model, const ModelParams* reference,
                          const PrivacyBudget& budget, Mechanism mechanism,
                          const Rng& rng) {
  if (reference != nullptr) check_same_shape(model, *reference);
  const GeometrySource source =
      reference != nullptr ? GeometrySource::previous_global : GeometrySource::self;
  const BernoulliSplit split = mechanism == Mechanism::cafl
                                   ? cafl_bernoulli_split(budget)
                                   : bernoulli_split(budget);

  ModelParams out;
  out.schema_id = model.schema_id;
  out.layers.reserve(model.layers.size());
  for (size_t li = 0; li < model.layers.size(); ++li) {
    const Layer& src = model.layers[li];
    const Layer& geom_layer = reference != nullptr ? reference->layers[li] : src;
    const LayerGeometry geom = layer_pool_geometry(geom_layer, source);
    Rng stream = rng.fork("layer", li);

    Layer dst;
    dst.rows = src.rows;
    dst.cols = src.cols;
    dst.weights.reserve(src.weights.size());
    dst.bias.reserve(src.bias.size());
    auto one = [&](double w) {
      const bool coin = stream.bernoulli(split.p_one);
      switch (mechanism) {
        case Mechanism::local: return perturb_local(w, geom, budget, coin).output;
        case Mechanism::global: return perturb_global(w, geom, budget, coin).output;
        case Mechanism::cafl: return perturb_cafl(w, geom, budget, coin).output;
      }
      return w;
    };
    for (double w : src.weights) dst.weights.push_back(one(w));
    for (double w : src.bias) dst.bias.push_back(one(w));
    out.layers.push_back(std::move(dst));
  }
  return out;
}

double closed_form_variance(double delta, const PrivacyBudget& budget) {
  const double x = std::exp(budget.epsilon);
  return delta * delta / (x * (x + 1.0));
}

double avg_variance_bound(double radius, const PrivacyBudget& budget, uint64_t n) {
  if (n == 0) throw Error(Errc::invalid_count, "participant count must be positive");
  const double x = std::exp(budget.epsilon);
  return radius * radius / (static_cast<double>(n) * x * (x + 1.0));
}

PrivacyBudget compose_budgets(std::span<const PrivacyBudget> budgets) {
  if (budgets.empty()) {
    throw Error(Errc::empty_composition, "no budgets to compose");
  }
  double total = 0.0;
  for (const auto& b : budgets) total += b.epsilon;
  return PrivacyBudget(total);
}

}  // namespace ppbfl
