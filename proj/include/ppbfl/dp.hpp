#pragma once

#include <cstdint>
#include <span>

#include "ppbfl/rng.hpp"
#include "ppbfl/tensornet.hpp"

namespace ppbfl {

// Local differential privacy for model weights.
//
// Every weight w is perturbed relative to a per-layer geometry
//   center C = (max + min) / 2,   radius = max(|max - C|, |C - min|),
// with delta = w - C. Each mechanism is a two-branch multiplicative scheme
// driven by a Bernoulli coin; branch probabilities and factors are chosen so
// the perturbation is unbiased: E[output] = w.
//
// Forward (trainer-side) mechanism, coin m with Pr[m=1] = e^eps/(2e^eps+1):
//   m=1: C + delta * (e^eps + 1) / e^eps
//   m=0: C + delta * e^eps / (e^eps + 1)
//
// Reverse (aggregator-side) mechanism, same coin distribution:
//   m=1: C + delta * (e^eps - 1) / e^eps
//   m=0: C + delta * (e^eps + 2) / (e^eps + 1)
//
// Comparison baseline ("cafl"), coin b with Pr[b=1] = (e^eps - 1)/(2e^eps):
//   b=1: C + delta * (e^eps + 1) / (e^eps - 1)
//   b=0: C + delta * (e^eps - 1) / (e^eps + 1)
//
// Both forward and reverse branches have variance delta^2 / (e^eps (e^eps+1)).

struct PrivacyBudget {
  explicit PrivacyBudget(double eps);
  double epsilon;
};

enum class GeometrySource {
  previous_global,  // geometry taken from the prior round's global model
  self,             // geometry taken from the array being perturbed
};

struct LayerGeometry {
  double center = 0.0;
  double radius = 0.0;
  GeometrySource source = GeometrySource::self;
};

// Pools every element of `pool` (weights and bias alike) into one geometry.
// Empty pool -> EmptyLayer; non-finite entries -> NonFiniteWeight.
LayerGeometry layer_geometry(std::span<const double> pool, GeometrySource source);

struct BernoulliSplit {
  double p_one;
  double p_zero;  // always exactly 1 - p_one
};

// Coin distribution shared by the forward and reverse mechanisms.
BernoulliSplit bernoulli_split(const PrivacyBudget& budget);

// Coin distribution of the cafl baseline.
BernoulliSplit cafl_bernoulli_split(const PrivacyBudget& budget);

// Branch factors (multipliers applied to delta) for each mechanism.
double local_branch_factor(const PrivacyBudget& budget, bool one);
double global_branch_factor(const PrivacyBudget& budget, bool one);
double cafl_branch_factor(const PrivacyBudget& budget, bool one);

struct PerturbationReport {
  double original = 0.0;
  double delta = 0.0;       // original - geometry.center
  int branch = 0;           // coin consumed, 1 or 0
  double output = 0.0;
  bool outside_radius = false;  // |delta| > radius: permitted but flagged
};

// Scalar perturbations. The coin is supplied by the caller so these are pure
// functions; model-level helpers draw coins from an Rng stream.
PerturbationReport perturb_local(double w, const LayerGeometry& geom,
                                 const PrivacyBudget& budget, bool coin);
PerturbationReport perturb_global(double w, const LayerGeometry& geom,
                                  const PrivacyBudget& budget, bool coin);

// Baseline mechanism; rejects budgets below epsilon_floor because its branch
// factors diverge as eps -> 0.
PerturbationReport perturb_cafl(double w, const LayerGeometry& geom,
                                const PrivacyBudget& budget, bool coin,
                                double epsilon_floor = 1e-6);

enum class Mechanism { local, global, cafl };

// Perturbs every layer of `model`. Geometry is computed per layer from
// `reference` when given (shape-checked), otherwise from the model itself.
// Each layer consumes its own forked rng sub-stream, so per-layer work can
// be reordered or parallelized without changing output.
ModelParams perturb_model(const ModelParams& model, const ModelParams* reference,
                          const PrivacyBudget& budget, Mechanism mechanism,
                          const Rng& rng);

// Single-branch variance delta^2 / (e^eps (e^eps + 1)).
double closed_form_variance(double delta, const PrivacyBudget& budget);

// Worst-case mean-of-n variance bound radius^2 / (n e^eps (e^eps + 1)).
// n == 0 -> InvalidCount.
double avg_variance_bound(double radius, const PrivacyBudget& budget, uint64_t n);

// Sequential composition: total budget is the sum. Empty -> EmptyComposition.
PrivacyBudget compose_budgets(std::span<const PrivacyBudget> budgets);

}  // namespace ppbfl
