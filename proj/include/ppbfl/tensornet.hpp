#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ppbfl/dataset.hpp"
#include "ppbfl/rng.hpp"

namespace ppbfl {

struct LayerShape {
  uint32_t rows = 0;  // output dimension
  uint32_t cols = 0;  // input dimension
};

struct Layer {
  uint32_t rows = 0;
  uint32_t cols = 0;
  std::vector<double> weights;  // row-major, rows * cols
  std::vector<double> bias;     // rows
};

// Dense feed-forward model. Hidden layers use ReLU; the last layer feeds a
// softmax with cross-entropy loss. Two models with equal schema_id are
// layer-shape compatible.
struct ModelParams {
  std::vector<Layer> layers;
  std::string schema_id;
};

std::string schema_id_for(std::span<const LayerShape> schema);

// Weights uniform in [-r, r] with r = 1/sqrt(fan_in); biases zero.
// Zero dimensions or a broken layer chain -> InvalidSchema.
ModelParams init_model(std::span<const LayerShape> schema, uint64_t seed);

// Class probabilities for one sample (softmax of the final layer).
std::vector<double> forward(const ModelParams& model, std::span<const double> x);

// Fraction of samples whose argmax matches the label. Empty -> EmptyDataset.
double evaluate(const ModelParams& model, const Dataset& data);

// Mean cross-entropy over the dataset. Empty -> EmptyDataset.
double mean_loss(const ModelParams& model, const Dataset& data);

struct TrainOptions {
  uint32_t epochs = 1;
  double lr = 0.05;
  uint32_t batch_size = 32;
};

struct TrainReport {
  std::string node_id;      // filled by the caller
  uint64_t round = 0;       // filled by the caller
  double duration = 0.0;    // simulated: samples_seen / capacity
  double final_loss = 0.0;
  uint64_t samples_seen = 0;
};

// Mini-batch SGD over the shard. Deterministic for a fixed rng stream;
// epochs == 0 returns the model unchanged with duration 0.
std::pair<ModelParams, TrainReport> train_local(const ModelParams& model,
                                                const Dataset& shard,
                                                const TrainOptions& opts,
                                                double capacity, Rng& rng);

// Canonical little-endian encoding: schema_id (u32 length + UTF-8 bytes),
// then per layer rows (u32), cols (u32), weights and bias as IEEE-754
// 64-bit. deserialize rejects truncation, trailing bytes, non-finite
// values, and a schema_id that disagrees with the layer shapes.
std::vector<unsigned char> serialize(const ModelParams& model);
ModelParams deserialize(std::span<const unsigned char> bytes);

}  // namespace ppbfl
