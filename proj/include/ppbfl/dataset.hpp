#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ppbfl {

struct Dataset {
  std::vector<double> features;  // row-major, n * n_features
  std::vector<int> labels;       // n, each in [0, n_classes)
  uint32_t n_features = 0;
  uint32_t n_classes = 0;

  size_t size() const { return labels.size(); }
  std::span<const double> row(size_t i) const {
    return {features.data() + i * n_features, n_features};
  }
};

// IDX image/label pair (big-endian headers, magic 0x803 / 0x801).
// Pixels are scaled to [0, 1]. Bad magic -> NotIdx; image/label count
// disagreement -> CountMismatch; truncation -> MalformedIdx.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Gaussian blobs: class centers and point noise derive from the seed, so a
// given (shape, seed) always produces the same dataset. Samples are laid out
// class-major: all of class 0, then class 1, ...
Dataset synth_blobs(uint32_t n_classes, uint32_t n_per_class, uint32_t n_features,
                    double spread, uint64_t seed);

Dataset subset(const Dataset& data, std::span<const size_t> indices);

enum class PartitionMode { iid, label_shard };

struct PartitionPlan {
  PartitionMode mode = PartitionMode::iid;
  uint32_t n_clients = 10;
  uint32_t shards_per_client = 2;  // label_shard only
  uint64_t seed = 0;
};

// Splits a dataset into per-client shards.
//   iid:          seeded shuffle, equal contiguous slices (remainder to the
//                 last client).
//   label_shard:  stable sort by label, cut into n_clients*shards_per_client
//                 shards (remainder to the last shard), deal shards by a
//                 seeded permutation.
// Shards partition the input: disjoint and jointly exhaustive.
// n_clients > sample count -> TooManyClients.
std::vector<Dataset> partition(const Dataset& data, const PartitionPlan& plan);

}  // namespace ppbfl
