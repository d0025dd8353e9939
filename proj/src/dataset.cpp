#include "ppbfl/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "byteio.hpp"
#include "ppbfl/error.hpp"
#include "ppbfl/rng.hpp"

namespace ppbfl {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::malformed_idx, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

uint32_t read_be32(const std::vector<unsigned char>& b, size_t off,
                   const std::string& path) {
  if (off + 4 > b.size()) throw Error(Errc::malformed_idx, "truncated header in " + path);
  return (static_cast<uint32_t>(b[off]) << 24) | (static_cast<uint32_t>(b[off + 1]) << 16) |
         (static_cast<uint32_t>(b[off + 2]) << 8) | static_cast<uint32_t>(b[off + 3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_file(images_path);
  if (read_be32(img, 0, images_path) != 0x00000803u) {
    throw Error(Errc::not_idx, images_path + " is not an IDX image file");
  }
  const uint32_t count = read_be32(img, 4, images_path);
  const uint32_t rows = read_be32(img, 8, images_path);
  const uint32_t cols = read_be32(img, 12, images_path);
  const uint64_t n_pixels = static_cast<uint64_t>(count) * rows * cols;
  if (img.size() != 16 + n_pixels) {
    throw Error(Errc::malformed_idx, images_path + ": pixel payload size mismatch");
  }

  const auto lab = read_file(labels_path);
  if (read_be32(lab, 0, labels_path) != 0x00000801u) {
    throw Error(Errc::not_idx, labels_path + " is not an IDX label file");
  }
  const uint32_t label_count = read_be32(lab, 4, labels_path);
  if (label_count != count) {
    throw Error(Errc::count_mismatch, "image/label counts disagree");
  }
  if (lab.size() != 8 + static_cast<uint64_t>(label_count)) {
    throw Error(Errc::malformed_idx, labels_path + ": label payload size mismatch");
  }

  Dataset d;
  d.n_features = rows * cols;
  d.features.resize(n_pixels);
  for (uint64_t i = 0; i < n_pixels; ++i) d.features[i] = img[16 + i] / 255.0;
  d.labels.resize(count);
  int max_label = -1;
  for (uint32_t i = 0; i < count; ++i) {
    d.labels[i] = lab[8 + i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.n_classes = static_cast<uint32_t>(max_label + 1);
  return d;
}

Dataset synth_blobs(uint32_t n_classes, uint32_t n_per_class, uint32_t n_features,
                    double spread, uint64_t seed) {
  if (n_classes == 0 || n_per_class == 0 || n_features == 0) {
    throw Error(Errc::empty_dataset, "blob dimensions must be positive");
  }
  Rng root(seed);
  auto centers_rng = root.fork("centers");
  std::vector<double> centers(static_cast<size_t>(n_classes) * n_features);
  for (auto& c : centers) c = centers_rng.uniform(-1.0, 1.0);

  Dataset d;
  d.n_features = n_features;
  d.n_classes = n_classes;
  const size_t n = static_cast<size_t>(n_classes) * n_per_class;
  d.features.resize(n * n_features);
  d.labels.resize(n);
  for (uint32_t c = 0; c < n_classes; ++c) {
    auto cls_rng = root.fork("points", c);
    for (uint32_t i = 0; i < n_per_class; ++i) {
      const size_t row = static_cast<size_t>(c) * n_per_class + i;
      d.labels[row] = static_cast<int>(c);
      for (uint32_t f = 0; f < n_features; ++f) {
        d.features[row * n_features + f] =
            centers[static_cast<size_t>(c) * n_features + f] + spread * cls_rng.normal();
      }
    }
  }
  return d;
}

Dataset subset(const Dataset& data, std::span<const size_t> indices) {
  Dataset out;
  out.n_features = data.n_features;
  out.n_classes = data.n_classes;
  out.features.reserve(indices.size() * data.n_features);
  out.labels.reserve(indices.size());
  for (size_t i : indices) {
    const auto r = data.row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

std::vector<Dataset> partition(const Dataset& data, const PartitionPlan& plan) {
  const size_t n = data.size();
  if (plan.n_clients == 0) throw Error(Errc::too_many_clients, "need at least one client");
  if (plan.n_clients > n) {
    throw Error(Errc::too_many_clients, "more clients than samples");
  }
  Rng root(plan.seed);
  const size_t k = plan.n_clients;
  std::vector<Dataset> shards;
  shards.reserve(k);

  if (plan.mode == PartitionMode::iid) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    auto rng = root.fork("iid");
    rng.shuffle(idx);
    const size_t base = n / k;
    for (size_t c = 0; c < k; ++c) {
      const size_t lo = c * base;
      const size_t hi = (c + 1 == k) ? n : lo + base;
      shards.push_back(subset(data, std::span(idx).subspan(lo, hi - lo)));
    }
    return shards;
  }

  // label_shard: sort by label, slice into small single-label runs, deal them
  // out with a seeded permutation so clients see few distinct labels.
  if (plan.shards_per_client == 0) {
    throw Error(Errc::invalid_count, "shards_per_client must be positive");
  }
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return data.labels[a] < data.labels[b]; });
  const size_t n_shards = k * plan.shards_per_client;
  const size_t base = n / n_shards;
  std::vector<size_t> shard_ids(n_shards);
  std::iota(shard_ids.begin(), shard_ids.end(), size_t{0});
  auto rng = root.fork("deal");
  rng.shuffle(shard_ids);
  for (size_t c = 0; c < k; ++c) {
    std::vector<size_t> rows;
    for (uint32_t s = 0; s < plan.shards_per_client; ++s) {
      const size_t j = shard_ids[c * plan.shards_per_client + s];
      const size_t lo = j * base;
      const size_t hi = (j + 1 == n_shards) ? n : lo + base;
      for (size_t r = lo; r < hi; ++r) rows.push_back(idx[r]);
    }
    shards.push_back(subset(data, rows));
  }
  return shards;
}

}  // namespace ppbfl
