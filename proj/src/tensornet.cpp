#include "ppbfl/tensornet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "byteio.hpp"
#include "ppbfl/error.hpp"

namespace ppbfl {

namespace {

void validate_schema(std::span<const LayerShape> schema) {
  if (schema.empty()) throw Error(Errc::invalid_schema, "schema has no layers");
  for (const auto& s : schema) {
    if (s.rows == 0 || s.cols == 0) {
      throw Error(Errc::invalid_schema, "layer dimension is zero");
    }
  }
  for (size_t i = 1; i < schema.size(); ++i) {
    if (schema[i].cols != schema[i - 1].rows) {
      throw Error(Errc::invalid_schema, "layer input width breaks the chain");
    }
  }
}

std::vector<LayerShape> shapes_of(const ModelParams& m) {
  std::vector<LayerShape> out;
  out.reserve(m.layers.size());
  for (const auto& l : m.layers) out.push_back({l.rows, l.cols});
  return out;
}

// z = W x + b
void affine(const Layer& l, std::span<const double> x, std::vector<double>& z) {
  z.assign(l.rows, 0.0);
  for (uint32_t r = 0; r < l.rows; ++r) {
    double acc = l.bias[r];
    const double* w = l.weights.data() + static_cast<size_t>(r) * l.cols;
    for (uint32_t c = 0; c < l.cols; ++c) acc += w[c] * x[c];
    z[r] = acc;
  }
}

// Hidden activations (post-ReLU) for every layer; back() holds the logits.
void forward_pass(const ModelParams& m, std::span<const double> x,
                  std::vector<std::vector<double>>& acts) {
  acts.resize(m.layers.size());
  std::span<const double> in = x;
  for (size_t li = 0; li < m.layers.size(); ++li) {
    affine(m.layers[li], in, acts[li]);
    if (li + 1 < m.layers.size()) {
      for (double& v : acts[li]) v = v > 0.0 ? v : 0.0;
    }
    in = acts[li];
  }
}

void check_input(const ModelParams& m, const Dataset& data) {
  if (m.layers.empty()) throw Error(Errc::shape_mismatch, "model has no layers");
  if (data.size() == 0) throw Error(Errc::empty_dataset, "dataset is empty");
  if (m.layers.front().cols != data.n_features) {
    throw Error(Errc::shape_mismatch, "feature width does not match model input");
  }
  if (data.n_classes > m.layers.back().rows) {
    throw Error(Errc::shape_mismatch, "model output narrower than label range");
  }
}

// -log softmax(z)[y], computed against the shifted partition function.
double ce_loss(std::span<const double> z, int y) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  return -(z[y] - zmax - std::log(sum));
}

struct Grads {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;

  explicit Grads(const ModelParams& m) {
    for (const auto& l : m.layers) {
      w.emplace_back(l.weights.size(), 0.0);
      b.emplace_back(l.bias.size(), 0.0);
    }
  }

  void reset() {
    for (auto& v : w) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
  }

  bool finite() const {
    for (const auto& v : w) {
      for (double x : v) {
        if (!std::isfinite(x)) return false;
      }
    }
    for (const auto& v : b) {
      for (double x : v) {
        if (!std::isfinite(x)) return false;
      }
    }
    return true;
  }
};

}  // namespace

std::string schema_id_for(std::span<const LayerShape> schema) {
  std::string id = "dense:";
  for (size_t i = 0; i < schema.size(); ++i) {
    if (i > 0) id += ',';
    id += std::to_string(schema[i].rows);
    id += 'x';
    id += std::to_string(schema[i].cols);
  }
  return id;
}

ModelParams init_model(std::span<const LayerShape> schema, uint64_t seed) {
  validate_schema(schema);
  Rng rng(seed);
  ModelParams m;
  m.schema_id = schema_id_for(schema);
  for (const auto& s : schema) {
    Layer l;
    l.rows = s.rows;
    l.cols = s.cols;
    const double r = 1.0 / std::sqrt(static_cast<double>(s.cols));
    l.weights.reserve(static_cast<size_t>(s.rows) * s.cols);
    for (size_t i = 0; i < static_cast<size_t>(s.rows) * s.cols; ++i) {
      l.weights.push_back(rng.uniform(-r, r));
    }
    l.bias.assign(s.rows, 0.0);
    m.layers.push_back(std::move(l));
  }
  return m;
}

std::vector<double> forward(const ModelParams& model, std::span<const double> x) {
  if (model.layers.empty()) throw Error(Errc::shape_mismatch, "model has no layers");
  if (x.size() != model.layers.front().cols) {
    throw Error(Errc::shape_mismatch, "input width does not match model");
  }
  std::vector<std::vector<double>> acts;
  forward_pass(model, x, acts);
  auto& z = acts.back();
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return std::move(z);
}

double evaluate(const ModelParams& model, const Dataset& data) {
  check_input(model, data);
  std::vector<std::vector<double>> acts;
  size_t correct = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    forward_pass(model, data.row(i), acts);
    const auto& z = acts.back();
    const size_t pred = std::max_element(z.begin(), z.end()) - z.begin();
    if (static_cast<int>(pred) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double mean_loss(const ModelParams& model, const Dataset& data) {
  check_input(model, data);
  std::vector<std::vector<double>> acts;
  double total = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    forward_pass(model, data.row(i), acts);
    total += ce_loss(acts.back(), data.labels[i]);
  }
  return total / static_cast<double>(data.size());
}

std::pair<ModelParams, TrainReport> train_local(const ModelParams& model,
                                                const Dataset& shard,
                                                const TrainOptions& opts,
                                                double capacity, Rng& rng) {
  check_input(model, shard);
  if (!(capacity > 0.0) || !std::isfinite(capacity)) {
    throw Error(Errc::invalid_config, "capacity must be positive");
  }
  if (opts.batch_size == 0) throw Error(Errc::invalid_config, "batch_size must be positive");
  if (!(opts.lr > 0.0) || !std::isfinite(opts.lr)) {
    throw Error(Errc::invalid_config, "learning rate must be positive");
  }

  ModelParams m = model;
  TrainReport report;
  if (opts.epochs == 0) {
    report.final_loss = mean_loss(m, shard);
    return {std::move(m), report};
  }

  const size_t n = shard.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});

  Grads grads(m);
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> deltas(m.layers.size());

  for (uint32_t epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t start = 0; start < n; start += opts.batch_size) {
      const size_t end = std::min(n, start + opts.batch_size);
      grads.reset();
      for (size_t bi = start; bi < end; ++bi) {
        const size_t idx = order[bi];
        const auto x = shard.row(idx);
        const int y = shard.labels[idx];
        forward_pass(m, x, acts);

        // Output delta: softmax(z) - onehot(y).
        auto& zl = deltas.back();
        {
          const auto& z = acts.back();
          const double zmax = *std::max_element(z.begin(), z.end());
          double sum = 0.0;
          zl.assign(z.size(), 0.0);
          for (size_t k = 0; k < z.size(); ++k) {
            zl[k] = std::exp(z[k] - zmax);
            sum += zl[k];
          }
          for (double& v : zl) v /= sum;
          zl[y] -= 1.0;
        }

        for (size_t li = m.layers.size(); li-- > 0;) {
          const Layer& l = m.layers[li];
          const auto& dz = deltas[li];
          const std::span<const double> in =
              li == 0 ? x : std::span<const double>(acts[li - 1]);
          auto& gw = grads.w[li];
          auto& gb = grads.b[li];
          for (uint32_t r = 0; r < l.rows; ++r) {
            const double d = dz[r];
            gb[r] += d;
            double* grow = gw.data() + static_cast<size_t>(r) * l.cols;
            for (uint32_t c = 0; c < l.cols; ++c) grow[c] += d * in[c];
          }
          if (li > 0) {
            auto& prev = deltas[li - 1];
            prev.assign(l.cols, 0.0);
            for (uint32_t r = 0; r < l.rows; ++r) {
              const double d = dz[r];
              const double* w = l.weights.data() + static_cast<size_t>(r) * l.cols;
              for (uint32_t c = 0; c < l.cols; ++c) prev[c] += w[c] * d;
            }
            // ReLU gate of the previous activation.
            for (uint32_t c = 0; c < l.cols; ++c) {
              if (acts[li - 1][c] <= 0.0) prev[c] = 0.0;
            }
          }
        }
      }

      // A batch that produced non-finite gradients is skipped rather than
      // poisoning the weights; training continues on the next batch.
      if (!grads.finite()) continue;
      const double scale = opts.lr / static_cast<double>(end - start);
      for (size_t li = 0; li < m.layers.size(); ++li) {
        auto& l = m.layers[li];
        for (size_t i = 0; i < l.weights.size(); ++i) l.weights[i] -= scale * grads.w[li][i];
        for (size_t i = 0; i < l.bias.size(); ++i) l.bias[i] -= scale * grads.b[li][i];
      }
    }
    report.samples_seen += n;
  }

  report.duration = static_cast<double>(report.samples_seen) / capacity;
  report.final_loss = mean_loss(m, shard);
  return {std::move(m), report};
}

std::vector<unsigned char> serialize(const ModelParams& model) {
  for (const auto& l : model.layers) {
    if (l.weights.size() != static_cast<size_t>(l.rows) * l.cols ||
        l.bias.size() != l.rows) {
      throw Error(Errc::malformed_model, "layer buffers inconsistent with shape");
    }
    for (const auto* v : {&l.weights, &l.bias}) {
      for (double x : *v) {
        if (!std::isfinite(x)) {
          throw Error(Errc::non_finite_weight, "cannot serialize non-finite value");
        }
      }
    }
  }
  std::vector<unsigned char> out;
  put_u32(out, static_cast<uint32_t>(model.schema_id.size()));
  put_bytes(out, {reinterpret_cast<const unsigned char*>(model.schema_id.data()),
                  model.schema_id.size()});
  for (const auto& l : model.layers) {
    put_u32(out, l.rows);
    put_u32(out, l.cols);
    for (double w : l.weights) put_f64(out, w);
    for (double b : l.bias) put_f64(out, b);
  }
  return out;
}

ModelParams deserialize(std::span<const unsigned char> bytes) {
  ByteReader r(bytes, Errc::malformed_model);
  ModelParams m;
  m.schema_id = r.str(r.u32());
  while (!r.done()) {
    Layer l;
    l.rows = r.u32();
    l.cols = r.u32();
    const uint64_t nw = static_cast<uint64_t>(l.rows) * l.cols;
    if (l.rows == 0 || l.cols == 0 || nw + l.rows > r.remaining() / 8) {
      throw Error(Errc::malformed_model, "layer header inconsistent with payload");
    }
    l.weights.reserve(nw);
    for (uint64_t i = 0; i < nw; ++i) l.weights.push_back(r.f64());
    l.bias.reserve(l.rows);
    for (uint32_t i = 0; i < l.rows; ++i) l.bias.push_back(r.f64());
    for (const auto* v : {&l.weights, &l.bias}) {
      for (double x : *v) {
        if (!std::isfinite(x)) throw Error(Errc::malformed_model, "non-finite value");
      }
    }
    m.layers.push_back(std::move(l));
  }
  if (m.schema_id != schema_id_for(shapes_of(m))) {
    throw Error(Errc::malformed_model, "schema id disagrees with layer shapes");
  }
  return m;
}

}  // namespace ppbfl
