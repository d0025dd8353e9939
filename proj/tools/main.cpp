// Command-line front end for the simulator.
//
//   ppbfl run --config cfg.json --out dir [--dry-run] [--seed N] [--parallel K]
//   ppbfl verify-chain <chain.log>
//   ppbfl dp-selftest [--epsilon E] [--draws N]
//
// `run` expands the configured grid (mechanism x consensus x partition x
// epsilon), executes every point, and writes accuracy.csv / stake.csv at the
// output root plus per-point subdirectories with their own CSVs, chain.log,
// and stake_ledger.csv. The PPBFL_SEED environment variable overrides the
// config seed; --seed overrides both.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration/usage error.

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ppbfl/dataset.hpp"
#include "ppbfl/dp.hpp"
#include "ppbfl/error.hpp"
#include "ppbfl/ledger.hpp"
#include "ppbfl/orchestrator.hpp"
#include "ppbfl/rng.hpp"
#include "ppbfl/sha256.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ppbfl;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] void bad_config(const std::string& msg) {
  throw ConfigError("config: " + msg);
}

uint64_t ulp_distance_cli(double a, double b) {
  if (a == b) return 0;
  if (!std::isfinite(a) || !std::isfinite(b)) return UINT64_MAX;
  const auto key = [](double x) -> uint64_t {
    const uint64_t u = std::bit_cast<uint64_t>(x);
    return (u >> 63) ? ~u : (u | 0x8000000000000000ULL);
  };
  const uint64_t ka = key(a), kb = key(b);
  return ka > kb ? ka - kb : kb - ka;
}

// ---------------------------------------------------------------------------
// Strict JSON helpers: unknown keys and wrong types are configuration errors.

void check_keys(const json& obj, const char* where,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      bad_config("unknown key \"" + item.key() + "\" in " + where);
  }
}

const json* find_key(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

uint64_t as_uint(const json& v, const char* what) {
  if (!v.is_number_unsigned()) bad_config(std::string(what) + " must be a non-negative integer");
  return v.get<uint64_t>();
}

double as_double(const json& v, const char* what) {
  if (!v.is_number()) bad_config(std::string(what) + " must be a number");
  return v.get<double>();
}

std::string as_string(const json& v, const char* what) {
  if (!v.is_string()) bad_config(std::string(what) + " must be a string");
  return v.get<std::string>();
}

uint64_t uint_or(const json& obj, const char* key, uint64_t def) {
  const json* v = find_key(obj, key);
  return v ? as_uint(*v, key) : def;
}

double double_or(const json& obj, const char* key, double def) {
  const json* v = find_key(obj, key);
  return v ? as_double(*v, key) : def;
}

std::vector<std::string> string_list(const json& v, const char* what) {
  if (!v.is_array() || v.empty()) bad_config(std::string(what) + " must be a non-empty array");
  std::vector<std::string> out;
  for (const json& e : v) out.push_back(as_string(e, what));
  std::set<std::string> uniq(out.begin(), out.end());
  if (uniq.size() != out.size()) bad_config(std::string(what) + " has duplicate entries");
  return out;
}

// ---------------------------------------------------------------------------
// Configuration file model.

struct DatasetSpec {
  bool from_idx = false;
  // blobs
  uint32_t classes = 10, per_class = 60, features = 16, train_per_class = 48;
  double spread = 0.3;
  uint64_t seed = 1;
  // idx
  std::string train_images, train_labels, test_images, test_labels;
};

struct AppConfig {
  SimConfig base;  // schema filled in once the dataset dimensions are known
  std::vector<MechanismMode> mechanisms;
  std::vector<ConsensusMode> consensus;
  std::vector<PartitionMode> partitions;
  std::vector<double> epsilons;
  // reverse-step budget for the dual mechanism: off, match, or a fixed value
  enum class GlobalEps { off, match, fixed } global_mode = GlobalEps::off;
  double global_value = 0.0;
  std::vector<uint32_t> hidden;
  DatasetSpec dataset;
};

MechanismMode parse_mechanism(const std::string& s) {
  if (s == "ppbfl") return MechanismMode::ppbfl;
  if (s == "cafl") return MechanismMode::cafl;
  if (s == "none") return MechanismMode::none;
  bad_config("unknown mechanism \"" + s + "\" (expected ppbfl, cafl, or none)");
}

ConsensusMode parse_consensus(const std::string& s) {
  if (s == "potw") return ConsensusMode::potw;
  if (s == "pos") return ConsensusMode::pos;
  bad_config("unknown consensus \"" + s + "\" (expected potw or pos)");
}

PartitionMode parse_partition(const std::string& s) {
  if (s == "iid") return PartitionMode::iid;
  if (s == "label-shard") return PartitionMode::label_shard;
  bad_config("unknown partition \"" + s + "\" (expected iid or label-shard)");
}

DatasetSpec parse_dataset(const json& obj) {
  DatasetSpec spec;
  const std::string kind =
      find_key(obj, "kind") ? as_string(*find_key(obj, "kind"), "dataset.kind") : "blobs";
  if (kind == "blobs") {
    check_keys(obj, "dataset",
               {"kind", "classes", "per_class", "features", "spread", "seed",
                "train_per_class"});
    spec.classes = uint32_t(uint_or(obj, "classes", spec.classes));
    spec.per_class = uint32_t(uint_or(obj, "per_class", spec.per_class));
    spec.features = uint32_t(uint_or(obj, "features", spec.features));
    spec.train_per_class = uint32_t(uint_or(obj, "train_per_class", spec.train_per_class));
    spec.spread = double_or(obj, "spread", spec.spread);
    spec.seed = uint_or(obj, "seed", spec.seed);
    if (spec.classes < 2) bad_config("dataset.classes must be at least 2");
    if (spec.features == 0) bad_config("dataset.features must be positive");
    if (!(spec.spread > 0)) bad_config("dataset.spread must be positive");
    if (spec.train_per_class == 0 || spec.train_per_class >= spec.per_class)
      bad_config("dataset.train_per_class must be in [1, per_class)");
  } else if (kind == "idx") {
    check_keys(obj, "dataset",
               {"kind", "train_images", "train_labels", "test_images", "test_labels"});
    spec.from_idx = true;
    for (const char* key : {"train_images", "train_labels", "test_images", "test_labels"}) {
      const json* v = find_key(obj, key);
      if (!v) bad_config(std::string("dataset.") + key + " is required for kind \"idx\"");
      std::string* dst = key == std::string("train_images")   ? &spec.train_images
                         : key == std::string("train_labels") ? &spec.train_labels
                         : key == std::string("test_images")  ? &spec.test_images
                                                              : &spec.test_labels;
      *dst = as_string(*v, key);
    }
  } else {
    bad_config("unknown dataset.kind \"" + kind + "\" (expected blobs or idx)");
  }
  return spec;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad_config("cannot read " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    bad_config(path + ": " + e.what());
  }
  if (!root.is_object()) bad_config(path + ": top level must be an object");
  check_keys(root, "top level",
             {"rounds", "trainers", "blockchain_only", "seed", "mix_k", "threads",
              "shards_per_client", "mechanisms", "consensus", "partitions", "epsilons",
              "global_epsilon", "capacities", "rewards", "hidden", "optimizer", "dataset"});

  AppConfig cfg;
  cfg.base.rounds = uint32_t(uint_or(root, "rounds", 30));
  cfg.base.n_trainers = uint32_t(uint_or(root, "trainers", 10));
  cfg.base.n_blockchain_only = uint32_t(uint_or(root, "blockchain_only", 0));
  cfg.base.master_seed = uint_or(root, "seed", 1);
  cfg.base.mix_k = uint32_t(uint_or(root, "mix_k", 1));
  cfg.base.threads = uint32_t(uint_or(root, "threads", 1));
  cfg.base.shards_per_client = uint32_t(uint_or(root, "shards_per_client", 2));

  cfg.mechanisms = {MechanismMode::ppbfl};
  if (const json* v = find_key(root, "mechanisms")) {
    cfg.mechanisms.clear();
    for (const std::string& s : string_list(*v, "mechanisms"))
      cfg.mechanisms.push_back(parse_mechanism(s));
  }
  cfg.consensus = {ConsensusMode::potw};
  if (const json* v = find_key(root, "consensus")) {
    cfg.consensus.clear();
    for (const std::string& s : string_list(*v, "consensus"))
      cfg.consensus.push_back(parse_consensus(s));
  }
  cfg.partitions = {PartitionMode::iid};
  if (const json* v = find_key(root, "partitions")) {
    cfg.partitions.clear();
    for (const std::string& s : string_list(*v, "partitions"))
      cfg.partitions.push_back(parse_partition(s));
  }

  cfg.epsilons = {1.0};
  if (const json* v = find_key(root, "epsilons")) {
    if (!v->is_array()) bad_config("epsilons must be an array");
    cfg.epsilons.clear();
    for (const json& e : *v) {
      const double eps = as_double(e, "epsilons entry");
      if (!(eps > 0)) bad_config("epsilons entries must be positive");
      cfg.epsilons.push_back(eps);
    }
    std::set<double> uniq(cfg.epsilons.begin(), cfg.epsilons.end());
    if (uniq.size() != cfg.epsilons.size()) bad_config("epsilons has duplicate entries");
  }
  const bool has_private =
      std::any_of(cfg.mechanisms.begin(), cfg.mechanisms.end(),
                  [](MechanismMode m) { return m != MechanismMode::none; });
  if (has_private && cfg.epsilons.empty())
    bad_config("epsilons must be non-empty when ppbfl or cafl is enabled");

  if (const json* v = find_key(root, "global_epsilon")) {
    if (v->is_string()) {
      const std::string s = v->get<std::string>();
      if (s == "off")
        cfg.global_mode = AppConfig::GlobalEps::off;
      else if (s == "match")
        cfg.global_mode = AppConfig::GlobalEps::match;
      else
        bad_config("global_epsilon must be \"off\", \"match\", or a positive number");
    } else {
      cfg.global_value = as_double(*v, "global_epsilon");
      if (!(cfg.global_value > 0)) bad_config("global_epsilon must be positive");
      cfg.global_mode = AppConfig::GlobalEps::fixed;
    }
  }

  if (const json* v = find_key(root, "capacities")) {
    if (!v->is_array()) bad_config("capacities must be an array");
    for (const json& e : *v) cfg.base.capacities.push_back(as_double(e, "capacities entry"));
  }
  if (const json* v = find_key(root, "rewards")) {
    check_keys(*v, "rewards", {"packaging", "participation"});
    cfg.base.rewards.packaging = double_or(*v, "packaging", cfg.base.rewards.packaging);
    cfg.base.rewards.participation =
        double_or(*v, "participation", cfg.base.rewards.participation);
  }
  cfg.hidden = {16};
  if (const json* v = find_key(root, "hidden")) {
    if (!v->is_array()) bad_config("hidden must be an array of layer widths");
    cfg.hidden.clear();
    for (const json& e : *v) {
      const uint64_t width = as_uint(e, "hidden entry");
      if (width == 0) bad_config("hidden layer widths must be positive");
      cfg.hidden.push_back(uint32_t(width));
    }
  }
  if (const json* v = find_key(root, "optimizer")) {
    check_keys(*v, "optimizer", {"epochs", "lr", "batch_size"});
    cfg.base.optimizer.epochs = uint32_t(uint_or(*v, "epochs", cfg.base.optimizer.epochs));
    cfg.base.optimizer.lr = double_or(*v, "lr", cfg.base.optimizer.lr);
    cfg.base.optimizer.batch_size =
        uint32_t(uint_or(*v, "batch_size", cfg.base.optimizer.batch_size));
  }
  if (const json* v = find_key(root, "dataset")) {
    if (!v->is_object()) bad_config("dataset must be an object");
    cfg.dataset = parse_dataset(*v);
  }
  return cfg;
}

// ---------------------------------------------------------------------------

std::pair<Dataset, Dataset> build_dataset(const DatasetSpec& spec) {
  try {
    if (spec.from_idx) {
      Dataset train = load_idx(spec.train_images, spec.train_labels);
      Dataset test = load_idx(spec.test_images, spec.test_labels);
      return {std::move(train), std::move(test)};
    }
    const Dataset all =
        synth_blobs(spec.classes, spec.per_class, spec.features, spec.spread, spec.seed);
    std::vector<size_t> tr, te;
    for (uint32_t c = 0; c < spec.classes; ++c)
      for (uint32_t i = 0; i < spec.per_class; ++i)
        (i < spec.train_per_class ? tr : te).push_back(size_t(c) * spec.per_class + i);
    return {subset(all, tr), subset(all, te)};
  } catch (const Error& e) {
    bad_config(std::string("dataset: ") + e.what());
  }
}

std::vector<LayerShape> build_schema(const std::vector<uint32_t>& hidden,
                                     uint32_t features, uint32_t classes) {
  std::vector<LayerShape> schema;
  uint32_t prev = features;
  for (uint32_t width : hidden) {
    schema.push_back({width, prev});
    prev = width;
  }
  schema.push_back({classes, prev});
  return schema;
}

struct GridPoint {
  SimConfig cfg;
  std::string name;
};

std::vector<GridPoint> expand_grid(const AppConfig& app) {
  std::vector<GridPoint> points;
  for (MechanismMode mech : app.mechanisms) {
    for (ConsensusMode cons : app.consensus) {
      for (PartitionMode part : app.partitions) {
        auto push = [&](std::optional<double> eps) {
          SimConfig cfg = app.base;
          cfg.mechanism = mech;
          cfg.consensus = cons;
          cfg.partition = part;
          cfg.epsilon_local = eps;
          cfg.epsilon_global.reset();
          if (mech == MechanismMode::ppbfl && eps) {
            if (app.global_mode == AppConfig::GlobalEps::match)
              cfg.epsilon_global = *eps;
            else if (app.global_mode == AppConfig::GlobalEps::fixed)
              cfg.epsilon_global = app.global_value;
          }
          std::string name = std::string(mechanism_name(mech)) + "-" + consensus_name(cons) +
                             "-" + partition_name(part);
          if (eps) name += "-eps" + format_double(*eps);
          points.push_back({std::move(cfg), std::move(name)});
        };
        if (mech == MechanismMode::none) {
          push(std::nullopt);
        } else {
          for (double eps : app.epsilons) push(eps);
        }
      }
    }
  }
  return points;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out.good()) throw std::runtime_error("write failed for " + path.string());
}

std::string eps_label(const std::optional<double>& eps) {
  return eps ? format_double(*eps) : "off";
}

// Flag > environment > config file.
uint64_t resolve_seed(uint64_t config_seed, const std::optional<uint64_t>& flag_seed) {
  if (flag_seed) return *flag_seed;
  if (const char* env = std::getenv("PPBFL_SEED")) {
    const std::string s(env);
    uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
      bad_config("PPBFL_SEED must be an unsigned integer, got \"" + s + "\"");
    return value;
  }
  return config_seed;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, bool dry_run,
            const std::optional<uint64_t>& seed_flag, unsigned grid_parallel) {
  AppConfig app = load_config(config_path);
  app.base.master_seed = resolve_seed(app.base.master_seed, seed_flag);

  const auto [train, test] = build_dataset(app.dataset);
  if (train.n_features != test.n_features)
    bad_config("train/test feature dimensions differ");
  if (test.n_classes > train.n_classes)
    bad_config("test set has labels the training set never shows");
  app.base.schema = build_schema(app.hidden, train.n_features, train.n_classes);

  std::vector<GridPoint> points = expand_grid(app);
  for (const GridPoint& p : points) {
    try {
      validate_config(p.cfg);
    } catch (const Error& e) {
      bad_config(p.name + ": " + e.what());
    }
  }

  std::printf("grid: %zu points, %u rounds each, seed %llu, %zu train / %zu test samples\n",
              points.size(), app.base.rounds, (unsigned long long)app.base.master_seed,
              train.size(), test.size());
  for (size_t i = 0; i < points.size(); ++i) {
    const SimConfig& c = points[i].cfg;
    std::printf("  %02zu %-6s %-5s %-11s eps_local=%-5s eps_global=%-5s -> %s\n", i + 1,
                mechanism_name(c.mechanism), consensus_name(c.consensus),
                partition_name(c.partition), eps_label(c.epsilon_local).c_str(),
                eps_label(c.epsilon_global).c_str(), points[i].name.c_str());
  }
  if (dry_run) {
    std::printf("dry run: nothing executed\n");
    return 0;
  }

  fs::create_directories(out_dir);

  struct PointRun {
    std::vector<RoundRecord> records;
    std::vector<StakeSnapshotRow> stake_rows;
  };
  std::vector<PointRun> runs(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  std::mutex print_mu;

  auto run_point = [&](size_t i) {
    const GridPoint& p = points[i];
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentResult xr = run_experiment(p.cfg, train, test);

    const fs::path dir = fs::path(out_dir) / p.name;
    fs::create_directories(dir);
    std::string acc = accuracy_csv_header();
    append_accuracy_rows(acc, p.cfg, xr.records);
    write_file(dir / "accuracy.csv", acc);
    std::string stake = stake_csv_header();
    append_stake_rows(stake, p.cfg, xr.state.stake_history);
    write_file(dir / "stake.csv", stake);
    write_file(dir / "chain.log", export_chain(xr.state.chain));
    write_file(dir / "stake_ledger.csv", stake_ledger_csv(xr.state.stake_history));

    runs[i].records = std::move(xr.records);
    runs[i].stake_rows = std::move(xr.state.stake_history);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::lock_guard<std::mutex> lock(print_mu);
    std::printf("done %-28s final_acc=%.4f blocks=%zu (%.1fs)\n", p.name.c_str(),
                runs[i].records.back().test_accuracy, size_t(p.cfg.rounds) + 1, secs);
    std::fflush(stdout);
  };

  const size_t workers = std::min<size_t>(std::max(1u, grid_parallel), points.size());
  if (workers <= 1) {
    for (size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < points.size(); i = next.fetch_add(1)) {
          try {
            run_point(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::string acc_all = accuracy_csv_header();
  std::string stake_all = stake_csv_header();
  for (size_t i = 0; i < points.size(); ++i) {
    append_accuracy_rows(acc_all, points[i].cfg, runs[i].records);
    append_stake_rows(stake_all, points[i].cfg, runs[i].stake_rows);
  }
  write_file(fs::path(out_dir) / "accuracy.csv", acc_all);
  write_file(fs::path(out_dir) / "stake.csv", stake_all);

  std::printf("\n%-9s %-9s %-11s %-9s %-10s %-9s %-9s\n", "mechanism", "consensus",
              "partition", "eps_local", "eps_global", "final_acc", "best_acc");
  for (size_t i = 0; i < points.size(); ++i) {
    const SimConfig& c = points[i].cfg;
    double best = 0.0;
    for (const RoundRecord& r : runs[i].records) best = std::max(best, r.test_accuracy);
    std::printf("%-9s %-9s %-11s %-9s %-10s %-9.4f %-9.4f\n", mechanism_name(c.mechanism),
                consensus_name(c.consensus), partition_name(c.partition),
                eps_label(c.epsilon_local).c_str(), eps_label(c.epsilon_global).c_str(),
                runs[i].records.back().test_accuracy, best);
  }
  std::printf("\nwrote %s/accuracy.csv, %s/stake.csv and %zu point directories\n",
              out_dir.c_str(), out_dir.c_str(), points.size());
  return 0;
}

int cmd_verify_chain(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "verify-chain: cannot read %s\n", path.c_str());
    return 2;
  }
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.empty()) {
    std::fprintf(stderr, "verify-chain: %s is empty\n", path.c_str());
    return 2;
  }
  try {
    const Chain chain = import_chain(text);
    if (const auto failure = validate_chain(chain)) {
      std::printf("invalid: height %llu: %s\n", (unsigned long long)failure->height,
                  failure->reason.c_str());
      return 1;
    }
    std::printf("ok: %zu blocks, head %s\n", chain.blocks.size(),
                to_hex(chain.blocks.back().block_hash).c_str());
    return 0;
  } catch (const Error& e) {
    std::printf("invalid: %s\n", e.what());
    return 1;
  }
}

int cmd_dp_selftest(double eps, uint64_t draws) {
  if (!(eps > 0) || !std::isfinite(eps)) {
    std::fprintf(stderr, "dp-selftest: epsilon must be positive\n");
    return 2;
  }
  if (draws == 0) {
    std::fprintf(stderr, "dp-selftest: draws must be positive\n");
    return 2;
  }

  const PrivacyBudget budget(eps);
  const BernoulliSplit split = bernoulli_split(budget);
  int failed = 0;
  const auto row = [&](bool pass, const char* name, const std::string& detail) {
    std::printf("  [%s] %-22s %s\n", pass ? "ok" : "FAIL", name, detail.c_str());
    if (!pass) ++failed;
  };
  std::printf("dp-selftest: eps=%s draws=%llu\n", format_double(eps).c_str(),
              (unsigned long long)draws);

  // Exact unbiasedness of each mechanism's branch mix for w=1 around c=0.
  const auto exact_mean = [](double p1, double f1, double f0) {
    return p1 * f1 + (1.0 - p1) * f0;
  };
  {
    const double m = exact_mean(split.p_one, local_branch_factor(budget, true),
                                local_branch_factor(budget, false));
    row(ulp_distance_cli(m, 1.0) <= 8, "forward exact mean",
        "E[out]/w = " + format_double(m));
    const double g = exact_mean(split.p_one, global_branch_factor(budget, true),
                                global_branch_factor(budget, false));
    row(ulp_distance_cli(g, 1.0) <= 8, "reverse exact mean",
        "E[out]/w = " + format_double(g));
  }
  if (eps >= 1e-4) {
    const BernoulliSplit cs = cafl_bernoulli_split(budget);
    const double m = exact_mean(cs.p_one, cafl_branch_factor(budget, true),
                                cafl_branch_factor(budget, false));
    row(ulp_distance_cli(m, 1.0) <= 8, "baseline exact mean",
        "E[out]/w = " + format_double(m));
  } else {
    row(true, "baseline exact mean", "skipped (eps below baseline floor)");
  }

  {
    const double ratio = split.p_one / split.p_zero;
    const double target = std::exp(eps) / (std::exp(eps) + 1.0);
    const bool pass = ulp_distance_cli(ratio, target) <= 8 && ratio < std::exp(eps);
    row(pass, "branch odds ratio",
        format_double(ratio) + " = e^eps/(e^eps+1), below e^eps");
  }

  // Monte-Carlo around w = 1, geometry center 0, radius 1.
  const LayerGeometry geom{0.0, 1.0, GeometrySource::self};
  const double w = 1.0;
  const double var = closed_form_variance(1.0, budget);
  const double se = std::sqrt(var / double(draws));
  Rng rng(97531);

  const auto mc = [&](bool reverse) {
    double sum = 0.0, sumsq = 0.0;
    for (uint64_t i = 0; i < draws; ++i) {
      const bool coin = rng.bernoulli(split.p_one);
      const double out = reverse ? perturb_global(w, geom, budget, coin).output
                                 : perturb_local(w, geom, budget, coin).output;
      const double x = out - w;
      sum += x;
      sumsq += x * x;
    }
    const double mean_err = sum / double(draws);
    const double s2 = draws > 1 ? (sumsq - sum * sum / double(draws)) / double(draws - 1) : 0.0;
    return std::pair<double, double>(mean_err, s2);
  };

  const auto [fw_err, fw_var] = mc(false);
  {
    char buf[160];
    std::snprintf(buf, sizeof buf, "mean %.6f (%.2f se, tol 4)", w + fw_err,
                  std::abs(fw_err) / se);
    row(std::abs(fw_err) <= 4 * se, "forward mc mean", buf);
  }
  const auto [rv_err, rv_var] = mc(true);
  {
    char buf[160];
    std::snprintf(buf, sizeof buf, "mean %.6f (%.2f se, tol 4)", w + rv_err,
                  std::abs(rv_err) / se);
    row(std::abs(rv_err) <= 4 * se, "reverse mc mean", buf);
  }
  {
    const double tol = std::max(0.01, 4.0 * std::sqrt(2.0 / double(draws)));
    const double rel_fw = std::abs(fw_var - var) / var;
    const double rel_rv = std::abs(rv_var - var) / var;
    char buf[160];
    std::snprintf(buf, sizeof buf, "fw %.3f%%, rv %.3f%% off closed form (tol %.1f%%)",
                  rel_fw * 100, rel_rv * 100, tol * 100);
    row(rel_fw <= tol && rel_rv <= tol, "mc variance", buf);
  }
  {
    double sum = 0.0, sumsq = 0.0;
    for (uint64_t i = 0; i < draws; ++i) {
      const double mid = perturb_local(w, geom, budget, rng.bernoulli(split.p_one)).output;
      const double out =
          perturb_global(mid, geom, budget, rng.bernoulli(split.p_one)).output;
      const double x = out - w;
      sum += x;
      sumsq += x * x;
    }
    const double mean_err = sum / double(draws);
    const double s2 = draws > 1 ? (sumsq - sum * sum / double(draws)) / double(draws - 1) : 0.0;
    const double cse = std::sqrt(std::max(s2, 1e-300) / double(draws));
    char buf[160];
    std::snprintf(buf, sizeof buf, "mean %.6f (%.2f se, tol 4)", w + mean_err,
                  std::abs(mean_err) / cse);
    row(std::abs(mean_err) <= 4 * cse, "composed mc mean", buf);
  }

  std::printf("dp-selftest: %s\n", failed == 0 ? "all checks passed" : "FAILED");
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic federated-learning simulator with local differential "
               "privacy, mixed-cid transactions, and a validating block chain"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  bool dry_run = false;
  std::optional<uint64_t> seed_flag;
  unsigned grid_parallel = 1;
  CLI::App* run = app.add_subcommand("run", "Run the configured experiment grid");
  run->add_option("--config", config_path, "JSON config file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_flag("--dry-run", dry_run, "Print the resolved grid and exit");
  run->add_option("--seed", seed_flag, "Override the master seed (beats PPBFL_SEED)");
  run->add_option("--parallel", grid_parallel, "Grid points to run concurrently")
      ->check(CLI::PositiveNumber);

  std::string chain_path;
  CLI::App* verify = app.add_subcommand("verify-chain", "Validate an exported chain file");
  verify->add_option("file", chain_path, "chain.log produced by run")->required();

  double st_eps = 1.0;
  uint64_t st_draws = 200000;
  CLI::App* selftest =
      app.add_subcommand("dp-selftest", "Check the privacy mechanisms against closed forms");
  selftest->add_option("--epsilon", st_eps, "Privacy budget to test");
  selftest->add_option("--draws", st_draws, "Monte-Carlo draws per check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, dry_run, seed_flag, grid_parallel);
    if (verify->parsed()) return cmd_verify_chain(chain_path);
    return cmd_dp_selftest(st_eps, st_draws);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const Error& e) {
    if (e.code() == Errc::invalid_config) {
      std::fprintf(stderr, "config: %s\n", e.what());
      return 2;
    }
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
