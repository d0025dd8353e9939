#include "ppbfl/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <thread>

#include "ppbfl/error.hpp"
#include "ppbfl/mixing.hpp"

namespace ppbfl {

namespace {

std::string padded_id(const char* prefix, uint32_t index, uint32_t total) {
  uint32_t width = 2;
  for (uint32_t scale = 100; scale <= total; scale *= 10) ++width;
  std::string digits = std::to_string(index);
  std::string out = prefix;
  out.append(width - std::min<size_t>(width, digits.size()), '0');
  out += digits;
  return out;
}

ModelParams fetch_model(const CasStore& store, const Cid& cid) {
  return deserialize(store.get(cid));
}

ModelParams mean_models(const std::vector<ModelParams>& models) {
  if (models.empty()) throw Error(Errc::round_failed, "no models to aggregate");
  ModelParams agg = models.front();
  for (size_t m = 1; m < models.size(); ++m) {
    if (models[m].schema_id != agg.schema_id) {
      throw Error(Errc::shape_mismatch, "aggregating models with different schemas");
    }
    for (size_t l = 0; l < agg.layers.size(); ++l) {
      auto& dst = agg.layers[l];
      const auto& src = models[m].layers[l];
      for (size_t i = 0; i < dst.weights.size(); ++i) dst.weights[i] += src.weights[i];
      for (size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += src.bias[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(models.size());
  for (auto& layer : agg.layers) {
    for (auto& w : layer.weights) w *= inv;
    for (auto& b : layer.bias) b *= inv;
  }
  return agg;
}

void check_epsilon(const std::optional<double>& eps, const char* name) {
  if (eps && (!std::isfinite(*eps) || *eps <= 0)) {
    throw Error(Errc::invalid_config, std::string(name) + " must be positive and finite");
  }
}

}  // namespace

const char* mechanism_name(MechanismMode m) {
  switch (m) {
    case MechanismMode::ppbfl: return "ppbfl";
    case MechanismMode::cafl: return "cafl";
    default: return "none";
  }
}

const char* consensus_name(ConsensusMode c) {
  return c == ConsensusMode::potw ? "potw" : "pos";
}

const char* partition_name(PartitionMode p) {
  return p == PartitionMode::iid ? "iid" : "label-shard";
}

void validate_config(const SimConfig& config) {
  if (config.n_trainers < 2) {
    throw Error(Errc::invalid_config, "need at least two trainers");
  }
  if (config.rounds < 1) throw Error(Errc::invalid_config, "need at least one round");
  check_epsilon(config.epsilon_local, "epsilon_local");
  check_epsilon(config.epsilon_global, "epsilon_global");
  if (config.mechanism == MechanismMode::none &&
      (config.epsilon_local || config.epsilon_global)) {
    throw Error(Errc::invalid_config, "mechanism none takes no privacy budgets");
  }
  if (config.mechanism == MechanismMode::cafl && config.epsilon_global) {
    throw Error(Errc::invalid_config, "the cafl baseline applies local noise only");
  }
  if (config.schema.empty()) throw Error(Errc::invalid_config, "model schema is empty");
  try {
    init_model(config.schema, 0);
  } catch (const Error& e) {
    throw Error(Errc::invalid_config, std::string("bad model schema: ") + e.what());
  }
  if (!config.capacities.empty() && config.capacities.size() != config.n_trainers) {
    throw Error(Errc::invalid_config, "capacities must match the trainer count");
  }
  for (double c : config.capacities) {
    if (!std::isfinite(c) || c <= 0) {
      throw Error(Errc::invalid_config, "capacities must be positive and finite");
    }
  }
  if (config.partition == PartitionMode::label_shard && config.shards_per_client == 0) {
    throw Error(Errc::invalid_config, "shards_per_client must be positive");
  }
  if (config.optimizer.batch_size == 0) {
    throw Error(Errc::invalid_config, "batch_size must be positive");
  }
  if (!std::isfinite(config.optimizer.lr) || config.optimizer.lr <= 0) {
    throw Error(Errc::invalid_config, "learning rate must be positive and finite");
  }
  if (config.threads == 0) throw Error(Errc::invalid_config, "threads must be positive");
}

SimState init_experiment(const SimConfig& config, const Dataset& train,
                         const Dataset& test) {
  if (config.n_trainers == 0) {
    throw Error(Errc::invalid_config, "need at least one trainer");
  }
  if (config.schema.empty()) throw Error(Errc::invalid_config, "model schema is empty");
  if (!config.capacities.empty() && config.capacities.size() != config.n_trainers) {
    throw Error(Errc::invalid_config, "capacities must match the trainer count");
  }

  SimState state;
  state.config = config;
  state.root = Rng(config.master_seed);

  for (uint32_t i = 0; i < config.n_trainers; ++i) {
    state.trainer_ids.push_back(padded_id("t", i + 1, config.n_trainers));
  }
  for (uint32_t i = 0; i < config.n_trainers; ++i) {
    auto key_rng = state.root.fork("key", i);
    state.trainer_keys.push_back(ring_keygen(key_rng));
    state.ring.push_back(state.trainer_keys.back().pub);
  }
  for (uint32_t i = 0; i < config.n_trainers; ++i) {
    NodeProfile p;
    p.node_id = state.trainer_ids[i];
    p.role = NodeRole::trainer;
    p.capacity = config.capacities.empty() ? 1.0 : config.capacities[i];
    state.profiles.push_back(std::move(p));
  }
  for (uint32_t i = 0; i < config.n_blockchain_only; ++i) {
    NodeProfile p;
    p.node_id = padded_id("bn", i + 1, config.n_blockchain_only);
    p.role = NodeRole::blockchain_only;
    state.profiles.push_back(std::move(p));
  }

  PartitionPlan plan;
  plan.mode = config.partition;
  plan.n_clients = config.n_trainers;
  plan.shards_per_client = config.shards_per_client;
  plan.seed = state.root.fork("partition").seed();
  state.shards = partition(train, plan);
  state.test_set = test;

  const auto model = init_model(config.schema, state.root.fork("init").seed());
  state.global_cid = state.store.put(serialize(model));
  state.chain.blocks.push_back(make_genesis(state.global_cid));
  state.aggregator_id = state.trainer_ids.front();
  return state;
}

RoundRecord run_round(SimState& state) {
  const uint64_t round = state.next_round;
  const SimConfig& cfg = state.config;

  auto step = [round](const char* name, auto&& fn) -> decltype(fn()) {
    try {
      return fn();
    } catch (const Error& e) {
      throw Error(e.code(), "round " + std::to_string(round) + ", " + name + ": " +
                                e.what());
    }
  };

  RoundRecord rec;
  rec.round = round;
  rec.packager = state.aggregator_id;

  const bool degenerate = state.trainer_ids.size() == 1;
  std::vector<size_t> active;  // indices into trainer_ids; the aggregator sits out
  for (size_t i = 0; i < state.trainer_ids.size(); ++i) {
    if (degenerate || state.trainer_ids[i] != state.aggregator_id) active.push_back(i);
  }

  const ModelParams prev_global = step("distributing the global model", [&] {
    return fetch_model(state.store, state.global_cid);
  });

  // Steps 1-2 per trainer: train on the shard, perturb, upload. Independent
  // across trainers, so they may run on worker threads; every random draw
  // comes from a per-trainer fork, making the thread count irrelevant to the
  // output.
  struct LocalResult {
    TrainReport report;
    Cid cid;
  };
  std::vector<LocalResult> locals(active.size());

  auto train_one = [&](size_t j) {
    const size_t i = active[j];
    const std::string& id = state.trainer_ids[i];
    auto train_rng = state.root.fork("train", round, i);
    auto [trained, report] =
        train_local(prev_global, state.shards[i], cfg.optimizer,
                    state.profiles[i].capacity, train_rng);
    report.node_id = id;
    report.round = round;
    ModelParams upload = std::move(trained);
    if (cfg.epsilon_local && cfg.mechanism == MechanismMode::ppbfl) {
      upload = perturb_model(upload, &prev_global, PrivacyBudget(*cfg.epsilon_local),
                             Mechanism::local, state.root.fork("dp", round, i));
    } else if (cfg.epsilon_local && cfg.mechanism == MechanismMode::cafl) {
      upload = perturb_model(upload, nullptr, PrivacyBudget(*cfg.epsilon_local),
                             Mechanism::cafl, state.root.fork("dp", round, i));
    }
    locals[j] = {std::move(report), state.store.put(serialize(upload))};
  };

  step("local training and upload", [&] {
    const size_t n_workers = std::min<size_t>(cfg.threads, active.size());
    if (n_workers <= 1) {
      for (size_t j = 0; j < active.size(); ++j) train_one(j);
      return 0;
    }
    std::atomic<size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    for (size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const size_t j = next.fetch_add(1);
          if (j >= active.size()) return;
          try {
            train_one(j);
          } catch (...) {
            std::lock_guard lock(err_mu);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return 0;
  });

  // Step 2b: broadcast ring-signed mixed transactions over the zero-latency
  // bus. Arrival order is a seeded shuffle; each sender's cover cids come
  // from the transactions that arrived before its own.
  MixState bus;
  std::vector<Transaction> round_txs;
  std::vector<Cid> fetched;
  step("broadcasting mixed transactions", [&] {
    std::vector<size_t> arrival(active.size());
    for (size_t j = 0; j < arrival.size(); ++j) arrival[j] = j;
    auto order_rng = state.root.fork("order", round);
    order_rng.shuffle(arrival);
    for (size_t j : arrival) {
      const size_t i = active[j];
      const Cid& own = locals[j].cid;
      rec.uploaded_cids.push_back(own);
      if (degenerate) continue;  // a ring of one cannot sign; skip announcements
      size_t foreign = bus.seen_cids.size();
      if (bus.seen_cids.count(own)) --foreign;
      const auto k = static_cast<uint32_t>(std::min<uint64_t>(cfg.mix_k, foreign));
      auto mix_rng = state.root.fork("mix", round, i);
      auto tx = build_mixed_tx(own, bus, k, round, state.ring, i,
                               state.trainer_keys[i].secret, mix_rng);
      for (auto& cid : ingest_tx(bus, tx)) fetched.push_back(std::move(cid));
      round_txs.push_back(std::move(tx));
    }
    if (degenerate) fetched = rec.uploaded_cids;
    return 0;
  });
  rec.fetched_cids = fetched;

  std::vector<TrainReport> reports;
  reports.reserve(locals.size());
  for (const auto& l : locals) {
    reports.push_back(l.report);
    rec.durations.emplace_back(l.report.node_id, l.report.duration);
  }

  const std::string elected = step("electing the next aggregator", [&] {
    if (degenerate) return state.aggregator_id;
    if (cfg.consensus == ConsensusMode::potw) {
      return potw_elect(reports, state.aggregator_id);
    }
    auto pos_rng = state.root.fork("pos", round);
    return pos_elect(state.profiles, pos_rng);
  });
  rec.winner = elected;

  const ModelParams global = step("aggregating local models", [&] {
    std::vector<ModelParams> models;
    models.reserve(fetched.size());
    for (const auto& cid : fetched) models.push_back(fetch_model(state.store, cid));
    ModelParams agg = mean_models(models);
    if (cfg.epsilon_global && cfg.mechanism == MechanismMode::ppbfl) {
      agg = perturb_model(agg, nullptr, PrivacyBudget(*cfg.epsilon_global),
                          Mechanism::global, state.root.fork("gdp", round));
    }
    return agg;
  });

  step("packaging the block", [&] {
    const Cid new_cid = state.store.put(serialize(global));
    state.chain.blocks.push_back(build_block(round,
                                             state.chain.blocks.back().block_hash,
                                             round, round_txs, new_cid));
    rec.global_cid = new_cid;
    return 0;
  });

  RoundOutcome outcome;
  outcome.round = round;
  outcome.winner = state.aggregator_id;  // the packager earns the packaging reward
  outcome.reports = reports;
  outcome.reward = cfg.rewards;
  apply_rewards(outcome, state.profiles);
  for (const auto& p : state.profiles) {
    state.stake_history.push_back(
        {round, p.node_id, p.stake, p.coin_age, p.role, p.node_id == elected});
  }

  rec.test_accuracy = step("evaluating the new global model", [&] {
    return evaluate(global, state.test_set);
  });

  if (cfg.epsilon_local && cfg.mechanism != MechanismMode::none) {
    rec.budget_local = *cfg.epsilon_local;
    const std::vector<PrivacyBudget> spent(reports.size(),
                                           PrivacyBudget(*cfg.epsilon_local));
    rec.budget_local_composed = compose_budgets(spent).epsilon;
  }
  if (cfg.epsilon_global && cfg.mechanism == MechanismMode::ppbfl) {
    rec.budget_global = *cfg.epsilon_global;
  }

  state.global_cid = rec.global_cid;
  state.aggregator_id = elected;
  ++state.next_round;
  return rec;
}

ExperimentResult run_experiment(const SimConfig& config, const Dataset& train,
                                const Dataset& test) {
  validate_config(config);
  ExperimentResult result{{}, init_experiment(config, train, test)};
  result.records.reserve(config.rounds);
  for (uint32_t r = 0; r < config.rounds; ++r) {
    result.records.push_back(run_round(result.state));
  }
  return result;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string accuracy_csv_header() {
  return "mechanism,consensus,partition,epsilon_local,epsilon_global,round,accuracy\n";
}

std::string stake_csv_header() { return "consensus,epsilon,round,node_id,stake,role\n"; }

void append_accuracy_rows(std::string& out, const SimConfig& config,
                          std::span<const RoundRecord> records) {
  const std::string eps_l =
      config.epsilon_local ? format_double(*config.epsilon_local) : "off";
  const std::string eps_g =
      config.epsilon_global ? format_double(*config.epsilon_global) : "off";
  const std::string prefix = std::string(mechanism_name(config.mechanism)) + ',' +
                             consensus_name(config.consensus) + ',' +
                             partition_name(config.partition) + ',' + eps_l + ',' +
                             eps_g + ',';
  for (const auto& rec : records) {
    out += prefix;
    out += std::to_string(rec.round);
    out += ',';
    out += format_double(rec.test_accuracy);
    out += '\n';
  }
}

void append_stake_rows(std::string& out, const SimConfig& config,
                       std::span<const StakeSnapshotRow> rows) {
  const std::string eps =
      config.epsilon_local ? format_double(*config.epsilon_local) : "off";
  const std::string prefix =
      std::string(consensus_name(config.consensus)) + ',' + eps + ',';
  for (const auto& r : rows) {
    out += prefix;
    out += std::to_string(r.round);
    out += ',';
    out += r.node_id;
    out += ',';
    out += format_double(r.stake);
    out += ',';
    out += role_name(r.role);
    out += '\n';
  }
}

}  // namespace ppbfl
