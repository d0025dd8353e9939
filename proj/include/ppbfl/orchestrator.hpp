#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ppbfl/cas.hpp"
#include "ppbfl/consensus.hpp"
#include "ppbfl/dataset.hpp"
#include "ppbfl/dp.hpp"
#include "ppbfl/ledger.hpp"
#include "ppbfl/rng.hpp"
#include "ppbfl/tensornet.hpp"

namespace ppbfl {

enum class MechanismMode { ppbfl, cafl, none };
enum class ConsensusMode { potw, pos };

const char* mechanism_name(MechanismMode m);
const char* consensus_name(ConsensusMode c);
const char* partition_name(PartitionMode p);

struct SimConfig {
  uint32_t n_trainers = 10;
  uint32_t n_blockchain_only = 0;
  uint32_t rounds = 30;
  std::optional<double> epsilon_local;   // nullopt = off
  std::optional<double> epsilon_global;  // nullopt = off
  MechanismMode mechanism = MechanismMode::ppbfl;
  ConsensusMode consensus = ConsensusMode::potw;
  PartitionMode partition = PartitionMode::iid;
  uint32_t shards_per_client = 2;
  std::vector<LayerShape> schema;
  TrainOptions optimizer;
  uint32_t mix_k = 1;
  uint64_t master_seed = 0;
  std::vector<double> capacities;  // per trainer; empty = all 1.0
  RewardSchedule rewards;
  uint32_t threads = 1;  // worker threads for local training
};

// InvalidConfig on violations (fewer than 2 trainers, no rounds, bad
// epsilons, capacity count mismatch, empty schema, ...).
void validate_config(const SimConfig& config);

struct RoundRecord {
  uint64_t round = 0;
  Cid global_cid;
  double test_accuracy = 0.0;
  std::string winner;    // elected this round; aggregates the next round
  std::string packager;  // aggregated and packaged this round
  std::vector<std::pair<std::string, double>> durations;  // node_id -> simulated time
  std::optional<double> budget_local;           // per-trainer epsilon
  std::optional<double> budget_local_composed;  // summed over this round's trainers
  std::optional<double> budget_global;
  std::vector<Cid> uploaded_cids;  // local models uploaded this round
  std::vector<Cid> fetched_cids;   // local models the aggregator retrieved
};

struct SimState {
  SimConfig config;
  CasStore store;
  Chain chain;
  std::vector<NodeProfile> profiles;
  std::vector<std::string> trainer_ids;        // sorted; ring order
  std::vector<RingKeyPair> trainer_keys;       // aligned with trainer_ids
  std::vector<GroupElement> ring;              // aligned with trainer_ids
  std::vector<Dataset> shards;                 // aligned with trainer_ids
  Dataset test_set;
  Cid global_cid;
  std::string aggregator_id;  // packages the next run_round call
  uint64_t next_round = 1;
  Rng root{0};
  std::vector<StakeSnapshotRow> stake_history;
};

// Builds shards, keys, node profiles, the initial model, and the genesis
// block (packaged by the bootstrap node, the first trainer).
SimState init_experiment(const SimConfig& config, const Dataset& train,
                         const Dataset& test);

// One protocol round:
//   1. every trainer but the current aggregator downloads the global model
//      and trains on its shard;
//   2. each trainer perturbs (mechanism-dependent), uploads to cas, and
//      broadcasts a ring-signed mixed transaction;
//   3. consensus elects the next round's aggregator from this round's
//      reports (PoTW) or stake ages (PoS);
//   4. the current aggregator ingests transactions, fetches each fresh cid
//      once, averages element-wise, applies the reverse perturbation once
//      (ppbfl with a global budget), and uploads the new global model;
//   5. it packages the block, rewards are applied, accuracy is measured.
// Any step failure aborts the round with a diagnostic naming the step.
RoundRecord run_round(SimState& state);

struct ExperimentResult {
  std::vector<RoundRecord> records;
  SimState state;
};

ExperimentResult run_experiment(const SimConfig& config, const Dataset& train,
                                const Dataset& test);

// Shortest round-trip decimal text for a double (stable across runs).
std::string format_double(double v);

// Stable CSV contracts.
// accuracy.csv: mechanism,consensus,partition,epsilon_local,epsilon_global,round,accuracy
// stake.csv:    consensus,epsilon,round,node_id,stake,role
std::string accuracy_csv_header();
std::string stake_csv_header();
void append_accuracy_rows(std::string& out, const SimConfig& config,
                          std::span<const RoundRecord> records);
void append_stake_rows(std::string& out, const SimConfig& config,
                       std::span<const StakeSnapshotRow> rows);

}  // namespace ppbfl
