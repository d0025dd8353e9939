#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppbfl/rng.hpp"
#include "ppbfl/tensornet.hpp"

namespace ppbfl {

enum class NodeRole { trainer, blockchain_only };

inline const char* role_name(NodeRole r) {
  return r == NodeRole::trainer ? "trainer" : "blockchain-only";
}

struct NodeProfile {
  std::string node_id;
  NodeRole role = NodeRole::trainer;
  double capacity = 1.0;   // samples per simulated time unit
  double stake = 0.0;
  double coin_age = 0.0;
};

struct RewardSchedule {
  double packaging = 2.0;
  double participation = 1.0;
};

// Proof of training work: the node that reported the shortest training
// duration wins; ties break to the lexicographically smallest node_id. The
// previous winner is excluded even if a report slips in for it. No eligible
// report -> NoEligibleNode.
std::string potw_elect(std::span<const TrainReport> reports,
                       const std::optional<std::string>& previous_winner);

// Proof of stake by coin age: highest coin_age among trainers wins (ties
// lexicographic); if every trainer is at age zero the pick is uniform.
// The winner's age resets to zero, every other trainer ages by one unit.
std::string pos_elect(std::vector<NodeProfile>& profiles, Rng& rng);

struct RoundOutcome {
  uint64_t round = 0;
  std::string winner;  // the node credited with packaging this round
  std::vector<TrainReport> reports;
  RewardSchedule reward;
};

// Winner gains the packaging reward only; every reporter other than the
// winner gains the participation reward. Stake never decreases.
void apply_rewards(const RoundOutcome& outcome, std::vector<NodeProfile>& profiles);

struct StakeSnapshotRow {
  uint64_t round = 0;
  std::string node_id;
  double stake = 0.0;
  double coin_age = 0.0;
  NodeRole role = NodeRole::trainer;
  bool winner = false;
};

// "round,node_id,stake,coin_age,winner" with a header line.
std::string stake_ledger_csv(std::span<const StakeSnapshotRow> rows);

}  // namespace ppbfl
