#include "ppbfl/consensus.hpp"

#include <algorithm>
#include <charconv>

#include "ppbfl/error.hpp"

namespace ppbfl {

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

NodeProfile* find_profile(std::vector<NodeProfile>& profiles, const std::string& id) {
  for (auto& p : profiles) {
    if (p.node_id == id) return &p;
  }
  return nullptr;
}

}  // namespace

std::string potw_elect(std::span<const TrainReport> reports,
                       const std::optional<std::string>& previous_winner) {
  const TrainReport* best = nullptr;
  for (const auto& r : reports) {
    if (previous_winner && r.node_id == *previous_winner) continue;
    if (!best || r.duration < best->duration ||
        (r.duration == best->duration && r.node_id < best->node_id)) {
      best = &r;
    }
  }
  if (!best) {
    throw Error(Errc::no_eligible_node, "no report from a node other than the previous winner");
  }
  return best->node_id;
}

std::string pos_elect(std::vector<NodeProfile>& profiles, Rng& rng) {
  std::vector<NodeProfile*> trainers;
  for (auto& p : profiles) {
    if (p.role == NodeRole::trainer) trainers.push_back(&p);
  }
  if (trainers.empty()) throw Error(Errc::no_eligible_node, "no trainer to elect");

  NodeProfile* winner = nullptr;
  const bool any_age = std::any_of(trainers.begin(), trainers.end(),
                                   [](const NodeProfile* t) { return t->coin_age > 0; });
  if (!any_age) {
    winner = trainers[rng.next_index(trainers.size())];
  } else {
    for (auto* t : trainers) {
      if (!winner || t->coin_age > winner->coin_age ||
          (t->coin_age == winner->coin_age && t->node_id < winner->node_id)) {
        winner = t;
      }
    }
  }
  for (auto* t : trainers) {
    if (t == winner) {
      t->coin_age = 0.0;
    } else {
      t->coin_age += 1.0;
    }
  }
  return winner->node_id;
}

void apply_rewards(const RoundOutcome& outcome, std::vector<NodeProfile>& profiles) {
  if (auto* w = find_profile(profiles, outcome.winner)) {
    if (w->role == NodeRole::trainer) w->stake += outcome.reward.packaging;
  }
  for (const auto& r : outcome.reports) {
    if (r.node_id == outcome.winner) continue;
    if (auto* p = find_profile(profiles, r.node_id)) {
      if (p->role == NodeRole::trainer) p->stake += outcome.reward.participation;
    }
  }
}

std::string stake_ledger_csv(std::span<const StakeSnapshotRow> rows) {
  std::string out = "round,node_id,stake,coin_age,winner\n";
  for (const auto& r : rows) {
    out += std::to_string(r.round);
    out += ',';
    out += r.node_id;
    out += ',';
    out += fmt(r.stake);
    out += ',';
    out += fmt(r.coin_age);
    out += ',';
    out += r.winner ? '1' : '0';
    out += '\n';
  }
  return out;
}

}  // namespace ppbfl
