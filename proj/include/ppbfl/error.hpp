#pragma once

#include <stdexcept>
#include <string>

namespace ppbfl {

// Every failure surfaced by the library carries one of these codes so callers
// can branch on the condition without parsing message text.
enum class Errc {
  invalid_budget,
  empty_layer,
  non_finite_weight,
  shape_mismatch,
  empty_composition,
  invalid_count,
  invalid_schema,
  malformed_model,
  empty_dataset,
  not_idx,
  count_mismatch,
  malformed_idx,
  too_many_clients,
  not_found,
  integrity_violation,
  ring_too_small,
  bad_key,
  malformed_signature,
  not_enough_observed,
  rejected_tx,
  invalid_transaction,
  malformed_chain,
  no_eligible_node,
  invalid_config,
  round_failed,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_budget: return "InvalidBudget";
    case Errc::empty_layer: return "EmptyLayer";
    case Errc::non_finite_weight: return "NonFiniteWeight";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::empty_composition: return "EmptyComposition";
    case Errc::invalid_count: return "InvalidCount";
    case Errc::invalid_schema: return "InvalidSchema";
    case Errc::malformed_model: return "MalformedModel";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::not_idx: return "NotIdx";
    case Errc::count_mismatch: return "CountMismatch";
    case Errc::malformed_idx: return "MalformedIdx";
    case Errc::too_many_clients: return "TooManyClients";
    case Errc::not_found: return "NotFound";
    case Errc::integrity_violation: return "IntegrityViolation";
    case Errc::ring_too_small: return "RingTooSmall";
    case Errc::bad_key: return "BadKey";
    case Errc::malformed_signature: return "MalformedSignature";
    case Errc::not_enough_observed: return "NotEnoughObserved";
    case Errc::rejected_tx: return "RejectedTx";
    case Errc::invalid_transaction: return "InvalidTransaction";
    case Errc::malformed_chain: return "MalformedChain";
    case Errc::no_eligible_node: return "NoEligibleNode";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::round_failed: return "RoundFailed";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace ppbfl
