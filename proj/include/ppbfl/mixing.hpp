#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "ppbfl/cas.hpp"
#include "ppbfl/ringmix.hpp"
#include "ppbfl/rng.hpp"

namespace ppbfl {

// A trainer's announcement of model CIDs for one round. The CID list mixes
// the trainer's own upload with CIDs it observed from other transactions, so
// the list does not reveal which entry is the sender's; the ring signature
// proves some registered trainer signed it without revealing which.
struct Transaction {
  uint64_t round = 0;
  std::vector<Cid> cids;
  RingSignature sig;
  Hash32 tx_id{};
};

// Bytes covered by the ring signature: round (u64 LE), cid count (u32 LE),
// each cid's 32 raw digest bytes.
std::vector<unsigned char> tx_message_bytes(uint64_t round, std::span<const Cid> cids);

// Canonical encoding: message bytes followed by the serialized signature.
// tx_id is the SHA-256 of exactly this encoding.
std::vector<unsigned char> tx_canonical_bytes(const Transaction& tx);
Hash32 compute_tx_id(const Transaction& tx);

bool verify_tx_signature(const Transaction& tx);

// What one observer has gathered during a round.
struct MixState {
  std::set<Cid> seen_cids;            // already verified this round
  std::vector<Transaction> pending;   // accepted transactions, arrival order
};

// Builds this trainer's transaction: own cid plus k distinct foreign cids
// sampled without replacement from `observed`, in seeded-shuffled order.
// k exceeding the foreign cids available -> NotEnoughObserved.
Transaction build_mixed_tx(const Cid& own_cid, const MixState& observed, uint32_t k,
                           uint64_t round, std::span<const GroupElement> ring,
                           size_t signer_index, const Scalar& signer_secret,
                           Rng& rng);

// Verifies the signature (RejectedTx on failure), records the transaction,
// and returns only the cids not seen before, in transaction order.
std::vector<Cid> ingest_tx(MixState& state, const Transaction& tx);

}  // namespace ppbfl
