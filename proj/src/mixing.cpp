#include "ppbfl/mixing.hpp"

#include <algorithm>

#include "byteio.hpp"
#include "ppbfl/error.hpp"

namespace ppbfl {

std::vector<unsigned char> tx_message_bytes(uint64_t round, std::span<const Cid> cids) {
  std::vector<unsigned char> out;
  out.reserve(12 + cids.size() * 32);
  put_u64(out, round);
  put_u32(out, static_cast<uint32_t>(cids.size()));
  for (const auto& cid : cids) {
    const auto d = cid.digest();
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

std::vector<unsigned char> tx_canonical_bytes(const Transaction& tx) {
  auto out = tx_message_bytes(tx.round, tx.cids);
  const auto sig = serialize_signature(tx.sig);
  out.insert(out.end(), sig.begin(), sig.end());
  return out;
}

Hash32 compute_tx_id(const Transaction& tx) { return sha256(tx_canonical_bytes(tx)); }

bool verify_tx_signature(const Transaction& tx) {
  const auto msg = tx_message_bytes(tx.round, tx.cids);
  try {
    return ring_verify(msg, tx.sig);
  } catch (const Error&) {
    return false;  // malformed is just one more way to be invalid
  }
}

Transaction build_mixed_tx(const Cid& own_cid, const MixState& observed, uint32_t k,
                           uint64_t round, std::span<const GroupElement> ring,
                           size_t signer_index, const Scalar& signer_secret,
                           Rng& rng) {
  std::vector<Cid> foreign;
  foreign.reserve(observed.seen_cids.size());
  for (const auto& cid : observed.seen_cids) {
    if (cid != own_cid) foreign.push_back(cid);
  }
  if (k > foreign.size()) {
    throw Error(Errc::not_enough_observed,
                "requested " + std::to_string(k) + " cover cids, observed " +
                    std::to_string(foreign.size()));
  }
  rng.shuffle(foreign);
  foreign.resize(k);
  foreign.push_back(own_cid);
  rng.shuffle(foreign);

  Transaction tx;
  tx.round = round;
  tx.cids = std::move(foreign);
  const auto msg = tx_message_bytes(tx.round, tx.cids);
  tx.sig = ring_sign(msg, ring, signer_index, signer_secret, rng);
  tx.tx_id = compute_tx_id(tx);
  return tx;
}

std::vector<Cid> ingest_tx(MixState& state, const Transaction& tx) {
  if (!verify_tx_signature(tx)) {
    throw Error(Errc::rejected_tx, "ring signature does not verify");
  }
  if (compute_tx_id(tx) != tx.tx_id) {
    throw Error(Errc::rejected_tx, "tx id does not match canonical bytes");
  }
  std::vector<Cid> fresh;
  for (const auto& cid : tx.cids) {
    if (state.seen_cids.insert(cid).second) fresh.push_back(cid);
  }
  state.pending.push_back(tx);
  return fresh;
}

}  // namespace ppbfl
