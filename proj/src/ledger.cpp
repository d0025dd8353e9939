#include "ppbfl/ledger.hpp"

#include <cstring>

#include "byteio.hpp"
#include "ppbfl/error.hpp"

namespace ppbfl {

namespace {

Hash32 read_hash(ByteReader& r) {
  Hash32 h{};
  const auto b = r.bytes(32);
  std::memcpy(h.data(), b.data(), 32);
  return h;
}

// Exported block layout: canonical header, stored block hash, tx count,
// then each transaction as a length-prefixed canonical encoding. The stored
// hash protects the final block's header, which nothing links forward to;
// tx ids are recomputed from the bytes, so they cannot drift from content.
std::vector<unsigned char> block_bytes(const Block& block) {
  auto out = header_canonical_bytes(block.header);
  out.insert(out.end(), block.block_hash.begin(), block.block_hash.end());
  put_u32(out, static_cast<uint32_t>(block.txs.size()));
  for (const auto& tx : block.txs) {
    const auto canonical = tx_canonical_bytes(tx);
    put_u32(out, static_cast<uint32_t>(canonical.size()));
    out.insert(out.end(), canonical.begin(), canonical.end());
  }
  return out;
}

Transaction parse_tx(std::span<const unsigned char> bytes) {
  ByteReader r(bytes, Errc::malformed_chain);
  Transaction tx;
  tx.round = r.u64();
  const uint32_t n_cids = r.u32();
  if (static_cast<uint64_t>(n_cids) * 32 > r.remaining()) {
    throw Error(Errc::malformed_chain, "cid list exceeds transaction size");
  }
  tx.cids.reserve(n_cids);
  for (uint32_t i = 0; i < n_cids; ++i) tx.cids.push_back(Cid::from_digest(read_hash(r)));
  const auto sig_bytes = r.bytes(r.remaining());
  try {
    tx.sig = deserialize_signature(sig_bytes);
  } catch (const Error&) {
    throw Error(Errc::malformed_chain, "undecodable ring signature");
  }
  tx.tx_id = compute_tx_id(tx);
  return tx;
}

Block parse_block(std::span<const unsigned char> bytes) {
  ByteReader r(bytes, Errc::malformed_chain);
  Block block;
  block.header.height = r.u64();
  block.header.prev_hash = read_hash(r);
  block.header.timestamp = r.u64();
  block.header.merkle_root = read_hash(r);
  block.header.global_model_cid = Cid::from_digest(read_hash(r));
  block.block_hash = read_hash(r);
  const uint32_t n_txs = r.u32();
  block.txs.reserve(n_txs);
  for (uint32_t i = 0; i < n_txs; ++i) {
    const uint32_t len = r.u32();
    block.txs.push_back(parse_tx(r.bytes(len)));
  }
  r.expect_done("block");
  return block;
}

}  // namespace

std::vector<unsigned char> header_canonical_bytes(const BlockHeader& h) {
  std::vector<unsigned char> out;
  out.reserve(112);
  put_u64(out, h.height);
  out.insert(out.end(), h.prev_hash.begin(), h.prev_hash.end());
  put_u64(out, h.timestamp);
  out.insert(out.end(), h.merkle_root.begin(), h.merkle_root.end());
  const auto digest = h.global_model_cid.digest();
  out.insert(out.end(), digest.begin(), digest.end());
  return out;
}

Hash32 merkle_root(std::span<const Hash32> tx_ids) {
  if (tx_ids.empty()) return sha256(std::span<const unsigned char>{});
  std::vector<Hash32> level(tx_ids.begin(), tx_ids.end());
  while (level.size() > 1) {
    std::vector<Hash32> next;
    next.reserve((level.size() + 1) / 2);
    for (size_t i = 0; i < level.size(); i += 2) {
      const Hash32& left = level[i];
      const Hash32& right = (i + 1 < level.size()) ? level[i + 1] : level[i];
      std::array<unsigned char, 64> both{};
      std::memcpy(both.data(), left.data(), 32);
      std::memcpy(both.data() + 32, right.data(), 32);
      next.push_back(sha256(both));
    }
    level = std::move(next);
  }
  return level[0];
}

Block build_block(uint64_t height, const Hash32& prev_hash, uint64_t timestamp,
                  std::vector<Transaction> txs, const Cid& global_model_cid) {
  std::vector<Hash32> tx_ids;
  tx_ids.reserve(txs.size());
  for (const auto& tx : txs) {
    if (compute_tx_id(tx) != tx.tx_id) {
      throw Error(Errc::invalid_transaction, "tx id does not match canonical bytes");
    }
    if (!verify_tx_signature(tx)) {
      throw Error(Errc::invalid_transaction, "ring signature does not verify");
    }
    tx_ids.push_back(tx.tx_id);
  }
  Block block;
  block.header.height = height;
  block.header.prev_hash = prev_hash;
  block.header.timestamp = timestamp;
  block.header.merkle_root = merkle_root(tx_ids);
  block.header.global_model_cid = global_model_cid;
  block.txs = std::move(txs);
  block.block_hash = sha256(header_canonical_bytes(block.header));
  return block;
}

Block make_genesis(const Cid& global_model_cid) {
  return build_block(0, Hash32{}, 0, {}, global_model_cid);
}

std::optional<ValidationFailure> validate_chain(const Chain& chain) {
  if (chain.blocks.empty()) return ValidationFailure{0, "chain has no blocks"};

  const Block& genesis = chain.blocks.front();
  if (genesis.header.height != 0) return ValidationFailure{0, "genesis height is not 0"};
  if (genesis.header.prev_hash != Hash32{}) {
    return ValidationFailure{0, "genesis prev hash is not zero"};
  }
  if (genesis.header.timestamp != 0) {
    return ValidationFailure{0, "genesis timestamp is not 0"};
  }
  if (!genesis.txs.empty()) {
    return ValidationFailure{0, "genesis carries transactions"};
  }

  for (size_t i = 0; i < chain.blocks.size(); ++i) {
    const Block& b = chain.blocks[i];
    const uint64_t h = b.header.height;
    if (h != i) return ValidationFailure{h, "height out of sequence"};
    if (i > 0) {
      const Block& prev = chain.blocks[i - 1];
      if (b.header.prev_hash != prev.block_hash) {
        return ValidationFailure{h, "prev hash does not match previous block"};
      }
      if (b.header.timestamp <= prev.header.timestamp) {
        return ValidationFailure{h, "timestamp not strictly increasing"};
      }
    }
    std::vector<unsigned char> header;
    try {
      header = header_canonical_bytes(b.header);
    } catch (const Error&) {
      return ValidationFailure{h, "header cid is malformed"};
    }
    if (sha256(header) != b.block_hash) {
      return ValidationFailure{h, "stored block hash does not match header"};
    }
    std::vector<Hash32> tx_ids;
    tx_ids.reserve(b.txs.size());
    for (const auto& tx : b.txs) {
      Hash32 computed{};
      try {
        computed = compute_tx_id(tx);
      } catch (const Error&) {
        return ValidationFailure{h, "transaction cid is malformed"};
      }
      if (computed != tx.tx_id) return ValidationFailure{h, "tx id mismatch"};
      if (!verify_tx_signature(tx)) {
        return ValidationFailure{h, "tx ring signature does not verify"};
      }
      tx_ids.push_back(tx.tx_id);
    }
    if (merkle_root(tx_ids) != b.header.merkle_root) {
      return ValidationFailure{h, "merkle root does not match transactions"};
    }
  }
  return std::nullopt;
}

std::string export_chain(const Chain& chain) {
  std::string out;
  for (const auto& block : chain.blocks) {
    out += to_hex(block_bytes(block));
    out += '\n';
  }
  return out;
}

Chain import_chain(const std::string& text) {
  if (text.empty() || text.back() != '\n') {
    throw Error(Errc::malformed_chain, "chain text must be newline-terminated hex lines");
  }
  Chain chain;
  size_t start = 0;
  while (start < text.size()) {
    const size_t end = text.find('\n', start);
    const std::string_view line(text.data() + start, end - start);
    if (line.empty()) throw Error(Errc::malformed_chain, "empty line");
    const auto bytes = from_hex(line);
    if (!bytes) throw Error(Errc::malformed_chain, "line is not lowercase hex");
    chain.blocks.push_back(parse_block(*bytes));
    start = end + 1;
  }
  return chain;
}

}  // namespace ppbfl
