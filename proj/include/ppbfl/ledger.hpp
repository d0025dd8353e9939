#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppbfl/mixing.hpp"

namespace ppbfl {

struct BlockHeader {
  uint64_t height = 0;
  Hash32 prev_hash{};        // all zero for genesis
  uint64_t timestamp = 0;    // round counter, not wall time
  Hash32 merkle_root{};
  Cid global_model_cid;      // the round's aggregate lives in the header
};

struct Block {
  BlockHeader header;
  std::vector<Transaction> txs;
  Hash32 block_hash{};  // SHA-256 of the canonical header encoding
};

// Canonical header encoding: height (u64 LE), prev_hash, timestamp (u64 LE),
// merkle_root, cid digest. 112 bytes.
std::vector<unsigned char> header_canonical_bytes(const BlockHeader& h);

// Merkle root over tx_ids: pairs hashed as SHA-256(left || right), an odd
// node is paired with itself, a single leaf is the root, and an empty list
// hashes to SHA-256 of the empty string.
Hash32 merkle_root(std::span<const Hash32> tx_ids);

// Validates every transaction (tx_id integrity and ring signature;
// InvalidTransaction otherwise) and seals a block.
Block build_block(uint64_t height, const Hash32& prev_hash, uint64_t timestamp,
                  std::vector<Transaction> txs, const Cid& global_model_cid);

struct Chain {
  std::vector<Block> blocks;
};

Block make_genesis(const Cid& global_model_cid);

struct ValidationFailure {
  uint64_t height = 0;
  std::string reason;
};

// First defect found, or nullopt for a valid chain. Checks genesis shape,
// hash linkage, merkle roots, block hashes, tx ids, ring signatures, and
// monotone heights/timestamps.
std::optional<ValidationFailure> validate_chain(const Chain& chain);

// One lowercase-hex canonical block per line. Import is strict: anything
// that is not exactly an exported chain -> MalformedChain.
std::string export_chain(const Chain& chain);
Chain import_chain(const std::string& text);

}  // namespace ppbfl
