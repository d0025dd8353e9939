#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ppbfl/rng.hpp"

namespace ppbfl {

// Ring signature over the ristretto255 prime-order group (libsodium backs
// the group arithmetic; the signature scheme itself lives here).
//
// Sign starts at the signer's slot with a random commitment, derives each
// following slot's challenge as
//   c_{i+1} = H(tag || ring || message || s_i*B + c_i*P_i || i+1)
// with a fresh random response s_i, and finally solves its own response so
// the chain closes. Verification replays the chain from c_0 and accepts iff
// it closes. The output distribution is the same for every signer index.

using GroupElement = std::array<unsigned char, 32>;
using Scalar = std::array<unsigned char, 32>;

struct RingKeyPair {
  Scalar secret;
  GroupElement pub;
};

// Deterministic for a given rng stream.
RingKeyPair ring_keygen(Rng& rng);

struct RingSignature {
  std::vector<GroupElement> ring;  // public keys, signer's slot not revealed
  Scalar seed;                     // challenge c_0
  std::vector<Scalar> responses;   // one per ring slot
};

// ring.size() < 2 -> RingTooSmall; signer key not matching
// ring[signer_index] -> BadKey.
RingSignature ring_sign(std::span<const unsigned char> message,
                        std::span<const GroupElement> ring, size_t signer_index,
                        const Scalar& signer_secret, Rng& rng);

// True iff the challenge chain closes. Non-canonical scalars or invalid
// group elements -> MalformedSignature.
bool ring_verify(std::span<const unsigned char> message, const RingSignature& sig);

// Fixed-width encoding: ring size (u32 LE), ring elements, c_0, responses.
// Signatures over equal-size rings always encode to equal length.
std::vector<unsigned char> serialize_signature(const RingSignature& sig);
RingSignature deserialize_signature(std::span<const unsigned char> bytes);

}  // namespace ppbfl
