#include "ppbfl/ringmix.hpp"

#include <sodium.h>

#include <cstring>

#include "byteio.hpp"
#include "ppbfl/error.hpp"

namespace ppbfl {

namespace {

constexpr GroupElement kIdentity{};  // all-zero bytes encode the neutral element
constexpr char kDomainTag[] = "ppbfl.aos.v1";

void ensure_sodium() {
  if (sodium_init() < 0) throw Error(Errc::bad_key, "libsodium failed to initialize");
}

bool scalar_is_zero(const Scalar& s) { return s == Scalar{}; }

bool scalar_is_canonical(const Scalar& s) {
  std::array<unsigned char, 64> wide{};
  std::memcpy(wide.data(), s.data(), s.size());
  Scalar reduced{};
  crypto_core_ristretto255_scalar_reduce(reduced.data(), wide.data());
  return reduced == s;
}

// q = n*B. crypto_scalarmult refuses identity results, so the zero scalar is
// special-cased rather than treated as failure.
bool mul_base(GroupElement& q, const Scalar& n) {
  if (scalar_is_zero(n)) {
    q = kIdentity;
    return true;
  }
  return crypto_scalarmult_ristretto255_base(q.data(), n.data()) == 0;
}

// q = n*p for a valid p (prime-order group: the product is the identity iff
// n == 0 or p is the identity).
bool mul_point(GroupElement& q, const Scalar& n, const GroupElement& p) {
  if (!crypto_core_ristretto255_is_valid_point(p.data())) return false;
  if (scalar_is_zero(n) || p == kIdentity) {
    q = kIdentity;
    return true;
  }
  return crypto_scalarmult_ristretto255(q.data(), n.data(), p.data()) == 0;
}

// A_i = s_i*B + c_i*P_i
bool commitment(GroupElement& out, const Scalar& s, const Scalar& c,
                const GroupElement& pub) {
  GroupElement sb{}, cp{};
  if (!mul_base(sb, s) || !mul_point(cp, c, pub)) return false;
  return crypto_core_ristretto255_add(out.data(), sb.data(), cp.data()) == 0;
}

Scalar random_scalar(Rng& rng) {
  std::array<unsigned char, 64> wide{};
  Scalar s{};
  do {
    rng.fill(wide.data(), wide.size());
    crypto_core_ristretto255_scalar_reduce(s.data(), wide.data());
  } while (scalar_is_zero(s));
  return s;
}

// c_{next} = H(tag || ring || message || A || next) reduced to a scalar.
Scalar challenge(std::span<const GroupElement> ring,
                 std::span<const unsigned char> message, const GroupElement& a,
                 uint32_t next_index) {
  std::vector<unsigned char> buf;
  buf.reserve(sizeof(kDomainTag) + 4 + ring.size() * 32 + 4 + message.size() + 36);
  buf.insert(buf.end(), kDomainTag, kDomainTag + sizeof(kDomainTag) - 1);
  put_u32(buf, static_cast<uint32_t>(ring.size()));
  for (const auto& p : ring) buf.insert(buf.end(), p.begin(), p.end());
  put_u32(buf, static_cast<uint32_t>(message.size()));
  buf.insert(buf.end(), message.begin(), message.end());
  buf.insert(buf.end(), a.begin(), a.end());
  put_u32(buf, next_index);

  std::array<unsigned char, crypto_hash_sha512_BYTES> digest{};
  crypto_hash_sha512(digest.data(), buf.data(), buf.size());
  Scalar c{};
  crypto_core_ristretto255_scalar_reduce(c.data(), digest.data());
  return c;
}

}  // namespace

RingKeyPair ring_keygen(Rng& rng) {
  ensure_sodium();
  RingKeyPair kp{};
  kp.secret = random_scalar(rng);
  if (!mul_base(kp.pub, kp.secret)) {
    throw Error(Errc::bad_key, "keygen scalar multiplication failed");
  }
  return kp;
}

RingSignature ring_sign(std::span<const unsigned char> message,
                        std::span<const GroupElement> ring, size_t signer_index,
                        const Scalar& signer_secret, Rng& rng) {
  ensure_sodium();
  const size_t r = ring.size();
  if (r < 2) throw Error(Errc::ring_too_small, "ring needs at least two members");
  if (signer_index >= r) throw Error(Errc::bad_key, "signer index out of range");
  GroupElement expected{};
  if (!mul_base(expected, signer_secret) || expected != ring[signer_index]) {
    throw Error(Errc::bad_key, "secret does not match the signer's ring slot");
  }

  std::vector<Scalar> s(r);
  std::vector<Scalar> c(r);
  const size_t j = signer_index;

  const Scalar alpha = random_scalar(rng);
  GroupElement a{};
  if (!mul_base(a, alpha)) throw Error(Errc::bad_key, "commitment failed");
  c[(j + 1) % r] = challenge(ring, message, a, static_cast<uint32_t>((j + 1) % r));

  for (size_t i = (j + 1) % r; i != j; i = (i + 1) % r) {
    s[i] = random_scalar(rng);
    GroupElement ai{};
    if (!commitment(ai, s[i], c[i], ring[i])) {
      throw Error(Errc::bad_key, "ring element is not a valid group element");
    }
    c[(i + 1) % r] = challenge(ring, message, ai, static_cast<uint32_t>((i + 1) % r));
  }

  // Close the chain: s_j = alpha - c_j * x_j, so A_j replays to alpha*B.
  Scalar cx{};
  crypto_core_ristretto255_scalar_mul(cx.data(), c[j].data(), signer_secret.data());
  crypto_core_ristretto255_scalar_sub(s[j].data(), alpha.data(), cx.data());

  RingSignature sig;
  sig.ring.assign(ring.begin(), ring.end());
  sig.seed = c[0];
  sig.responses = std::move(s);
  return sig;
}

bool ring_verify(std::span<const unsigned char> message, const RingSignature& sig) {
  ensure_sodium();
  const size_t r = sig.ring.size();
  if (r < 2 || sig.responses.size() != r) {
    throw Error(Errc::malformed_signature, "ring/response shape mismatch");
  }
  for (const auto& p : sig.ring) {
    if (!crypto_core_ristretto255_is_valid_point(p.data())) {
      throw Error(Errc::malformed_signature, "ring element is not a valid group element");
    }
  }
  if (!scalar_is_canonical(sig.seed)) {
    throw Error(Errc::malformed_signature, "non-canonical challenge seed");
  }
  for (const auto& resp : sig.responses) {
    if (!scalar_is_canonical(resp)) {
      throw Error(Errc::malformed_signature, "non-canonical response scalar");
    }
  }

  Scalar c = sig.seed;
  for (size_t i = 0; i < r; ++i) {
    GroupElement ai{};
    if (!commitment(ai, sig.responses[i], c, sig.ring[i])) {
      throw Error(Errc::malformed_signature, "commitment arithmetic failed");
    }
    c = challenge(sig.ring, message, ai, static_cast<uint32_t>((i + 1) % r));
  }
  return c == sig.seed;
}

std::vector<unsigned char> serialize_signature(const RingSignature& sig) {
  std::vector<unsigned char> out;
  out.reserve(4 + sig.ring.size() * 64 + 32);
  put_u32(out, static_cast<uint32_t>(sig.ring.size()));
  for (const auto& p : sig.ring) out.insert(out.end(), p.begin(), p.end());
  out.insert(out.end(), sig.seed.begin(), sig.seed.end());
  for (const auto& s : sig.responses) out.insert(out.end(), s.begin(), s.end());
  return out;
}

RingSignature deserialize_signature(std::span<const unsigned char> bytes) {
  ByteReader r(bytes, Errc::malformed_signature);
  const uint32_t n = r.u32();
  if (r.remaining() != 32 + static_cast<uint64_t>(n) * 64) {
    throw Error(Errc::malformed_signature, "signature length does not match ring size");
  }
  RingSignature sig;
  sig.ring.resize(n);
  for (auto& p : sig.ring) {
    const auto b = r.bytes(32);
    std::memcpy(p.data(), b.data(), 32);
  }
  {
    const auto b = r.bytes(32);
    std::memcpy(sig.seed.data(), b.data(), 32);
  }
  sig.responses.resize(n);
  for (auto& s : sig.responses) {
    const auto b = r.bytes(32);
    std::memcpy(s.data(), b.data(), 32);
  }
  r.expect_done("ring signature");
  return sig;
}

}  // namespace ppbfl
