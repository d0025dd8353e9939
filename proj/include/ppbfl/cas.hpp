#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ppbfl/sha256.hpp"

namespace ppbfl {

// Content identifier: "cid:" followed by 64 lowercase hex chars of the
// SHA-256 digest of the addressed bytes.
struct Cid {
  std::string text;

  static Cid from_digest(const Hash32& digest);
  static std::optional<Cid> parse(std::string_view s);
  Hash32 digest() const;

  auto operator<=>(const Cid&) const = default;
};

// Content-addressed blob store. put() is idempotent; get() re-hashes what it
// returns, so silent corruption surfaces as IntegrityViolation rather than
// bad bytes. Thread-safe. When constructed with a root directory, blobs are
// also written through to <root>/<first 2 hex>/<full 64 hex>.bin and can be
// read back from disk after the in-memory map is gone.
class CasStore {
 public:
  CasStore();
  explicit CasStore(std::filesystem::path root);
  ~CasStore();
  CasStore(CasStore&&) noexcept;
  CasStore& operator=(CasStore&&) noexcept;

  Cid put(std::span<const unsigned char> bytes);
  std::vector<unsigned char> get(const Cid& cid) const;
  bool contains(const Cid& cid) const;
  size_t size() const;

  // Number of times get() was called for this cid (validation instrument).
  uint64_t fetch_count(const Cid& cid) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ppbfl
