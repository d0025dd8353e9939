#include "ppbfl/cas.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <mutex>

#include "ppbfl/error.hpp"

namespace ppbfl {

Cid Cid::from_digest(const Hash32& digest) { return Cid{"cid:" + to_hex(digest)}; }

std::optional<Cid> Cid::parse(std::string_view s) {
  if (s.size() != 4 + 64 || s.substr(0, 4) != "cid:") return std::nullopt;
  const auto digest = from_hex(s.substr(4));
  if (!digest) return std::nullopt;
  return Cid{std::string(s)};
}

Hash32 Cid::digest() const {
  if (text.size() != 68 || text.compare(0, 4, "cid:") != 0) {
    throw Error(Errc::not_found, "malformed cid " + text);
  }
  const auto digest = from_hex(std::string_view(text).substr(4));
  if (!digest || digest->size() != 32) {
    throw Error(Errc::not_found, "malformed cid " + text);
  }
  Hash32 h{};
  std::memcpy(h.data(), digest->data(), h.size());
  return h;
}

struct CasStore::Impl {
  mutable std::mutex mu;
  std::map<Cid, std::vector<unsigned char>> blobs;
  mutable std::map<Cid, uint64_t> fetches;
  std::optional<std::filesystem::path> root;

  std::filesystem::path path_for(const Cid& cid) const {
    const std::string hex = cid.text.substr(4);
    return *root / hex.substr(0, 2) / (hex + ".bin");
  }
};

CasStore::CasStore() : impl_(std::make_unique<Impl>()) {}

CasStore::CasStore(std::filesystem::path root) : impl_(std::make_unique<Impl>()) {
  impl_->root = std::move(root);
  std::filesystem::create_directories(*impl_->root);
}

CasStore::~CasStore() = default;
CasStore::CasStore(CasStore&&) noexcept = default;
CasStore& CasStore::operator=(CasStore&&) noexcept = default;

Cid CasStore::put(std::span<const unsigned char> bytes) {
  const Cid cid = Cid::from_digest(sha256(bytes));
  std::lock_guard lock(impl_->mu);
  auto [it, inserted] = impl_->blobs.try_emplace(cid);
  if (inserted) {
    it->second.assign(bytes.begin(), bytes.end());
    if (impl_->root) {
      const auto path = impl_->path_for(cid);
      std::filesystem::create_directories(path.parent_path());
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      f.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    }
  }
  return cid;
}

std::vector<unsigned char> CasStore::get(const Cid& cid) const {
  std::vector<unsigned char> bytes;
  {
    std::lock_guard lock(impl_->mu);
    ++impl_->fetches[cid];
    if (auto it = impl_->blobs.find(cid); it != impl_->blobs.end()) {
      bytes = it->second;
    } else if (impl_->root) {
      std::ifstream f(impl_->path_for(cid), std::ios::binary);
      if (!f) throw Error(Errc::not_found, cid.text);
      bytes.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    } else {
      throw Error(Errc::not_found, cid.text);
    }
  }
  if (Cid::from_digest(sha256(bytes)) != cid) {
    throw Error(Errc::integrity_violation, "stored bytes do not hash to " + cid.text);
  }
  return bytes;
}

bool CasStore::contains(const Cid& cid) const {
  std::lock_guard lock(impl_->mu);
  if (impl_->blobs.count(cid)) return true;
  return impl_->root && std::filesystem::exists(impl_->path_for(cid));
}

size_t CasStore::size() const {
  std::lock_guard lock(impl_->mu);
  return impl_->blobs.size();
}

uint64_t CasStore::fetch_count(const Cid& cid) const {
  std::lock_guard lock(impl_->mu);
  const auto it = impl_->fetches.find(cid);
  return it == impl_->fetches.end() ? 0 : it->second;
}

}  // namespace ppbfl
