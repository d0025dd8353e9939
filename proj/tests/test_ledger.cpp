#include "ppbfl/ledger.hpp"

#include <string>
#include <vector>

#include "doctest.h"
#include "ppbfl/error.hpp"
#include "ppbfl/rng.hpp"
#include "test_util.hpp"

using namespace ppbfl;

namespace {

Hash32 leaf(const std::string& s) { return sha256(std::string_view(s)); }

Cid cid_of(const std::string& s) { return Cid::from_digest(leaf(s)); }

struct TxFactory {
  std::vector<RingKeyPair> keys;
  std::vector<GroupElement> ring;

  TxFactory() {
    Rng root(4242);
    for (size_t i = 0; i < 3; ++i) {
      auto r = root.fork("key", i);
      keys.push_back(ring_keygen(r));
      ring.push_back(keys.back().pub);
    }
  }

  Transaction make(uint64_t round, const std::string& tag, uint64_t seed) {
    MixState empty;
    Rng rng(seed);
    return build_mixed_tx(cid_of(tag), empty, 0, round, ring, seed % 3,
                          keys[seed % 3].secret, rng);
  }
};

Chain small_chain(TxFactory& fx, size_t n_blocks) {
  Chain chain;
  chain.blocks.push_back(make_genesis(cid_of("init model")));
  for (size_t i = 1; i < n_blocks; ++i) {
    std::vector<Transaction> txs;
    txs.push_back(fx.make(i, "m" + std::to_string(i) + "a", 10 * i));
    txs.push_back(fx.make(i, "m" + std::to_string(i) + "b", 10 * i + 1));
    chain.blocks.push_back(build_block(i, chain.blocks.back().block_hash, i,
                                       std::move(txs),
                                       cid_of("agg" + std::to_string(i))));
  }
  return chain;
}

}  // namespace

TEST_SUITE("ledger") {

TEST_CASE("merkle root frozen vectors") {
  const std::vector<Hash32> abc = {leaf("a"), leaf("b"), leaf("c")};
  CHECK(to_hex(merkle_root(abc)) ==
        "d31a37ef6ac14a2db1470c4316beb5592e6afd4465022339adafda76a18ffabe");

  const std::vector<Hash32> ab = {leaf("a"), leaf("b")};
  CHECK(to_hex(merkle_root(ab)) ==
        "e5a01fee14e0ed5c48714f22180f25ad8365b53f9779f79dc4a3d7e93963f94a");

  const std::vector<Hash32> a = {leaf("a")};
  CHECK(merkle_root(a) == leaf("a"));

  CHECK(to_hex(merkle_root({})) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("header encoding is 112 bytes and hashes into block_hash") {
  const auto genesis = make_genesis(cid_of("g"));
  const auto bytes = header_canonical_bytes(genesis.header);
  CHECK(bytes.size() == 112);
  CHECK(sha256(bytes) == genesis.block_hash);
}

TEST_CASE("genesis shape") {
  const auto g = make_genesis(cid_of("initial"));
  CHECK(g.header.height == 0);
  CHECK(g.header.prev_hash == Hash32{});
  CHECK(g.header.timestamp == 0);
  CHECK(g.txs.empty());
  CHECK(g.header.merkle_root == sha256(std::span<const unsigned char>{}));
  CHECK(g.header.global_model_cid == cid_of("initial"));
}

TEST_CASE("build_block rejects corrupted transactions") {
  TxFactory fx;
  auto tx = fx.make(1, "m", 5);

  auto wrong_id = tx;
  wrong_id.tx_id[0] ^= 1;
  CHECK(throws_code(Errc::invalid_transaction, [&] {
    build_block(1, Hash32{}, 1, {wrong_id}, cid_of("agg"));
  }));

  auto wrong_sig = tx;
  wrong_sig.cids[0] = cid_of("swapped");
  wrong_sig.tx_id = compute_tx_id(wrong_sig);  // id consistent, sig now stale
  CHECK(throws_code(Errc::invalid_transaction, [&] {
    build_block(1, Hash32{}, 1, {wrong_sig}, cid_of("agg"));
  }));
}

TEST_CASE("well-formed chain validates") {
  TxFactory fx;
  const auto chain = small_chain(fx, 4);
  const auto failure = validate_chain(chain);
  CHECK(!failure.has_value());
}

TEST_CASE("validation pinpoints the first defect") {
  TxFactory fx;

  auto broken_link = small_chain(fx, 3);
  broken_link.blocks[1].header.timestamp = 9;  // header no longer matches hash
  auto f = validate_chain(broken_link);
  REQUIRE(f.has_value());
  CHECK(f->height == 1);

  auto bad_prev = small_chain(fx, 3);
  bad_prev.blocks[2].header.prev_hash[0] ^= 1;
  f = validate_chain(bad_prev);
  REQUIRE(f.has_value());
  CHECK(f->height == 2);
  CHECK(f->reason == "prev hash does not match previous block");

  auto bad_genesis = small_chain(fx, 2);
  bad_genesis.blocks[0].header.prev_hash[31] = 1;
  f = validate_chain(bad_genesis);
  REQUIRE(f.has_value());
  CHECK(f->height == 0);

  auto swapped_tx = small_chain(fx, 3);
  swapped_tx.blocks[1].txs[0] = fx.make(1, "foreign", 99);
  f = validate_chain(swapped_tx);
  REQUIRE(f.has_value());
  CHECK(f->height == 1);
  CHECK(f->reason == "merkle root does not match transactions");

  CHECK(validate_chain(Chain{}).has_value());
}

TEST_CASE("export/import round-trips byte for byte") {
  TxFactory fx;
  const auto chain = small_chain(fx, 5);
  const auto text = export_chain(chain);
  const auto back = import_chain(text);
  CHECK(back.blocks.size() == 5);
  CHECK(export_chain(back) == text);
  CHECK(!validate_chain(back).has_value());
  for (size_t i = 0; i < chain.blocks.size(); ++i) {
    CHECK(back.blocks[i].block_hash == chain.blocks[i].block_hash);
    CHECK(back.blocks[i].header.global_model_cid ==
          chain.blocks[i].header.global_model_cid);
  }
}

TEST_CASE("import is strict about shape") {
  TxFactory fx;
  const auto text = export_chain(small_chain(fx, 2));

  CHECK(throws_code(Errc::malformed_chain, [&] { import_chain(""); }));
  CHECK(throws_code(Errc::malformed_chain,
                    [&] { import_chain(text.substr(0, text.size() - 1)); }));
  CHECK(throws_code(Errc::malformed_chain, [&] { import_chain(text + "\n"); }));
  CHECK(throws_code(Errc::malformed_chain, [&] { import_chain("zz\n"); }));
  CHECK(throws_code(Errc::malformed_chain, [&] { import_chain("abc\n"); }));

  auto upper = text;
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(ch));
  CHECK(throws_code(Errc::malformed_chain, [&] { import_chain(upper); }));

  // Truncated hex payload (whole trailing line removed plus partial bytes).
  const auto cut = text.substr(0, text.find('\n') - 10) + "\n";
  CHECK(throws_code(Errc::malformed_chain, [&] { import_chain(cut); }));
}

TEST_CASE("every single-byte mutation of an export is caught") {
  TxFactory fx;
  const auto chain = small_chain(fx, 3);
  const auto text = export_chain(chain);
  Rng rng(2024);
  int caught = 0;
  const int trials = 60;
  for (int t = 0; t < trials; ++t) {
    auto mutated = text;
    const size_t pos = rng.next_index(mutated.size());
    char replacement = mutated[pos];
    while (replacement == mutated[pos]) {
      replacement = static_cast<char>(rng.next_index(256));
    }
    mutated[pos] = replacement;
    try {
      const auto c = import_chain(mutated);
      if (validate_chain(c).has_value()) ++caught;
    } catch (const Error&) {
      ++caught;
    }
  }
  CHECK(caught == trials);
}

}  // TEST_SUITE
