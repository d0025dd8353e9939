#include "ppbfl/sha256.hpp"

#include <string>
#include <vector>

#include "doctest.h"

using namespace ppbfl;

TEST_SUITE("sha256") {

TEST_CASE("frozen digest vectors") {
  CHECK(to_hex(sha256(std::string_view(""))) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(to_hex(sha256(std::string_view("abc"))) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("hex round-trip is strict") {
  const std::vector<unsigned char> bytes = {0x00, 0xff, 0x10, 0xab};
  const auto hex = to_hex(bytes);
  CHECK(hex == "00ff10ab");
  const auto back = from_hex(hex);
  REQUIRE(back.has_value());
  CHECK(*back == bytes);

  CHECK(!from_hex("00FF10AB").has_value());  // uppercase rejected
  CHECK(!from_hex("0").has_value());         // odd length
  CHECK(!from_hex("zz").has_value());
  CHECK(from_hex("").has_value());           // empty decodes to empty
  CHECK(from_hex("")->empty());
}

}  // TEST_SUITE
