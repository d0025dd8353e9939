#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ppbfl {

using Hash32 = std::array<unsigned char, 32>;

Hash32 sha256(std::span<const unsigned char> data);
Hash32 sha256(std::string_view data);

std::string to_hex(std::span<const unsigned char> data);

// Strict decoder: lowercase hex only, even length. Anything else fails,
// so re-encoding a decoded string always reproduces the input byte for byte.
std::optional<std::vector<unsigned char>> from_hex(std::string_view hex);

}  // namespace ppbfl
