#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace mmforge {

using Digest256 = std::array<std::uint8_t, 32>;

Digest256 sha256(std::span<const std::uint8_t> bytes);
Digest256 sha256(std::string_view bytes);

// 64-char lowercase hex.
std::string to_hex(const Digest256& d);
Digest256 digest_from_hex(std::string_view hex);

// First eight digest bytes read big-endian.
std::uint64_t leading_u64(const Digest256& d);

}  // namespace mmforge
