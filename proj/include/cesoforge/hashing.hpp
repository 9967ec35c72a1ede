#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cesoforge {

constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ULL;

constexpr std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = kFnvOffset) noexcept {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

}  // namespace cesoforge
