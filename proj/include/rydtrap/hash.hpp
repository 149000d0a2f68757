#pragma once

#include <cstdint>
#include <string_view>

namespace rydtrap {

/// FNV-1a, 64 bit. Used for cache keys and file checksums, not security.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(std::string_view(static_cast<const char*>(data), size), h);
}

}  // namespace rydtrap
