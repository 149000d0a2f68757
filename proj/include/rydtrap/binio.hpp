#pragma once

#include <cstring>
#include <filesystem>
#include <optional>
#include <string>

#include "rydtrap/hash.hpp"

namespace rydtrap::binio {

// Little helpers for the self-checking binary caches: raw trivially
// copyable values appended to a byte string, an FNV-1a trailer, and an
// atomic replace on write.

template <class T>
void put(std::string& buf, const T& v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

inline void put_string(std::string& buf, const std::string& s) {
    put(buf, static_cast<std::uint32_t>(s.size()));
    buf += s;
}

template <class T>
bool take(const std::string& buf, std::size_t& pos, T& v) {
    if (pos + sizeof(T) > buf.size()) return false;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return true;
}

inline bool take_string(const std::string& buf, std::size_t& pos, std::string& s) {
    std::uint32_t len = 0;
    if (!take(buf, pos, len) || pos + len > buf.size()) return false;
    s.assign(buf, pos, len);
    pos += len;
    return true;
}

/// Appends the checksum trailer and writes path via a temporary + rename.
/// Returns false on any I/O failure.
bool write_checked(const std::filesystem::path& path, std::string buf);

/// Reads path and verifies the trailer; returns the body without it.
/// nullopt if unreadable; `why` says what failed.
std::optional<std::string> read_checked(const std::filesystem::path& path, std::string& why);

}  // namespace rydtrap::binio
