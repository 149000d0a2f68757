#include "rydtrap/binio.hpp"

#include <fstream>
#include <iterator>
#include <system_error>

namespace rydtrap::binio {

bool write_checked(const std::filesystem::path& path, std::string buf) {
    put(buf, fnv1a64(buf));
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) return false;
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) return false;
    }
    std::filesystem::rename(tmp, path, ec);
    return !ec;
}

std::optional<std::string> read_checked(const std::filesystem::path& path, std::string& why) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        why = "missing";
        return std::nullopt;
    }
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::uint64_t stored = 0;
    if (buf.size() < sizeof(stored)) {
        why = "truncated";
        return std::nullopt;
    }
    std::memcpy(&stored, buf.data() + buf.size() - sizeof(stored), sizeof(stored));
    buf.resize(buf.size() - sizeof(stored));
    if (fnv1a64(buf) != stored) {
        why = "checksum mismatch";
        return std::nullopt;
    }
    return buf;
}

}  // namespace rydtrap::binio
