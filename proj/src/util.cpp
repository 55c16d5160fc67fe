#include "tailforge/util.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace tailforge {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

void write_bytes(const std::filesystem::path& path, const void* data, std::size_t len) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(IoError::Code::write_failed, "cannot open for writing: " + path.string());
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!f) throw IoError(IoError::Code::write_failed, "short write: " + path.string());
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError(IoError::Code::missing_file, "missing file: " + path.string());
    std::streamsize len = f.tellg();
    f.seekg(0);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(len));
    if (len > 0) f.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!f) throw IoError(IoError::Code::size_mismatch, "short read: " + path.string());
    return bytes;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_bytes(path, text.data(), text.size());
}

std::string read_text(const std::filesystem::path& path) {
    std::vector<unsigned char> bytes = read_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

}  // namespace tailforge
