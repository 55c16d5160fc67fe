#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "tailforge/errors.hpp"

namespace tailforge {

// FNV-1a 64-bit. Used for payload checksums and config hashing.
inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v);

// Raw little-endian binary payloads. Element types are fixed-width, and the
// build targets little-endian hosts, so memory order is file order.
void write_bytes(const std::filesystem::path& path, const void* data, std::size_t len);
std::vector<unsigned char> read_bytes(const std::filesystem::path& path);

template <typename T>
void write_vector(const std::filesystem::path& path, const std::vector<T>& v) {
    write_bytes(path, v.data(), v.size() * sizeof(T));
}

// Reads exactly `count` elements; throws IoError::size_mismatch otherwise.
template <typename T>
std::vector<T> read_vector(const std::filesystem::path& path, std::size_t count) {
    std::vector<unsigned char> bytes = read_bytes(path);
    if (bytes.size() != count * sizeof(T)) {
        throw IoError(IoError::Code::size_mismatch,
                      path.string() + ": expected " + std::to_string(count * sizeof(T)) +
                          " bytes, found " + std::to_string(bytes.size()));
    }
    std::vector<T> v(count);
    if (count > 0) std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
}

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace tailforge
