#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include "gdann/error.hpp"

namespace gdann {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are not supported");

using Magic = std::array<char, 8>;

constexpr Magic make_magic(const char (&s)[9]) {
    Magic m{};
    for (size_t i = 0; i < 8; ++i) m[i] = s[i];
    return m;
}

inline std::string magic_string(const Magic& m) { return std::string(m.data(), m.size()); }

class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) fail(ErrorKind::io, "cannot open for writing: " + path);
    }

    template <typename T>
        requires std::is_trivially_copyable_v<T>
    void put(const T& value) {
        write_raw(&value, sizeof(T));
    }

    template <typename T>
        requires std::is_trivially_copyable_v<T>
    void put_span(std::span<const T> values) {
        write_raw(values.data(), values.size_bytes());
    }

    void put_magic(const Magic& m) { write_raw(m.data(), m.size()); }

    void put_zeros(size_t n) {
        static constexpr std::array<char, 4096> zeros{};
        while (n > 0) {
            size_t chunk = std::min(n, zeros.size());
            write_raw(zeros.data(), chunk);
            n -= chunk;
        }
    }

    void write_raw(const void* data, size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out_) fail(ErrorKind::io, "write failed: " + path_);
    }

    void close() {
        out_.flush();
        if (!out_) fail(ErrorKind::io, "flush failed: " + path_);
        out_.close();
    }

private:
    std::string path_;
    std::ofstream out_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) fail(ErrorKind::io, "cannot open for reading: " + path);
        in_.seekg(0, std::ios::end);
        size_ = static_cast<uint64_t>(in_.tellg());
        in_.seekg(0, std::ios::beg);
    }

    uint64_t size() const { return size_; }
    uint64_t remaining() { return size_ - static_cast<uint64_t>(in_.tellg()); }
    const std::string& path() const { return path_; }

    template <typename T>
        requires std::is_trivially_copyable_v<T>
    T get() {
        T value;
        read_raw(&value, sizeof(T));
        return value;
    }

    template <typename T>
        requires std::is_trivially_copyable_v<T>
    void get_span(std::span<T> out) {
        read_raw(out.data(), out.size_bytes());
    }

    void expect_magic(const Magic& m) {
        Magic got{};
        read_raw(got.data(), got.size());
        if (got != m)
            fail(ErrorKind::format, path_ + ": bad magic, expected " + magic_string(m));
    }

    void read_raw(void* data, size_t n) {
        if (n > remaining()) fail(ErrorKind::format, path_ + ": truncated file");
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (!in_) fail(ErrorKind::io, path_ + ": read failed");
    }

    void expect_eof() {
        if (remaining() != 0) fail(ErrorKind::format, path_ + ": trailing bytes after payload");
    }

private:
    std::string path_;
    std::ifstream in_;
    uint64_t size_ = 0;
};

}  // namespace gdann
