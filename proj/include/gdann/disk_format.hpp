#pragma once

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "gdann/binary_io.hpp"
#include "gdann/core.hpp"

namespace gdann {

// Disk index layout (little-endian):
//   sector 0     : "GANNDSK1" | u32 sector_size | u64 N | u32 dim | u32 dtype |
//                  u32 R | u32 medoid | zero padding
//   sector 1 + i : vector bytes | u32 k | u32 x k neighbor ids | zero padding

inline constexpr Magic kDiskMagic = make_magic("GANNDSK1");
inline constexpr size_t kDiskHeaderBytes = 8 + 4 + 8 + 4 + 4 + 4 + 4;

struct DiskIndexHeader {
    uint32_t sector_size = 4096;
    uint64_t count = 0;
    uint32_t dim = 0;
    Dtype dtype = Dtype::u8;
    uint32_t max_degree = 0;
    NodeId medoid = 0;

    size_t vector_bytes() const { return dim * element_size(dtype); }
    uint64_t record_offset(NodeId id) const { return uint64_t{sector_size} * (uint64_t{id} + 1); }
    uint64_t file_bytes() const { return uint64_t{sector_size} * (count + 1); }
};

/// Bytes one node needs inside its sector: vector, count word, R ids.
constexpr size_t record_payload_bytes(uint32_t dim, Dtype dtype, uint32_t max_degree) {
    return size_t{dim} * element_size(dtype) + 4 + 4 * size_t{max_degree};
}

/// One node's full on-disk record.
struct NodeRecord {
    NodeId node = 0;
    std::vector<std::byte> vector;  // dim x element size
    std::vector<NodeId> neighbors;
    uint64_t completion_time_us = 0;

    VectorView view(uint32_t dim, Dtype dtype) const { return {dtype, dim, vector.data()}; }
    bool same_content(const NodeRecord& o) const { return node == o.node && vector == o.vector && neighbors == o.neighbors; }
};

inline void encode_header(const DiskIndexHeader& h, std::span<std::byte> sector) {
    std::memset(sector.data(), 0, sector.size());
    std::byte* p = sector.data();
    auto put = [&p](const auto& v) {
        std::memcpy(p, &v, sizeof(v));
        p += sizeof(v);
    };
    std::memcpy(p, kDiskMagic.data(), kDiskMagic.size());
    p += kDiskMagic.size();
    put(h.sector_size);
    put(h.count);
    put(h.dim);
    put(static_cast<uint32_t>(h.dtype));
    put(h.max_degree);
    put(h.medoid);
}

inline DiskIndexHeader decode_header(std::span<const std::byte> bytes, const std::string& what) {
    if (bytes.size() < kDiskHeaderBytes) fail(ErrorKind::format, what + ": file too small for header");
    if (std::memcmp(bytes.data(), kDiskMagic.data(), kDiskMagic.size()) != 0)
        fail(ErrorKind::format, what + ": bad magic, expected GANNDSK1");
    const std::byte* p = bytes.data() + kDiskMagic.size();
    auto get = [&p](auto& v) {
        std::memcpy(&v, p, sizeof(v));
        p += sizeof(v);
    };
    DiskIndexHeader h;
    uint32_t dtype_code = 0;
    get(h.sector_size);
    get(h.count);
    get(h.dim);
    get(dtype_code);
    get(h.max_degree);
    get(h.medoid);
    h.dtype = dtype_from_code(dtype_code);
    if (h.sector_size < kDiskHeaderBytes) fail(ErrorKind::format, what + ": sector size too small");
    if (h.count == 0 || h.dim == 0) fail(ErrorKind::format, what + ": empty index");
    if (record_payload_bytes(h.dim, h.dtype, h.max_degree) > h.sector_size)
        fail(ErrorKind::format, what + ": record payload exceeds sector size");
    if (h.medoid >= h.count) fail(ErrorKind::format, what + ": medoid out of range");
    return h;
}

/// Encodes one node record into a zeroed sector buffer.
inline void encode_record(const DiskIndexHeader& h, const VectorView& v, std::span<const NodeId> nbrs,
                          std::span<std::byte> sector) {
    if (nbrs.size() > h.max_degree) fail(ErrorKind::invalid_argument, "neighbor list exceeds max degree");
    std::memset(sector.data(), 0, sector.size());
    std::memcpy(sector.data(), v.data, h.vector_bytes());
    const uint32_t k = static_cast<uint32_t>(nbrs.size());
    std::memcpy(sector.data() + h.vector_bytes(), &k, 4);
    std::memcpy(sector.data() + h.vector_bytes() + 4, nbrs.data(), nbrs.size_bytes());
}

/// Parses the record of `id` from its sector bytes, validating neighbor ids.
inline NodeRecord decode_record(const DiskIndexHeader& h, NodeId id, std::span<const std::byte> sector) {
    NodeRecord rec;
    rec.node = id;
    rec.vector.assign(sector.begin(), sector.begin() + static_cast<ptrdiff_t>(h.vector_bytes()));
    uint32_t k = 0;
    std::memcpy(&k, sector.data() + h.vector_bytes(), 4);
    if (k > h.max_degree)
        fail(ErrorKind::format, "node " + std::to_string(id) + ": neighbor count " + std::to_string(k) + " exceeds R");
    rec.neighbors.resize(k);
    std::memcpy(rec.neighbors.data(), sector.data() + h.vector_bytes() + 4, size_t{k} * 4);
    for (NodeId n : rec.neighbors)
        if (n >= h.count) fail(ErrorKind::format, "node " + std::to_string(id) + ": neighbor id out of range");
    return rec;
}

/// Read-only memory mapping of a disk index file.
class DiskImage {
public:
    explicit DiskImage(const std::string& path) : path_(path) {
        fd_ = ::open(path.c_str(), O_RDONLY);
        if (fd_ < 0) fail(ErrorKind::io, "cannot open disk index " + path + ": " + std::strerror(errno));
        struct stat st{};
        if (::fstat(fd_, &st) != 0) {
            ::close(fd_);
            fail(ErrorKind::io, "cannot stat " + path);
        }
        size_ = static_cast<size_t>(st.st_size);
        if (size_ < kDiskHeaderBytes) {
            ::close(fd_);
            fail(ErrorKind::format, path + ": file too small for header");
        }
        void* p = ::mmap(nullptr, size_, PROT_READ, MAP_SHARED, fd_, 0);
        if (p == MAP_FAILED) {
            ::close(fd_);
            fail(ErrorKind::io, "mmap failed for " + path);
        }
        base_ = static_cast<const std::byte*>(p);
        try {
            header_ = decode_header({base_, size_}, path);
            if (size_ < header_.file_bytes()) fail(ErrorKind::format, path + ": file shorter than N records");
        } catch (...) {
            release();
            throw;
        }
    }

    DiskImage(const DiskImage&) = delete;
    DiskImage& operator=(const DiskImage&) = delete;
    ~DiskImage() { release(); }

    const DiskIndexHeader& header() const { return header_; }
    const std::string& path() const { return path_; }
    int fd() const { return fd_; }

    std::span<const std::byte> sector(NodeId id) const {
        if (id >= header_.count) fail(ErrorKind::invalid_argument, "node id out of range: " + std::to_string(id));
        return {base_ + header_.record_offset(id), header_.sector_size};
    }

    NodeRecord record(NodeId id) const { return decode_record(header_, id, sector(id)); }

private:
    void release() {
        if (base_) ::munmap(const_cast<std::byte*>(base_), size_);
        if (fd_ >= 0) ::close(fd_);
        base_ = nullptr;
        fd_ = -1;
    }

    std::string path_;
    int fd_ = -1;
    size_t size_ = 0;
    const std::byte* base_ = nullptr;
    DiskIndexHeader header_;
};

}  // namespace gdann
