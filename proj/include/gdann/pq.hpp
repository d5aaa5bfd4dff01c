#pragma once

#include <cstdint>
#include <iostream>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gdann/binary_io.hpp"
#include "gdann/core.hpp"
#include "gdann/kmeans.hpp"
#include "gdann/rng.hpp"

namespace gdann {

inline constexpr uint32_t kPqCentroids = 256;

/// Per-chunk codebooks. Chunk m covers dims [offset(m), offset(m) + subdim(m)).
struct PQCodebook {
    uint32_t dim = 0;
    uint32_t chunks = 0;
    Dtype dtype = Dtype::u8;
    std::vector<uint32_t> subdims;
    std::vector<uint32_t> offsets;   // prefix sums of subdims
    std::vector<float> centroids;    // chunk-major: M x 256 x subdim(m)
    std::vector<size_t> chunk_base;  // start of chunk m inside `centroids`
    /// Distinct centroids actually trained per chunk. Below 256 only when the
    /// training set had fewer than 256 vectors; the remaining slots are copies.
    uint32_t trained_k = kPqCentroids;

    const float* centroid(uint32_t m, uint32_t c) const { return centroids.data() + chunk_base[m] + size_t{c} * subdims[m]; }

    bool operator==(const PQCodebook& o) const {
        return dim == o.dim && chunks == o.chunks && dtype == o.dtype && subdims == o.subdims &&
               centroids == o.centroids;
    }

    void finalize_layout() {
        offsets.assign(chunks, 0);
        chunk_base.assign(chunks, 0);
        uint32_t off = 0;
        size_t base = 0;
        for (uint32_t m = 0; m < chunks; ++m) {
            offsets[m] = off;
            chunk_base[m] = base;
            off += subdims[m];
            base += size_t{kPqCentroids} * subdims[m];
        }
        if (off != dim) fail(ErrorKind::format, "PQ subdims do not sum to dim");
        if (centroids.size() != base) fail(ErrorKind::format, "PQ centroid block has wrong length");
    }
};

struct PQCodes {
    uint64_t count = 0;
    uint32_t chunks = 0;
    std::vector<uint8_t> codes;  // count x chunks

    std::span<const uint8_t> code(uint64_t i) const { return {codes.data() + i * chunks, chunks}; }
    uint64_t memory_bytes() const { return codes.size(); }
    bool operator==(const PQCodes&) const = default;
};

struct QueryLUT {
    uint32_t chunks = 0;
    std::vector<float> table;  // chunks x 256

    float at(uint32_t m, uint32_t c) const { return table[size_t{m} * kPqCentroids + c]; }
};

struct PQTrainParams {
    uint32_t chunks = 32;
    uint32_t iters = 12;
    uint32_t sample = 65536;
    uint64_t seed = 1;
};

/// Contiguous near-equal split; the first dim % chunks chunks get one extra dim.
inline std::vector<uint32_t> chunk_partition(uint32_t dim, uint32_t chunks) {
    if (chunks == 0 || dim < chunks)
        fail(ErrorKind::invalid_argument,
             "PQ needs 1 <= chunks <= dim (dim=" + std::to_string(dim) + ", chunks=" + std::to_string(chunks) + ")");
    std::vector<uint32_t> subdims(chunks, dim / chunks);
    for (uint32_t m = 0; m < dim % chunks; ++m) ++subdims[m];
    return subdims;
}

namespace detail {

inline void copy_sub_vector(const VectorView& v, uint32_t offset, uint32_t len, float* out) {
    if (v.dtype == Dtype::u8) {
        const uint8_t* p = v.as_u8() + offset;
        for (uint32_t j = 0; j < len; ++j) out[j] = static_cast<float>(p[j]);
    } else {
        const float* p = v.as_f32() + offset;
        for (uint32_t j = 0; j < len; ++j) out[j] = p[j];
    }
}

inline void check_dims(const PQCodebook& cb, const VectorView& v) {
    if (v.dim != cb.dim)
        fail(ErrorKind::invalid_argument,
             "PQ dimension mismatch: codebook " + std::to_string(cb.dim) + ", vector " + std::to_string(v.dim));
}

}  // namespace detail

/// Trains one 256-centroid k-means codebook per chunk over a seeded uniform
/// sample of the dataset.
inline PQCodebook train_pq(const VectorDataset& ds, const PQTrainParams& params) {
    PQCodebook cb;
    cb.dim = ds.dim();
    cb.chunks = params.chunks;
    cb.dtype = ds.dtype();
    cb.subdims = chunk_partition(ds.dim(), params.chunks);
    require(params.sample >= 1, "PQ training sample must be >= 1");

    Rng rng(params.seed);
    const uint64_t sample_n = std::min<uint64_t>(params.sample, ds.count());
    std::vector<uint64_t> ids = rng.sample_without_replacement(ds.count(), sample_n);
    std::sort(ids.begin(), ids.end());
    if (sample_n < kPqCentroids) {
        std::clog << "[pq] warning: only " << sample_n << " training vectors; " << (kPqCentroids - sample_n)
                  << " centroid slots per chunk are duplicates\n";
        cb.trained_k = static_cast<uint32_t>(sample_n);
    }

    size_t total = 0;
    for (uint32_t s : cb.subdims) total += size_t{kPqCentroids} * s;
    cb.centroids.resize(total);
    cb.chunk_base.assign(cb.chunks, 0);
    {
        size_t base = 0;
        for (uint32_t m = 0; m < cb.chunks; ++m) {
            cb.chunk_base[m] = base;
            base += size_t{kPqCentroids} * cb.subdims[m];
        }
    }

    uint32_t offset = 0;
    std::vector<float> sub;
    for (uint32_t m = 0; m < cb.chunks; ++m) {
        const uint32_t sd = cb.subdims[m];
        sub.resize(sample_n * sd);
        for (uint64_t i = 0; i < sample_n; ++i) detail::copy_sub_vector(ds.row(ids[i]), offset, sd, sub.data() + i * sd);
        Rng chunk_rng = Rng::derive(params.seed, m);
        KMeansResult km = kmeans(sub, sd, kPqCentroids, params.iters, chunk_rng);
        std::copy(km.centroids.begin(), km.centroids.end(), cb.centroids.begin() + static_cast<ptrdiff_t>(cb.chunk_base[m]));
        offset += sd;
    }
    cb.finalize_layout();
    return cb;
}

/// Per chunk, the nearest centroid (ties to the lowest index).
inline void encode_into(const PQCodebook& cb, const VectorView& v, std::span<uint8_t> out) {
    detail::check_dims(cb, v);
    require(out.size() == cb.chunks, "PQ code buffer has wrong length");
    float buf[4096];
    std::vector<float> heap;
    for (uint32_t m = 0; m < cb.chunks; ++m) {
        const uint32_t sd = cb.subdims[m];
        float* x = buf;
        if (sd > std::size(buf)) {
            heap.resize(sd);
            x = heap.data();
        }
        detail::copy_sub_vector(v, cb.offsets[m], sd, x);
        out[m] = static_cast<uint8_t>(detail::nearest_centroid(x, cb.centroid(m, 0), kPqCentroids, sd, nullptr));
    }
}

inline std::vector<uint8_t> encode(const PQCodebook& cb, const VectorView& v) {
    std::vector<uint8_t> code(cb.chunks);
    encode_into(cb, v, code);
    return code;
}

inline PQCodes encode_all(const PQCodebook& cb, const VectorDataset& ds) {
    PQCodes codes;
    codes.count = ds.count();
    codes.chunks = cb.chunks;
    codes.codes.resize(ds.count() * cb.chunks);
    for (uint64_t i = 0; i < ds.count(); ++i)
        encode_into(cb, ds.row(i), {codes.codes.data() + i * cb.chunks, cb.chunks});
    return codes;
}

inline QueryLUT build_lut(const PQCodebook& cb, const VectorView& q) {
    detail::check_dims(cb, q);
    QueryLUT lut;
    lut.chunks = cb.chunks;
    lut.table.resize(size_t{cb.chunks} * kPqCentroids);
    std::vector<float> x;
    for (uint32_t m = 0; m < cb.chunks; ++m) {
        const uint32_t sd = cb.subdims[m];
        x.resize(sd);
        detail::copy_sub_vector(q, cb.offsets[m], sd, x.data());
        float* row = lut.table.data() + size_t{m} * kPqCentroids;
        for (uint32_t c = 0; c < kPqCentroids; ++c) row[c] = detail::sq_dist(x.data(), cb.centroid(m, c), sd);
    }
    return lut;
}

/// Asymmetric distance: sum over chunks of the looked-up partial distances.
inline float adc(const QueryLUT& lut, std::span<const uint8_t> code) {
    if (code.size() != lut.chunks) fail(ErrorKind::invalid_argument, "PQ code length does not match LUT");
    const float* t = lut.table.data();
    float acc = 0.0f;
    for (uint32_t m = 0; m < lut.chunks; ++m, t += kPqCentroids) acc += t[code[m]];
    return acc;
}

/// Concatenation of the centroids selected by `code`.
inline std::vector<float> reconstruct(const PQCodebook& cb, std::span<const uint8_t> code) {
    require(code.size() == cb.chunks, "PQ code length does not match codebook");
    std::vector<float> out(cb.dim);
    for (uint32_t m = 0; m < cb.chunks; ++m) {
        const float* c = cb.centroid(m, code[m]);
        std::copy(c, c + cb.subdims[m], out.begin() + cb.offsets[m]);
    }
    return out;
}

/// Mean squared reconstruction error over the dataset rows.
inline double quantization_error(const PQCodebook& cb, const VectorDataset& ds) {
    double total = 0.0;
    for (uint64_t i = 0; i < ds.count(); ++i) {
        const auto code = encode(cb, ds.row(i));
        const auto rec = reconstruct(cb, code);
        for (uint32_t j = 0; j < cb.dim; ++j) {
            const double d = static_cast<double>(ds.row(i).at(j)) - rec[j];
            total += d * d;
        }
    }
    return total / static_cast<double>(ds.count());
}

// PQ file: "GANNPQ01" | u32 M | u32 dim | u32 dtype | u32 x M subdims |
//          f32 centroids (M x 256 x subdim) | u64 N | codes (N x M bytes)

inline constexpr Magic kPqMagic = make_magic("GANNPQ01");

inline void write_pq(const std::string& path, const PQCodebook& cb, const PQCodes& codes) {
    require(codes.chunks == cb.chunks, "PQ codes and codebook disagree on chunk count");
    BinaryWriter w(path);
    w.put_magic(kPqMagic);
    w.put<uint32_t>(cb.chunks);
    w.put<uint32_t>(cb.dim);
    w.put<uint32_t>(static_cast<uint32_t>(cb.dtype));
    w.put_span(std::span<const uint32_t>(cb.subdims));
    w.put_span(std::span<const float>(cb.centroids));
    w.put<uint64_t>(codes.count);
    w.put_span(std::span<const uint8_t>(codes.codes));
    w.close();
}

inline std::pair<PQCodebook, PQCodes> read_pq(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(kPqMagic);
    PQCodebook cb;
    cb.chunks = r.get<uint32_t>();
    cb.dim = r.get<uint32_t>();
    cb.dtype = dtype_from_code(r.get<uint32_t>());
    if (cb.chunks == 0 || cb.chunks > cb.dim) fail(ErrorKind::format, path + ": invalid PQ chunk count");
    cb.subdims.resize(cb.chunks);
    r.get_span(std::span<uint32_t>(cb.subdims));
    uint64_t total = 0;
    for (uint32_t s : cb.subdims) {
        if (s == 0) fail(ErrorKind::format, path + ": zero-width PQ chunk");
        total += uint64_t{kPqCentroids} * s;
    }
    if (total * sizeof(float) > r.remaining()) fail(ErrorKind::format, path + ": truncated centroid block");
    cb.centroids.resize(total);
    r.get_span(std::span<float>(cb.centroids));
    cb.finalize_layout();
    PQCodes codes;
    codes.chunks = cb.chunks;
    codes.count = r.get<uint64_t>();
    if (codes.count * cb.chunks != r.remaining()) fail(ErrorKind::format, path + ": PQ code block has wrong length");
    codes.codes.resize(codes.count * cb.chunks);
    r.get_span(std::span<uint8_t>(codes.codes));
    return {std::move(cb), std::move(codes)};
}

}  // namespace gdann
