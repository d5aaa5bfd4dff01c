#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gdann/binary_io.hpp"
#include "gdann/error.hpp"

namespace gdann {

using NodeId = uint32_t;

enum class Dtype : uint32_t { u8 = 0, f32 = 1 };

constexpr size_t element_size(Dtype t) { return t == Dtype::u8 ? 1 : 4; }

inline std::string_view to_string(Dtype t) { return t == Dtype::u8 ? "u8" : "f32"; }

inline Dtype parse_dtype(std::string_view s) {
    if (s == "u8" || s == "uint8") return Dtype::u8;
    if (s == "f32" || s == "float") return Dtype::f32;
    fail(ErrorKind::invalid_argument, "unknown dtype: " + std::string(s));
}

inline Dtype dtype_from_code(uint32_t code) {
    if (code > 1) fail(ErrorKind::format, "unknown dtype code " + std::to_string(code));
    return static_cast<Dtype>(code);
}

/// Non-owning view of one vector's raw elements.
struct VectorView {
    Dtype dtype = Dtype::u8;
    uint32_t dim = 0;
    const std::byte* data = nullptr;

    size_t size_bytes() const { return dim * element_size(dtype); }
    const uint8_t* as_u8() const { return reinterpret_cast<const uint8_t*>(data); }
    const float* as_f32() const { return reinterpret_cast<const float*>(data); }

    /// Element i widened to float.
    float at(size_t i) const { return dtype == Dtype::u8 ? static_cast<float>(as_u8()[i]) : as_f32()[i]; }
};

/// N row-major vectors of one element type.
class VectorDataset {
public:
    VectorDataset() = default;

    VectorDataset(Dtype dtype, uint32_t dim, uint64_t count, std::vector<std::byte> data)
        : dtype_(dtype), dim_(dim), count_(count), data_(std::move(data)) {
        require(dim_ >= 1, "dataset dim must be >= 1");
        require(count_ >= 1, "dataset count must be >= 1");
        if (data_.size() != count_ * row_bytes())
            fail(ErrorKind::invalid_argument, "dataset data length does not match count x dim");
    }

    static VectorDataset zeros(Dtype dtype, uint32_t dim, uint64_t count) {
        return VectorDataset(dtype, dim, count, std::vector<std::byte>(count * dim * element_size(dtype)));
    }

    static VectorDataset from_u8(uint32_t dim, std::span<const uint8_t> values) {
        std::vector<std::byte> bytes(values.size());
        std::memcpy(bytes.data(), values.data(), values.size());
        return VectorDataset(Dtype::u8, dim, dim ? values.size() / dim : 0, std::move(bytes));
    }

    static VectorDataset from_f32(uint32_t dim, std::span<const float> values) {
        std::vector<std::byte> bytes(values.size_bytes());
        std::memcpy(bytes.data(), values.data(), values.size_bytes());
        return VectorDataset(Dtype::f32, dim, dim ? values.size() / dim : 0, std::move(bytes));
    }

    Dtype dtype() const { return dtype_; }
    uint32_t dim() const { return dim_; }
    uint64_t count() const { return count_; }
    size_t row_bytes() const { return dim_ * element_size(dtype_); }
    std::span<const std::byte> bytes() const { return data_; }

    VectorView row(uint64_t i) const { return {dtype_, dim_, data_.data() + i * row_bytes()}; }
    std::span<std::byte> mutable_row(uint64_t i) { return {data_.data() + i * row_bytes(), row_bytes()}; }

    bool operator==(const VectorDataset&) const = default;

private:
    Dtype dtype_ = Dtype::u8;
    uint32_t dim_ = 0;
    uint64_t count_ = 0;
    std::vector<std::byte> data_;
};

// ---------------------------------------------------------------------------
// distance kernels

namespace detail {

inline uint64_t l2_sq_u8(const uint8_t* a, const uint8_t* b, size_t dim) {
    // per-coordinate squares fit in 16 bits; 32-bit partial sums are exact
    // for dim < 66051, wider sums handled by chunking
    uint64_t total = 0;
    size_t i = 0;
    while (i < dim) {
        const size_t end = std::min(dim, i + 32768);
        uint32_t acc = 0;
        for (; i < end; ++i) {
            const int32_t d = static_cast<int32_t>(a[i]) - static_cast<int32_t>(b[i]);
            acc += static_cast<uint32_t>(d * d);
        }
        total += acc;
    }
    return total;
}

inline double l2_sq_f32_exact(const float* a, const float* b, size_t dim) {
    double acc = 0.0;
    for (size_t i = 0; i < dim; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

inline float l2_sq_f32_fast(const float* a, const float* b, size_t dim) {
    float acc = 0.0f;
    for (size_t i = 0; i < dim; ++i) {
        const float d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

inline void check_compatible(const VectorView& a, const VectorView& b) {
    if (a.dim != b.dim)
        fail(ErrorKind::invalid_argument,
             "dimension mismatch: " + std::to_string(a.dim) + " vs " + std::to_string(b.dim));
    if (a.dtype != b.dtype) fail(ErrorKind::invalid_argument, "element type mismatch");
}

}  // namespace detail

/// Squared Euclidean distance. Exact for u8 (integer accumulation) and
/// accumulated in double for f32.
inline double l2_sq(const VectorView& a, const VectorView& b) {
    detail::check_compatible(a, b);
    if (a.dtype == Dtype::u8) return static_cast<double>(detail::l2_sq_u8(a.as_u8(), b.as_u8(), a.dim));
    return detail::l2_sq_f32_exact(a.as_f32(), b.as_f32(), a.dim);
}

/// Unchecked single-precision variant for inner loops (graph construction).
inline float l2_sq_fast(const VectorView& a, const VectorView& b) {
    if (a.dtype == Dtype::u8) return static_cast<float>(detail::l2_sq_u8(a.as_u8(), b.as_u8(), a.dim));
    return detail::l2_sq_f32_fast(a.as_f32(), b.as_f32(), a.dim);
}

// ---------------------------------------------------------------------------
// predicates and per-node metadata

struct Equality {
    uint8_t label = 0;
    bool operator==(const Equality&) const = default;
};

struct RangeBin {
    uint8_t bin = 0;
    bool operator==(const RangeBin&) const = default;
};

struct Subset {
    std::vector<uint32_t> tags;  // strictly sorted, non-empty
    bool operator==(const Subset&) const = default;
};

using Predicate = std::variant<Equality, RangeBin, Subset>;

inline bool strictly_sorted(std::span<const uint32_t> tags) {
    return std::adjacent_find(tags.begin(), tags.end(), [](uint32_t a, uint32_t b) { return a >= b; }) == tags.end();
}

/// Builds a Subset predicate, sorting and deduplicating `tags`.
inline Predicate make_subset(std::vector<uint32_t> tags) {
    std::sort(tags.begin(), tags.end());
    tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
    require(!tags.empty(), "subset predicate needs at least one tag");
    return Subset{std::move(tags)};
}

inline void validate(const Predicate& pred) {
    if (const auto* s = std::get_if<Subset>(&pred)) {
        if (s->tags.empty()) fail(ErrorKind::invalid_argument, "subset predicate is empty");
        if (!strictly_sorted(s->tags)) fail(ErrorKind::invalid_argument, "subset predicate tags not strictly sorted");
    }
}

struct SingleLabel {
    uint8_t label = 0;
};

struct BinLabel {
    uint8_t bin = 0;
};

struct TagSet {
    std::span<const uint32_t> tags;  // strictly sorted view into the filter store
};

using NodeMeta = std::variant<SingleLabel, BinLabel, TagSet>;

/// Sorted-set inclusion by merge scan: true iff every query tag is in `node_tags`.
inline bool is_subset(std::span<const uint32_t> query_tags, std::span<const uint32_t> node_tags) {
    size_t j = 0;
    for (uint32_t q : query_tags) {
        while (j < node_tags.size() && node_tags[j] < q) ++j;
        if (j == node_tags.size() || node_tags[j] != q) return false;
        ++j;
    }
    return true;
}

inline bool evaluate(const Predicate& pred, const NodeMeta& meta) {
    switch (pred.index()) {
        case 0:
            if (const auto* m = std::get_if<SingleLabel>(&meta)) return std::get<Equality>(pred).label == m->label;
            break;
        case 1:
            if (const auto* m = std::get_if<BinLabel>(&meta)) return std::get<RangeBin>(pred).bin == m->bin;
            break;
        case 2:
            if (const auto* m = std::get_if<TagSet>(&meta)) return is_subset(std::get<Subset>(pred).tags, m->tags);
            break;
    }
    fail(ErrorKind::invalid_argument, "predicate kind does not match node metadata kind");
}

inline std::string describe(const Predicate& pred) {
    if (const auto* e = std::get_if<Equality>(&pred)) return "label=" + std::to_string(e->label);
    if (const auto* r = std::get_if<RangeBin>(&pred)) return "bin=" + std::to_string(r->bin);
    std::string s = "tags>={";
    const auto& tags = std::get<Subset>(pred).tags;
    for (size_t i = 0; i < tags.size(); ++i) s += (i ? "," : "") + std::to_string(tags[i]);
    return s + "}";
}

// ---------------------------------------------------------------------------
// search configuration

enum class Mode { beam_post, pipe_post, naive_pre, early_filter, gated };

inline constexpr Mode kAllModes[] = {Mode::beam_post, Mode::pipe_post, Mode::naive_pre, Mode::early_filter,
                                     Mode::gated};

inline std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::beam_post: return "beam-post";
        case Mode::pipe_post: return "pipe-post";
        case Mode::naive_pre: return "naive-pre";
        case Mode::early_filter: return "early-filter";
        case Mode::gated: return "gated";
    }
    return "?";
}

inline Mode parse_mode(std::string_view s) {
    for (Mode m : kAllModes)
        if (to_string(m) == s) return m;
    fail(ErrorKind::invalid_argument, "unknown search mode: " + std::string(s));
}

struct SearchParams {
    uint32_t L = 100;  // frontier capacity
    uint32_t K = 10;   // result size
    uint32_t W = 8;    // pipeline depth (beam width for beam-post)
    Mode mode = Mode::gated;

    void validate() const {
        require(K >= 1, "K must be >= 1");
        require(K <= L, "K must be <= L");
        require(W >= 1, "W must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// metrics

/// |result[0..k) ∩ truth| / max(1, |truth|). When fewer than k nodes satisfy
/// the predicate the truth list is shorter and the denominator shrinks with it.
inline double recall_at_k(std::span<const NodeId> result, std::span<const NodeId> truth, size_t k) {
    const size_t n = std::min(result.size(), k);
    std::vector<NodeId> t(truth.begin(), truth.end());
    std::sort(t.begin(), t.end());
    size_t hits = 0;
    for (size_t i = 0; i < n; ++i)
        if (std::binary_search(t.begin(), t.end(), result[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(std::max<size_t>(1, truth.size()));
}

// ---------------------------------------------------------------------------
// vector file: "GANNVEC1" | u32 dtype | u32 dim | u64 count | row-major data

inline constexpr Magic kVectorMagic = make_magic("GANNVEC1");

inline void write_vectors(const std::string& path, const VectorDataset& ds) {
    BinaryWriter w(path);
    w.put_magic(kVectorMagic);
    w.put<uint32_t>(static_cast<uint32_t>(ds.dtype()));
    w.put<uint32_t>(ds.dim());
    w.put<uint64_t>(ds.count());
    w.put_span(ds.bytes());
    w.close();
}

inline VectorDataset read_vectors(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(kVectorMagic);
    const Dtype dtype = dtype_from_code(r.get<uint32_t>());
    const uint32_t dim = r.get<uint32_t>();
    const uint64_t count = r.get<uint64_t>();
    if (dim == 0 || count == 0) fail(ErrorKind::format, path + ": empty vector file");
    const uint64_t bytes = count * dim * element_size(dtype);
    if (bytes != r.remaining()) fail(ErrorKind::format, path + ": payload size does not match header");
    std::vector<std::byte> data(bytes);
    r.get_span(std::span<std::byte>(data));
    return VectorDataset(dtype, dim, count, std::move(data));
}

}  // namespace gdann
