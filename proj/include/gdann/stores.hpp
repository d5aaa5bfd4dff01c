#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "gdann/binary_io.hpp"
#include "gdann/core.hpp"
#include "gdann/disk_format.hpp"

namespace gdann {

enum class LabelKind { single_label, bin_label, multi_label };

/// Multi-label rows in compressed-sparse-row form.
struct TagRows {
    std::vector<uint64_t> offsets{0};  // N + 1
    std::vector<uint32_t> tags;

    uint64_t size() const { return offsets.size() - 1; }
    std::span<const uint32_t> row(uint64_t i) const {
        return {tags.data() + offsets[i], static_cast<size_t>(offsets[i + 1] - offsets[i])};
    }
    void push_row(std::span<const uint32_t> row) {
        tags.insert(tags.end(), row.begin(), row.end());
        offsets.push_back(tags.size());
    }
    bool operator==(const TagRows&) const = default;
};

/// Memory-resident per-node filter metadata with O(1) access by node id.
/// Independent of the graph index; swapping it changes only predicate outcomes.
class FilterStore {
public:
    FilterStore() = default;

    static FilterStore from_labels(std::vector<uint8_t> labels, uint16_t num_classes,
                                   LabelKind kind = LabelKind::single_label) {
        require(kind != LabelKind::multi_label, "byte labels cannot back a multi-label store");
        FilterStore s;
        s.kind_ = kind;
        s.num_classes_ = num_classes;
        s.labels_ = std::move(labels);
        for (uint8_t l : s.labels_)
            if (num_classes != 0 && l >= num_classes) fail(ErrorKind::format, "label exceeds num_classes");
        return s;
    }

    static FilterStore from_tags(TagRows rows) {
        if (rows.offsets.empty() || rows.offsets.front() != 0 || rows.offsets.back() != rows.tags.size())
            fail(ErrorKind::format, "multi-label offsets inconsistent with tag count");
        for (uint64_t i = 0; i < rows.size(); ++i) {
            if (rows.offsets[i + 1] < rows.offsets[i]) fail(ErrorKind::format, "multi-label offsets decrease");
            if (!strictly_sorted(rows.row(i)))
                fail(ErrorKind::format, "multi-label row " + std::to_string(i) + " not strictly sorted");
        }
        FilterStore s;
        s.kind_ = LabelKind::multi_label;
        s.rows_ = std::move(rows);
        return s;
    }

    LabelKind kind() const { return kind_; }
    uint16_t num_classes() const { return num_classes_; }
    uint64_t size() const { return kind_ == LabelKind::multi_label ? rows_.size() : labels_.size(); }

    uint8_t label(NodeId id) const { return labels_[id]; }
    std::span<const uint32_t> tags(NodeId id) const { return rows_.row(id); }
    std::span<const uint8_t> labels() const { return labels_; }
    const TagRows& rows() const { return rows_; }

    NodeMeta meta(NodeId id) const {
        if (id >= size()) fail(ErrorKind::invalid_argument, "node id out of range: " + std::to_string(id));
        switch (kind_) {
            case LabelKind::single_label: return SingleLabel{labels_[id]};
            case LabelKind::bin_label: return BinLabel{labels_[id]};
            case LabelKind::multi_label: return TagSet{rows_.row(id)};
        }
        return SingleLabel{};
    }

    bool matches(const Predicate& pred, NodeId id) const { return evaluate(pred, meta(id)); }

    /// Fraction of nodes satisfying `pred`.
    double selectivity(const Predicate& pred) const {
        uint64_t hits = 0;
        for (uint64_t i = 0; i < size(); ++i) hits += matches(pred, static_cast<NodeId>(i));
        return static_cast<double>(hits) / static_cast<double>(size());
    }

    uint64_t memory_bytes() const {
        if (kind_ != LabelKind::multi_label) return labels_.size();
        return rows_.offsets.size() * sizeof(uint64_t) + rows_.tags.size() * sizeof(uint32_t);
    }

private:
    LabelKind kind_ = LabelKind::single_label;
    uint16_t num_classes_ = 0;
    std::vector<uint8_t> labels_;
    TagRows rows_;
};

/// Per-query predicate check compiled against one filter store, so the
/// dispatch loop avoids re-visiting the predicate variant per candidate.
class FilterCheck {
public:
    FilterCheck(const FilterStore& store, const Predicate& pred) : store_(&store), pred_(&pred) {
        validate(pred);
        const bool ok = (std::holds_alternative<Equality>(pred) && store.kind() == LabelKind::single_label) ||
                        (std::holds_alternative<RangeBin>(pred) && store.kind() == LabelKind::bin_label) ||
                        (std::holds_alternative<Subset>(pred) && store.kind() == LabelKind::multi_label);
        if (!ok) fail(ErrorKind::invalid_argument, "predicate kind does not match filter store kind");
        if (const auto* e = std::get_if<Equality>(&pred)) byte_ = e->label;
        if (const auto* r = std::get_if<RangeBin>(&pred)) byte_ = r->bin;
    }

    bool operator()(NodeId id) const {
        if (store_->kind() == LabelKind::multi_label)
            return is_subset(std::get<Subset>(*pred_).tags, store_->tags(id));
        return store_->label(id) == byte_;
    }

private:
    const FilterStore* store_;
    const Predicate* pred_;
    uint8_t byte_ = 0;
};

// Label files:
//   single/bin: "GANNLBL1" | u64 N | u16 num_classes | N bytes
//   multi     : "GANNLBL2" | u64 N | u64 nnz | u64 x (N+1) offsets | u32 x nnz tags

inline constexpr Magic kLabelMagic = make_magic("GANNLBL1");
inline constexpr Magic kMultiLabelMagic = make_magic("GANNLBL2");

inline void write_label_file(const std::string& path, std::span<const uint8_t> labels, uint16_t num_classes) {
    BinaryWriter w(path);
    w.put_magic(kLabelMagic);
    w.put<uint64_t>(labels.size());
    w.put<uint16_t>(num_classes);
    w.put_span(labels);
    w.close();
}

inline void write_multilabel_file(const std::string& path, const TagRows& rows) {
    BinaryWriter w(path);
    w.put_magic(kMultiLabelMagic);
    w.put<uint64_t>(rows.size());
    w.put<uint64_t>(rows.tags.size());
    w.put_span(std::span<const uint64_t>(rows.offsets));
    w.put_span(std::span<const uint32_t>(rows.tags));
    w.close();
}

/// Loads either label file flavour. Byte labels are interpreted as class
/// labels or range bins according to `byte_kind`. `expected_n` (when
/// non-zero) must match the node count.
inline FilterStore load_filter_store(const std::string& path, uint64_t expected_n = 0,
                                     LabelKind byte_kind = LabelKind::single_label) {
    BinaryReader r(path);
    Magic m{};
    r.read_raw(m.data(), m.size());
    FilterStore store;
    if (m == kLabelMagic) {
        const uint64_t n = r.get<uint64_t>();
        const uint16_t classes = r.get<uint16_t>();
        if (n != r.remaining()) fail(ErrorKind::format, path + ": label count does not match payload");
        std::vector<uint8_t> labels(n);
        r.get_span(std::span<uint8_t>(labels));
        store = FilterStore::from_labels(std::move(labels), classes,
                                         byte_kind == LabelKind::multi_label ? LabelKind::single_label : byte_kind);
    } else if (m == kMultiLabelMagic) {
        const uint64_t n = r.get<uint64_t>();
        const uint64_t nnz = r.get<uint64_t>();
        if ((n + 1) * 8 + nnz * 4 != r.remaining()) fail(ErrorKind::format, path + ": multi-label payload size mismatch");
        TagRows rows;
        rows.offsets.resize(n + 1);
        rows.tags.resize(nnz);
        r.get_span(std::span<uint64_t>(rows.offsets));
        r.get_span(std::span<uint32_t>(rows.tags));
        store = FilterStore::from_tags(std::move(rows));
    } else {
        fail(ErrorKind::format, path + ": not a label file");
    }
    if (expected_n != 0 && store.size() != expected_n)
        fail(ErrorKind::format, path + ": label count " + std::to_string(store.size()) + " does not match index size " +
                                    std::to_string(expected_n));
    return store;
}

// ---------------------------------------------------------------------------

/// MEM_neighbor = N x (1 + R_max) x 4 bytes.
constexpr uint64_t neighbor_store_bytes(uint64_t n, uint32_t r_max) { return n * (1 + uint64_t{r_max}) * 4; }

/// Fixed-stride in-memory adjacency: per node one count word followed by
/// R_max id slots holding the first min(k, R_max) neighbors of its disk record.
class NeighborStore {
public:
    NeighborStore() = default;
    NeighborStore(uint64_t n, uint32_t r_max) : n_(n), r_max_(r_max), table_(n * (1 + uint64_t{r_max}), 0) {
        require(r_max >= 1, "R_max must be >= 1");
    }

    uint64_t size() const { return n_; }
    uint32_t r_max() const { return r_max_; }
    uint64_t stride() const { return 1 + uint64_t{r_max_}; }
    uint64_t memory_bytes() const { return table_.size() * sizeof(uint32_t); }

    std::span<const NodeId> neighbors_of(NodeId id) const {
        if (id >= n_) fail(ErrorKind::invalid_argument, "node id out of range: " + std::to_string(id));
        const uint32_t* block = table_.data() + id * stride();
        return {block + 1, block[0]};
    }

    std::span<const uint32_t> block(NodeId id) const { return {table_.data() + id * stride(), stride()}; }

    void set(NodeId id, std::span<const NodeId> nbrs) {
        const size_t k = std::min<size_t>(nbrs.size(), r_max_);
        uint32_t* b = table_.data() + id * stride();
        b[0] = static_cast<uint32_t>(k);
        std::copy_n(nbrs.begin(), k, b + 1);
        std::fill(b + 1 + k, b + stride(), 0);
    }

private:
    uint64_t n_ = 0;
    uint32_t r_max_ = 0;
    std::vector<uint32_t> table_;  // zero-initialised, so every page is touched at construction
};

/// One sequential pass over the disk records, copying each leading prefix.
inline NeighborStore build_neighbor_store(const DiskImage& disk, uint32_t r_max) {
    const DiskIndexHeader& h = disk.header();
    NeighborStore store(h.count, r_max);
    std::vector<NodeId> nbrs;
    for (uint64_t i = 0; i < h.count; ++i) {
        auto sector = disk.sector(static_cast<NodeId>(i));
        uint32_t k = 0;
        std::memcpy(&k, sector.data() + h.vector_bytes(), 4);
        if (k > h.max_degree) fail(ErrorKind::format, disk.path() + ": neighbor count exceeds R at node " + std::to_string(i));
        const uint32_t take = std::min(k, r_max);
        nbrs.resize(take);
        std::memcpy(nbrs.data(), sector.data() + h.vector_bytes() + 4, size_t{take} * 4);
        for (NodeId nb : nbrs)
            if (nb >= h.count) fail(ErrorKind::format, disk.path() + ": neighbor id out of range at node " + std::to_string(i));
        store.set(static_cast<NodeId>(i), nbrs);
    }
    return store;
}

inline NeighborStore build_neighbor_store(const std::string& disk_index_path, uint32_t r_max) {
    DiskImage disk(disk_index_path);
    return build_neighbor_store(disk, r_max);
}

}  // namespace gdann
