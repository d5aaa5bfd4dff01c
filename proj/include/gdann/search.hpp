#pragma once

#include <algorithm>
#include <atomic>
#include <cassert>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "gdann/builder.hpp"
#include "gdann/core.hpp"
#include "gdann/io.hpp"
#include "gdann/pq.hpp"
#include "gdann/stores.hpp"

namespace gdann {

enum FrontierFlag : uint8_t {
    kDispatched = 1,     // read submitted
    kVisited = 2,        // expanded (read completed, tunneled, or dropped)
    kFilterFailing = 4,  // never eligible for results
};

struct FrontierEntry {
    float distance = 0.0f;
    NodeId node = 0;
    uint8_t flags = 0;

    bool settled() const { return (flags & (kDispatched | kVisited)) != 0; }
};

/// Candidate list sorted by (distance, id), capped at L entries. Admission
/// requires a distance strictly below the current L-th entry unless the list
/// is not yet full.
class Frontier {
public:
    explicit Frontier(uint32_t capacity) : capacity_(capacity) {
        require(capacity >= 1, "frontier capacity must be >= 1");
        entries_.reserve(capacity + 1);
    }

    uint32_t capacity() const { return capacity_; }
    size_t size() const { return entries_.size(); }
    bool full() const { return entries_.size() >= capacity_; }
    const std::vector<FrontierEntry>& entries() const { return entries_; }
    FrontierEntry& at(size_t i) { return entries_[i]; }
    const FrontierEntry& at(size_t i) const { return entries_[i]; }

    bool improves(float d) const { return !full() || d < entries_.back().distance; }

    /// Inserts `node` (which must not already be present) if it improves the
    /// threshold. Returns whether it was kept.
    bool insert(float d, NodeId node) {
        if (!improves(d)) return false;
        auto pos = std::lower_bound(entries_.begin(), entries_.end(), std::pair{d, node},
                                    [](const FrontierEntry& e, const std::pair<float, NodeId>& key) {
                                        return e.distance < key.first || (e.distance == key.first && e.node < key.second);
                                    });
        const size_t idx = static_cast<size_t>(pos - entries_.begin());
        entries_.insert(pos, FrontierEntry{d, node, 0});
        if (entries_.size() > capacity_) entries_.pop_back();
        cursor_ = std::min(cursor_, idx);
#ifndef NDEBUG
        check_invariants();
#endif
        return true;
    }

    /// Index of the best entry that is neither dispatched nor visited.
    std::optional<size_t> next_undispatched() {
        while (cursor_ < entries_.size() && entries_[cursor_].settled()) ++cursor_;
        if (cursor_ < entries_.size()) return cursor_;
        return std::nullopt;
    }

    std::optional<size_t> find(NodeId node) const {
        for (size_t i = 0; i < entries_.size(); ++i)
            if (entries_[i].node == node) return i;
        return std::nullopt;
    }

    /// Sets `flags` on `node` if it is still in the list.
    void mark(NodeId node, uint8_t flags) {
        if (auto i = find(node)) entries_[*i].flags |= flags;
    }

    /// Sortedness, capacity, and uniqueness; throws on violation.
    void check_invariants() const {
        if (entries_.size() > capacity_) fail(ErrorKind::invariant, "frontier exceeds capacity");
        for (size_t i = 1; i < entries_.size(); ++i) {
            const auto& a = entries_[i - 1];
            const auto& b = entries_[i];
            if (!(a.distance < b.distance || (a.distance == b.distance && a.node < b.node)))
                fail(ErrorKind::invariant, "frontier not strictly ordered");
        }
        std::vector<NodeId> ids;
        for (const auto& e : entries_) ids.push_back(e.node);
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) fail(ErrorKind::invariant, "frontier holds a duplicate");
    }

private:
    uint32_t capacity_;
    std::vector<FrontierEntry> entries_;
    size_t cursor_ = 0;
};

struct QueryStats {
    uint64_t ios = 0;            // reads submitted
    uint64_t ios_completed = 0;  // reads processed
    uint64_t tunnels = 0;        // filter-failing nodes expanded from memory
    uint64_t dropped = 0;        // filter-failing nodes skipped without expansion (naive-pre)
    uint64_t exact_dists = 0;
    uint64_t pq_dists = 0;
    uint64_t hops = 0;           // expansions: completed reads + tunnels
    uint64_t virtual_latency_us = 0;
    uint64_t cpu_us = 0;
    uint64_t max_in_flight = 0;
    uint64_t capped = 0;         // 1 if the expansion safety cap stopped the query

    QueryStats& operator+=(const QueryStats& o) {
        ios += o.ios;
        ios_completed += o.ios_completed;
        tunnels += o.tunnels;
        dropped += o.dropped;
        exact_dists += o.exact_dists;
        pq_dists += o.pq_dists;
        hops += o.hops;
        virtual_latency_us += o.virtual_latency_us;
        cpu_us += o.cpu_us;
        max_in_flight = std::max(max_in_flight, o.max_in_flight);
        capped += o.capped;
        return *this;
    }
};

struct Neighbor {
    NodeId id = 0;
    double distance = 0.0;  // exact squared L2
    bool operator==(const Neighbor&) const = default;
};

struct QueryResult {
    std::vector<Neighbor> results;
    QueryStats stats;
    std::vector<NodeId> reads;  // submitted reads, in submission order

    std::vector<NodeId> ids() const {
        std::vector<NodeId> out;
        for (const auto& n : results) out.push_back(n.id);
        return out;
    }
};

/// Read-only structures a search needs. All are shared across threads.
struct SearchIndex {
    const DiskIndexHeader* header = nullptr;
    const PQCodebook* codebook = nullptr;
    const PQCodes* codes = nullptr;
    const FilterStore* filter = nullptr;
    const NeighborStore* neighbors = nullptr;  // required for gated mode only

    void validate(Mode mode) const {
        if (!header || !codebook || !codes || !filter) fail(ErrorKind::invalid_argument, "search index incomplete");
        const uint64_t n = header->count;
        if (n == 0) fail(ErrorKind::invalid_argument, "empty index");
        if (codes->count != n) fail(ErrorKind::invalid_argument, "PQ code count does not match index size");
        if (codebook->dim != header->dim || codebook->chunks != codes->chunks)
            fail(ErrorKind::invalid_argument, "PQ codebook does not match index");
        if (filter->size() != n) fail(ErrorKind::invalid_argument, "filter store size does not match index size");
        if (mode == Mode::gated) {
            if (!neighbors) fail(ErrorKind::invalid_argument, "gated search needs a neighbor store");
            if (neighbors->size() != n) fail(ErrorKind::invalid_argument, "neighbor store size does not match index size");
        }
    }
};

/// Reusable per-thread buffers.
struct SearchScratch {
    VisitedMarks seen;
};

/// Runs one filtered query in `params.mode`. Every mode draws its results
/// from predicate-satisfying nodes whose exact distance was computed from a
/// completed read.
///
/// The frontier is ordered by PQ distance in every mode. Modes differ only in
/// what happens to the best undispatched candidate c and to completed reads:
///   beam-post     read W candidates, wait for the whole batch, filter results at the end
///   pipe-post     keep up to W reads in flight, process completions as they arrive
///   naive-pre     as pipe-post, but a c failing the predicate is dropped unexpanded
///   early-filter  as pipe-post, but exact distances are skipped for failing reads
///   gated         a c failing the predicate is tunneled: its in-memory neighbors
///                 are PQ-scored and admitted to the frontier without any read
inline QueryResult search(const SearchIndex& index, StorageSession& session, const VectorView& query,
                          const Predicate& pred, const SearchParams& params, SearchScratch* scratch = nullptr) {
    params.validate();
    const Mode mode = params.mode;
    index.validate(mode);
    if (query.dim != index.header->dim || query.dtype != index.header->dtype)
        fail(ErrorKind::invalid_argument, "query does not match index dimension or element type");
    const FilterCheck passes(*index.filter, pred);

    const auto cpu_start = std::chrono::steady_clock::now();
    const uint64_t t0 = session.now_us();

    SearchScratch local;
    SearchScratch& s = scratch ? *scratch : local;
    s.seen.resize(index.header->count);
    s.seen.clear();

    QueryResult out;
    QueryStats& st = out.stats;
    const QueryLUT lut = build_lut(*index.codebook, query);
    const PQCodes& codes = *index.codes;
    Frontier frontier(params.L);

    auto expand = [&](std::span<const NodeId> nbrs) {
        for (NodeId n : nbrs) {
            if (!s.seen.insert(n)) continue;
            const float d = adc(lut, codes.code(n));
            ++st.pq_dists;
            frontier.insert(d, n);
        }
    };

    const NodeId entry = index.header->medoid;
    s.seen.insert(entry);
    frontier.insert(adc(lut, codes.code(entry)), entry);
    ++st.pq_dists;

    struct Scored {
        double distance;
        NodeId id;
        bool eligible;
    };
    std::vector<Scored> scored;
    const uint64_t hop_cap = 100ull * params.L;
    bool capped = false;
    size_t in_flight = 0;

    for (;;) {
        while (in_flight < params.W && !capped) {
            const auto idx = frontier.next_undispatched();
            if (!idx) break;
            if (st.hops + in_flight >= hop_cap) {
                capped = true;
                break;
            }
            const NodeId c = frontier.at(*idx).node;
            if ((mode == Mode::gated || mode == Mode::naive_pre) && !passes(c)) {
                frontier.at(*idx).flags |= kVisited | kFilterFailing;
                if (mode == Mode::gated) {
                    ++st.tunnels;
                    ++st.hops;
                    expand(index.neighbors->neighbors_of(c));
                } else {
                    ++st.dropped;
                }
                continue;
            }
            frontier.at(*idx).flags |= kDispatched;
            session.submit(c);
            out.reads.push_back(c);
            ++st.ios;
            ++in_flight;
            st.max_in_flight = std::max<uint64_t>(st.max_in_flight, in_flight);
        }
        if (in_flight == 0) break;

        std::vector<NodeRecord> done;
        if (mode == Mode::beam_post) {
            while (done.size() < in_flight) {
                auto batch = session.poll(true);
                if (batch.empty()) fail(ErrorKind::invariant, "storage session lost a read");
                for (auto& r : batch) done.push_back(std::move(r));
            }
        } else {
            done = session.poll(true);
            if (done.empty()) fail(ErrorKind::invariant, "storage session lost a read");
        }

        for (const NodeRecord& rec : done) {
            --in_flight;
            ++st.ios_completed;
            ++st.hops;
            const bool eligible = passes(rec.node);
            if (mode != Mode::early_filter || eligible) {
                const double d = l2_sq(query, rec.view(index.header->dim, index.header->dtype));
                ++st.exact_dists;
                scored.push_back({d, rec.node, eligible});
            }
            expand(rec.neighbors);
            frontier.mark(rec.node, kVisited | (eligible ? 0 : kFilterFailing));
        }
    }

    std::sort(scored.begin(), scored.end(),
              [](const Scored& a, const Scored& b) { return a.distance < b.distance || (a.distance == b.distance && a.id < b.id); });
    for (const Scored& sc : scored) {
        if (out.results.size() >= params.K) break;
        if (sc.eligible) out.results.push_back({sc.id, sc.distance});
    }

    st.capped = capped ? 1 : 0;
    st.virtual_latency_us = session.now_us() - t0;
    st.cpu_us = static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - cpu_start).count());
    return out;
}

struct BatchResult {
    std::vector<QueryResult> queries;
    QueryStats total;
    double wall_seconds = 0.0;
};

/// Runs independent query sessions across `threads` workers. On the
/// simulated backend per-query output does not depend on the thread count.
inline BatchResult batch_search(const SearchIndex& index, StorageBackend& backend, const VectorDataset& queries,
                                std::span<const Predicate> preds, const SearchParams& params, unsigned threads = 1) {
    require(preds.size() == queries.count(), "queries and predicates are not aligned");
    index.validate(params.mode);
    BatchResult out;
    out.queries.resize(queries.count());
    const auto start = std::chrono::steady_clock::now();
    std::atomic<uint64_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto worker = [&] {
        SearchScratch scratch;
        for (;;) {
            const uint64_t i = next.fetch_add(1);
            if (i >= queries.count()) return;
            try {
                auto session = backend.open_session();
                out.queries[i] = search(index, *session, queries.row(i), preds[i], params, &scratch);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                next = queries.count();
            }
        }
    };
    threads = std::max(1u, threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& q : out.queries) out.total += q.stats;
    return out;
}

}  // namespace gdann
