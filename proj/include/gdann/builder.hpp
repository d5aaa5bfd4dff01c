#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "gdann/core.hpp"
#include "gdann/disk_format.hpp"
#include "gdann/rng.hpp"

namespace gdann {

struct BuildParams {
    uint32_t R = 32;
    uint32_t L_build = 64;
    float alpha = 1.2f;
    uint64_t seed = 1;

    void validate() const {
        require(R >= 2, "R must be >= 2");
        require(L_build >= R, "L_build must be >= R");
        require(alpha >= 1.0f, "alpha must be >= 1.0");
    }
};

struct InMemGraph {
    std::vector<std::vector<NodeId>> adjacency;
    NodeId medoid = 0;
    uint32_t max_degree = 0;

    uint64_t size() const { return adjacency.size(); }
};

/// (distance, id) pair ordered by distance then id.
struct Candidate {
    float distance = 0.0f;
    NodeId id = 0;

    friend bool operator<(const Candidate& a, const Candidate& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
    }
    friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Epoch-stamped membership marks; clear() is O(1).
class VisitedMarks {
public:
    explicit VisitedMarks(size_t n = 0) : marks_(n, 0) {}

    void resize(size_t n) {
        if (marks_.size() != n) {
            marks_.assign(n, 0);
            epoch_ = 1;
        }
    }
    void clear() {
        if (++epoch_ == 0) {
            std::fill(marks_.begin(), marks_.end(), 0);
            epoch_ = 1;
        }
    }
    bool contains(size_t i) const { return marks_[i] == epoch_; }
    /// Returns true if `i` was not yet marked.
    bool insert(size_t i) {
        if (marks_[i] == epoch_) return false;
        marks_[i] = epoch_;
        return true;
    }

private:
    std::vector<uint32_t> marks_;
    uint32_t epoch_ = 1;
};

/// Node nearest to the dataset centroid; ties to the lowest id. For N above
/// 100k the centroid is estimated from a seeded sample of 100k rows.
inline NodeId compute_medoid(const VectorDataset& ds, uint64_t seed = 0) {
    constexpr uint64_t kMaxSample = 100000;
    const uint32_t dim = ds.dim();
    std::vector<double> mean(dim, 0.0);
    std::vector<uint64_t> rows;
    if (ds.count() > kMaxSample) {
        Rng rng(seed);
        rows = rng.sample_without_replacement(ds.count(), kMaxSample);
    } else {
        rows.resize(ds.count());
        for (uint64_t i = 0; i < ds.count(); ++i) rows[i] = i;
    }
    for (uint64_t r : rows) {
        const VectorView v = ds.row(r);
        for (uint32_t j = 0; j < dim; ++j) mean[j] += v.at(j);
    }
    for (double& m : mean) m /= static_cast<double>(rows.size());

    NodeId best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (uint64_t i = 0; i < ds.count(); ++i) {
        const VectorView v = ds.row(i);
        double d = 0.0;
        for (uint32_t j = 0; j < dim; ++j) {
            const double diff = v.at(j) - mean[j];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = static_cast<NodeId>(i);
        }
    }
    return best;
}

struct GreedyResult {
    std::vector<NodeId> visited;  // expansion order
    std::vector<Candidate> top;   // final list, ascending
};

namespace detail {

/// Best-first search from `start` with a bounded candidate list of size L.
/// `expanded` receives the expansion order.
inline void greedy_search(const std::vector<std::vector<NodeId>>& adjacency, const VectorDataset& ds, NodeId start,
                          const VectorView& q, uint32_t L, VisitedMarks& seen, std::vector<Candidate>& list,
                          std::vector<uint8_t>& expanded_flag, std::vector<NodeId>& expanded) {
    seen.clear();
    list.clear();
    expanded_flag.clear();
    expanded.clear();
    list.push_back({l2_sq_fast(q, ds.row(start)), start});
    expanded_flag.push_back(0);
    seen.insert(start);
    size_t cursor = 0;
    while (cursor < list.size()) {
        if (expanded_flag[cursor]) {
            ++cursor;
            continue;
        }
        expanded_flag[cursor] = 1;
        const NodeId p = list[cursor].id;
        expanded.push_back(p);
        size_t next = cursor + 1;
        for (NodeId n : adjacency[p]) {
            if (!seen.insert(n)) continue;
            const Candidate c{l2_sq_fast(q, ds.row(n)), n};
            if (list.size() >= L && !(c < list.back())) continue;
            auto pos = std::lower_bound(list.begin(), list.end(), c);
            const size_t idx = static_cast<size_t>(pos - list.begin());
            list.insert(pos, c);
            expanded_flag.insert(expanded_flag.begin() + static_cast<ptrdiff_t>(idx), 0);
            if (list.size() > L) {
                list.pop_back();
                expanded_flag.pop_back();
            }
            if (idx < next) next = idx;
        }
        cursor = next;
    }
}

}  // namespace detail

/// Best-first search over `graph` from its medoid using exact distances.
inline GreedyResult greedy_search_mem(const InMemGraph& graph, const VectorDataset& ds, const VectorView& q,
                                      uint32_t L) {
    require(graph.size() == ds.count(), "graph and dataset sizes differ");
    require(L >= 1, "L must be >= 1");
    VisitedMarks seen(ds.count());
    std::vector<uint8_t> flags;
    GreedyResult res;
    detail::greedy_search(graph.adjacency, ds, graph.medoid, q, L, seen, res.top, flags, res.visited);
    return res;
}

/// Diversity pruning: repeatedly keep the closest remaining candidate c and
/// discard every c' with alpha * d(c, c') <= d(p, c'). At most R survive,
/// ascending by distance to p.
inline std::vector<NodeId> robust_prune(const VectorDataset& ds, NodeId p, std::vector<Candidate> cands, float alpha,
                                        uint32_t R) {
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.id == b.id; }),
                cands.end());
    std::erase_if(cands, [p](const Candidate& c) { return c.id == p; });

    std::vector<NodeId> out;
    out.reserve(R);
    std::vector<uint8_t> removed(cands.size(), 0);
    for (size_t i = 0; i < cands.size() && out.size() < R; ++i) {
        if (removed[i]) continue;
        const Candidate& c = cands[i];
        out.push_back(c.id);
        const VectorView cv = ds.row(c.id);
        for (size_t j = i + 1; j < cands.size(); ++j) {
            if (removed[j]) continue;
            if (alpha * l2_sq_fast(cv, ds.row(cands[j].id)) <= cands[j].distance) removed[j] = 1;
        }
    }
    return out;
}

/// Sorts every adjacency list by exact distance to its owner, ties by id.
inline void sort_neighbors_by_distance(InMemGraph& graph, const VectorDataset& ds) {
    std::vector<std::pair<double, NodeId>> tmp;
    for (uint64_t i = 0; i < graph.size(); ++i) {
        auto& adj = graph.adjacency[i];
        tmp.clear();
        for (NodeId n : adj) tmp.emplace_back(l2_sq(ds.row(i), ds.row(n)), n);
        std::sort(tmp.begin(), tmp.end());
        for (size_t j = 0; j < adj.size(); ++j) adj[j] = tmp[j].second;
    }
}

/// Two-pass Vamana construction over a seeded permutation (alpha = 1 on the
/// first pass, params.alpha on the second). Single-threaded and
/// deterministic for a given seed.
inline InMemGraph build_vamana(const VectorDataset& ds, const BuildParams& params, bool progress = false) {
    params.validate();
    if (ds.count() < 2) fail(ErrorKind::invalid_argument, "graph construction needs at least 2 vectors");
    const uint64_t n = ds.count();
    if (n > std::numeric_limits<NodeId>::max()) fail(ErrorKind::invalid_argument, "too many vectors for 32-bit ids");

    InMemGraph g;
    g.max_degree = params.R;
    g.adjacency.assign(n, {});
    g.medoid = compute_medoid(ds, params.seed);

    Rng rng(params.seed);
    std::vector<NodeId> order(n);
    for (uint64_t i = 0; i < n; ++i) order[i] = static_cast<NodeId>(i);
    for (uint64_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform(i + 1)]);

    VisitedMarks seen(n);
    std::vector<Candidate> list, pool;
    std::vector<uint8_t> flags;
    std::vector<NodeId> visited;

    for (int pass = 0; pass < 2; ++pass) {
        const float alpha = pass == 0 ? 1.0f : params.alpha;
        for (uint64_t step = 0; step < n; ++step) {
            const NodeId p = order[step];
            const VectorView pv = ds.row(p);
            detail::greedy_search(g.adjacency, ds, g.medoid, pv, params.L_build, seen, list, flags, visited);

            pool.clear();
            for (NodeId v : visited)
                if (v != p) pool.push_back({l2_sq_fast(pv, ds.row(v)), v});
            for (NodeId v : g.adjacency[p]) pool.push_back({l2_sq_fast(pv, ds.row(v)), v});
            g.adjacency[p] = robust_prune(ds, p, pool, alpha, params.R);

            for (NodeId j : g.adjacency[p]) {
                auto& adj = g.adjacency[j];
                if (std::find(adj.begin(), adj.end(), p) != adj.end()) continue;
                if (adj.size() < params.R) {
                    adj.push_back(p);
                    continue;
                }
                const VectorView jv = ds.row(j);
                pool.clear();
                for (NodeId v : adj) pool.push_back({l2_sq_fast(jv, ds.row(v)), v});
                pool.push_back({l2_sq_fast(jv, pv), p});
                adj = robust_prune(ds, j, pool, alpha, params.R);
            }
            if (progress && (step + 1) % 50000 == 0)
                std::clog << "[build] pass " << pass + 1 << ": " << step + 1 << "/" << n << "\n";
        }
    }
    sort_neighbors_by_distance(g, ds);
    return g;
}

/// Nodes reachable from the medoid by breadth-first traversal.
inline uint64_t reachable_from_medoid(const InMemGraph& g) {
    std::vector<uint8_t> seen(g.size(), 0);
    std::deque<NodeId> q{g.medoid};
    seen[g.medoid] = 1;
    uint64_t count = 1;
    while (!q.empty()) {
        NodeId u = q.front();
        q.pop_front();
        for (NodeId v : g.adjacency[u])
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                q.push_back(v);
            }
    }
    return count;
}

/// Serialises graph + vectors into the sector-aligned disk index. Neighbor
/// lists are written sorted by exact distance regardless of build order.
inline void write_disk_index(const InMemGraph& graph, const VectorDataset& ds, uint32_t sector_size,
                             const std::string& path) {
    require(graph.size() == ds.count(), "graph and dataset sizes differ");
    const size_t payload = record_payload_bytes(ds.dim(), ds.dtype(), graph.max_degree);
    if (payload > sector_size)
        fail(ErrorKind::invalid_argument, "record payload " + std::to_string(payload) + " B exceeds sector size " +
                                              std::to_string(sector_size) + " B");
    require(sector_size >= kDiskHeaderBytes, "sector size too small for the header");

    DiskIndexHeader h;
    h.sector_size = sector_size;
    h.count = ds.count();
    h.dim = ds.dim();
    h.dtype = ds.dtype();
    h.max_degree = graph.max_degree;
    h.medoid = graph.medoid;

    BinaryWriter w(path);
    std::vector<std::byte> sector(sector_size);
    encode_header(h, sector);
    w.write_raw(sector.data(), sector.size());

    std::vector<std::pair<double, NodeId>> tmp;
    std::vector<NodeId> sorted;
    for (uint64_t i = 0; i < ds.count(); ++i) {
        const auto& adj = graph.adjacency[i];
        tmp.clear();
        for (NodeId nb : adj) {
            if (nb >= ds.count()) fail(ErrorKind::invalid_argument, "neighbor id out of range");
            tmp.emplace_back(l2_sq(ds.row(i), ds.row(nb)), nb);
        }
        std::sort(tmp.begin(), tmp.end());
        sorted.clear();
        for (const auto& t : tmp) sorted.push_back(t.second);
        encode_record(h, ds.row(i), sorted, sector);
        w.write_raw(sector.data(), sector.size());
    }
    w.close();
}

}  // namespace gdann
