#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "gdann/builder.hpp"
#include "gdann/io.hpp"
#include "gdann/pq.hpp"
#include "gdann/search.hpp"
#include "gdann/stores.hpp"
#include "gdann/workloads.hpp"

namespace gdann {

/// Everything loaded from an index prefix: `<prefix>.disk` and `<prefix>.pq`.
/// The neighbor store is rebuilt from the disk index on every load.
struct LoadedIndex {
    std::unique_ptr<DiskImage> disk;
    PQCodebook codebook;
    PQCodes codes;
    NeighborStore neighbors;

    static LoadedIndex open(const std::string& prefix, uint32_t r_max) {
        LoadedIndex li;
        li.disk = std::make_unique<DiskImage>(prefix + ".disk");
        auto [cb, codes] = read_pq(prefix + ".pq");
        li.codebook = std::move(cb);
        li.codes = std::move(codes);
        if (li.codes.count != li.disk->header().count)
            fail(ErrorKind::format, prefix + ": PQ code count does not match disk index");
        if (li.codebook.dim != li.disk->header().dim) fail(ErrorKind::format, prefix + ": PQ dim does not match disk index");
        li.neighbors = build_neighbor_store(*li.disk, r_max);
        return li;
    }

    SearchIndex handles(const FilterStore& filter) const {
        return {&disk->header(), &codebook, &codes, &filter, &neighbors};
    }
};

struct IndexBuildConfig {
    BuildParams graph;
    PQTrainParams pq;
    uint32_t sector_size = 4096;
};

/// Builds graph + PQ for `ds` and writes `<prefix>.disk` and `<prefix>.pq`.
inline InMemGraph build_index_files(const VectorDataset& ds, const IndexBuildConfig& cfg, const std::string& prefix,
                                    bool progress = false) {
    InMemGraph g = build_vamana(ds, cfg.graph, progress);
    write_disk_index(g, ds, cfg.sector_size, prefix + ".disk");
    PQCodebook cb = train_pq(ds, cfg.pq);
    write_pq(prefix + ".pq", cb, encode_all(cb, ds));
    return g;
}

/// A generated dataset together with the index built over it.
struct SyntheticIndex {
    VectorDataset data;
    LoadedIndex index;
};

inline SyntheticIndex build_synthetic_index(uint64_t n, uint32_t dim, Dtype dtype, uint32_t clusters, uint64_t seed,
                                            const IndexBuildConfig& cfg, const std::string& prefix, uint32_t r_max,
                                            bool progress = false) {
    SyntheticIndex out{gen_vectors(n, dim, dtype, clusters, seed), {}};
    build_index_files(out.data, cfg, prefix, progress);
    out.index = LoadedIndex::open(prefix, r_max);
    return out;
}

// ---------------------------------------------------------------------------

struct SweepRow {
    Mode mode = Mode::gated;
    uint32_t L = 0;
    uint32_t W = 0;
    uint32_t R_max = 0;
    double selectivity = 0.0;
    double recall10 = 0.0;
    double mean_ios = 0.0;
    double mean_tunnels = 0.0;
    double mean_vlat_us = 0.0;
    double wall_qps = 0.0;  // hardware dependent

    // not emitted to CSV
    double mean_exact_dists = 0.0;
    double mean_hops = 0.0;
    uint64_t capped_queries = 0;
};

struct SweepConfig {
    std::vector<Mode> modes{Mode::pipe_post, Mode::gated};
    std::vector<uint32_t> Ls{20, 50, 100, 200};
    uint32_t W = 8;
    uint32_t K = 10;
    unsigned threads = 1;
};

/// Aggregates one batch into a sweep row. Recall is averaged over queries
/// whose ground truth is non-empty.
inline SweepRow summarize(const BatchResult& batch, const GroundTruth& gt, Mode mode, uint32_t L, uint32_t W,
                          uint32_t r_max, double selectivity, uint32_t k) {
    SweepRow row;
    row.mode = mode;
    row.L = L;
    row.W = W;
    row.R_max = r_max;
    row.selectivity = selectivity;
    const double q = static_cast<double>(batch.queries.size());
    double recall_sum = 0.0;
    size_t recall_n = 0;
    for (size_t i = 0; i < batch.queries.size(); ++i) {
        if (gt.ids[i].empty()) continue;
        recall_sum += recall_at_k(batch.queries[i].ids(), gt.ids[i], k);
        ++recall_n;
    }
    row.recall10 = recall_n ? recall_sum / static_cast<double>(recall_n) : 0.0;
    row.mean_ios = static_cast<double>(batch.total.ios) / q;
    row.mean_tunnels = static_cast<double>(batch.total.tunnels) / q;
    row.mean_vlat_us = static_cast<double>(batch.total.virtual_latency_us) / q;
    row.wall_qps = batch.wall_seconds > 0 ? q / batch.wall_seconds : 0.0;
    row.mean_exact_dists = static_cast<double>(batch.total.exact_dists) / q;
    row.mean_hops = static_cast<double>(batch.total.hops) / q;
    row.capped_queries = batch.total.capped;
    return row;
}

/// One row per (mode, L), modes outermost, in configuration order. Every
/// mode sees the same queries, predicates, and ground truth.
inline std::vector<SweepRow> run_sweep(const SweepConfig& cfg, const SearchIndex& index, StorageBackend& backend,
                                       const VectorDataset& queries, std::span<const Predicate> preds,
                                       const GroundTruth& gt, double selectivity) {
    require(gt.ids.size() == queries.count(), "ground truth does not match query count");
    require(preds.size() == queries.count(), "predicates do not match query count");
    const uint32_t r_max = index.neighbors ? index.neighbors->r_max() : 0;
    std::vector<SweepRow> rows;
    for (Mode mode : cfg.modes) {
        for (uint32_t L : cfg.Ls) {
            SearchParams p{L, std::min(cfg.K, L), cfg.W, mode};
            BatchResult batch = batch_search(index, backend, queries, preds, p, cfg.threads);
            rows.push_back(summarize(batch, gt, mode, L, cfg.W, r_max, selectivity, cfg.K));
            if (rows.back().capped_queries)
                std::clog << "[bench] " << to_string(mode) << " L=" << L << ": " << rows.back().capped_queries
                          << " queries hit the expansion cap\n";
        }
    }
    return rows;
}

struct IoReduction {
    double selectivity = 0.0;
    uint32_t L = 0;
    double pipe_post_ios = 0.0;
    double gated_ios = 0.0;
    double ratio = 0.0;     // pipe-post / gated
    double expected = 0.0;  // 1 / s
};

/// Pairs pipe-post and gated rows with equal (selectivity, L).
inline std::vector<IoReduction> io_reduction_report(const std::vector<SweepRow>& rows) {
    std::vector<IoReduction> out;
    for (const auto& base : rows) {
        if (base.mode != Mode::pipe_post) continue;
        for (const auto& g : rows) {
            if (g.mode != Mode::gated || g.L != base.L || g.selectivity != base.selectivity) continue;
            IoReduction r;
            r.selectivity = base.selectivity;
            r.L = base.L;
            r.pipe_post_ios = base.mean_ios;
            r.gated_ios = g.mean_ios;
            r.ratio = g.mean_ios > 0 ? base.mean_ios / g.mean_ios : 0.0;
            r.expected = base.selectivity > 0 ? 1.0 / base.selectivity : 0.0;
            out.push_back(r);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV: mode,L,W,Rmax,selectivity,recall10,mean_ios,mean_tunnels,mean_vlat_us,wall_qps

inline constexpr const char* kCsvHeader = "mode,L,W,Rmax,selectivity,recall10,mean_ios,mean_tunnels,mean_vlat_us,wall_qps";

namespace detail {

template <typename T>
std::string format_number(T v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view s) {
    T v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        fail(ErrorKind::format, "bad CSV number: " + std::string(s));
    return v;
}

}  // namespace detail

/// Shortest round-trip decimal representation; independent of the C locale.
inline void emit_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        out << to_string(r.mode) << ',' << r.L << ',' << r.W << ',' << r.R_max << ',' << detail::format_number(r.selectivity)
            << ',' << detail::format_number(r.recall10) << ',' << detail::format_number(r.mean_ios) << ','
            << detail::format_number(r.mean_tunnels) << ',' << detail::format_number(r.mean_vlat_us) << ','
            << detail::format_number(r.wall_qps) << '\n';
    }
}

inline void emit_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open for writing: " + path);
    emit_csv(rows, out);
    if (!out) fail(ErrorKind::io, "write failed: " + path);
}

inline std::vector<SweepRow> parse_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) fail(ErrorKind::format, "CSV header mismatch");
    std::vector<SweepRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string_view> f;
        std::string_view rest = line;
        for (;;) {
            const auto comma = rest.find(',');
            f.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (f.size() != 10) fail(ErrorKind::format, "CSV row has " + std::to_string(f.size()) + " fields");
        SweepRow r;
        r.mode = parse_mode(f[0]);
        r.L = detail::parse_number<uint32_t>(f[1]);
        r.W = detail::parse_number<uint32_t>(f[2]);
        r.R_max = detail::parse_number<uint32_t>(f[3]);
        r.selectivity = detail::parse_number<double>(f[4]);
        r.recall10 = detail::parse_number<double>(f[5]);
        r.mean_ios = detail::parse_number<double>(f[6]);
        r.mean_tunnels = detail::parse_number<double>(f[7]);
        r.mean_vlat_us = detail::parse_number<double>(f[8]);
        r.wall_qps = detail::parse_number<double>(f[9]);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace gdann
