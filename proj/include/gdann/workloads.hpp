#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "gdann/binary_io.hpp"
#include "gdann/core.hpp"
#include "gdann/kmeans.hpp"
#include "gdann/rng.hpp"
#include "gdann/stores.hpp"

namespace gdann {

enum class LabelScheme { uniform, zipf, spatial, norm_bins, multilabel };

inline std::string_view to_string(LabelScheme s) {
    switch (s) {
        case LabelScheme::uniform: return "uniform";
        case LabelScheme::zipf: return "zipf";
        case LabelScheme::spatial: return "spatial";
        case LabelScheme::norm_bins: return "norm-bins";
        case LabelScheme::multilabel: return "multilabel";
    }
    return "?";
}

inline LabelScheme parse_label_scheme(std::string_view s) {
    for (auto v : {LabelScheme::uniform, LabelScheme::zipf, LabelScheme::spatial, LabelScheme::norm_bins,
                   LabelScheme::multilabel})
        if (to_string(v) == s) return v;
    fail(ErrorKind::invalid_argument, "unknown label scheme: " + std::string(s));
}

struct WorkloadSpec {
    LabelScheme scheme = LabelScheme::uniform;
    uint32_t classes = 10;         // uniform / zipf / spatial
    double alpha = 1.0;            // zipf exponent (labels or tag popularity)
    double alpha_mix = 1.0;        // spatial: probability of taking the nearest-center label
    uint32_t bins = 10;            // norm-bins
    uint32_t vocab = 1000;         // multilabel
    double mean_tags = 3.0;        // multilabel
    uint32_t tags_per_query = 1;   // multilabel: 1, 2, or 0 for a 50/50 mix
    uint64_t seed = 1;

    void validate() const {
        switch (scheme) {
            case LabelScheme::uniform:
            case LabelScheme::zipf:
            case LabelScheme::spatial:
                require(classes >= 1 && classes <= 256, "classes must be in [1, 256]");
                break;
            case LabelScheme::norm_bins: require(bins >= 1 && bins <= 256, "bins must be in [1, 256]"); break;
            case LabelScheme::multilabel:
                require(vocab >= 1, "vocab must be >= 1");
                require(mean_tags > 0.0, "mean_tags must be > 0");
                require(tags_per_query <= 2, "tags_per_query must be 0, 1, or 2");
                break;
        }
        require(alpha >= 0.0, "alpha must be >= 0");
        require(alpha_mix >= 0.0 && alpha_mix <= 1.0, "alpha_mix must be in [0, 1]");
    }
};

// ---------------------------------------------------------------------------
// vectors

/// Gaussian-mixture vectors: `clusters` centres drawn uniformly in a box,
/// isotropic noise around each. u8 values are rounded and clamped to [0, 255].
inline VectorDataset gen_vectors(uint64_t n, uint32_t dim, Dtype dtype, uint32_t clusters, uint64_t seed) {
    require(n >= 1 && dim >= 1, "gen_vectors: n and dim must be >= 1");
    require(clusters >= 1, "gen_vectors: clusters must be >= 1");
    Rng rng(seed);
    const double lo = dtype == Dtype::u8 ? 64.0 : -1.0;
    const double hi = dtype == Dtype::u8 ? 192.0 : 1.0;
    const double sigma = dtype == Dtype::u8 ? 16.0 : 0.125;
    std::vector<double> centers(size_t{clusters} * dim);
    for (double& c : centers) c = lo + (hi - lo) * rng.uniform01();

    VectorDataset ds = VectorDataset::zeros(dtype, dim, n);
    for (uint64_t i = 0; i < n; ++i) {
        const double* c = centers.data() + rng.uniform(clusters) * dim;
        auto row = ds.mutable_row(i);
        for (uint32_t j = 0; j < dim; ++j) {
            const double x = c[j] + sigma * rng.normal();
            if (dtype == Dtype::u8) {
                row[j] = static_cast<std::byte>(static_cast<uint8_t>(std::clamp(std::nearbyint(x), 0.0, 255.0)));
            } else {
                const float f = static_cast<float>(x);
                std::memcpy(row.data() + 4 * j, &f, 4);
            }
        }
    }
    return ds;
}

/// Held-out queries: a random dataset point plus Gaussian noise whose
/// expected norm is 5% of the mean pairwise distance (estimated on 1000
/// seeded pairs).
inline VectorDataset gen_query_vectors(const VectorDataset& ds, uint64_t q, uint64_t seed) {
    require(q >= 1, "query count must be >= 1");
    Rng rng(seed);
    double mean_dist = 0.0;
    const int pairs = 1000;
    for (int p = 0; p < pairs; ++p) {
        const uint64_t a = rng.uniform(ds.count()), b = rng.uniform(ds.count());
        mean_dist += std::sqrt(l2_sq(ds.row(a), ds.row(b)));
    }
    mean_dist /= pairs;
    const double sigma = 0.05 * mean_dist / std::sqrt(static_cast<double>(ds.dim()));

    VectorDataset out = VectorDataset::zeros(ds.dtype(), ds.dim(), q);
    for (uint64_t i = 0; i < q; ++i) {
        const VectorView base = ds.row(rng.uniform(ds.count()));
        auto row = out.mutable_row(i);
        for (uint32_t j = 0; j < ds.dim(); ++j) {
            const double x = base.at(j) + sigma * rng.normal();
            if (ds.dtype() == Dtype::u8) {
                row[j] = static_cast<std::byte>(static_cast<uint8_t>(std::clamp(std::nearbyint(x), 0.0, 255.0)));
            } else {
                const float f = static_cast<float>(x);
                std::memcpy(row.data() + 4 * j, &f, 4);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// labels

inline std::vector<uint8_t> gen_uniform_labels(uint64_t n, uint32_t k, uint64_t seed) {
    require(k >= 1 && k <= 256, "k must be in [1, 256]");
    Rng rng(seed);
    std::vector<uint8_t> labels(n);
    for (auto& l : labels) l = static_cast<uint8_t>(rng.uniform(k));
    return labels;
}

/// Class r (0-based) drawn with probability (r+1)^-alpha / H_k.
inline std::vector<uint8_t> gen_zipf_labels(uint64_t n, uint32_t k, double alpha, uint64_t seed) {
    require(k >= 1 && k <= 256, "k must be in [1, 256]");
    Rng rng(seed);
    const auto cdf = zipf_cdf(k, alpha);
    std::vector<uint8_t> labels(n);
    for (auto& l : labels) l = static_cast<uint8_t>(rng.sample_cdf(cdf));
    return labels;
}

struct SpatialLabels {
    std::vector<uint8_t> labels;
    KMeansResult clusters;
};

/// k-means (k clusters, 20 iterations) over the dataset; each node takes its
/// nearest-centre label with probability alpha_mix and a uniform label
/// otherwise. The uniform draws use the same stream as gen_uniform_labels.
inline SpatialLabels gen_spatial_labels(const VectorDataset& ds, uint32_t k, double alpha_mix, uint64_t seed) {
    require(k >= 1 && k <= 256, "k must be in [1, 256]");
    require(alpha_mix >= 0.0 && alpha_mix <= 1.0, "alpha_mix must be in [0, 1]");
    std::vector<float> data(ds.count() * ds.dim());
    for (uint64_t i = 0; i < ds.count(); ++i)
        for (uint32_t j = 0; j < ds.dim(); ++j) data[i * ds.dim() + j] = ds.row(i).at(j);
    Rng km_rng = Rng::derive(seed, 0x6b6d65616e73ULL);
    SpatialLabels out;
    out.clusters = kmeans(data, ds.dim(), k, 20, km_rng);
    // final assignment against the returned centres
    for (uint64_t i = 0; i < ds.count(); ++i)
        out.clusters.assignment[i] =
            detail::nearest_centroid(data.data() + i * ds.dim(), out.clusters.centroids.data(), k, ds.dim(), nullptr);

    out.labels = gen_uniform_labels(ds.count(), k, seed);
    Rng coin = Rng::derive(seed, 0x636f696eULL);
    for (uint64_t i = 0; i < ds.count(); ++i)
        if (coin.uniform01() < alpha_mix) out.labels[i] = static_cast<uint8_t>(out.clusters.assignment[i]);
    return out;
}

/// Equal-frequency bins over L2 norms: nodes ranked by (norm, id), rank r
/// goes to bin floor(r * b / N).
inline std::vector<uint8_t> gen_norm_bins(const VectorDataset& ds, uint32_t b) {
    require(b >= 1 && b <= 256, "bins must be in [1, 256]");
    const uint64_t n = ds.count();
    std::vector<double> norms(n);
    for (uint64_t i = 0; i < n; ++i) {
        double s = 0.0;
        const VectorView v = ds.row(i);
        for (uint32_t j = 0; j < ds.dim(); ++j) s += static_cast<double>(v.at(j)) * v.at(j);
        norms[i] = s;
    }
    std::vector<uint64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](uint64_t a, uint64_t c) { return norms[a] < norms[c] || (norms[a] == norms[c] && a < c); });
    std::vector<uint8_t> bins(n);
    for (uint64_t r = 0; r < n; ++r) bins[order[r]] = static_cast<uint8_t>(r * b / n);
    return bins;
}

/// Per node: tag count ~ Poisson(mean_tags) clipped to [1, vocab]; tags drawn
/// without replacement from a Zipf(vocab, alpha) popularity law (tag 0 is the
/// most popular). Rows are sorted.
inline TagRows gen_multilabel(uint64_t n, uint32_t vocab, double zipf_alpha, double mean_tags, uint64_t seed) {
    require(vocab >= 1, "vocab must be >= 1");
    require(mean_tags > 0.0, "mean_tags must be > 0");
    Rng rng(seed);
    const auto cdf = zipf_cdf(vocab, zipf_alpha);
    TagRows rows;
    rows.offsets.reserve(n + 1);
    std::vector<uint32_t> row;
    for (uint64_t i = 0; i < n; ++i) {
        const uint32_t count = std::clamp<uint32_t>(rng.poisson(mean_tags), 1, vocab);
        row.clear();
        while (row.size() < count) {
            const auto t = static_cast<uint32_t>(rng.sample_cdf(cdf));
            if (std::find(row.begin(), row.end(), t) == row.end()) row.push_back(t);
        }
        std::sort(row.begin(), row.end());
        rows.push_row(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// predicates

/// One predicate per query, drawn per scheme: a uniformly chosen class or bin,
/// or 1-2 tags taken from a random node's tag row (so at least one match).
inline std::vector<Predicate> gen_predicates(const WorkloadSpec& spec, const FilterStore& store, uint64_t q, uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    std::vector<Predicate> preds;
    preds.reserve(q);
    for (uint64_t i = 0; i < q; ++i) {
        switch (spec.scheme) {
            case LabelScheme::uniform:
            case LabelScheme::zipf:
            case LabelScheme::spatial:
                preds.push_back(Equality{static_cast<uint8_t>(rng.uniform(spec.classes))});
                break;
            case LabelScheme::norm_bins: preds.push_back(RangeBin{static_cast<uint8_t>(rng.uniform(spec.bins))}); break;
            case LabelScheme::multilabel: {
                require(store.kind() == LabelKind::multi_label, "multilabel predicates need a multi-label store");
                std::span<const uint32_t> row;
                do {
                    row = store.tags(static_cast<NodeId>(rng.uniform(store.size())));
                } while (row.empty());
                uint32_t want = spec.tags_per_query == 0 ? 1 + static_cast<uint32_t>(rng.uniform(2)) : spec.tags_per_query;
                want = std::min<uint32_t>(want, static_cast<uint32_t>(row.size()));
                auto picks = rng.sample_without_replacement(row.size(), want);
                std::vector<uint32_t> tags;
                for (auto p : picks) tags.push_back(row[p]);
                preds.push_back(make_subset(std::move(tags)));
                break;
            }
        }
    }
    return preds;
}

inline std::vector<double> predicate_selectivities(const FilterStore& store, std::span<const Predicate> preds) {
    std::vector<double> out;
    out.reserve(preds.size());
    for (const auto& p : preds) out.push_back(store.selectivity(p));
    return out;
}

/// Builds the filter store a workload spec describes over `ds`.
inline FilterStore gen_filter_store(const WorkloadSpec& spec, const VectorDataset& ds) {
    spec.validate();
    switch (spec.scheme) {
        case LabelScheme::uniform:
            return FilterStore::from_labels(gen_uniform_labels(ds.count(), spec.classes, spec.seed), static_cast<uint16_t>(spec.classes));
        case LabelScheme::zipf:
            return FilterStore::from_labels(gen_zipf_labels(ds.count(), spec.classes, spec.alpha, spec.seed),
                                            static_cast<uint16_t>(spec.classes));
        case LabelScheme::spatial:
            return FilterStore::from_labels(gen_spatial_labels(ds, spec.classes, spec.alpha_mix, spec.seed).labels,
                                            static_cast<uint16_t>(spec.classes));
        case LabelScheme::norm_bins:
            return FilterStore::from_labels(gen_norm_bins(ds, spec.bins), static_cast<uint16_t>(spec.bins), LabelKind::bin_label);
        case LabelScheme::multilabel:
            return FilterStore::from_tags(gen_multilabel(ds.count(), spec.vocab, spec.alpha, spec.mean_tags, spec.seed));
    }
    fail(ErrorKind::invalid_argument, "unknown label scheme");
}

// Predicate file: "GANNPRD1" | u64 Q | per query: u8 kind (0 eq, 1 bin, 2 subset) |
//                 kind 0/1: u32 value; kind 2: u32 count + u32 x count tags

inline constexpr Magic kPredicateMagic = make_magic("GANNPRD1");

inline void write_predicates(const std::string& path, std::span<const Predicate> preds) {
    BinaryWriter w(path);
    w.put_magic(kPredicateMagic);
    w.put<uint64_t>(preds.size());
    for (const auto& p : preds) {
        w.put<uint8_t>(static_cast<uint8_t>(p.index()));
        if (const auto* e = std::get_if<Equality>(&p)) w.put<uint32_t>(e->label);
        if (const auto* r = std::get_if<RangeBin>(&p)) w.put<uint32_t>(r->bin);
        if (const auto* s = std::get_if<Subset>(&p)) {
            w.put<uint32_t>(static_cast<uint32_t>(s->tags.size()));
            w.put_span(std::span<const uint32_t>(s->tags));
        }
    }
    w.close();
}

inline std::vector<Predicate> read_predicates(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(kPredicateMagic);
    const uint64_t q = r.get<uint64_t>();
    std::vector<Predicate> preds;
    for (uint64_t i = 0; i < q; ++i) {
        const uint8_t kind = r.get<uint8_t>();
        if (kind == 0 || kind == 1) {
            const uint32_t v = r.get<uint32_t>();
            if (v > 255) fail(ErrorKind::format, path + ": label value out of range");
            if (kind == 0)
                preds.push_back(Equality{static_cast<uint8_t>(v)});
            else
                preds.push_back(RangeBin{static_cast<uint8_t>(v)});
        } else if (kind == 2) {
            const uint32_t cnt = r.get<uint32_t>();
            if (uint64_t{cnt} * 4 > r.remaining()) fail(ErrorKind::format, path + ": truncated subset predicate");
            std::vector<uint32_t> tags(cnt);
            r.get_span(std::span<uint32_t>(tags));
            Predicate p = Subset{std::move(tags)};
            try {
                validate(p);
            } catch (const Error& e) {
                fail(ErrorKind::format, path + ": " + e.what());
            }
            preds.push_back(std::move(p));
        } else {
            fail(ErrorKind::format, path + ": unknown predicate kind");
        }
    }
    r.expect_eof();
    return preds;
}

// ---------------------------------------------------------------------------
// ground truth

struct GroundTruth {
    uint32_t k = 0;
    std::vector<std::vector<NodeId>> ids;
    std::vector<std::vector<float>> distances;

    bool operator==(const GroundTruth&) const = default;
};

/// Exact filtered top-K by exhaustive scan, ties broken by lower id.
inline GroundTruth ground_truth(const VectorDataset& ds, const FilterStore& store, const VectorDataset& queries,
                                std::span<const Predicate> preds, uint32_t k, unsigned threads = 1) {
    require(preds.size() == queries.count(), "queries and predicates are not aligned");
    require(k >= 1, "K must be >= 1");
    require(store.size() == ds.count(), "filter store size does not match dataset");
    GroundTruth gt;
    gt.k = k;
    gt.ids.resize(queries.count());
    gt.distances.resize(queries.count());
    std::atomic<uint64_t> next{0};
    auto worker = [&] {
        std::vector<std::pair<double, NodeId>> hits;
        for (;;) {
            const uint64_t qi = next.fetch_add(1);
            if (qi >= queries.count()) return;
            const FilterCheck passes(store, preds[qi]);
            const VectorView q = queries.row(qi);
            hits.clear();
            for (uint64_t i = 0; i < ds.count(); ++i)
                if (passes(static_cast<NodeId>(i))) hits.emplace_back(l2_sq(q, ds.row(i)), static_cast<NodeId>(i));
            const size_t take = std::min<size_t>(k, hits.size());
            std::partial_sort(hits.begin(), hits.begin() + static_cast<ptrdiff_t>(take), hits.end());
            for (size_t j = 0; j < take; ++j) {
                gt.ids[qi].push_back(hits[j].second);
                gt.distances[qi].push_back(static_cast<float>(hits[j].first));
            }
        }
    };
    threads = std::max(1u, threads);
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return gt;
}

// Ground-truth file: "GANNGT01" | u64 Q | u32 K | per query u32 x K ids + f32 x K distances.
// Queries with fewer than K matches are padded with id 0xFFFFFFFF and +inf.

inline constexpr Magic kGroundTruthMagic = make_magic("GANNGT01");
inline constexpr NodeId kNoNode = 0xFFFFFFFFu;

inline void write_ground_truth(const std::string& path, const GroundTruth& gt) {
    BinaryWriter w(path);
    w.put_magic(kGroundTruthMagic);
    w.put<uint64_t>(gt.ids.size());
    w.put<uint32_t>(gt.k);
    for (size_t q = 0; q < gt.ids.size(); ++q) {
        for (uint32_t j = 0; j < gt.k; ++j) w.put<uint32_t>(j < gt.ids[q].size() ? gt.ids[q][j] : kNoNode);
        for (uint32_t j = 0; j < gt.k; ++j)
            w.put<float>(j < gt.distances[q].size() ? gt.distances[q][j] : std::numeric_limits<float>::infinity());
    }
    w.close();
}

inline GroundTruth read_ground_truth(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(kGroundTruthMagic);
    const uint64_t q = r.get<uint64_t>();
    GroundTruth gt;
    gt.k = r.get<uint32_t>();
    if (q * gt.k * 8 != r.remaining()) fail(ErrorKind::format, path + ": ground truth payload size mismatch");
    gt.ids.resize(q);
    gt.distances.resize(q);
    std::vector<uint32_t> ids(gt.k);
    std::vector<float> dists(gt.k);
    for (uint64_t i = 0; i < q; ++i) {
        r.get_span(std::span<uint32_t>(ids));
        r.get_span(std::span<float>(dists));
        for (uint32_t j = 0; j < gt.k; ++j) {
            if (ids[j] == kNoNode) break;
            gt.ids[i].push_back(ids[j]);
            gt.distances[i].push_back(dists[j]);
        }
    }
    return gt;
}

}  // namespace gdann
