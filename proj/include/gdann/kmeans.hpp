#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "gdann/error.hpp"
#include "gdann/rng.hpp"

namespace gdann {

struct KMeansResult {
    uint32_t k = 0;
    uint32_t dim = 0;
    std::vector<float> centroids;        // k x dim
    std::vector<uint32_t> assignment;    // per input row
    std::vector<double> inertia_history; // sum of squared errors after each assignment step

    std::span<const float> centroid(uint32_t c) const { return {centroids.data() + size_t{c} * dim, dim}; }
};

namespace detail {

inline float sq_dist(const float* a, const float* b, uint32_t dim) {
    float acc = 0.0f;
    for (uint32_t i = 0; i < dim; ++i) {
        const float d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

/// Nearest centroid, ties to the lowest index.
inline uint32_t nearest_centroid(const float* x, const float* centroids, uint32_t k, uint32_t dim, float* best_dist) {
    uint32_t best = 0;
    float bd = std::numeric_limits<float>::infinity();
    for (uint32_t c = 0; c < k; ++c) {
        const float d = sq_dist(x, centroids + size_t{c} * dim, dim);
        if (d < bd) {
            bd = d;
            best = c;
        }
    }
    if (best_dist) *best_dist = bd;
    return best;
}

}  // namespace detail

/// Seeded k-means++ initialisation followed by Lloyd iterations over `n`
/// rows of `dim` floats. Empty clusters are reseeded with the point of the
/// largest cluster that lies farthest from its centroid. With `n < k` the
/// extra centroid slots duplicate existing points.
inline KMeansResult kmeans(std::span<const float> data, uint32_t dim, uint32_t k, uint32_t iters, Rng& rng) {
    require(dim >= 1, "kmeans: dim must be >= 1");
    require(k >= 1, "kmeans: k must be >= 1");
    const size_t n = data.size() / dim;
    require(n >= 1 && n * dim == data.size(), "kmeans: data size must be a positive multiple of dim");

    KMeansResult res;
    res.k = k;
    res.dim = dim;
    res.centroids.assign(size_t{k} * dim, 0.0f);
    res.assignment.assign(n, 0);
    auto row = [&](size_t i) { return data.data() + i * dim; };
    auto cen = [&](uint32_t c) { return res.centroids.data() + size_t{c} * dim; };

    // k-means++ seeding
    const uint32_t distinct_k = static_cast<uint32_t>(std::min<size_t>(k, n));
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    size_t first = rng.uniform(n);
    std::copy_n(row(first), dim, cen(0));
    for (uint32_t c = 1; c < distinct_k; ++c) {
        double total = 0.0;
        const float* prev = cen(c - 1);
        for (size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], static_cast<double>(detail::sq_dist(row(i), prev, dim)));
            total += d2[i];
        }
        size_t pick = 0;
        if (total <= 0.0) {
            pick = rng.uniform(n);
        } else {
            double target = rng.uniform01() * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                target -= d2[pick];
                if (target < 0.0) break;
            }
        }
        std::copy_n(row(pick), dim, cen(c));
    }
    for (uint32_t c = distinct_k; c < k; ++c) std::copy_n(cen(c % distinct_k), dim, cen(c));

    std::vector<float> point_dist(n);
    std::vector<double> sums(size_t{k} * dim);
    std::vector<uint64_t> counts(k);
    for (uint32_t it = 0; it < std::max<uint32_t>(iters, 1); ++it) {
        double inertia = 0.0;
        for (size_t i = 0; i < n; ++i) {
            res.assignment[i] = detail::nearest_centroid(row(i), res.centroids.data(), k, dim, &point_dist[i]);
            inertia += point_dist[i];
        }
        res.inertia_history.push_back(inertia);
        if (it + 1 >= iters) break;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (size_t i = 0; i < n; ++i) {
            const uint32_t c = res.assignment[i];
            ++counts[c];
            const float* x = row(i);
            double* s = sums.data() + size_t{c} * dim;
            for (uint32_t j = 0; j < dim; ++j) s[j] += x[j];
        }
        for (uint32_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (uint32_t j = 0; j < dim; ++j)
                cen(c)[j] = static_cast<float>(sums[size_t{c} * dim + j] / static_cast<double>(counts[c]));
        }
        if (n < k) continue;  // duplicated slots stay empty by construction
        for (uint32_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            const uint32_t largest =
                static_cast<uint32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
            if (counts[largest] < 2) break;
            size_t far = n;
            float far_d = -1.0f;
            for (size_t i = 0; i < n; ++i) {
                if (res.assignment[i] != largest) continue;
                if (point_dist[i] > far_d) {
                    far_d = point_dist[i];
                    far = i;
                }
            }
            std::copy_n(row(far), dim, cen(c));
            res.assignment[far] = c;
            point_dist[far] = 0.0f;
            --counts[largest];
            counts[c] = 1;
        }
    }
    return res;
}

}  // namespace gdann
