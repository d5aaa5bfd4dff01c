#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace gdann {

/// Seeded random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard; every distribution below is
/// implemented here rather than taken from <random>, so streams are
/// reproducible across standard libraries and portable to other languages.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    /// Derive an independent stream for a sub-task (e.g. one PQ chunk).
    static Rng derive(uint64_t seed, uint64_t stream) { return Rng(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))); }

    uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, bound), rejection-sampled (no modulo bias).
    uint64_t uniform(uint64_t bound) {
        if (bound <= 1) return 0;
        const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % bound);
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Poisson(mean) by Knuth's multiplication method; fine for small means.
    uint32_t poisson(double mean) {
        const double limit = std::exp(-mean);
        double p = 1.0;
        uint32_t k = 0;
        do {
            ++k;
            p *= uniform01();
        } while (p > limit);
        return k - 1;
    }

    /// Index drawn from a cumulative distribution (cdf.back() == 1).
    size_t sample_cdf(std::span<const double> cdf) {
        const double u = uniform01();
        size_t lo = 0, hi = cdf.size() - 1;
        while (lo < hi) {
            size_t mid = (lo + hi) / 2;
            if (u < cdf[mid])
                hi = mid;
            else
                lo = mid + 1;
        }
        return lo;
    }

    /// `count` distinct indices from [0, n), in selection order (partial Fisher-Yates).
    std::vector<uint64_t> sample_without_replacement(uint64_t n, uint64_t count) {
        std::vector<uint64_t> idx(n);
        for (uint64_t i = 0; i < n; ++i) idx[i] = i;
        if (count > n) count = n;
        for (uint64_t i = 0; i < count; ++i) {
            uint64_t j = i + uniform(n - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(count);
        return idx;
    }

private:
    static uint64_t mix(uint64_t z) {
        // splitmix64 finalizer
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Cumulative Zipf distribution over ranks 1..k: P(r) = r^-alpha / H.
inline std::vector<double> zipf_cdf(uint32_t k, double alpha) {
    std::vector<double> cdf(k);
    double h = 0.0;
    for (uint32_t r = 1; r <= k; ++r) h += std::pow(static_cast<double>(r), -alpha);
    double acc = 0.0;
    for (uint32_t r = 1; r <= k; ++r) {
        acc += std::pow(static_cast<double>(r), -alpha) / h;
        cdf[r - 1] = acc;
    }
    cdf.back() = 1.0;
    return cdf;
}

}  // namespace gdann
