#include "test_util.hpp"

using namespace gdann;

namespace {

/// Codebook with hand-set centroids; chunk m, centroid c, coordinate j -> f(m, c, j).
template <typename F>
PQCodebook manual_codebook(uint32_t dim, uint32_t chunks, F f) {
    PQCodebook cb;
    cb.dim = dim;
    cb.chunks = chunks;
    cb.dtype = Dtype::f32;
    cb.subdims = chunk_partition(dim, chunks);
    for (uint32_t m = 0; m < chunks; ++m)
        for (uint32_t c = 0; c < kPqCentroids; ++c)
            for (uint32_t j = 0; j < cb.subdims[m]; ++j) cb.centroids.push_back(f(m, c, j));
    cb.finalize_layout();
    return cb;
}

VectorDataset random_f32(uint64_t n, uint32_t dim, uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(n * dim);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return VectorDataset::from_f32(dim, v);
}

}  // namespace

TEST(ChunkPartition, RemainderGoesToLeadingChunks) {
    EXPECT_EQ(chunk_partition(10, 4), (std::vector<uint32_t>{3, 3, 2, 2}));
    EXPECT_EQ(chunk_partition(32, 32), std::vector<uint32_t>(32, 1));
    EXPECT_EQ(chunk_partition(128, 32), std::vector<uint32_t>(32, 4));
    EXPECT_THROW(chunk_partition(3, 4), Error);
    EXPECT_THROW(chunk_partition(3, 0), Error);
}

TEST(Train, ExactCoverGivesZeroError) {
    // every 2-dim chunk takes one of 256 distinct values
    const uint32_t dim = 8, chunks = 4;
    std::vector<float> v;
    Rng rng(5);
    const uint64_t n = 4096;
    for (uint64_t i = 0; i < n; ++i)
        for (uint32_t j = 0; j < dim; ++j) {
            const auto level = static_cast<float>((i + 37 * (j / 2)) % 256);
            v.push_back(j % 2 == 0 ? level : 1000.0f - 3.0f * level);
        }
    auto ds = VectorDataset::from_f32(dim, v);
    PQTrainParams p{chunks, 20, 65536, 3};
    const PQCodebook cb = train_pq(ds, p);
    EXPECT_EQ(quantization_error(cb, ds), 0.0);
}

TEST(Train, DeterministicBytes) {
    tu::TempDir dir;
    auto ds = gen_vectors(1500, 16, Dtype::u8, 4, 9);
    PQTrainParams p{4, 6, 1000, 42};
    const PQCodebook a = train_pq(ds, p), b = train_pq(ds, p);
    write_pq(dir.file("a"), a, encode_all(a, ds));
    write_pq(dir.file("b"), b, encode_all(b, ds));
    EXPECT_EQ(tu::slurp(dir.file("a")), tu::slurp(dir.file("b")));
    p.seed = 43;
    EXPECT_FALSE(train_pq(ds, p) == a);
}

TEST(Train, BeatsRandomCentroidInit) {
    auto ds = random_f32(1000, 16, 17);
    const PQCodebook trained = train_pq(ds, {4, 12, 1000, 1});
    // oracle: 256 uniformly drawn data rows per chunk, no optimisation
    Rng rng(99);
    const auto picks = rng.sample_without_replacement(ds.count(), kPqCentroids);
    PQCodebook random_init = manual_codebook(16, 4, [&](uint32_t m, uint32_t c, uint32_t j) {
        return ds.row(picks[c]).at(m * 4 + j);
    });
    EXPECT_LE(quantization_error(trained, ds), quantization_error(random_init, ds));
}

TEST(Train, FewerVectorsThanCentroids) {
    auto ds = random_f32(40, 4, 1);
    const PQCodebook cb = train_pq(ds, {2, 5, 65536, 1});
    EXPECT_EQ(cb.trained_k, 40u);
    // every training vector is then reproduced exactly
    EXPECT_NEAR(quantization_error(cb, ds), 0.0, 1e-9);
}

TEST(Train, RejectsDimBelowChunks) {
    auto ds = random_f32(300, 4, 1);
    EXPECT_THROW(train_pq(ds, {8, 5, 65536, 1}), Error);
}

TEST(KMeans, InertiaNonIncreasing) {
    auto ds = random_f32(3000, 4, 8);
    std::vector<float> data(ds.count() * 4);
    for (uint64_t i = 0; i < ds.count(); ++i)
        for (uint32_t j = 0; j < 4; ++j) data[i * 4 + j] = ds.row(i).at(j);
    Rng rng(1);
    const KMeansResult km = kmeans(data, 4, 64, 25, rng);
    ASSERT_EQ(km.inertia_history.size(), 25u);
    for (size_t i = 1; i < km.inertia_history.size(); ++i)
        EXPECT_LE(km.inertia_history[i], km.inertia_history[i - 1] * (1 + 1e-6)) << "iteration " << i;
}

TEST(KMeans, ReseedsEmptyClusters) {
    // 300 copies of 3 points: k-means++ can seed only 3 distinct centres, the
    // rest start as duplicates and must be reseeded or stay empty cleanly
    std::vector<float> data;
    for (int i = 0; i < 300; ++i) data.push_back(static_cast<float>(i % 3) * 10.0f + static_cast<float>(i) * 1e-3f);
    Rng rng(2);
    const KMeansResult km = kmeans(data, 1, 16, 10, rng);
    std::vector<uint32_t> used(16, 0);
    for (uint32_t a : km.assignment) ++used[a];
    EXPECT_EQ(std::count(used.begin(), used.end(), 0u), 0);
}

TEST(Encode, CentroidMapsToItsIndex) {
    const PQCodebook cb = manual_codebook(6, 3, [](uint32_t m, uint32_t c, uint32_t j) {
        return static_cast<float>(c * 10 + m + j);
    });
    std::vector<float> v;
    for (uint32_t m = 0; m < 3; ++m)
        for (uint32_t j = 0; j < 2; ++j) v.push_back(static_cast<float>(77 * 10 + m + j));
    auto ds = VectorDataset::from_f32(6, v);
    EXPECT_EQ(encode(cb, ds.row(0)), (std::vector<uint8_t>{77, 77, 77}));
}

TEST(Encode, TiesGoToLowestIndex) {
    // centroids 3 and 9 coincide at 5.0, everything else far away
    const PQCodebook cb = manual_codebook(1, 1, [](uint32_t, uint32_t c, uint32_t) {
        return c == 3 || c == 9 ? 5.0f : 1000.0f + static_cast<float>(c);
    });
    auto ds = VectorDataset::from_f32(1, std::vector<float>{5.0f});
    EXPECT_EQ(encode(cb, ds.row(0))[0], 3);
}

TEST(Encode, MatchesBruteForceArgmin) {
    auto ds = random_f32(600, 12, 4);
    const PQCodebook cb = train_pq(ds, {3, 4, 600, 1});
    auto qs = random_f32(200, 12, 5);
    for (uint64_t i = 0; i < qs.count(); ++i) {
        const auto code = encode(cb, qs.row(i));
        for (uint32_t m = 0; m < cb.chunks; ++m) {
            uint32_t best = 0;
            double best_d = 1e300;
            for (uint32_t c = 0; c < kPqCentroids; ++c) {
                double d = 0;
                for (uint32_t j = 0; j < cb.subdims[m]; ++j) {
                    const double diff = qs.row(i).at(cb.offsets[m] + j) - cb.centroid(m, c)[j];
                    d += diff * diff;
                }
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            ASSERT_EQ(code[m], best);
        }
    }
}

TEST(Encode, DimensionMismatchThrows) {
    const PQCodebook cb = manual_codebook(4, 2, [](uint32_t, uint32_t c, uint32_t) { return static_cast<float>(c); });
    auto ds = VectorDataset::from_f32(3, std::vector<float>{1, 2, 3});
    EXPECT_THROW(encode(cb, ds.row(0)), Error);
    EXPECT_THROW(build_lut(cb, ds.row(0)), Error);
}

TEST(Lut, ZeroAtQueryCentroid) {
    const PQCodebook cb = manual_codebook(4, 2, [](uint32_t m, uint32_t c, uint32_t j) {
        return static_cast<float>(c) * 0.5f + static_cast<float>(m * 7 + j);
    });
    std::vector<float> q;
    for (uint32_t m = 0; m < 2; ++m)
        for (uint32_t j = 0; j < 2; ++j) q.push_back(static_cast<float>(200) * 0.5f + static_cast<float>(m * 7 + j));
    auto ds = VectorDataset::from_f32(4, q);
    const QueryLUT lut = build_lut(cb, ds.row(0));
    ASSERT_EQ(lut.table.size(), 2u * kPqCentroids);
    EXPECT_EQ(lut.at(0, 200), 0.0f);
    EXPECT_EQ(lut.at(1, 200), 0.0f);
}

TEST(Lut, MatchesDirectRecomputationAndShape) {
    auto ds = gen_vectors(800, 10, Dtype::u8, 4, 2);
    const PQCodebook cb = train_pq(ds, {4, 4, 800, 1});
    for (uint64_t qi : {0ull, 17ull, 799ull}) {
        const QueryLUT lut = build_lut(cb, ds.row(qi));
        ASSERT_EQ(lut.table.size(), size_t{cb.chunks} * 256);
        for (uint32_t m = 0; m < cb.chunks; ++m)
            for (uint32_t c = 0; c < kPqCentroids; ++c) {
                double d = 0;
                for (uint32_t j = 0; j < cb.subdims[m]; ++j) {
                    const double diff = ds.row(qi).at(cb.offsets[m] + j) - cb.centroid(m, c)[j];
                    d += diff * diff;
                }
                ASSERT_NEAR(lut.at(m, c), d, 1e-3 * std::max(1.0, d));
            }
    }
}

TEST(Adc, Examples) {
    QueryLUT zero{3, std::vector<float>(3 * 256, 0.0f)};
    EXPECT_EQ(adc(zero, std::vector<uint8_t>{1, 2, 3}), 0.0f);

    QueryLUT two{2, std::vector<float>(2 * 256, 9.0f)};
    two.table[0 * 256 + 4] = 1.5f;
    two.table[1 * 256 + 200] = 2.5f;
    EXPECT_EQ(adc(two, std::vector<uint8_t>{4, 200}), 4.0f);
    EXPECT_THROW(adc(two, std::vector<uint8_t>{4}), Error);
}

TEST(Adc, MatchesScalarLoop) {
    Rng rng(12);
    QueryLUT lut{16, std::vector<float>(16 * 256)};
    for (auto& x : lut.table) x = static_cast<float>(rng.uniform01() * 100);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<uint8_t> code(16);
        for (auto& c : code) c = static_cast<uint8_t>(rng.uniform(256));
        double scalar = 0;
        for (uint32_t m = 0; m < 16; ++m) scalar += lut.table[m * 256 + code[m]];
        ASSERT_NEAR(adc(lut, code), scalar, 1e-4 * scalar);
    }
}

TEST(Adc, EqualsDistanceToReconstruction) {
    auto ds = random_f32(2000, 24, 21);
    const PQCodebook cb = train_pq(ds, {6, 8, 2000, 3});
    auto qs = random_f32(50, 24, 22);
    for (uint64_t qi = 0; qi < qs.count(); ++qi) {
        const QueryLUT lut = build_lut(cb, qs.row(qi));
        for (uint64_t i = 0; i < 100; ++i) {
            const auto code = encode(cb, ds.row(i));
            const auto rec = reconstruct(cb, code);
            const auto recds = VectorDataset::from_f32(24, rec);
            const double direct = l2_sq(qs.row(qi), recds.row(0));
            ASSERT_NEAR(adc(lut, code), direct, 1e-4 * direct);
        }
    }
}

TEST(Codes, StorageIsNTimesM) {
    auto ds = gen_vectors(333, 8, Dtype::u8, 2, 1);
    const PQCodebook cb = train_pq(ds, {4, 2, 333, 1});
    const PQCodes codes = encode_all(cb, ds);
    EXPECT_EQ(codes.memory_bytes(), 333u * 4);
    EXPECT_EQ(codes.codes.size(), 333u * 4);
}

TEST(PqFile, RoundTripAndMalformed) {
    tu::TempDir dir;
    auto ds = gen_vectors(500, 10, Dtype::u8, 2, 1);
    const PQCodebook cb = train_pq(ds, {3, 3, 500, 1});
    const PQCodes codes = encode_all(cb, ds);
    write_pq(dir.file("pq"), cb, codes);
    auto [cb2, codes2] = read_pq(dir.file("pq"));
    EXPECT_TRUE(cb2 == cb);
    EXPECT_EQ(codes2, codes);

    const auto bytes = tu::slurp(dir.file("pq"));
    EXPECT_EQ(std::string(bytes.data(), 8), "GANNPQ01");
    const size_t expected = 8 + 12 + 3 * 4 + 256 * 10 * 4 + 8 + 500 * 3;
    EXPECT_EQ(bytes.size(), expected);

    std::filesystem::resize_file(dir.file("pq"), expected - 5);
    try {
        read_pq(dir.file("pq"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::format);
    }
}
