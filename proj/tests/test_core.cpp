#include "test_util.hpp"

#include <set>

using namespace gdann;

namespace {

VectorDataset u8_pair(std::vector<uint8_t> a, std::vector<uint8_t> b) {
    const auto dim = static_cast<uint32_t>(a.size());
    a.insert(a.end(), b.begin(), b.end());
    return VectorDataset::from_u8(dim, a);
}

}  // namespace

TEST(L2, IdentityIsZero) {
    auto ds = u8_pair({0, 0}, {0, 0});
    EXPECT_EQ(l2_sq(ds.row(0), ds.row(1)), 0.0);
}

TEST(L2, ThreeFourFive) {
    auto ds = u8_pair({1, 2}, {4, 6});
    EXPECT_EQ(l2_sq(ds.row(0), ds.row(1)), 25.0);
    std::vector<float> f{1, 2, 4, 6};
    auto fs = VectorDataset::from_f32(2, f);
    EXPECT_EQ(l2_sq(fs.row(0), fs.row(1)), 25.0);
}

TEST(L2, MatchesNaiveLoopOnRandomU8) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<uint8_t> v(256);
        for (auto& x : v) x = static_cast<uint8_t>(rng.uniform(256));
        auto ds = VectorDataset::from_u8(128, v);
        double naive = 0.0;
        for (int j = 0; j < 128; ++j) {
            const double d = static_cast<double>(v[j]) - static_cast<double>(v[128 + j]);
            naive += d * d;
        }
        ASSERT_EQ(l2_sq(ds.row(0), ds.row(1)), naive);
    }
}

TEST(L2, MismatchThrows) {
    auto a = VectorDataset::from_u8(2, std::vector<uint8_t>{1, 2});
    auto b = VectorDataset::from_u8(3, std::vector<uint8_t>{1, 2, 3});
    EXPECT_THROW(l2_sq(a.row(0), b.row(0)), Error);
    auto f = VectorDataset::from_f32(2, std::vector<float>{1, 2});
    EXPECT_THROW(l2_sq(a.row(0), f.row(0)), Error);
}

TEST(L2, SelfZeroAndSymmetric) {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<float> v(2 * 24);
        for (auto& x : v) x = static_cast<float>(rng.normal() * 10);
        auto ds = VectorDataset::from_f32(24, v);
        EXPECT_EQ(l2_sq(ds.row(0), ds.row(0)), 0.0);
        EXPECT_EQ(l2_sq(ds.row(0), ds.row(1)), l2_sq(ds.row(1), ds.row(0)));
        EXPECT_GE(l2_sq(ds.row(0), ds.row(1)), 0.0);
    }
}

TEST(Dataset, RejectsBadShape) {
    EXPECT_THROW(VectorDataset(Dtype::u8, 0, 1, {}), Error);
    EXPECT_THROW(VectorDataset(Dtype::u8, 2, 0, {}), Error);
    EXPECT_THROW(VectorDataset(Dtype::f32, 2, 1, std::vector<std::byte>(7)), Error);
    EXPECT_NO_THROW(VectorDataset(Dtype::f32, 2, 1, std::vector<std::byte>(8)));
}

TEST(Evaluate, Examples) {
    EXPECT_TRUE(evaluate(Equality{3}, SingleLabel{3}));
    EXPECT_FALSE(evaluate(Equality{3}, SingleLabel{4}));
    EXPECT_TRUE(evaluate(RangeBin{5}, BinLabel{5}));
    const std::vector<uint32_t> node{2, 7, 9};
    EXPECT_TRUE(evaluate(make_subset({7}), TagSet{node}));
    EXPECT_FALSE(evaluate(make_subset({2, 8}), TagSet{node}));
}

TEST(Evaluate, KindMismatchThrows) {
    const std::vector<uint32_t> node{1};
    EXPECT_THROW(evaluate(Equality{1}, BinLabel{1}), Error);
    EXPECT_THROW(evaluate(RangeBin{1}, TagSet{node}), Error);
    EXPECT_THROW(evaluate(make_subset({1}), SingleLabel{1}), Error);
}

TEST(Evaluate, IsPure) {
    const std::vector<uint32_t> node{1, 4, 9, 16};
    const Predicate p = make_subset({4, 16});
    const bool first = evaluate(p, TagSet{node});
    for (int i = 0; i < 100; ++i) EXPECT_EQ(evaluate(p, TagSet{node}), first);
}

TEST(Evaluate, SubsetAgreesWithSetInclusionOracle) {
    Rng rng(2024);
    for (int trial = 0; trial < 10000; ++trial) {
        std::set<uint32_t> q, t;
        const auto nq = 1 + rng.uniform(4), nt = rng.uniform(8);
        while (q.size() < nq) q.insert(static_cast<uint32_t>(rng.uniform(12)));
        while (t.size() < nt) t.insert(static_cast<uint32_t>(rng.uniform(12)));
        const bool oracle = std::includes(t.begin(), t.end(), q.begin(), q.end());
        const std::vector<uint32_t> tv(t.begin(), t.end());
        ASSERT_EQ(evaluate(make_subset({q.begin(), q.end()}), TagSet{tv}), oracle);
    }
}

TEST(Predicate, SubsetValidation) {
    EXPECT_THROW(make_subset({}), Error);
    EXPECT_THROW(validate(Subset{{3, 3}}), Error);
    EXPECT_THROW(validate(Subset{{4, 3}}), Error);
    EXPECT_EQ(std::get<Subset>(make_subset({9, 2, 9})).tags, (std::vector<uint32_t>{2, 9}));
    EXPECT_EQ(describe(make_subset({1, 5})), "tags>={1,5}");
    EXPECT_EQ(describe(Equality{3}), "label=3");
}

TEST(Recall, Examples) {
    std::vector<NodeId> truth{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    EXPECT_DOUBLE_EQ(recall_at_k(truth, truth, 10), 1.0);
    std::vector<NodeId> disjoint{10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
    EXPECT_DOUBLE_EQ(recall_at_k(disjoint, truth, 10), 0.0);
    std::vector<NodeId> seven{0, 1, 2, 3, 4, 5, 6, 97, 98, 99};
    EXPECT_DOUBLE_EQ(recall_at_k(seven, truth, 10), 0.7);
}

TEST(Recall, ShortTruthUsesItsSize) {
    std::vector<NodeId> truth{4, 8};
    std::vector<NodeId> result{8, 4};
    EXPECT_DOUBLE_EQ(recall_at_k(result, truth, 10), 1.0);
    EXPECT_DOUBLE_EQ(recall_at_k(result, std::vector<NodeId>{}, 10), 0.0);
    // only the first k results count
    EXPECT_DOUBLE_EQ(recall_at_k(std::vector<NodeId>{1, 4}, truth, 1), 0.0);
}

TEST(SearchParams, Validation) {
    EXPECT_NO_THROW((SearchParams{10, 10, 1, Mode::gated}.validate()));
    EXPECT_THROW((SearchParams{5, 10, 1, Mode::gated}.validate()), Error);
    EXPECT_THROW((SearchParams{10, 0, 1, Mode::gated}.validate()), Error);
    EXPECT_THROW((SearchParams{10, 10, 0, Mode::gated}.validate()), Error);
}

TEST(Mode, NamesRoundTrip) {
    for (Mode m : kAllModes) EXPECT_EQ(parse_mode(to_string(m)), m);
    EXPECT_THROW(parse_mode("post"), Error);
}

TEST(VectorFile, RoundTripAndLayout) {
    tu::TempDir dir;
    auto ds = gen_vectors(37, 5, Dtype::f32, 2, 1);
    write_vectors(dir.file("v.bin"), ds);
    EXPECT_EQ(read_vectors(dir.file("v.bin")), ds);

    const auto bytes = tu::slurp(dir.file("v.bin"));
    ASSERT_EQ(bytes.size(), 8u + 4 + 4 + 8 + 37 * 5 * 4);
    EXPECT_EQ(std::string(bytes.data(), 8), "GANNVEC1");
    uint32_t dtype = 0, dim = 0;
    uint64_t count = 0;
    std::memcpy(&dtype, bytes.data() + 8, 4);
    std::memcpy(&dim, bytes.data() + 12, 4);
    std::memcpy(&count, bytes.data() + 16, 8);
    EXPECT_EQ(dtype, 1u);
    EXPECT_EQ(dim, 5u);
    EXPECT_EQ(count, 37u);
}

TEST(VectorFile, MalformedInputs) {
    tu::TempDir dir;
    {
        std::ofstream(dir.file("bad")) << "NOTAVEC1xxxxxxxxxxxxxxxx";
    }
    try {
        read_vectors(dir.file("bad"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::format);
    }
    auto ds = gen_vectors(4, 3, Dtype::u8, 1, 1);
    write_vectors(dir.file("v"), ds);
    std::filesystem::resize_file(dir.file("v"), std::filesystem::file_size(dir.file("v")) - 1);
    EXPECT_THROW(read_vectors(dir.file("v")), Error);
    EXPECT_THROW(read_vectors(dir.file("missing")), Error);
}
