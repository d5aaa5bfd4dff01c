#include "path_graph.hpp"
#include "test_util.hpp"

#include <set>

using namespace gdann;

namespace {

class SearchTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new tu::TempDir();
        idx_ = new tu::SmallIndex(*dir_, 3000, 16, 16, 11, 16);
        WorkloadSpec spec;
        spec.classes = 10;
        spec.seed = 3;
        store_ = new FilterStore(gen_filter_store(spec, idx_->data));
        queries_ = new VectorDataset(gen_query_vectors(idx_->data, 40, 5));
        preds_ = new std::vector<Predicate>(gen_predicates(spec, *store_, 40, 6));
    }
    static void TearDownTestSuite() {
        delete preds_;
        delete queries_;
        delete store_;
        delete idx_;
        delete dir_;
    }

    static SearchIndex index() { return idx_->index.handles(*store_); }

    static QueryResult run(const SearchIndex& si, uint64_t q, const Predicate& pred, SearchParams p) {
        SimBackend backend(*idx_->index.disk, 100);
        auto s = backend.open_session();
        return search(si, *s, queries_->row(q), pred, p);
    }

    static tu::TempDir* dir_;
    static tu::SmallIndex* idx_;
    static FilterStore* store_;
    static VectorDataset* queries_;
    static std::vector<Predicate>* preds_;
};

tu::TempDir* SearchTest::dir_ = nullptr;
tu::SmallIndex* SearchTest::idx_ = nullptr;
FilterStore* SearchTest::store_ = nullptr;
VectorDataset* SearchTest::queries_ = nullptr;
std::vector<Predicate>* SearchTest::preds_ = nullptr;

}  // namespace

TEST(Frontier, RandomInsertsKeepInvariants) {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto cap = static_cast<uint32_t>(1 + rng.uniform(30));
        Frontier f(cap);
        std::set<NodeId> used;
        std::vector<std::pair<float, NodeId>> kept;
        for (int i = 0; i < 200; ++i) {
            NodeId id;
            do id = static_cast<NodeId>(rng.uniform(100000));
            while (!used.insert(id).second);
            const float d = static_cast<float>(rng.uniform(50));  // many ties
            const bool should = f.size() < cap || d < f.entries().back().distance;
            ASSERT_EQ(f.insert(d, id), should);
            if (should) kept.emplace_back(d, id);
            ASSERT_NO_THROW(f.check_invariants());
        }
        std::sort(kept.begin(), kept.end());
        kept.resize(std::min<size_t>(kept.size(), cap));
        ASSERT_EQ(f.size(), kept.size());
        for (size_t i = 0; i < kept.size(); ++i) {
            ASSERT_EQ(f.at(i).distance, kept[i].first);
            ASSERT_EQ(f.at(i).node, kept[i].second);
        }
    }
}

TEST(Frontier, TunnelAdmissionUsesCurrentThreshold) {
    // L = 4 list [C .20, A .41 (visited), B .43, D .45]; expanding C offers
    // N1 .30, N2 .60, N3 .40, N4 .80 in that order.
    enum : NodeId { A = 1, B = 2, C = 3, D = 4, N1 = 11, N2 = 12, N3 = 13, N4 = 14 };
    Frontier f(4);
    f.insert(0.20f, C);
    f.insert(0.41f, A);
    f.insert(0.43f, B);
    f.insert(0.45f, D);
    f.mark(A, kVisited);
    f.mark(C, kVisited | kFilterFailing);
    EXPECT_TRUE(f.insert(0.30f, N1));
    EXPECT_FALSE(f.insert(0.60f, N2));
    EXPECT_TRUE(f.insert(0.40f, N3));
    EXPECT_FALSE(f.insert(0.80f, N4));
    std::vector<NodeId> order;
    for (const auto& e : f.entries()) order.push_back(e.node);
    EXPECT_EQ(order, (std::vector<NodeId>{C, N1, N3, A}));
    EXPECT_EQ(f.next_undispatched(), std::optional<size_t>(1));
}

TEST(Frontier, CursorRewindsOnBetterInsert) {
    Frontier f(5);
    f.insert(1.0f, 1);
    f.insert(2.0f, 2);
    f.at(0).flags |= kDispatched;
    EXPECT_EQ(f.next_undispatched(), std::optional<size_t>(1));
    f.at(1).flags |= kDispatched;
    EXPECT_EQ(f.next_undispatched(), std::nullopt);
    f.insert(0.5f, 3);
    EXPECT_EQ(f.next_undispatched(), std::optional<size_t>(0));
}

TEST_F(SearchTest, AlwaysTruePredicateMakesGatedEqualPipePost) {
    auto all = FilterStore::from_labels(std::vector<uint8_t>(3000, 0), 1);
    const SearchIndex si = idx_->index.handles(all);
    for (uint32_t W : {1u, 4u}) {
        for (uint64_t q = 0; q < queries_->count(); ++q) {
            const SearchParams base{40, 10, W, Mode::pipe_post};
            SearchParams gp = base;
            gp.mode = Mode::gated;
            const auto a = run(si, q, Equality{0}, base);
            const auto b = run(si, q, Equality{0}, gp);
            ASSERT_EQ(a.results, b.results);
            std::vector<NodeId> ra = a.reads, rb = b.reads;
            ASSERT_EQ(ra, rb);
            ASSERT_EQ(b.stats.tunnels, 0u);
        }
    }
}

TEST_F(SearchTest, GatedNeverReadsFailingNodes) {
    for (uint32_t L : {10u, 40u, 120u})
        for (uint32_t W : {1u, 8u})
            for (uint64_t q = 0; q < queries_->count(); ++q) {
                const auto r = run(index(), q, (*preds_)[q], SearchParams{L, 10, W, Mode::gated});
                for (NodeId n : r.reads) ASSERT_TRUE(store_->matches((*preds_)[q], n)) << "read failing node " << n;
            }
}

TEST_F(SearchTest, ResultsAreSoundInEveryMode) {
    for (Mode mode : kAllModes)
        for (uint64_t q = 0; q < queries_->count(); ++q) {
            const auto& pred = (*preds_)[q];
            const auto r = run(index(), q, pred, SearchParams{50, 10, 4, mode});
            ASSERT_LE(r.results.size(), 10u);
            std::set<NodeId> reads(r.reads.begin(), r.reads.end());
            std::set<NodeId> seen;
            for (size_t i = 0; i < r.results.size(); ++i) {
                const auto& nb = r.results[i];
                ASSERT_TRUE(store_->matches(pred, nb.id)) << to_string(mode);
                ASSERT_TRUE(reads.count(nb.id)) << to_string(mode) << ": result was never read";
                ASSERT_TRUE(seen.insert(nb.id).second);
                ASSERT_EQ(nb.distance, l2_sq(queries_->row(q), idx_->data.row(nb.id)));
                if (i) { ASSERT_LE(r.results[i - 1].distance, nb.distance); }
            }
        }
}

TEST_F(SearchTest, StatsAreConsistent) {
    for (Mode mode : kAllModes)
        for (uint32_t W : {1u, 3u, 8u})
            for (uint64_t q = 0; q < 10; ++q) {
                const auto r = run(index(), q, (*preds_)[q], SearchParams{60, 10, W, mode});
                const auto& st = r.stats;
                ASSERT_LE(st.max_in_flight, W);
                ASSERT_EQ(st.ios, st.ios_completed);
                ASSERT_EQ(st.ios, r.reads.size());
                ASSERT_EQ(st.hops, st.ios_completed + st.tunnels);
                if (mode != Mode::early_filter) { ASSERT_EQ(st.exact_dists, st.ios_completed); }
                if (mode != Mode::gated) { ASSERT_EQ(st.tunnels, 0u); }
                if (mode != Mode::naive_pre) { ASSERT_EQ(st.dropped, 0u); }
                ASSERT_EQ(std::set<NodeId>(r.reads.begin(), r.reads.end()).size(), r.reads.size());
            }
}

TEST_F(SearchTest, EarlyFilterReadsLikePipePostWithFewerExactDistances) {
    for (uint64_t q = 0; q < queries_->count(); ++q) {
        const auto& pred = (*preds_)[q];
        const auto a = run(index(), q, pred, SearchParams{50, 10, 4, Mode::pipe_post});
        const auto b = run(index(), q, pred, SearchParams{50, 10, 4, Mode::early_filter});
        ASSERT_EQ(a.reads, b.reads);
        ASSERT_EQ(a.results, b.results);
        uint64_t passing = 0;
        for (NodeId n : b.reads) passing += store_->matches(pred, n);
        ASSERT_EQ(b.stats.exact_dists, passing);
    }
}

TEST_F(SearchTest, IosGrowWithL) {
    double prev = 0.0;
    for (uint32_t L : {10u, 20u, 40u, 80u, 160u}) {
        uint64_t total = 0;
        for (uint64_t q = 0; q < queries_->count(); ++q)
            total += run(index(), q, (*preds_)[q], SearchParams{L, 10, 1, Mode::pipe_post}).stats.ios;
        EXPECT_GE(static_cast<double>(total), prev) << "L=" << L;
        prev = static_cast<double>(total);
    }
}

TEST_F(SearchTest, VirtualLatencyMatchesRoundTrips) {
    // with W = 1 every read is a full round trip on the simulated device
    for (uint64_t q = 0; q < 10; ++q) {
        const auto r = run(index(), q, (*preds_)[q], SearchParams{30, 10, 1, Mode::gated});
        EXPECT_EQ(r.stats.virtual_latency_us, 100 * r.stats.ios);
    }
}

TEST_F(SearchTest, BatchIsThreadCountInvariant) {
    SimBackend backend(*idx_->index.disk, 100);
    const SearchParams p{40, 10, 4, Mode::gated};
    const auto one = batch_search(index(), backend, *queries_, *preds_, p, 1);
    const auto four = batch_search(index(), backend, *queries_, *preds_, p, 4);
    QueryStats sum;
    for (size_t i = 0; i < one.queries.size(); ++i) {
        ASSERT_EQ(one.queries[i].results, four.queries[i].results);
        ASSERT_EQ(one.queries[i].reads, four.queries[i].reads);
        ASSERT_EQ(one.queries[i].stats.ios, four.queries[i].stats.ios);
        sum += one.queries[i].stats;
    }
    EXPECT_EQ(one.total.ios, sum.ios);
    EXPECT_EQ(one.total.tunnels, sum.tunnels);
    EXPECT_EQ(one.total.virtual_latency_us, sum.virtual_latency_us);
    EXPECT_EQ(one.total.ios, four.total.ios);
}

TEST_F(SearchTest, FileBackendGivesSameResultsAsSim) {
    FileBackend file(*idx_->index.disk, 2);
    const SearchParams p{40, 10, 1, Mode::gated};
    for (uint64_t q = 0; q < 10; ++q) {
        auto s = file.open_session();
        const auto a = search(index(), *s, queries_->row(q), (*preds_)[q], p);
        const auto b = run(index(), q, (*preds_)[q], p);
        ASSERT_EQ(a.results, b.results);
        ASSERT_EQ(a.reads, b.reads);
    }
}

TEST_F(SearchTest, RejectsMismatchedInputs) {
    auto small = FilterStore::from_labels(std::vector<uint8_t>(10, 0), 1);
    EXPECT_THROW(run(idx_->index.handles(small), 0, Equality{0}, SearchParams{10, 5, 1, Mode::gated}), Error);
    EXPECT_THROW(run(index(), 0, RangeBin{0}, SearchParams{10, 5, 1, Mode::gated}), Error);
    EXPECT_THROW(run(index(), 0, Equality{0}, SearchParams{4, 5, 1, Mode::gated}), Error);
    SearchIndex no_nbrs = index();
    no_nbrs.neighbors = nullptr;
    EXPECT_THROW(run(no_nbrs, 0, Equality{0}, SearchParams{10, 5, 1, Mode::gated}), Error);
    EXPECT_NO_THROW(run(no_nbrs, 0, Equality{0}, SearchParams{10, 5, 1, Mode::pipe_post}));
    auto other = gen_vectors(1, 8, Dtype::u8, 1, 1);
    SimBackend backend(*idx_->index.disk);
    auto s = backend.open_session();
    EXPECT_THROW(search(index(), *s, other.row(0), Equality{0}, SearchParams{10, 5, 1, Mode::gated}), Error);
}

TEST(PathGraph, PrefilterStrandsWhileGatingTunnelsThrough) {
    tu::TempDir dir;
    const tu::PathGraph pg(dir.file("path"));
    const auto naive = pg.run(Mode::naive_pre);
    EXPECT_EQ(naive.ids(), (std::vector<NodeId>{0}));
    EXPECT_EQ(naive.stats.dropped, 1u);
    const auto gated = pg.run(Mode::gated);
    EXPECT_EQ(gated.ids(), (std::vector<NodeId>{5, 0}));
    EXPECT_EQ(gated.reads, (std::vector<NodeId>{0, 5}));
    EXPECT_EQ(gated.stats.tunnels, 4u);
    const auto post = pg.run(Mode::pipe_post);
    EXPECT_EQ(post.ids(), (std::vector<NodeId>{5, 0}));
    EXPECT_EQ(post.stats.ios, 6u);
}
