// gdann: command-line driver for data generation, index build, ground truth,
// single-query debugging, parameter sweeps, and the invariant suite.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "gdann/gdann.hpp"

using namespace gdann;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInvariant = 3 };

void log(const std::string& msg) { std::clog << "[gdann] " << msg << "\n"; }

// Byte labels carry no marker telling class labels from range bins.
LabelKind byte_label_kind(const std::string& s) {
    if (s == "class") return LabelKind::single_label;
    if (s == "bin") return LabelKind::bin_label;
    fail(ErrorKind::invalid_argument, "--label-kind must be class or bin");
}

std::vector<uint32_t> parse_u32_list(const std::string& s) {
    std::vector<uint32_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(detail::parse_number<uint32_t>(item));
    }
    if (out.empty()) fail(ErrorKind::invalid_argument, "empty list: " + s);
    return out;
}

std::vector<Mode> parse_modes(const std::string& s) {
    std::vector<Mode> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_mode(item));
    }
    if (out.empty()) fail(ErrorKind::invalid_argument, "empty mode list");
    return out;
}

/// Writes to --out when given, otherwise standard output.
template <typename F>
void with_output(const std::string& path, F&& f) {
    if (path.empty() || path == "-") {
        f(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open for writing: " + path);
    f(out);
    if (!out) fail(ErrorKind::io, "write failed: " + path);
}

std::string utc_timestamp() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

struct WorkloadFlags {
    std::string scheme = "uniform";
    uint32_t classes = 10;
    double alpha = 1.0;
    double alpha_mix = 1.0;
    uint32_t bins = 10;
    uint32_t vocab = 1000;
    double mean_tags = 3.0;
    uint32_t tags_per_query = 1;

    void add(CLI::App* cmd) {
        cmd->add_option("--label-scheme", scheme, "uniform|zipf|spatial|norm-bins|multilabel")
            ->check(CLI::IsMember({"uniform", "zipf", "spatial", "norm-bins", "multilabel"}));
        cmd->add_option("--classes", classes, "classes for uniform/zipf/spatial")->check(CLI::Range(1, 256));
        cmd->add_option("--zipf-alpha", alpha, "Zipf exponent for labels or tag popularity")->check(CLI::NonNegativeNumber);
        cmd->add_option("--alpha-mix", alpha_mix, "spatial: probability of the nearest-center label")->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--bins", bins, "norm-bins: bin count")->check(CLI::Range(1, 256));
        cmd->add_option("--vocab", vocab, "multilabel: vocabulary size")->check(CLI::PositiveNumber);
        cmd->add_option("--mean-tags", mean_tags, "multilabel: mean tags per node")->check(CLI::PositiveNumber);
        cmd->add_option("--tags-per-query", tags_per_query, "multilabel: 1, 2, or 0 for a mix")->check(CLI::Range(0, 2));
    }

    WorkloadSpec spec(uint64_t seed) const {
        WorkloadSpec w;
        w.scheme = parse_label_scheme(scheme);
        w.classes = classes;
        w.alpha = alpha;
        w.alpha_mix = alpha_mix;
        w.bins = bins;
        w.vocab = vocab;
        w.mean_tags = mean_tags;
        w.tags_per_query = tags_per_query;
        w.seed = seed;
        return w;
    }
};

struct SearchFlags {
    uint32_t L = 100;
    uint32_t K = 10;
    uint32_t W = 8;
    uint32_t r_max = 16;
    std::string backend = "sim";
    uint64_t sim_latency_us = 100;
    unsigned threads = 1;

    void add(CLI::App* cmd, bool single_L) {
        if (single_L) cmd->add_option("--L", L, "search list size")->check(CLI::PositiveNumber);
        cmd->add_option("--K", K, "result size")->check(CLI::PositiveNumber);
        cmd->add_option("--W", W, "pipeline depth / beam width")->check(CLI::PositiveNumber);
        cmd->add_option("--Rmax", r_max, "neighbor-store entries per node")->check(CLI::PositiveNumber);
        cmd->add_option("--backend", backend, "sim|file")->check(CLI::IsMember({"sim", "file"}));
        cmd->add_option("--sim-latency-us", sim_latency_us, "simulated read latency");
        cmd->add_option("--threads", threads, "query threads")->check(CLI::PositiveNumber);
    }
};

/// Queries, predicates, and filter store for commands working on files.
struct QueryInputs {
    VectorDataset queries;
    std::vector<Predicate> preds;
    FilterStore filter;
};

QueryInputs load_query_inputs(const std::string& labels, const std::string& label_kind, const std::string& queries,
                              const std::string& preds, uint64_t expected_n) {
    QueryInputs in{read_vectors(queries), read_predicates(preds), {}};
    in.filter = load_filter_store(labels, expected_n, byte_label_kind(label_kind));
    if (in.preds.size() != in.queries.count())
        fail(ErrorKind::format, "predicate file has " + std::to_string(in.preds.size()) + " entries for " +
                                    std::to_string(in.queries.count()) + " queries");
    return in;
}

nlohmann::json stats_json(const QueryStats& s) {
    return {{"ios", s.ios},
            {"ios_completed", s.ios_completed},
            {"tunnels", s.tunnels},
            {"dropped", s.dropped},
            {"exact_dists", s.exact_dists},
            {"pq_dists", s.pq_dists},
            {"hops", s.hops},
            {"virtual_latency_us", s.virtual_latency_us},
            {"max_in_flight", s.max_in_flight},
            {"capped", s.capped}};
}

// ---------------------------------------------------------------------------
// invariant suite

struct VerifyReport {
    uint64_t gating = 0;
    uint64_t soundness = 0;
    uint64_t window = 0;
    uint64_t prefix = 0;
    uint64_t sizing = 0;
    uint64_t queries = 0;
    uint64_t reads = 0;

    uint64_t total() const { return gating + soundness + window + prefix + sizing; }
};

VerifyReport run_verify(const LoadedIndex& li, const QueryInputs& in, const SearchFlags& sf, uint32_t L) {
    VerifyReport rep;
    const DiskIndexHeader& h = li.disk->header();

    if (li.neighbors.memory_bytes() != neighbor_store_bytes(h.count, sf.r_max)) ++rep.sizing;
    for (uint64_t i = 0; i < h.count; ++i) {
        const NodeRecord rec = li.disk->record(static_cast<NodeId>(i));
        const auto stored = li.neighbors.neighbors_of(static_cast<NodeId>(i));
        const size_t want = std::min<size_t>(rec.neighbors.size(), sf.r_max);
        if (stored.size() != want || !std::equal(stored.begin(), stored.end(), rec.neighbors.begin())) ++rep.prefix;
    }

    auto backend = make_backend(parse_backend(sf.backend), *li.disk, sf.sim_latency_us);
    const SearchIndex idx = li.handles(in.filter);
    for (Mode mode : kAllModes) {
        SearchParams p{L, std::min(sf.K, L), sf.W, mode};
        const BatchResult batch = batch_search(idx, *backend, in.queries, in.preds, p, sf.threads);
        for (size_t q = 0; q < batch.queries.size(); ++q) {
            const QueryResult& r = batch.queries[q];
            const FilterCheck passes(in.filter, in.preds[q]);
            ++rep.queries;
            rep.reads += r.reads.size();
            if (mode == Mode::gated)
                for (NodeId n : r.reads) rep.gating += !passes(n);
            if (r.stats.max_in_flight > sf.W) ++rep.window;
            for (size_t j = 0; j < r.results.size(); ++j) {
                const Neighbor& nb = r.results[j];
                const double exact = l2_sq(in.queries.row(q), li.disk->record(nb.id).view(h.dim, h.dtype));
                const bool ordered = j == 0 || r.results[j - 1].distance <= nb.distance;
                if (!passes(nb.id) || exact != nb.distance || !ordered) ++rep.soundness;
            }
        }
    }
    return rep;
}

void print_verify(const VerifyReport& rep) {
    std::cout << "queries checked: " << rep.queries << " (all modes), reads checked: " << rep.reads << "\n";
    std::cout << "gating invariant: " << rep.gating << " violations\n";
    std::cout << "result soundness: " << rep.soundness << " violations\n";
    std::cout << "in-flight window: " << rep.window << " violations\n";
    std::cout << "neighbor-store prefix: " << rep.prefix << " violations\n";
    std::cout << "neighbor-store sizing: " << rep.sizing << " violations\n";
    std::cout << rep.total() << " violations\n";
}

/// Scratch directory for commands that synthesize their own index.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& hint) {
        path = hint.empty() ? fs::temp_directory_path() / ("gdann-" + std::to_string(::getpid())) : fs::path(hint);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove(path / "index.disk", ec);
        fs::remove(path / "index.pq", ec);
        fs::remove(path, ec);  // only succeeds when empty
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gdann: filtered disk-resident graph ANN search"};
    app.require_subcommand(1);
    uint64_t seed = 1;
    std::string out;

    // gen-data
    auto* gen_data = app.add_subcommand("gen-data", "generate a Gaussian-mixture vector dataset");
    uint64_t n = 200000;
    uint32_t dim = 32;
    std::string dtype = "u8";
    uint32_t clusters = 32;
    uint64_t query_count = 0;
    std::string queries_out;
    gen_data->add_option("--n", n, "vector count")->check(CLI::PositiveNumber);
    gen_data->add_option("--dim", dim, "dimensionality")->check(CLI::PositiveNumber);
    gen_data->add_option("--dtype", dtype, "u8|f32")->check(CLI::IsMember({"u8", "f32"}));
    gen_data->add_option("--clusters", clusters, "mixture components")->check(CLI::PositiveNumber);
    gen_data->add_option("--seed", seed);
    gen_data->add_option("--out", out, "vector file")->required();
    gen_data->add_option("--queries", query_count, "also write this many held-out queries");
    gen_data->add_option("--queries-out", queries_out, "query vector file");

    // gen-labels
    auto* gen_labels = app.add_subcommand("gen-labels", "generate per-node labels and per-query predicates");
    std::string data_path, queries_path, preds_out;
    WorkloadFlags wf;
    gen_labels->add_option("--data", data_path, "vector file")->required()->check(CLI::ExistingFile);
    gen_labels->add_option("--queries", queries_path, "query vector file (predicate count)")->check(CLI::ExistingFile);
    gen_labels->add_option("--preds-out", preds_out, "predicate file");
    gen_labels->add_option("--seed", seed);
    gen_labels->add_option("--out", out, "label file")->required();
    wf.add(gen_labels);

    // build
    auto* build = app.add_subcommand("build", "build graph, disk index, and PQ codes");
    IndexBuildConfig bc;
    build->add_option("--data", data_path, "vector file")->required()->check(CLI::ExistingFile);
    build->add_option("--R", bc.graph.R, "max degree")->check(CLI::Range(2u, 100000u));
    build->add_option("--Lbuild", bc.graph.L_build, "build search list size")->check(CLI::PositiveNumber);
    build->add_option("--alpha", bc.graph.alpha, "prune slack")->check(CLI::Range(1.0f, 100.0f));
    build->add_option("--pq-chunks", bc.pq.chunks, "PQ chunks")->check(CLI::PositiveNumber);
    build->add_option("--pq-iters", bc.pq.iters, "k-means iterations")->check(CLI::PositiveNumber);
    build->add_option("--pq-sample", bc.pq.sample, "PQ training sample")->check(CLI::PositiveNumber);
    build->add_option("--sector-size", bc.sector_size, "record sector bytes")->check(CLI::PositiveNumber);
    build->add_option("--seed", seed);
    build->add_option("--out", out, "index prefix (writes <prefix>.disk, <prefix>.pq)")->required();

    // gt
    auto* gt_cmd = app.add_subcommand("gt", "exact filtered ground truth by brute force");
    std::string labels_path, preds_path, label_kind = "class";
    SearchFlags sf;
    gt_cmd->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
    gt_cmd->add_option("--labels", labels_path)->required()->check(CLI::ExistingFile);
    gt_cmd->add_option("--label-kind", label_kind, "class|bin (byte label files)")->check(CLI::IsMember({"class", "bin"}));
    gt_cmd->add_option("--queries", queries_path)->required()->check(CLI::ExistingFile);
    gt_cmd->add_option("--preds", preds_path)->required()->check(CLI::ExistingFile);
    gt_cmd->add_option("--K", sf.K)->check(CLI::PositiveNumber);
    gt_cmd->add_option("--threads", sf.threads)->check(CLI::PositiveNumber);
    gt_cmd->add_option("--out", out, "ground truth file")->required();

    // search
    auto* search_cmd = app.add_subcommand("search", "run queries and print results as JSON lines");
    std::string index_prefix, mode_name = "gated";
    int64_t query_id = -1;
    search_cmd->add_option("--index", index_prefix, "index prefix")->required();
    search_cmd->add_option("--labels", labels_path)->required()->check(CLI::ExistingFile);
    search_cmd->add_option("--label-kind", label_kind)->check(CLI::IsMember({"class", "bin"}));
    search_cmd->add_option("--queries", queries_path)->required()->check(CLI::ExistingFile);
    search_cmd->add_option("--preds", preds_path)->required()->check(CLI::ExistingFile);
    search_cmd->add_option("--query-id", query_id, "single query (default: all)");
    search_cmd->add_option("--mode", mode_name)->check(CLI::IsMember({"beam-post", "pipe-post", "naive-pre", "early-filter", "gated"}));
    search_cmd->add_option("--out", out, "output file (default stdout)");
    sf.add(search_cmd, true);

    // bench
    auto* bench = app.add_subcommand("bench", "parameter sweep; CSV rows per (mode, L)");
    std::string modes = "pipe-post,gated", Ls = "20,50,100,200", gt_path, workdir;
    std::optional<double> selectivity;
    uint64_t bench_n = 200000, bench_queries = 500;
    uint32_t bench_dim = 32;
    bench->add_option("--modes", modes, "comma-separated modes");
    bench->add_option("--L", Ls, "comma-separated search list sizes");
    bench->add_option("--index", index_prefix, "index prefix (omit to synthesize a desk-scale setup)");
    bench->add_option("--labels", labels_path)->check(CLI::ExistingFile);
    bench->add_option("--label-kind", label_kind)->check(CLI::IsMember({"class", "bin"}));
    bench->add_option("--queries", queries_path)->check(CLI::ExistingFile);
    bench->add_option("--preds", preds_path)->check(CLI::ExistingFile);
    bench->add_option("--gt", gt_path)->check(CLI::ExistingFile);
    bench->add_option("--selectivity,--sel", selectivity,
                      "uniform-label selectivity when synthesizing (classes = 1/s); reported in the CSV")
        ->check(CLI::Range(1e-6, 1.0));
    bench->add_option("--n", bench_n, "synthetic vector count")->check(CLI::PositiveNumber);
    bench->add_option("--dim", bench_dim, "synthetic dimensionality")->check(CLI::PositiveNumber);
    bench->add_option("--query-count", bench_queries, "synthetic query count")->check(CLI::PositiveNumber);
    bench->add_option("--R", bc.graph.R)->check(CLI::Range(2u, 100000u));
    bench->add_option("--Lbuild", bc.graph.L_build)->check(CLI::PositiveNumber);
    bench->add_option("--alpha", bc.graph.alpha)->check(CLI::Range(1.0f, 100.0f));
    bench->add_option("--sector-size", bc.sector_size)->check(CLI::PositiveNumber);
    bench->add_option("--workdir", workdir, "scratch directory for a synthesized index");
    bench->add_option("--seed", seed);
    bench->add_option("--out", out, "CSV file (default stdout); wall-clock metadata goes to <out>.meta.json");
    sf.add(bench, false);

    // verify
    auto* verify = app.add_subcommand("verify", "invariant suite: gating, result soundness, W bound, neighbor store");
    uint32_t verify_L = 50;
    verify->add_option("--index", index_prefix, "index prefix (omit to synthesize a small index)");
    verify->add_option("--labels", labels_path)->check(CLI::ExistingFile);
    verify->add_option("--label-kind", label_kind)->check(CLI::IsMember({"class", "bin"}));
    verify->add_option("--queries", queries_path)->check(CLI::ExistingFile);
    verify->add_option("--preds", preds_path)->check(CLI::ExistingFile);
    verify->add_option("--L", verify_L)->check(CLI::PositiveNumber);
    verify->add_option("--n", bench_n, "synthetic vector count")->default_val(5000)->check(CLI::PositiveNumber);
    verify->add_option("--query-count", bench_queries, "synthetic query count")->default_val(100)->check(CLI::PositiveNumber);
    verify->add_option("--workdir", workdir);
    verify->add_option("--seed", seed);
    wf.add(verify);
    sf.add(verify, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*gen_data) {
            VectorDataset ds = gen_vectors(n, dim, parse_dtype(dtype), clusters, seed);
            write_vectors(out, ds);
            log("wrote " + std::to_string(n) + " x " + std::to_string(dim) + " " + dtype + " vectors to " + out);
            if (query_count > 0) {
                if (queries_out.empty()) fail(ErrorKind::invalid_argument, "--queries needs --queries-out");
                write_vectors(queries_out, gen_query_vectors(ds, query_count, Rng::derive(seed, 1).next_u64()));
                log("wrote " + std::to_string(query_count) + " queries to " + queries_out);
            }
        } else if (*gen_labels) {
            if (!preds_out.empty() && queries_path.empty())
                fail(ErrorKind::invalid_argument, "--preds-out needs --queries");
            const VectorDataset ds = read_vectors(data_path);
            const WorkloadSpec spec = wf.spec(seed);
            const FilterStore store = gen_filter_store(spec, ds);
            if (store.kind() == LabelKind::multi_label)
                write_multilabel_file(out, store.rows());
            else
                write_label_file(out, store.labels(), store.num_classes());
            log("wrote " + wf.scheme + " labels to " + out);
            if (!preds_out.empty()) {
                const VectorDataset qs = read_vectors(queries_path);
                const auto preds = gen_predicates(spec, store, qs.count(), Rng::derive(seed, 2).next_u64());
                write_predicates(preds_out, preds);
                const auto sel = predicate_selectivities(store, preds);
                double mean = 0;
                for (double s : sel) mean += s;
                log("wrote " + std::to_string(preds.size()) + " predicates, mean selectivity " +
                    std::to_string(mean / static_cast<double>(sel.size())));
            }
        } else if (*build) {
            bc.graph.seed = seed;
            bc.pq.seed = seed;
            const VectorDataset ds = read_vectors(data_path);
            const InMemGraph g = build_index_files(ds, bc, out, true);
            log("index written to " + out + ".disk / " + out + ".pq; medoid " + std::to_string(g.medoid) + ", " +
                std::to_string(reachable_from_medoid(g)) + "/" + std::to_string(g.size()) + " nodes reachable");
        } else if (*gt_cmd) {
            const VectorDataset ds = read_vectors(data_path);
            const QueryInputs in = load_query_inputs(labels_path, label_kind, queries_path, preds_path, ds.count());
            write_ground_truth(out, ground_truth(ds, in.filter, in.queries, in.preds, sf.K, sf.threads));
            log("ground truth for " + std::to_string(in.queries.count()) + " queries written to " + out);
        } else if (*search_cmd) {
            const LoadedIndex li = LoadedIndex::open(index_prefix, sf.r_max);
            QueryInputs in = load_query_inputs(labels_path, label_kind, queries_path, preds_path, li.disk->header().count);
            auto backend = make_backend(parse_backend(sf.backend), *li.disk, sf.sim_latency_us);
            const SearchParams p{sf.L, sf.K, sf.W, parse_mode(mode_name)};
            const SearchIndex idx = li.handles(in.filter);
            uint64_t first = 0, last = in.queries.count();
            if (query_id >= 0) {
                if (static_cast<uint64_t>(query_id) >= last) fail(ErrorKind::invalid_argument, "--query-id out of range");
                first = static_cast<uint64_t>(query_id);
                last = first + 1;
            }
            with_output(out, [&](std::ostream& os) {
                for (uint64_t q = first; q < last; ++q) {
                    auto session = backend->open_session();
                    const QueryResult r = search(idx, *session, in.queries.row(q), in.preds[q], p);
                    nlohmann::json j;
                    j["query"] = q;
                    j["predicate"] = describe(in.preds[q]);
                    j["mode"] = mode_name;
                    j["results"] = nlohmann::json::array();
                    for (const auto& nb : r.results) j["results"].push_back({{"id", nb.id}, {"distance", nb.distance}});
                    j["stats"] = stats_json(r.stats);
                    os << j.dump() << "\n";
                }
            });
        } else if (*bench) {
            SweepConfig sc;
            sc.modes = parse_modes(modes);
            sc.Ls = parse_u32_list(Ls);
            sc.W = sf.W;
            sc.K = sf.K;
            sc.threads = sf.threads;
            std::vector<SweepRow> rows;
            if (index_prefix.empty()) {
                const double s = selectivity.value_or(0.1);
                const uint32_t classes = static_cast<uint32_t>(std::lround(1.0 / s));
                if (classes < 1 || classes > 256) fail(ErrorKind::invalid_argument, "--sel must give 1..256 uniform classes");
                bc.graph.seed = seed;
                bc.pq.seed = seed;
                TempDir tmp(workdir);
                log("synthesizing " + std::to_string(bench_n) + " vectors, " + std::to_string(classes) + " uniform classes");
                SyntheticIndex si = build_synthetic_index(bench_n, bench_dim, Dtype::u8, 32, seed, bc,
                                                          (tmp.path / "index").string(), sf.r_max, true);
                WorkloadSpec spec;
                spec.classes = classes;
                spec.seed = seed;
                const FilterStore store = gen_filter_store(spec, si.data);
                const VectorDataset qs = gen_query_vectors(si.data, bench_queries, Rng::derive(seed, 1).next_u64());
                const auto preds = gen_predicates(spec, store, qs.count(), Rng::derive(seed, 2).next_u64());
                const GroundTruth gt = ground_truth(si.data, store, qs, preds, sf.K, sf.threads);
                auto backend = make_backend(parse_backend(sf.backend), *si.index.disk, sf.sim_latency_us);
                rows = run_sweep(sc, si.index.handles(store), *backend, qs, preds, gt, 1.0 / classes);
            } else {
                if (labels_path.empty() || queries_path.empty() || preds_path.empty() || gt_path.empty())
                    fail(ErrorKind::invalid_argument, "--index needs --labels, --queries, --preds, and --gt");
                const LoadedIndex li = LoadedIndex::open(index_prefix, sf.r_max);
                const QueryInputs in = load_query_inputs(labels_path, label_kind, queries_path, preds_path, li.disk->header().count);
                const GroundTruth gt = read_ground_truth(gt_path);
                if (gt.ids.size() != in.queries.count()) fail(ErrorKind::format, "ground truth does not match query count");
                double s = 0;
                if (selectivity) {
                    s = *selectivity;
                } else {
                    for (double v : predicate_selectivities(in.filter, in.preds)) s += v;
                    s /= static_cast<double>(in.preds.size());
                }
                auto backend = make_backend(parse_backend(sf.backend), *li.disk, sf.sim_latency_us);
                rows = run_sweep(sc, li.handles(in.filter), *backend, in.queries, in.preds, gt, s);
            }
            with_output(out, [&](std::ostream& os) { emit_csv(rows, os); });
            if (!out.empty() && out != "-") {
                nlohmann::json meta;
                meta["generated_at"] = utc_timestamp();
                meta["hardware_dependent"] = {"wall_qps"};
                meta["portable"] = {"recall10", "mean_ios", "mean_tunnels", "mean_vlat_us"};
                meta["backend"] = sf.backend;
                meta["threads"] = sf.threads;
                meta["wall_qps"] = nlohmann::json::array();
                for (const auto& r : rows) meta["wall_qps"].push_back({{"mode", to_string(r.mode)}, {"L", r.L}, {"qps", r.wall_qps}});
                std::ofstream(out + ".meta.json") << meta.dump(2) << "\n";
            }
            for (const auto& r : io_reduction_report(rows))
                log("L=" + std::to_string(r.L) + " pipe-post/gated I/O ratio " + std::to_string(r.ratio) + " (1/s = " +
                    std::to_string(r.expected) + ")");
        } else if (*verify) {
            std::optional<TempDir> tmp;
            LoadedIndex li;
            QueryInputs in;
            if (index_prefix.empty()) {
                tmp.emplace(workdir);
                IndexBuildConfig small;
                small.graph.seed = seed;
                small.pq.seed = seed;
                log("synthesizing a " + std::to_string(bench_n) + "-vector index");
                SyntheticIndex si = build_synthetic_index(bench_n, 32, Dtype::u8, 32, seed, small,
                                                          (tmp->path / "index").string(), sf.r_max);
                const WorkloadSpec spec = wf.spec(seed);
                in.filter = gen_filter_store(spec, si.data);
                in.queries = gen_query_vectors(si.data, bench_queries, Rng::derive(seed, 1).next_u64());
                in.preds = gen_predicates(spec, in.filter, in.queries.count(), Rng::derive(seed, 2).next_u64());
                li = std::move(si.index);
            } else {
                if (labels_path.empty() || queries_path.empty() || preds_path.empty())
                    fail(ErrorKind::invalid_argument, "--index needs --labels, --queries, and --preds");
                li = LoadedIndex::open(index_prefix, sf.r_max);
                in = load_query_inputs(labels_path, label_kind, queries_path, preds_path, li.disk->header().count);
            }
            const VerifyReport rep = run_verify(li, in, sf, verify_L);
            print_verify(rep);
            return rep.total() == 0 ? kOk : kInvariant;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case ErrorKind::invalid_argument: return kUsage;
            case ErrorKind::invariant: return kInvariant;
            default: return kData;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    }
    return kOk;
}
