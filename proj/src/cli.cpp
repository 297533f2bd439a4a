#include "vilegal/cli.hpp"

#include "vilegal/bm25.hpp"
#include "vilegal/contrastive.hpp"
#include "vilegal/corpus.hpp"
#include "vilegal/dense.hpp"
#include "vilegal/errors.hpp"
#include "vilegal/hash.hpp"
#include "vilegal/io.hpp"
#include "vilegal/late_interaction.hpp"
#include "vilegal/metrics.hpp"
#include "vilegal/pretrain.hpp"
#include "vilegal/query.hpp"
#include "vilegal/query_filter.hpp"
#include "vilegal/query_gen.hpp"
#include "vilegal/synthetic.hpp"
#include "vilegal/version.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace vilegal {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void ensure_parent(const std::string& path) {
    fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

// JSON artifacts carry the metadata as a leading "_meta" member.
void write_json_artifact(const std::string& path, const std::string& payload,
                         const ArtifactMeta& meta) {
    ordered_json doc;
    doc["_meta"] = meta.to_string();
    ordered_json body = ordered_json::parse(payload);
    for (auto& item : body.items()) doc[item.key()] = item.value();
    ensure_parent(path);
    write_text_file(path, doc.dump(2) + "\n");
}

// Options shared by every stage that needs a single-vector embedder.
struct ProviderOpts {
    std::string provider = "pseudo"; // pseudo | toy
    std::size_t dim = 64;
    std::uint64_t embed_seed = 0;
    std::string encoder_path;
};

void add_provider_options(CLI::App* cmd, ProviderOpts& o) {
    cmd->add_option("--provider", o.provider, "Embedding provider")
        ->check(CLI::IsMember({"pseudo", "toy"}));
    cmd->add_option("--dim", o.dim, "Embedding dimension (pseudo provider)");
    cmd->add_option("--embed-seed", o.embed_seed, "Feature-hash seed (pseudo provider)");
    cmd->add_option("--encoder", o.encoder_path, "Trained encoder file (toy provider)");
}

std::shared_ptr<const EmbeddingProvider> make_provider(const ProviderOpts& o) {
    if (o.provider == "toy") {
        if (o.encoder_path.empty()) {
            throw CLI::ValidationError("--encoder is required with --provider toy");
        }
        return std::make_shared<ToyEncoder>(ToyEncoder::load_file(o.encoder_path));
    }
    return std::make_shared<PseudoEmbeddingProvider>(o.dim, o.embed_seed);
}

// bm25 indexes on the fly; dense embeds the corpus with the chosen provider.
std::unique_ptr<Retriever> make_reference_retriever(const std::string& kind,
                                                    const ProviderOpts& opts,
                                                    const Corpus& corpus) {
    if (kind == "bm25") {
        return std::make_unique<InvertedIndex>(InvertedIndex::build(corpus));
    }
    auto provider = make_provider(opts);
    auto index = std::make_shared<DenseIndex>(DenseIndex::build(corpus, *provider));
    return std::make_unique<DenseRetriever>(std::move(index), std::move(provider));
}

std::set<std::string> corpus_ids(const Corpus& corpus) {
    std::set<std::string> ids;
    for (const auto& p : corpus.passages()) ids.insert(p.id);
    return ids;
}

Judgments qrels_from_queries(const std::vector<SyntheticQuery>& queries) {
    Judgments j;
    for (const auto& q : queries) j.add(q.id, q.passage_id, 1);
    return j;
}

std::map<std::string, std::set<std::string>> positives_from_queries(
    const std::vector<SyntheticQuery>& queries) {
    std::map<std::string, std::set<std::string>> m;
    for (const auto& q : queries) m[q.id].insert(q.passage_id);
    return m;
}

std::map<std::string, std::set<std::string>> positives_from_qrels(const Judgments& qrels) {
    std::map<std::string, std::set<std::string>> m;
    for (const auto& entry : qrels.all()) m[entry.first] = qrels.relevant(entry.first);
    return m;
}

std::map<std::string, QuerySource> sources_for(const std::vector<SyntheticQuery>& queries,
                                               const Corpus& corpus) {
    std::map<std::string, QuerySource> m;
    for (const auto& q : queries) {
        m[q.id] = QuerySource{q.passage_id, corpus.passage(q.passage_id).doc_id};
    }
    return m;
}

std::map<std::string, std::string> passage_doc_map(const Corpus& corpus) {
    std::map<std::string, std::string> m;
    for (const auto& p : corpus.passages()) m[p.id] = p.doc_id;
    return m;
}

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", v);
    return buf;
}

std::string eval_report_text(const MetricTable& table, const std::optional<HitRates>& hits,
                             std::size_t hit_k) {
    std::ostringstream out;
    out << table.to_text();
    out << table.to_benchmark_line() << '\n';
    if (hits) {
        out << "passage hit rate @" << hit_k << ": " << percent(hits->passage_pct) << '\n';
        out << "document hit rate @" << hit_k << ": " << percent(hits->document_pct) << '\n';
    }
    return out.str();
}

std::string eval_report_json(const MetricTable& table, const std::optional<HitRates>& hits,
                             std::size_t hit_k) {
    ordered_json j = ordered_json::parse(table.to_json());
    if (hits) {
        j["hit_rates"] = {{"k", hit_k},
                          {"passage_pct", hits->passage_pct},
                          {"document_pct", hits->document_pct}};
    }
    return j.dump(2);
}

Run run_searches(const std::function<Ranking(const std::string&, std::size_t)>& search,
                 const std::vector<SyntheticQuery>& queries, std::size_t depth) {
    Run run;
    for (const auto& q : queries) run.set(q.id, search(q.text, depth));
    return run;
}

// ---------------------------------------------------------------------------
// demo: the whole pipeline on a seeded toy collection.

struct DemoOpts {
    std::string output_dir = "demo-out";
    std::uint64_t seed = 7;
    std::size_t docs = 64;
    std::size_t sections = 4;
};

void run_demo(const DemoOpts& o, const ArtifactMeta& meta) {
    const fs::path dir(o.output_dir);
    fs::create_directories(dir / "corpus");
    fs::create_directories(dir / "queries");
    fs::create_directories(dir / "index");
    fs::create_directories(dir / "train");
    fs::create_directories(dir / "runs");
    fs::create_directories(dir / "eval");

    const std::size_t run_depth = 100;
    const std::vector<std::size_t> ks{10, 100};
    const std::size_t hit_k = 10;

    // Stage 1: corpus.
    std::string docs_jsonl = ordered_json{{"_meta", meta.to_string()}}.dump() + "\n" +
                             toy_documents_jsonl(o.docs, o.sections, o.seed);
    write_text_file((dir / "corpus" / "documents.jsonl").string(), docs_jsonl);
    Corpus corpus = ingest_documents_file((dir / "corpus" / "documents.jsonl").string());
    write_passages_file((dir / "corpus" / "passages.jsonl").string(), corpus, &meta);
    std::cout << "[1/6] corpus: " << corpus.doc_index().size() << " documents, " << corpus.size()
              << " passages\n";

    // Stage 2: synthetic queries from the mock backend.
    MockCompletionBackend backend(o.seed);
    GenerationOptions gen_opts;
    GenerationRun gen = generate_for_corpus(corpus, backend, gen_opts);
    std::vector<SyntheticQuery> raw_queries = to_queries(gen);
    write_queries_file((dir / "queries" / "raw_queries.jsonl").string(), raw_queries, &meta);
    std::cout << "[2/6] generation: " << raw_queries.size() << " queries from "
              << gen.results.size() << " passages (" << gen.skipped.size() << " skipped)\n";

    // Stage 3: quality filters against the pseudo-hash dense retriever.
    auto provider = std::make_shared<PseudoEmbeddingProvider>(64, o.seed);
    auto dense_index = std::make_shared<DenseIndex>(DenseIndex::build(corpus, *provider));
    DenseRetriever dense_retriever(dense_index, provider);
    FilterReport report =
        apply_filters(raw_queries, default_blacklist(), dense_retriever, 40, corpus_ids(corpus));
    std::vector<SyntheticQuery> kept = kept_queries(raw_queries, report);
    write_queries_file((dir / "queries" / "kept_queries.jsonl").string(), kept, &meta);
    write_json_artifact((dir / "queries" / "filter_report.json").string(), report.to_json(), meta);
    Judgments qrels = qrels_from_queries(kept);
    qrels.save_file((dir / "queries" / "qrels.tsv").string(), &meta);
    std::cout << "[3/6] filters: kept " << kept.size() << "/" << raw_queries.size() << " ("
              << report.dropped_self_ref.size() << " self-reference, "
              << report.dropped_recovery.size() << " recovery)\n";

    // Stage 4: dense index artifact and hard-negative mining.
    dense_index->save_matrix_file((dir / "index" / "dense_pseudo.vlde").string(), &meta);
    std::vector<TrainingExample> examples = mine_hard_negatives(
        kept, positives_from_queries(kept), dense_retriever, 7, 40, corpus, o.seed);
    write_examples_file((dir / "train" / "examples.jsonl").string(), examples, &meta);
    std::size_t skipped_pairs = 0;
    std::vector<PretrainPair> pairs =
        build_pretrain_pairs(corpus, kept, MaskRatios{}, o.seed, &skipped_pairs);
    serialize_pairs_file((dir / "train" / "pretrain_pairs.jsonl").string(), pairs, &meta);
    std::cout << "[4/6] mining: " << examples.size() << " training examples, " << pairs.size()
              << " pre-training pairs (" << skipped_pairs << " passages without queries)\n";

    // Stage 5: toy encoder fine-tuning.
    ToyEncoder encoder = ToyEncoder::from_corpus(corpus, 16, o.seed);
    auto toy_run = [&](const ToyEncoder& enc) {
        DenseIndex idx = DenseIndex::build(corpus, enc);
        return run_searches(
            [&](const std::string& text, std::size_t k) {
                return idx.search(enc.embed_query(text), k);
            },
            kept, run_depth);
    };
    Run toy_before = toy_run(encoder);
    TrainOptions train_opts;
    train_opts.seed = o.seed;
    TrainResult trained = train_toy(corpus, kept, examples, encoder, train_opts);
    encoder.save_file((dir / "train" / "encoder.vlty").string(), meta);
    write_trace_file((dir / "train" / "trace.csv").string(), trained.trace, &meta);
    Run toy_after = toy_run(encoder);
    double mrr_before = mrr_at_k(toy_before, qrels, 10);
    double mrr_after = mrr_at_k(toy_after, qrels, 10);
    {
        std::ostringstream line;
        line << std::fixed << std::setprecision(4) << "[5/6] training: " << train_opts.steps
             << " steps, MRR@10 " << mrr_before << " -> " << mrr_after << "\n";
        std::cout << line.str();
    }

    // Stage 6: compressed late-interaction index, runs and evaluation.
    std::vector<MultiVectorDoc> mdocs;
    mdocs.reserve(corpus.size());
    std::size_t total_vectors = 0;
    for (const auto& p : corpus.passages()) {
        MultiVectorDoc doc{p.id, pseudo_token_vectors(p.content, 32, o.seed, 160)};
        total_vectors += doc.token_vectors.size();
        mdocs.push_back(std::move(doc));
    }
    std::uint32_t n_centroids =
        std::min<std::uint32_t>(256, default_centroid_count(total_vectors));
    CompressedMultiVectorIndex cindex =
        CompressedMultiVectorIndex::build(mdocs, 2, n_centroids, o.seed);
    cindex.save_file((dir / "index" / "colbert.vlci").string(), meta);
    StorageReport storage = cindex.storage();
    {
        ordered_json j{{"vectors", cindex.vector_count()},
                       {"dim", cindex.dim()},
                       {"bits", cindex.bits()},
                       {"centroids", cindex.centroid_count()},
                       {"bytes_centroids", storage.bytes_centroids},
                       {"bytes_ids", storage.bytes_ids},
                       {"bytes_residuals", storage.bytes_residuals},
                       {"bytes_total", storage.bytes_total},
                       {"bytes_per_vector", storage.bytes_per_vector}};
        write_json_artifact((dir / "index" / "storage_report.json").string(), j.dump(2), meta);
    }

    struct NamedRun {
        std::string name;
        Run run;
    };
    std::vector<NamedRun> runs;
    runs.push_back({"dense_pseudo", run_searches(
                                        [&](const std::string& text, std::size_t k) {
                                            return dense_index->search(
                                                provider->embed_query(text), k);
                                        },
                                        kept, run_depth)});
    runs.push_back({"dense_toy_init", std::move(toy_before)});
    runs.push_back({"dense_toy", std::move(toy_after)});
    runs.push_back({"colbert", run_searches(
                                   [&](const std::string& text, std::size_t k) {
                                       return cindex.search(
                                           pseudo_token_vectors(text, 32, o.seed, 160), k);
                                   },
                                   kept, run_depth)});

    auto sources = sources_for(kept, corpus);
    auto pass_doc = passage_doc_map(corpus);
    std::cout << "[6/6] evaluation over " << kept.size() << " queries:\n";
    for (const auto& named : runs) {
        named.run.save_file((dir / "runs" / (named.name + ".run")).string(), named.name, &meta);
        MetricTable table = evaluate_run(named.run, qrels, ks);
        HitRates hits = hit_rates(named.run, sources, pass_doc, hit_k);
        std::string text = eval_report_text(table, hits, hit_k);
        write_text_file((dir / "eval" / (named.name + ".txt")).string(),
                        meta.to_comment_line() + "\n" + text);
        write_json_artifact((dir / "eval" / (named.name + ".json")).string(),
                            eval_report_json(table, hits, hit_k), meta);
        std::cout << "\n== " << named.name << " ==\n" << text;
    }
    std::cout << "\ndemo artifacts under " << dir.string() << "\n";
}

} // namespace

int run_cli(std::vector<std::string> args) {
    CLI::App app{"Legal passage retrieval pipeline: synthetic query generation, filtering, "
                 "indexing, hard-negative mining, contrastive training and evaluation"};
    app.name("vilegal");
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "Read option defaults from an INI file (flags win)");
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    app.require_subcommand(1);

    // Hash of the full effective configuration; stamped into every artifact
    // together with the stage seed so outputs are reproducible bit for bit.
    auto meta_for = [&app](std::uint64_t seed) {
        return make_meta(to_hex(fnv1a64(app.config_to_str(true, false))), seed);
    };

    // --- ingest -------------------------------------------------------------
    {
        struct Opts {
            std::string input, output;
            std::size_t max_tokens = 0, overlap = 0;
            std::uint64_t seed = 0;
        };
        auto o = std::make_shared<Opts>();
        auto* cmd = app.add_subcommand(
            "ingest", "Parse a documents JSONL file into a passage corpus, optionally chunking");
        cmd->add_option("--input", o->input, "Documents JSONL, one record per line")->required();
        cmd->add_option("--output", o->output, "Passages JSONL to write")->required();
        cmd->add_option("--max-tokens", o->max_tokens,
                        "Chunk passages above this token budget (0 keeps sections whole)");
        cmd->add_option("--overlap", o->overlap, "Tokens shared between consecutive chunks");
        cmd->add_option("--seed", o->seed, "Seed recorded in artifact metadata");
        cmd->callback([o, meta_for]() {
            Corpus corpus = ingest_documents_file(o->input);
            std::size_t n_docs = corpus.doc_index().size();
            if (o->max_tokens > 0) corpus = chunk_corpus(corpus, o->max_tokens, o->overlap);
            ArtifactMeta meta = meta_for(o->seed);
            ensure_parent(o->output);
            write_passages_file(o->output, corpus, &meta);
            std::cout << "ingested " << n_docs << " documents into " << corpus.size()
                      << " passages\n";
        });
    }

    // --- generate -----------------------------------------------------------
    {
        struct Opts {
            std::string corpus, output, report;
            std::string backend = "mock";
            std::string mode = "aspect_guided";
            std::vector<std::string> few_shot_files;
            int retries = 2;
            int concurrency = 1;
            std::uint64_t seed = 0;
        };
        auto o = std::make_shared<Opts>();
        auto* cmd = app.add_subcommand("generate",
                                       "Generate aspect-guided queries for every passage");
        cmd->add_option("--corpus", o->corpus, "Passages JSONL")->required();
        cmd->add_option("--output", o->output, "Queries JSONL to write")->required();
        cmd->add_option("--backend", o->backend, "Completion backend")
            ->check(CLI::IsMember({"mock", "http"}));
        cmd->add_option("--mode", o->mode, "Prompting strategy")
            ->check(CLI::IsMember({"aspect_guided", "basic"}));
        cmd->add_option("--few-shot-file", o->few_shot_files,
                        "File holding one worked example to embed in the prompt (repeatable)");
        cmd->add_option("--retries", o->retries, "Extra attempts per passage")
            ->check(CLI::NonNegativeNumber);
        cmd->add_option("--concurrency", o->concurrency, "Parallel backend calls")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--seed", o->seed, "Mock backend seed");
        cmd->add_option("--report", o->report, "Optional generation report JSON");
        cmd->callback([o, meta_for]() {
            Corpus corpus = read_passages_file(o->corpus);
            GenerationOptions gen_opts;
            gen_opts.mode = prompt_mode_from_string(o->mode);
            for (const auto& path : o->few_shot_files) {
                gen_opts.few_shot.push_back(read_text_file(path));
            }
            gen_opts.max_retries = o->retries;
            gen_opts.concurrency = o->concurrency;
            std::unique_ptr<CompletionBackend> backend;
            if (o->backend == "http") {
                backend = std::make_unique<HttpCompletionBackend>(
                    HttpCompletionBackend::settings_from_env());
            } else {
                backend = std::make_unique<MockCompletionBackend>(o->seed);
            }
            GenerationRun run = generate_for_corpus(corpus, *backend, gen_opts);
            std::vector<SyntheticQuery> queries = to_queries(run);
            ArtifactMeta meta = meta_for(o->seed);
            ensure_parent(o->output);
            write_queries_file(o->output, queries, &meta);
            if (!o->report.empty()) {
                ordered_json j;
                j["backend"] = backend->name();
                j["passages"] = corpus.size();
                j["generated_queries"] = queries.size();
                j["truncated_items"] = run.truncated_items;
                j["skipped"] = ordered_json::array();
                for (const auto& s : run.skipped) {
                    j["skipped"].push_back({{"passage_id", s.passage_id},
                                            {"reason", s.reason},
                                            {"attempts", s.attempt_count}});
                }
                write_json_artifact(o->report, j.dump(2), meta);
            }
            std::cout << "generated " << queries.size() << " queries (" << run.skipped.size()
                      << " passages skipped, " << run.truncated_items << " items truncated)\n";
        });
    }

    // --- filter ---------------------------------------------------------------
    {
        struct Opts {
            std::string corpus, queries, output, report, qrels_out;
            std::string retriever = "dense";
            ProviderOpts provider;
            std::size_t k = 40;
            std::vector<std::string> extra_blacklist;
            std::uint64_t seed = 0;
        };
        auto o = std::make_shared<Opts>();
        auto* cmd = app.add_subcommand(
            "filter", "Drop self-referential queries and queries that fail top-k recovery");
        cmd->add_option("--corpus", o->corpus, "Passages JSONL")->required();
        cmd->add_option("--queries", o->queries, "Queries JSONL to filter")->required();
        cmd->add_option("--output", o->output, "Kept queries JSONL")->required();
        cmd->add_option("--retriever", o->retriever, "Reference retriever for recovery")
            ->check(CLI::IsMember({"bm25", "dense"}));
        add_provider_options(cmd, o->provider);
        cmd->add_option("--k", o->k, "Recovery cutoff: keep when the source ranks <= k")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--blacklist", o->extra_blacklist,
                        "Extra self-reference phrases on top of the built-in list (repeatable)");
        cmd->add_option("--seed", o->seed, "Seed recorded in artifact metadata");
        cmd->add_option("--report", o->report, "Optional filter report JSON");
        cmd->add_option("--qrels-out", o->qrels_out, "Optional qrels TSV for the kept queries");
        cmd->callback([o, meta_for]() {
            Corpus corpus = read_passages_file(o->corpus);
            std::vector<SyntheticQuery> queries = read_queries_file(o->queries);
            std::vector<std::string> blacklist = default_blacklist();
            blacklist.insert(blacklist.end(), o->extra_blacklist.begin(),
                             o->extra_blacklist.end());
            auto retriever = make_reference_retriever(o->retriever, o->provider, corpus);
            FilterReport report =
                apply_filters(queries, blacklist, *retriever, o->k, corpus_ids(corpus));
            std::vector<SyntheticQuery> kept = kept_queries(queries, report);
            ArtifactMeta meta = meta_for(o->seed);
            ensure_parent(o->output);
            write_queries_file(o->output, kept, &meta);
            if (!o->report.empty()) write_json_artifact(o->report, report.to_json(), meta);
            if (!o->qrels_out.empty()) {
                ensure_parent(o->qrels_out);
                qrels_from_queries(kept).save_file(o->qrels_out, &meta);
            }
            char rate[32];
            std::snprintf(rate, sizeof(rate), "%.4f", report.pass_rate);
            std::cout << "kept " << kept.size() << "/" << queries.size() << " queries (pass rate "
                      << rate << "); dropped " << report.dropped_self_ref.size()
                      << " self-reference, " << report.dropped_recovery.size() << " recovery\n";
        });
    }

    // --- index ----------------------------------------------------------------
    {
        auto* index_cmd = app.add_subcommand("index", "Build a retrieval index");
        index_cmd->require_subcommand(1);

        {
            struct Opts {
                std::string corpus, output;
                double k1 = 1.2, b = 0.75;
                std::uint64_t seed = 0;
            };
            auto o = std::make_shared<Opts>();
            auto* cmd = index_cmd->add_subcommand("bm25", "Inverted index with BM25 scoring");
            cmd->add_option("--corpus", o->corpus, "Passages JSONL")->required();
            cmd->add_option("--output", o->output, "Index file to write")->required();
            cmd->add_option("--k1", o->k1, "Term-frequency saturation");
            cmd->add_option("--b", o->b, "Length normalization");
            cmd->add_option("--seed", o->seed, "Seed recorded in artifact metadata");
            cmd->callback([o, meta_for]() {
                Corpus corpus = read_passages_file(o->corpus);
                InvertedIndex index = InvertedIndex::build(corpus, Bm25Params{o->k1, o->b});
                ArtifactMeta meta = meta_for(o->seed);
                ensure_parent(o->output);
                index.save_file(o->output, &meta);
                std::cout << "indexed " << index.doc_count() << " passages, "
                          << index.postings().size() << " terms\n";
            });
        }

        {
            struct Opts {
                std::string corpus, output;
                ProviderOpts provider;
                std::uint64_t seed = 0;
            };
            auto o = std::make_shared<Opts>();
            auto* cmd = index_cmd->add_subcommand(
                "dense", "Flat single-vector index searched by exhaustive dot product");
            cmd->add_option("--corpus", o->corpus, "Passages JSONL")->required();
            cmd->add_option("--output", o->output, "Matrix file to write")->required();
            add_provider_options(cmd, o->provider);
            cmd->add_option("--seed", o->seed, "Seed recorded in artifact metadata");
            cmd->callback([o, meta_for]() {
                Corpus corpus = read_passages_file(o->corpus);
                auto provider = make_provider(o->provider);
                DenseIndex index = DenseIndex::build(corpus, *provider);
                ArtifactMeta meta = meta_for(o->seed);
                ensure_parent(o->output);
                index.save_matrix_file(o->output, &meta);
                std::cout << "embedded " << index.size() << " passages at dim " << index.dim()
                          << " with " << provider->name() << "\n";
            });
        }

        {
            struct Opts {
                std::string corpus, output;
                std::size_t dim = 32, max_tokens = 32;
                int bits = 2;
                std::uint32_t centroids = 0;
                std::uint64_t embed_seed = 0, seed = 0;
            };
            auto o = std::make_shared<Opts>();
            auto* cmd = index_cmd->add_subcommand(
                "colbert", "Compressed multi-vector index scored by MaxSim");
            cmd->add_option("--corpus", o->corpus, "Passages JSONL")->required();
            cmd->add_option("--output", o->output, "Index file to write")->required();
            cmd->add_option("--dim", o->dim, "Token vector dimension");
            cmd->add_option("--max-tokens", o->max_tokens, "Per-passage token vector cap");
            cmd->add_option("--bits", o->bits, "Residual bits per dimension")
                ->check(CLI::IsMember({1, 2, 4, 8}));
            cmd->add_option("--centroids", o->centroids,
                            "Centroid count (0 picks a power of two from the collection size)");
            cmd->add_option("--embed-seed", o->embed_seed, "Feature-hash seed");
            cmd->add_option("--seed", o->seed, "Clustering seed");
            cmd->callback([o, meta_for]() {
                Corpus corpus = read_passages_file(o->corpus);
                std::vector<MultiVectorDoc> docs;
                docs.reserve(corpus.size());
                std::size_t total = 0;
                for (const auto& p : corpus.passages()) {
                    MultiVectorDoc doc{
                        p.id, pseudo_token_vectors(p.content, o->dim, o->embed_seed,
                                                   o->max_tokens)};
                    total += doc.token_vectors.size();
                    docs.push_back(std::move(doc));
                }
                std::uint32_t n_centroids =
                    o->centroids > 0 ? o->centroids : default_centroid_count(total);
                CompressedMultiVectorIndex index =
                    CompressedMultiVectorIndex::build(docs, o->bits, n_centroids, o->seed);
                ArtifactMeta meta = meta_for(o->seed);
                ensure_parent(o->output);
                index.save_file(o->output, meta);
                StorageReport storage = index.storage();
                std::cout << "compressed " << index.vector_count() << " token vectors ("
                          << index.centroid_count() << " centroids, " << index.bits()
                          << " bits): " << storage.bytes_total << " bytes, "
                          << storage.bytes_per_vector << " per vector\n";
            });
        }
    }

    // --- mine -------------------------------------------------------------------
    {
        struct Opts {
            std::string corpus, queries, output, qrels;
            std::string retriever = "dense";
            ProviderOpts provider;
            std::size_t n_neg = 7, pool_depth = 40;
            std::uint64_t seed = 0;
        };
        auto o = std::make_shared<Opts>();
        auto* cmd = app.add_subcommand("mine", "Mine hard negatives for each kept query");
        cmd->add_option("--corpus", o->corpus, "Passages JSONL")->required();
        cmd->add_option("--queries", o->queries, "Kept queries JSONL")->required();
        cmd->add_option("--output", o->output, "Training examples JSONL")->required();
        cmd->add_option("--qrels", o->qrels,
                        "Positives from this qrels TSV instead of each query's source passage");
        cmd->add_option("--retriever", o->retriever, "Retriever that proposes negatives")
            ->check(CLI::IsMember({"bm25", "dense"}));
        add_provider_options(cmd, o->provider);
        cmd->add_option("--n-neg", o->n_neg, "Hard negatives per example")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--pool-depth", o->pool_depth, "Retrieval depth of the candidate pool")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--seed", o->seed, "Seed for shortfall padding");
        cmd->callback([o, meta_for]() {
            Corpus corpus = read_passages_file(o->corpus);
            std::vector<SyntheticQuery> queries = read_queries_file(o->queries);
            std::map<std::string, std::set<std::string>> positives =
                o->qrels.empty() ? positives_from_queries(queries)
                                 : positives_from_qrels(Judgments::load_file(o->qrels));
            auto retriever = make_reference_retriever(o->retriever, o->provider, corpus);
            std::vector<TrainingExample> examples = mine_hard_negatives(
                queries, positives, *retriever, o->n_neg, o->pool_depth, corpus, o->seed);
            ArtifactMeta meta = meta_for(o->seed);
            ensure_parent(o->output);
            write_examples_file(o->output, examples, &meta);
            std::cout << "mined " << examples.size() << " examples with " << o->n_neg
                      << " negatives each\n";
        });
    }

    // --- pairs -------------------------------------------------------------------
    {
        struct Opts {
            std::string corpus, queries, output;
            double enc_ratio = 0.30, dec_ratio = 0.45;
            std::uint64_t seed = 0;
        };
        auto o = std::make_shared<Opts>();
        auto* cmd = app.add_subcommand(
            "pairs", "Build masked query-as-context pre-training pairs");
        cmd->add_option("--corpus", o->corpus, "Passages JSONL")->required();
        cmd->add_option("--queries", o->queries, "Kept queries JSONL")->required();
        cmd->add_option("--output", o->output, "Pre-training pairs JSONL")->required();
        cmd->add_option("--enc-ratio", o->enc_ratio, "Passage-side mask ratio");
        cmd->add_option("--dec-ratio", o->dec_ratio, "Query-side mask ratio");
        cmd->add_option("--seed", o->seed, "Sampling and masking seed");
        cmd->callback([o, meta_for]() {
            Corpus corpus = read_passages_file(o->corpus);
            std::vector<SyntheticQuery> queries = read_queries_file(o->queries);
            std::size_t skipped = 0;
            std::vector<PretrainPair> pairs = build_pretrain_pairs(
                corpus, queries, MaskRatios{o->enc_ratio, o->dec_ratio}, o->seed, &skipped);
            ArtifactMeta meta = meta_for(o->seed);
            ensure_parent(o->output);
            serialize_pairs_file(o->output, pairs, &meta);
            std::cout << "built " << pairs.size() << " pairs (" << skipped
                      << " passages without kept queries)\n";
        });
    }

    // --- train-toy ------------------------------------------------------------------
    {
        struct Opts {
            std::string corpus, queries, examples, encoder_out, trace_out;
            std::size_t dim = 16, steps = 500, batch_size = 8;
            double lr = 2.0, momentum = 0.0, temperature = 1.0;
            bool no_in_batch = false;
            std::uint64_t seed = 0;
        };
        auto o = std::make_shared<Opts>();
        auto* cmd = app.add_subcommand(
            "train-toy", "Fine-tune the toy encoder with the InfoNCE objective");
        cmd->add_option("--corpus", o->corpus, "Passages JSONL")->required();
        cmd->add_option("--queries", o->queries, "Kept queries JSONL")->required();
        cmd->add_option("--examples", o->examples, "Training examples JSONL")->required();
        cmd->add_option("--encoder-out", o->encoder_out, "Trained encoder file")->required();
        cmd->add_option("--trace-out", o->trace_out, "Optional per-step loss CSV");
        cmd->add_option("--dim", o->dim, "Encoder dimension");
        cmd->add_option("--steps", o->steps, "Training steps")->check(CLI::PositiveNumber);
        cmd->add_option("--batch-size", o->batch_size, "Examples per step")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--lr", o->lr, "Learning rate");
        cmd->add_option("--momentum", o->momentum, "SGD momentum");
        cmd->add_option("--temperature", o->temperature, "Softmax temperature");
        cmd->add_flag("--no-in-batch", o->no_in_batch, "Disable in-batch negatives");
        cmd->add_option("--seed", o->seed, "Init and shuffling seed");
        cmd->callback([o, meta_for]() {
            Corpus corpus = read_passages_file(o->corpus);
            std::vector<SyntheticQuery> queries = read_queries_file(o->queries);
            std::vector<TrainingExample> examples = read_examples_file(o->examples);
            ToyEncoder encoder = ToyEncoder::from_corpus(corpus, o->dim, o->seed);
            TrainOptions opts;
            opts.steps = o->steps;
            opts.batch_size = o->batch_size;
            opts.learning_rate = o->lr;
            opts.momentum = o->momentum;
            opts.temperature = o->temperature;
            opts.use_in_batch = !o->no_in_batch;
            opts.seed = o->seed;
            TrainResult result = train_toy(corpus, queries, examples, encoder, opts);
            ArtifactMeta meta = meta_for(o->seed);
            ensure_parent(o->encoder_out);
            encoder.save_file(o->encoder_out, meta);
            if (!o->trace_out.empty()) {
                ensure_parent(o->trace_out);
                write_trace_file(o->trace_out, result.trace, &meta);
            }
            char first[32] = "-", last[32] = "-";
            if (!result.trace.empty()) {
                std::snprintf(first, sizeof(first), "%.6f", result.trace.front().loss);
                std::snprintf(last, sizeof(last), "%.6f", result.trace.back().loss);
            }
            std::cout << "trained " << encoder.vocabulary().size() << " tokens at dim "
                      << encoder.dim() << " for " << result.trace.size() << " steps; loss "
                      << first << " -> " << last << "\n";
        });
    }

    // --- search ----------------------------------------------------------------------
    {
        struct Opts {
            std::string type, index, corpus, query, queries, run_out, tag;
            ProviderOpts provider;
            std::size_t k = 10, max_tokens = 64;
            std::uint64_t seed = 0;
        };
        auto o = std::make_shared<Opts>();
        auto* cmd = app.add_subcommand("search", "Query a saved index");
        cmd->add_option("--type", o->type, "Index type")
            ->required()
            ->check(CLI::IsMember({"bm25", "dense", "colbert"}));
        cmd->add_option("--index", o->index, "Index file")->required();
        cmd->add_option("--corpus", o->corpus,
                        "Passages JSONL the dense matrix was built from (dense only)");
        cmd->add_option("--query", o->query, "One query text, results to stdout");
        cmd->add_option("--queries", o->queries, "Queries JSONL for a batch run");
        cmd->add_option("--run-out", o->run_out, "Run file to write in batch mode");
        cmd->add_option("--tag", o->tag, "Run tag (defaults to the index type)");
        add_provider_options(cmd, o->provider);
        cmd->add_option("--k", o->k, "Results per query")->check(CLI::PositiveNumber);
        cmd->add_option("--max-tokens", o->max_tokens, "Query token cap (colbert)");
        cmd->add_option("--seed", o->seed, "Seed recorded in artifact metadata");
        cmd->callback([o, meta_for]() {
            if (o->query.empty() == o->queries.empty()) {
                throw CLI::ValidationError("search needs exactly one of --query and --queries");
            }
            std::function<Ranking(const std::string&, std::size_t)> search;
            if (o->type == "bm25") {
                auto index = std::make_shared<InvertedIndex>(InvertedIndex::load_file(o->index));
                search = [index](const std::string& text, std::size_t k) {
                    return index->search(text, k);
                };
            } else if (o->type == "dense") {
                if (o->corpus.empty()) {
                    throw CLI::ValidationError("dense search needs --corpus for the passage ids");
                }
                Corpus corpus = read_passages_file(o->corpus);
                std::vector<std::string> ids;
                for (const auto& p : corpus.passages()) ids.push_back(p.id);
                auto index = std::make_shared<DenseIndex>(
                    DenseIndex::load_matrix_file(o->index, std::move(ids)));
                auto provider = make_provider(o->provider);
                if (provider->dim() != index->dim()) {
                    throw DataError("provider dim " + std::to_string(provider->dim()) +
                                    " does not match index dim " + std::to_string(index->dim()));
                }
                search = [index, provider](const std::string& text, std::size_t k) {
                    return index->search(provider->embed_query(text), k);
                };
            } else {
                auto index = std::make_shared<CompressedMultiVectorIndex>(
                    CompressedMultiVectorIndex::load_file(o->index));
                std::size_t dim = index->dim();
                std::uint64_t embed_seed = o->provider.embed_seed;
                std::size_t max_tokens = o->max_tokens;
                search = [index, dim, embed_seed, max_tokens](const std::string& text,
                                                              std::size_t k) {
                    return index->search(pseudo_token_vectors(text, dim, embed_seed, max_tokens),
                                         k);
                };
            }
            if (!o->query.empty()) {
                Ranking ranking = search(o->query, o->k);
                for (std::size_t i = 0; i < ranking.size(); ++i) {
                    char score[32];
                    std::snprintf(score, sizeof(score), "%.6f", ranking[i].score);
                    std::cout << (i + 1) << "\t" << ranking[i].passage_id << "\t" << score
                              << "\n";
                }
                return;
            }
            if (o->run_out.empty()) {
                throw CLI::ValidationError("batch search needs --run-out");
            }
            std::vector<SyntheticQuery> queries = read_queries_file(o->queries);
            Run run = run_searches(search, queries, o->k);
            ArtifactMeta meta = meta_for(o->seed);
            ensure_parent(o->run_out);
            run.save_file(o->run_out, o->tag.empty() ? o->type : o->tag, &meta);
            std::cout << "wrote " << run.query_count() << " rankings to " << o->run_out << "\n";
        });
    }

    // --- eval -------------------------------------------------------------------------
    {
        struct Opts {
            std::string run, qrels, queries, corpus, text_out, json_out;
            std::vector<std::size_t> ks{10, 100};
            std::size_t hit_k = 10;
            bool include_zero_relevant = false;
            std::uint64_t seed = 0;
        };
        auto o = std::make_shared<Opts>();
        auto* cmd = app.add_subcommand("eval", "Score a run against qrels");
        cmd->add_option("--run", o->run, "Run file")->required();
        cmd->add_option("--qrels", o->qrels, "Qrels TSV")->required();
        cmd->add_option("--ks", o->ks, "Cutoffs to evaluate");
        cmd->add_option("--queries", o->queries,
                        "Queries JSONL for hit rates (needs --corpus as well)");
        cmd->add_option("--corpus", o->corpus, "Passages JSONL for hit rates");
        cmd->add_option("--hit-k", o->hit_k, "Hit-rate cutoff")->check(CLI::PositiveNumber);
        cmd->add_flag("--include-zero-relevant", o->include_zero_relevant,
                      "Average queries without relevant passages as zeros");
        cmd->add_option("--text-out", o->text_out, "Write the table to this file");
        cmd->add_option("--json-out", o->json_out, "Write the metrics as JSON");
        cmd->add_option("--seed", o->seed, "Seed recorded in artifact metadata");
        cmd->callback([o, meta_for]() {
            Run run = Run::load_file(o->run);
            Judgments qrels = Judgments::load_file(o->qrels);
            MetricOptions mopts;
            mopts.include_zero_relevant = o->include_zero_relevant;
            MetricTable table = evaluate_run(run, qrels, o->ks, mopts);
            std::optional<HitRates> hits;
            if (!o->queries.empty() || !o->corpus.empty()) {
                if (o->queries.empty() || o->corpus.empty()) {
                    throw CLI::ValidationError("hit rates need both --queries and --corpus");
                }
                Corpus corpus = read_passages_file(o->corpus);
                std::vector<SyntheticQuery> queries = read_queries_file(o->queries);
                hits = hit_rates(run, sources_for(queries, corpus), passage_doc_map(corpus),
                                 o->hit_k);
            }
            std::string text = eval_report_text(table, hits, o->hit_k);
            std::cout << text;
            ArtifactMeta meta = meta_for(o->seed);
            if (!o->text_out.empty()) {
                ensure_parent(o->text_out);
                write_text_file(o->text_out, meta.to_comment_line() + "\n" + text);
            }
            if (!o->json_out.empty()) {
                write_json_artifact(o->json_out, eval_report_json(table, hits, o->hit_k), meta);
            }
        });
    }

    // --- storage-report ------------------------------------------------------------------
    {
        struct Opts {
            std::string index, json_out;
            std::uint64_t seed = 0;
        };
        auto o = std::make_shared<Opts>();
        auto* cmd = app.add_subcommand("storage-report",
                                       "Show the storage breakdown of a compressed index");
        cmd->add_option("--index", o->index, "Compressed multi-vector index file")->required();
        cmd->add_option("--json-out", o->json_out, "Write the breakdown as JSON");
        cmd->add_option("--seed", o->seed, "Seed recorded in artifact metadata");
        cmd->callback([o, meta_for]() {
            ArtifactMeta index_meta;
            CompressedMultiVectorIndex index =
                CompressedMultiVectorIndex::load_file(o->index, &index_meta);
            StorageReport storage = index.storage();
            std::cout << "vectors:         " << index.vector_count() << " (dim " << index.dim()
                      << ", bits " << index.bits() << ", centroids " << index.centroid_count()
                      << ")\n";
            std::cout << "centroid bytes:  " << storage.bytes_centroids << "\n";
            std::cout << "id bytes:        " << storage.bytes_ids << "\n";
            std::cout << "residual bytes:  " << storage.bytes_residuals << "\n";
            std::cout << "total bytes:     " << storage.bytes_total << "\n";
            std::cout << "bytes/vector:    " << storage.bytes_per_vector << "\n";
            if (!o->json_out.empty()) {
                ordered_json j{{"index_meta", index_meta.to_string()},
                               {"vectors", index.vector_count()},
                               {"dim", index.dim()},
                               {"bits", index.bits()},
                               {"centroids", index.centroid_count()},
                               {"bytes_centroids", storage.bytes_centroids},
                               {"bytes_ids", storage.bytes_ids},
                               {"bytes_residuals", storage.bytes_residuals},
                               {"bytes_total", storage.bytes_total},
                               {"bytes_per_vector", storage.bytes_per_vector}};
                write_json_artifact(o->json_out, j.dump(2), meta_for(o->seed));
            }
        });
    }

    // --- demo ---------------------------------------------------------------------------
    {
        auto o = std::make_shared<DemoOpts>();
        auto* cmd = app.add_subcommand(
            "demo", "Run the whole pipeline on a seeded toy collection");
        cmd->add_option("--output-dir", o->output_dir, "Artifact directory");
        cmd->add_option("--seed", o->seed, "Seed for every stage");
        cmd->add_option("--docs", o->docs, "Toy documents")->check(CLI::PositiveNumber);
        cmd->add_option("--sections", o->sections, "Sections per document")
            ->check(CLI::PositiveNumber);
        cmd->callback([o, meta_for]() { run_demo(*o, meta_for(o->seed)); });
    }

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace vilegal
