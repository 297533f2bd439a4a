#pragma once

#include "vilegal/corpus.hpp"
#include "vilegal/dense.hpp"
#include "vilegal/io.hpp"
#include "vilegal/query.hpp"
#include "vilegal/retriever.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vilegal {

struct TrainingExample {
    std::string query_id;
    std::string positive_id;
    std::vector<std::string> hard_negative_ids; // distinct, never a positive of the query
    std::string source = "synthetic";
};

// For each (query, positive) pair: top pool_depth retrieval results minus all
// of the query's positives, first n_neg kept; shortfalls are padded with
// seeded uniform draws from the non-positive corpus.
std::vector<TrainingExample> mine_hard_negatives(
    const std::vector<SyntheticQuery>& queries,
    const std::map<std::string, std::set<std::string>>& positives, const Retriever& retriever,
    std::size_t n_neg, std::size_t pool_depth, const Corpus& corpus, std::uint64_t seed);

// Examples travel as JSONL {"query_id","positive_id","negative_ids":[...],"source"}.
void write_examples(std::ostream& out, const std::vector<TrainingExample>& examples,
                    const ArtifactMeta* meta = nullptr);
void write_examples_file(const std::string& path, const std::vector<TrainingExample>& examples,
                         const ArtifactMeta* meta = nullptr);
std::vector<TrainingExample> read_examples(std::istream& in);
std::vector<TrainingExample> read_examples_file(const std::string& path);

// One InfoNCE batch in 64-bit precision. negatives holds batch_size blocks of
// n_neg vectors each. With use_in_batch set, the other examples' positives
// join each example's negative set.
struct InfoNceBatch {
    std::size_t batch_size = 0;
    std::size_t dim = 0;
    std::size_t n_neg = 0;
    std::vector<double> queries;   // batch_size x dim
    std::vector<double> positives; // batch_size x dim
    std::vector<double> negatives; // batch_size x n_neg x dim
    double temperature = 1.0;
    bool use_in_batch = false;
};

// Mean over the batch of -log(exp(q.p+/t) / sum_p exp(q.p/t)).
double infonce_loss(const InfoNceBatch& batch);

struct InfoNceGrad {
    std::vector<double> queries;   // same shapes as the batch
    std::vector<double> positives;
    std::vector<double> negatives;
};

InfoNceGrad infonce_grad(const InfoNceBatch& batch);

// Desk-scale trainable encoder: one d-dimensional vector per vocabulary
// token; a text encodes to the L2-normalized mean of its token vectors
// (zero vector when no token is known or the mean is zero).
class ToyEncoder : public EmbeddingProvider {
public:
    ToyEncoder(std::vector<std::string> vocabulary, std::size_t dim, std::uint64_t seed);
    static ToyEncoder from_corpus(const Corpus& corpus, std::size_t dim, std::uint64_t seed);

    std::size_t dim() const override { return dim_; }
    std::vector<float> embed_query(const std::string& text) const override;
    std::vector<float> embed_passage(const Passage& p) const override;
    std::string name() const override { return "toy"; }

    const std::vector<std::string>& vocabulary() const { return vocabulary_; }
    std::optional<std::size_t> token_index(const std::string& token) const;
    const std::vector<double>& table() const { return table_; }
    std::vector<double>& mutable_table() { return table_; }

    struct Encoded {
        std::vector<std::size_t> token_indices; // known tokens only
        std::vector<double> mean;               // pre-normalization
        double mean_norm = 0.0;
        std::vector<double> unit;               // the encoding; zero if degenerate
    };
    Encoded encode_indices(std::vector<std::size_t> token_indices) const;
    Encoded encode_tokens(const std::vector<std::string>& folded_tokens) const;
    Encoded encode_text(const std::string& text) const;
    // Known-token indices for a text, in order, duplicates kept.
    std::vector<std::size_t> resolve_tokens(const std::string& text) const;

    // Chain rule through normalize(mean(token vectors)); no-op for the
    // degenerate zero-mean case. grad_table has table() layout.
    void accumulate_grad(const Encoded& enc, const std::vector<double>& dloss_dunit,
                         std::vector<double>& grad_table) const;

    // Binary encoder file: magic VLTY, version, metadata string, u32 vocab
    // size, u32 dim, then per token a length-prefixed string and dim f64
    // values, little-endian.
    void save(std::ostream& out, const ArtifactMeta& meta) const;
    void save_file(const std::string& path, const ArtifactMeta& meta) const;
    static ToyEncoder load(std::istream& in, ArtifactMeta* meta_out = nullptr);
    static ToyEncoder load_file(const std::string& path, ArtifactMeta* meta_out = nullptr);

private:
    std::vector<std::string> vocabulary_;
    std::map<std::string, std::size_t> index_;
    std::size_t dim_;
    std::vector<double> table_; // vocabulary.size() x dim
};

struct TrainOptions {
    std::size_t steps = 500;
    std::size_t batch_size = 8;
    double learning_rate = 2.0;
    double momentum = 0.0;
    double temperature = 1.0;
    bool use_in_batch = true;
    std::uint64_t seed = 0;
};

struct TracePoint {
    std::size_t step = 0; // 1-based
    double loss = 0.0;
};

struct TrainResult {
    std::vector<TracePoint> trace;
};

// Plain SGD over seeded-shuffled batches of InfoNCE loss; one step per batch.
// queries supplies the text behind each example's query_id.
TrainResult train_toy(const Corpus& corpus, const std::vector<SyntheticQuery>& queries,
                      const std::vector<TrainingExample>& examples, ToyEncoder& encoder,
                      const TrainOptions& options);

// "step,loss" CSV with an optional leading metadata comment.
void write_trace(std::ostream& out, const std::vector<TracePoint>& trace,
                 const ArtifactMeta* meta = nullptr);
void write_trace_file(const std::string& path, const std::vector<TracePoint>& trace,
                      const ArtifactMeta* meta = nullptr);

} // namespace vilegal
