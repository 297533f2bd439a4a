#pragma once

#include "vilegal/corpus.hpp"
#include "vilegal/io.hpp"
#include "vilegal/retriever.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace vilegal {

// Shared encoder abstraction: filtering, mining, training and evaluation all
// consume providers through this interface so real encoder outputs can be
// swapped in for the deterministic stand-ins.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dim() const = 0;
    virtual std::vector<float> embed_query(const std::string& text) const = 0;
    virtual std::vector<float> embed_passage(const Passage& p) const = 0;
    virtual std::string name() const = 0;
};

// Deterministic feature-hash embedding: case-folded whitespace tokens hashed
// into d signed buckets, L2-normalized. Empty text maps to the zero vector.
std::vector<float> pseudo_embed(const std::string& text, std::size_t d, std::uint64_t seed);

class PseudoEmbeddingProvider : public EmbeddingProvider {
public:
    PseudoEmbeddingProvider(std::size_t d, std::uint64_t seed) : dim_(d), seed_(seed) {}
    std::size_t dim() const override { return dim_; }
    std::vector<float> embed_query(const std::string& text) const override {
        return pseudo_embed(text, dim_, seed_);
    }
    std::vector<float> embed_passage(const Passage& p) const override {
        return pseudo_embed(p.content, dim_, seed_);
    }
    std::string name() const override { return "pseudo-hash"; }
    std::uint64_t seed() const { return seed_; }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

// Flat single-vector index scored by exhaustive dot product.
class DenseIndex {
public:
    static DenseIndex build(const Corpus& corpus, const EmbeddingProvider& provider);
    static DenseIndex from_rows(std::vector<std::string> ids, std::vector<float> matrix,
                                std::size_t dim);

    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const float* row(std::size_t ordinal) const { return matrix_.data() + ordinal * dim_; }

    // Exhaustive top_k by dot product, ties by passage id ascending.
    // Throws DataError on dimension mismatch.
    Ranking search(const std::vector<float>& query_vector, std::size_t top_k) const;

    // VLDE matrix format (magic, version, metadata string, u32 count, u32 dim,
    // count*dim little-endian f32). Ids live in the corpus, ordinal-aligned,
    // so externally computed matrices can be dropped in.
    void save_matrix(std::ostream& out, const ArtifactMeta* meta = nullptr) const;
    void save_matrix_file(const std::string& path, const ArtifactMeta* meta = nullptr) const;
    static DenseIndex load_matrix(std::istream& in, std::vector<std::string> ids,
                                  ArtifactMeta* meta_out = nullptr);
    static DenseIndex load_matrix_file(const std::string& path, std::vector<std::string> ids,
                                       ArtifactMeta* meta_out = nullptr);

private:
    std::vector<std::string> ids_;
    std::vector<float> matrix_; // row-major size() x dim()
    std::size_t dim_ = 0;
};

// Retriever adapter: embeds the query with the provider, searches the index.
class DenseRetriever : public Retriever {
public:
    DenseRetriever(std::shared_ptr<const DenseIndex> index,
                   std::shared_ptr<const EmbeddingProvider> provider)
        : index_(std::move(index)), provider_(std::move(provider)) {}

    Ranking search(const std::string& query_text, std::size_t top_k) const override {
        return index_->search(provider_->embed_query(query_text), top_k);
    }
    std::string name() const override { return "dense/" + provider_->name(); }

private:
    std::shared_ptr<const DenseIndex> index_;
    std::shared_ptr<const EmbeddingProvider> provider_;
};

double dot(const float* a, const float* b, std::size_t n);

} // namespace vilegal
