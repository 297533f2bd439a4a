#pragma once

#include "vilegal/io.hpp"
#include "vilegal/retriever.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace vilegal {

// One late-interaction document: a bag of per-token vectors. Rows are
// expected to be L2-normalized (within 1e-6) so MaxSim terms are cosines.
struct MultiVectorDoc {
    std::string passage_id;
    std::vector<std::vector<float>> token_vectors;
};

// Sum over query rows of the best dot product against any doc row.
double maxsim_score(const std::vector<std::vector<float>>& query_vectors,
                    const MultiVectorDoc& doc);

// Deterministic per-token vectors: each token hashes to a seeded dense unit
// direction, so repeated tokens share a row and distinct tokens land nearly
// orthogonal. Token count is capped at max_tokens.
std::vector<std::vector<float>> pseudo_token_vectors(const std::string& text, std::size_t d,
                                                     std::uint64_t seed,
                                                     std::size_t max_tokens = 64);

// Per-dimension uniform scalar quantizer over an observed residual range.
// 2^bits buckets span [lo, lo + buckets*width]; decode returns the bucket
// center. A degenerate dimension (min == max) has width 0 and decodes to lo.
struct ResidualQuantizer {
    int bits = 2;
    std::vector<double> lo;
    std::vector<double> width;

    std::size_t dim() const { return lo.size(); }
    std::uint32_t bucket_count() const { return 1u << bits; }
    std::uint32_t encode_value(std::size_t dim_index, double value) const;
    double decode_value(std::size_t dim_index, std::uint32_t code) const;
    // Bucket centers for one dimension, strictly increasing when width > 0.
    std::vector<double> centers(std::size_t dim_index) const;

    std::size_t code_bytes() const; // ceil(dim*bits/8)
    void pack(const std::vector<std::uint32_t>& codes, std::uint8_t* out) const;
    std::uint32_t unpack(const std::uint8_t* bytes, std::size_t dim_index) const;
};

// Fits per-dimension buckets from residual rows (n x d). bits must be one of
// {1,2,4,8} and the sample must be non-empty.
ResidualQuantizer fit_quantizer(const std::vector<std::vector<double>>& residual_rows, int bits);

struct StorageReport {
    std::uint64_t bytes_total = 0;
    std::uint64_t bytes_centroids = 0;
    std::uint64_t bytes_ids = 0;
    std::uint64_t bytes_residuals = 0;
    std::uint64_t bytes_per_vector = 0;
};

struct DocRange {
    std::string passage_id;
    std::uint32_t start = 0;
    std::uint32_t count = 0;
};

// Smallest power of two >= 4*sqrt(total_vectors), capped at 2^16 and at
// total_vectors itself.
std::uint32_t default_centroid_count(std::size_t total_vectors);

// Multi-vector index storing each token vector as a centroid id plus a
// quantized residual. Searches decode every vector and run exact MaxSim.
class CompressedMultiVectorIndex {
public:
    static CompressedMultiVectorIndex build(const std::vector<MultiVectorDoc>& docs, int bits,
                                            std::uint32_t n_centroids, std::uint64_t seed);

    Ranking search(const std::vector<std::vector<float>>& query_vectors,
                   std::size_t top_k) const;

    std::vector<float> decode_vector(std::size_t entry_index) const;
    std::vector<std::vector<float>> decode_doc(const std::string& passage_id) const;

    StorageReport storage() const;

    std::size_t dim() const { return dim_; }
    int bits() const { return quantizer_.bits; }
    std::uint32_t centroid_count() const { return centroid_count_; }
    std::size_t vector_count() const { return centroid_ids_.size(); }
    const std::vector<DocRange>& docs() const { return docs_; }
    const ResidualQuantizer& quantizer() const { return quantizer_; }

    void save(std::ostream& out, const ArtifactMeta& meta) const;
    void save_file(const std::string& path, const ArtifactMeta& meta) const;
    static CompressedMultiVectorIndex load(std::istream& in, ArtifactMeta* meta_out = nullptr);
    static CompressedMultiVectorIndex load_file(const std::string& path,
                                                ArtifactMeta* meta_out = nullptr);

private:
    std::size_t dim_ = 0;
    std::uint32_t centroid_count_ = 0;
    std::vector<float> centroids_; // centroid_count x dim, row-major
    ResidualQuantizer quantizer_;
    std::vector<std::uint32_t> centroid_ids_;   // one per stored vector
    std::vector<std::uint8_t> codes_;           // vector_count x code_bytes
    std::vector<DocRange> docs_;
};

} // namespace vilegal
