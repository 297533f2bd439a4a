#include "vilegal/dense.hpp"

#include "vilegal/errors.hpp"
#include "vilegal/hash.hpp"
#include "vilegal/text.hpp"

#include <cmath>
#include <fstream>

namespace vilegal {

double dot(const float* a, const float* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

std::vector<float> pseudo_embed(const std::string& text, std::size_t d, std::uint64_t seed) {
    if (d < 2) throw DataError("pseudo_embed requires dimension >= 2");
    std::vector<double> acc(d, 0.0);
    for (const std::string& token : tokenize_folded(text)) {
        std::uint64_t h = splitmix64(fnv1a64(token) ^ seed);
        std::size_t bucket = static_cast<std::size_t>(h % d);
        double sign = (h >> 63) != 0 ? -1.0 : 1.0;
        acc[bucket] += sign;
    }
    double norm_sq = 0.0;
    for (double v : acc) norm_sq += v * v;
    std::vector<float> out(d, 0.0f);
    if (norm_sq > 0.0) {
        double inv = 1.0 / std::sqrt(norm_sq);
        for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<float>(acc[i] * inv);
    }
    return out;
}

DenseIndex DenseIndex::build(const Corpus& corpus, const EmbeddingProvider& provider) {
    if (corpus.empty()) throw DataError("cannot build dense index over an empty corpus");
    if (provider.dim() < 2) throw DataError("embedding provider dimension must be >= 2");
    DenseIndex index;
    index.dim_ = provider.dim();
    index.ids_.reserve(corpus.size());
    index.matrix_.reserve(corpus.size() * index.dim_);
    for (const Passage& p : corpus.passages()) {
        std::vector<float> v;
        try {
            v = provider.embed_passage(p);
        } catch (const std::exception& e) {
            throw DataError("embedding failed for passage " + p.id + ": " + e.what());
        }
        if (v.size() != index.dim_) {
            throw DataError("embedding for passage " + p.id + " has dimension " +
                            std::to_string(v.size()) + ", expected " + std::to_string(index.dim_));
        }
        index.ids_.push_back(p.id);
        index.matrix_.insert(index.matrix_.end(), v.begin(), v.end());
    }
    return index;
}

DenseIndex DenseIndex::from_rows(std::vector<std::string> ids, std::vector<float> matrix,
                                 std::size_t dim) {
    if (dim < 2) throw DataError("dense index dimension must be >= 2");
    if (matrix.size() != ids.size() * dim) throw DataError("dense matrix shape mismatch");
    DenseIndex index;
    index.ids_ = std::move(ids);
    index.matrix_ = std::move(matrix);
    index.dim_ = dim;
    return index;
}

Ranking DenseIndex::search(const std::vector<float>& query_vector, std::size_t top_k) const {
    if (query_vector.size() != dim_) {
        throw DataError("query vector dimension " + std::to_string(query_vector.size()) +
                        " does not match index dimension " + std::to_string(dim_));
    }
    Ranking ranked;
    ranked.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        ranked.push_back({ids_[i], dot(query_vector.data(), row(i), dim_)});
    }
    rank_and_truncate(ranked, top_k);
    return ranked;
}

void DenseIndex::save_matrix(std::ostream& out, const ArtifactMeta* meta) const {
    put_bytes(out, "VLDE", 4);
    put_u8(out, 1);
    put_string(out, meta != nullptr ? meta->to_string() : std::string());
    put_u32(out, static_cast<std::uint32_t>(size()));
    put_u32(out, static_cast<std::uint32_t>(dim_));
    put_bytes(out, matrix_.data(), matrix_.size() * sizeof(float));
}

void DenseIndex::save_matrix_file(const std::string& path, const ArtifactMeta* meta) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    save_matrix(out, meta);
    if (!out.good()) throw DataError("write failed: " + path);
}

DenseIndex DenseIndex::load_matrix(std::istream& in, std::vector<std::string> ids,
                                   ArtifactMeta* meta_out) {
    expect_magic(in, "VLDE", "dense matrix");
    std::uint8_t version = get_u8(in);
    if (version != 1) throw DataError("unsupported VLDE version " + std::to_string(version));
    std::string meta_line = get_string(in);
    if (meta_out != nullptr) {
        if (auto parsed = ArtifactMeta::parse(meta_line)) *meta_out = *parsed;
    }
    std::uint32_t count = get_u32(in);
    std::uint32_t dim = get_u32(in);
    if (count != ids.size()) {
        throw DataError("VLDE row count " + std::to_string(count) + " does not match corpus size " +
                        std::to_string(ids.size()));
    }
    std::vector<float> matrix(static_cast<std::size_t>(count) * dim);
    if (!matrix.empty()) get_bytes(in, matrix.data(), matrix.size() * sizeof(float));
    return from_rows(std::move(ids), std::move(matrix), dim);
}

DenseIndex DenseIndex::load_matrix_file(const std::string& path, std::vector<std::string> ids,
                                        ArtifactMeta* meta_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return load_matrix(in, std::move(ids), meta_out);
}

} // namespace vilegal
