#include "vilegal/late_interaction.hpp"

#include "vilegal/errors.hpp"
#include "vilegal/hash.hpp"
#include "vilegal/rng.hpp"
#include "vilegal/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace vilegal {

namespace {

double dot_f(const float* a, const float* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

double sq_dist(const float* a, const float* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += diff * diff;
    }
    return acc;
}

bool valid_bits(int bits) {
    return bits == 1 || bits == 2 || bits == 4 || bits == 8;
}

void require_bits(int bits) {
    if (!valid_bits(bits)) {
        throw DataError("bits must be one of 1, 2, 4, 8 (got " + std::to_string(bits) + ")");
    }
}

double maxsim_rows(const std::vector<std::vector<float>>& query_vectors,
                   const float* doc_data, std::size_t doc_rows, std::size_t dim) {
    double total = 0.0;
    for (const auto& q : query_vectors) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < doc_rows; ++j) {
            best = std::max(best, dot_f(q.data(), doc_data + j * dim, dim));
        }
        total += best;
    }
    return total;
}

} // namespace

double maxsim_score(const std::vector<std::vector<float>>& query_vectors,
                    const MultiVectorDoc& doc) {
    if (query_vectors.empty()) throw DataError("maxsim: query has no token vectors");
    if (doc.token_vectors.empty()) {
        throw DataError("maxsim: document '" + doc.passage_id + "' has no token vectors");
    }
    std::size_t dim = query_vectors.front().size();
    for (const auto& q : query_vectors) {
        if (q.size() != dim) throw DataError("maxsim: inconsistent query vector dimensions");
    }
    double total = 0.0;
    for (const auto& q : query_vectors) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& d : doc.token_vectors) {
            if (d.size() != dim) {
                throw DataError("maxsim: dimension mismatch for document '" + doc.passage_id +
                                "'");
            }
            best = std::max(best, dot_f(q.data(), d.data(), dim));
        }
        total += best;
    }
    return total;
}

std::vector<std::vector<float>> pseudo_token_vectors(const std::string& text, std::size_t d,
                                                     std::uint64_t seed,
                                                     std::size_t max_tokens) {
    if (d < 2) throw DataError("token vector dimension must be at least 2");
    if (max_tokens < 1) throw DataError("max_tokens must be at least 1");
    auto tokens = tokenize_folded(text);
    if (tokens.empty()) throw DataError("cannot encode token vectors for empty text");
    if (tokens.size() > max_tokens) tokens.resize(max_tokens);
    std::vector<std::vector<float>> rows;
    rows.reserve(tokens.size());
    std::vector<double> v(d);
    for (const auto& tok : tokens) {
        // Hash the token to a dense unit direction. Distinct tokens land
        // nearly orthogonal, so MaxSim terms keep contrast even for long
        // documents, where sparse one-hot features would saturate.
        Rng rng(splitmix64(fnv1a64(tok) ^ seed));
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (auto& x : v) {
                x = rng.normal();
                norm2 += x * x;
            }
        } while (norm2 == 0.0);
        double norm = std::sqrt(norm2);
        std::vector<float> row(d);
        for (std::size_t k = 0; k < d; ++k) row[k] = static_cast<float>(v[k] / norm);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::uint32_t ResidualQuantizer::encode_value(std::size_t dim_index, double value) const {
    double w = width[dim_index];
    if (w <= 0.0) return 0;
    const long long max_code = static_cast<long long>(bucket_count()) - 1;
    long long c = static_cast<long long>(std::floor((value - lo[dim_index]) / w));
    c = std::clamp(c, 0ll, max_code);
    long long best = c;
    double best_err = std::abs(value - decode_value(dim_index, static_cast<std::uint32_t>(c)));
    for (long long cand : {c - 1, c + 1}) {
        if (cand < 0 || cand > max_code) continue;
        double err = std::abs(value - decode_value(dim_index, static_cast<std::uint32_t>(cand)));
        if (err < best_err || (err == best_err && cand < best)) {
            best = cand;
            best_err = err;
        }
    }
    return static_cast<std::uint32_t>(best);
}

double ResidualQuantizer::decode_value(std::size_t dim_index, std::uint32_t code) const {
    double w = width[dim_index];
    if (w <= 0.0) return lo[dim_index];
    return lo[dim_index] + (static_cast<double>(code) + 0.5) * w;
}

std::vector<double> ResidualQuantizer::centers(std::size_t dim_index) const {
    if (width[dim_index] <= 0.0) return {lo[dim_index]};
    std::vector<double> out;
    out.reserve(bucket_count());
    for (std::uint32_t c = 0; c < bucket_count(); ++c) {
        out.push_back(decode_value(dim_index, c));
    }
    return out;
}

std::size_t ResidualQuantizer::code_bytes() const {
    return (dim() * static_cast<std::size_t>(bits) + 7) / 8;
}

void ResidualQuantizer::pack(const std::vector<std::uint32_t>& codes, std::uint8_t* out) const {
    std::memset(out, 0, code_bytes());
    for (std::size_t k = 0; k < codes.size(); ++k) {
        std::size_t bit = k * static_cast<std::size_t>(bits);
        out[bit / 8] |= static_cast<std::uint8_t>(codes[k] << (bit % 8));
    }
}

std::uint32_t ResidualQuantizer::unpack(const std::uint8_t* bytes, std::size_t dim_index) const {
    std::size_t bit = dim_index * static_cast<std::size_t>(bits);
    std::uint32_t mask = (bits == 8) ? 0xffu : ((1u << bits) - 1u);
    return (static_cast<std::uint32_t>(bytes[bit / 8]) >> (bit % 8)) & mask;
}

ResidualQuantizer fit_quantizer(const std::vector<std::vector<double>>& residual_rows,
                                int bits) {
    require_bits(bits);
    if (residual_rows.empty()) throw DataError("quantizer requires a non-empty residual sample");
    std::size_t d = residual_rows.front().size();
    if (d == 0) throw DataError("quantizer requires at least one dimension");
    ResidualQuantizer q;
    q.bits = bits;
    q.lo.assign(d, std::numeric_limits<double>::infinity());
    std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
    for (const auto& row : residual_rows) {
        if (row.size() != d) throw DataError("quantizer sample rows have mixed dimensions");
        for (std::size_t k = 0; k < d; ++k) {
            q.lo[k] = std::min(q.lo[k], row[k]);
            hi[k] = std::max(hi[k], row[k]);
        }
    }
    q.width.resize(d);
    const double buckets = static_cast<double>(q.bucket_count());
    for (std::size_t k = 0; k < d; ++k) {
        double w = (hi[k] - q.lo[k]) / buckets;
        // Nudge up until the top of the last bucket covers the sample max, so
        // every observed value decodes within half a bucket width.
        while (w > 0.0 && q.lo[k] + buckets * w < hi[k]) {
            w = std::nextafter(w, std::numeric_limits<double>::infinity());
        }
        q.width[k] = w;
    }
    return q;
}

std::uint32_t default_centroid_count(std::size_t total_vectors) {
    if (total_vectors == 0) throw DataError("cannot size centroids for zero vectors");
    double target = 4.0 * std::sqrt(static_cast<double>(total_vectors));
    std::uint64_t c = 1;
    while (static_cast<double>(c) < target) c <<= 1;
    c = std::min<std::uint64_t>(c, 1ull << 16);
    c = std::min<std::uint64_t>(c, total_vectors);
    return static_cast<std::uint32_t>(c);
}

namespace {

// Seeded k-means on row-major data: farthest-point init, fixed 20 iterations,
// ties to the lowest index, empty clusters keep their previous centroid.
std::vector<float> run_kmeans(const std::vector<float>& data, std::size_t n, std::size_t d,
                              std::uint32_t k, std::uint64_t seed,
                              std::vector<std::uint32_t>& assignment) {
    Rng rng(seed);
    std::vector<float> centroids(static_cast<std::size_t>(k) * d);

    std::size_t first = static_cast<std::size_t>(rng.below(n));
    std::copy_n(data.data() + first * d, d, centroids.data());
    std::vector<double> min_d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        min_d2[i] = sq_dist(data.data() + i * d, centroids.data(), d);
    }
    for (std::uint32_t c = 1; c < k; ++c) {
        std::size_t pick = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (min_d2[i] > min_d2[pick]) pick = i;
        }
        std::copy_n(data.data() + pick * d, d, centroids.data() + c * d);
        for (std::size_t i = 0; i < n; ++i) {
            min_d2[i] = std::min(min_d2[i], sq_dist(data.data() + i * d,
                                                    centroids.data() + c * d, d));
        }
    }

    assignment.assign(n, 0);
    auto assign_all = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            const float* v = data.data() + i * d;
            std::uint32_t best = 0;
            double best_d2 = sq_dist(v, centroids.data(), d);
            for (std::uint32_t c = 1; c < k; ++c) {
                double d2 = sq_dist(v, centroids.data() + c * d, d);
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = c;
                }
            }
            assignment[i] = best;
        }
    };

    const int kIterations = 20;
    std::vector<double> sums(static_cast<std::size_t>(k) * d);
    std::vector<std::size_t> counts(k);
    for (int iter = 0; iter < kIterations; ++iter) {
        assign_all();
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0u);
        for (std::size_t i = 0; i < n; ++i) {
            const float* v = data.data() + i * d;
            double* s = sums.data() + static_cast<std::size_t>(assignment[i]) * d;
            for (std::size_t j = 0; j < d; ++j) s[j] += static_cast<double>(v[j]);
            ++counts[assignment[i]];
        }
        for (std::uint32_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            // Division (not multiplication by a reciprocal) keeps means of
            // identical points exact.
            double* s = sums.data() + static_cast<std::size_t>(c) * d;
            float* out = centroids.data() + static_cast<std::size_t>(c) * d;
            for (std::size_t j = 0; j < d; ++j) {
                out[j] = static_cast<float>(s[j] / static_cast<double>(counts[c]));
            }
        }
    }
    assign_all();
    return centroids;
}

} // namespace

CompressedMultiVectorIndex CompressedMultiVectorIndex::build(
    const std::vector<MultiVectorDoc>& docs, int bits, std::uint32_t n_centroids,
    std::uint64_t seed) {
    require_bits(bits);
    if (docs.empty()) throw DataError("cannot build an index from zero documents");
    if (n_centroids < 1) throw DataError("n_centroids must be at least 1");

    std::size_t d = 0;
    std::size_t total = 0;
    std::set<std::string> ids;
    for (const auto& doc : docs) {
        if (doc.token_vectors.empty()) {
            throw DataError("document '" + doc.passage_id + "' has no token vectors");
        }
        if (!ids.insert(doc.passage_id).second) {
            throw DataError("duplicate passage id '" + doc.passage_id + "'");
        }
        for (const auto& row : doc.token_vectors) {
            if (d == 0) d = row.size();
            if (row.size() != d || d == 0) {
                throw DataError("document '" + doc.passage_id +
                                "' has inconsistent vector dimensions");
            }
            double norm2 = 0.0;
            for (float v : row) norm2 += static_cast<double>(v) * static_cast<double>(v);
            if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6) {
                throw DataError("document '" + doc.passage_id +
                                "' has a non-unit token vector");
            }
        }
        total += doc.token_vectors.size();
    }
    if (total < n_centroids) {
        throw DataError("need at least as many token vectors (" + std::to_string(total) +
                        ") as centroids (" + std::to_string(n_centroids) + ")");
    }

    CompressedMultiVectorIndex index;
    index.dim_ = d;
    index.centroid_count_ = n_centroids;

    std::vector<float> data;
    data.reserve(total * d);
    index.docs_.reserve(docs.size());
    for (const auto& doc : docs) {
        DocRange range;
        range.passage_id = doc.passage_id;
        range.start = static_cast<std::uint32_t>(data.size() / d);
        range.count = static_cast<std::uint32_t>(doc.token_vectors.size());
        index.docs_.push_back(range);
        for (const auto& row : doc.token_vectors) {
            data.insert(data.end(), row.begin(), row.end());
        }
    }

    std::vector<std::uint32_t> assignment;
    index.centroids_ = run_kmeans(data, total, d, n_centroids, seed, assignment);
    index.centroid_ids_ = assignment;

    std::vector<std::vector<double>> residuals(total, std::vector<double>(d));
    for (std::size_t i = 0; i < total; ++i) {
        const float* v = data.data() + i * d;
        const float* c = index.centroids_.data() + static_cast<std::size_t>(assignment[i]) * d;
        for (std::size_t j = 0; j < d; ++j) {
            residuals[i][j] = static_cast<double>(v[j]) - static_cast<double>(c[j]);
        }
    }
    index.quantizer_ = fit_quantizer(residuals, bits);

    const std::size_t code_bytes = index.quantizer_.code_bytes();
    index.codes_.assign(total * code_bytes, 0);
    std::vector<std::uint32_t> codes(d);
    for (std::size_t i = 0; i < total; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            codes[j] = index.quantizer_.encode_value(j, residuals[i][j]);
        }
        index.quantizer_.pack(codes, index.codes_.data() + i * code_bytes);
    }
    return index;
}

std::vector<float> CompressedMultiVectorIndex::decode_vector(std::size_t entry_index) const {
    if (entry_index >= centroid_ids_.size()) {
        throw DataError("entry index out of range");
    }
    const float* c =
        centroids_.data() + static_cast<std::size_t>(centroid_ids_[entry_index]) * dim_;
    const std::uint8_t* code = codes_.data() + entry_index * quantizer_.code_bytes();
    std::vector<float> out(dim_);
    for (std::size_t j = 0; j < dim_; ++j) {
        out[j] = static_cast<float>(static_cast<double>(c[j]) +
                                    quantizer_.decode_value(j, quantizer_.unpack(code, j)));
    }
    return out;
}

std::vector<std::vector<float>> CompressedMultiVectorIndex::decode_doc(
    const std::string& passage_id) const {
    for (const auto& range : docs_) {
        if (range.passage_id != passage_id) continue;
        std::vector<std::vector<float>> rows;
        rows.reserve(range.count);
        for (std::uint32_t i = 0; i < range.count; ++i) {
            rows.push_back(decode_vector(range.start + i));
        }
        return rows;
    }
    throw DataError("unknown passage id '" + passage_id + "'");
}

Ranking CompressedMultiVectorIndex::search(const std::vector<std::vector<float>>& query_vectors,
                                           std::size_t top_k) const {
    if (query_vectors.empty()) throw DataError("search: query has no token vectors");
    for (const auto& q : query_vectors) {
        if (q.size() != dim_) {
            throw DataError("search: query dimension " + std::to_string(q.size()) +
                            " does not match index dimension " + std::to_string(dim_));
        }
    }
    Ranking scored;
    scored.reserve(docs_.size());
    std::vector<float> decoded;
    for (const auto& range : docs_) {
        decoded.resize(static_cast<std::size_t>(range.count) * dim_);
        for (std::uint32_t i = 0; i < range.count; ++i) {
            auto row = decode_vector(range.start + i);
            std::copy(row.begin(), row.end(), decoded.begin() + static_cast<std::size_t>(i) * dim_);
        }
        scored.push_back(
            ScoredPassage{range.passage_id, maxsim_rows(query_vectors, decoded.data(),
                                                        range.count, dim_)});
    }
    rank_and_truncate(scored, top_k);
    return scored;
}

StorageReport CompressedMultiVectorIndex::storage() const {
    StorageReport r;
    const std::uint64_t n = centroid_ids_.size();
    const std::uint64_t code_bytes = quantizer_.code_bytes();
    r.bytes_centroids = static_cast<std::uint64_t>(centroid_count_) * dim_ * 4;
    r.bytes_ids = n * 4;
    r.bytes_residuals = n * code_bytes;
    r.bytes_total = r.bytes_centroids + r.bytes_ids + r.bytes_residuals;
    r.bytes_per_vector = 4 + code_bytes;
    return r;
}

namespace {
constexpr char kMagic[4] = {'V', 'L', 'C', 'I'};
constexpr std::uint8_t kVersion = 1;
} // namespace

void CompressedMultiVectorIndex::save(std::ostream& out, const ArtifactMeta& meta) const {
    out.write(kMagic, 4);
    put_u8(out, kVersion);
    put_string(out, meta.to_string());
    put_u32(out, centroid_count_);
    put_u32(out, static_cast<std::uint32_t>(dim_));
    put_u8(out, static_cast<std::uint8_t>(quantizer_.bits));
    put_u32(out, static_cast<std::uint32_t>(centroid_ids_.size()));
    for (float v : centroids_) put_f32(out, v);
    for (std::size_t k = 0; k < dim_; ++k) {
        put_f64(out, quantizer_.lo[k]);
        put_f64(out, quantizer_.width[k]);
    }
    put_u32(out, static_cast<std::uint32_t>(docs_.size()));
    for (const auto& range : docs_) {
        put_string(out, range.passage_id);
        put_u32(out, range.start);
        put_u32(out, range.count);
    }
    const std::size_t code_bytes = quantizer_.code_bytes();
    for (std::size_t i = 0; i < centroid_ids_.size(); ++i) {
        put_u32(out, centroid_ids_[i]);
        put_bytes(out, codes_.data() + i * code_bytes, code_bytes);
    }
    if (!out) throw DataError("failed while writing multi-vector index");
}

void CompressedMultiVectorIndex::save_file(const std::string& path,
                                           const ArtifactMeta& meta) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write index file: " + path);
    save(out, meta);
}

CompressedMultiVectorIndex CompressedMultiVectorIndex::load(std::istream& in,
                                                            ArtifactMeta* meta_out) {
    expect_magic(in, kMagic, "multi-vector index");
    if (get_u8(in) != kVersion) throw DataError("unsupported multi-vector index version");
    std::string meta_str = get_string(in);
    if (meta_out) {
        if (auto parsed = ArtifactMeta::parse(meta_str)) *meta_out = *parsed;
    }

    CompressedMultiVectorIndex index;
    index.centroid_count_ = get_u32(in);
    index.dim_ = get_u32(in);
    int bits = get_u8(in);
    require_bits(bits);
    std::uint32_t n_vectors = get_u32(in);
    if (index.centroid_count_ == 0 || index.dim_ == 0 || n_vectors == 0) {
        throw DataError("multi-vector index has empty tables");
    }

    index.centroids_.resize(static_cast<std::size_t>(index.centroid_count_) * index.dim_);
    for (float& v : index.centroids_) v = get_f32(in);

    index.quantizer_.bits = bits;
    index.quantizer_.lo.resize(index.dim_);
    index.quantizer_.width.resize(index.dim_);
    for (std::size_t k = 0; k < index.dim_; ++k) {
        index.quantizer_.lo[k] = get_f64(in);
        index.quantizer_.width[k] = get_f64(in);
    }

    std::uint32_t n_docs = get_u32(in);
    if (n_docs == 0) throw DataError("multi-vector index has no documents");
    index.docs_.reserve(n_docs);
    std::set<std::string> ids;
    std::uint64_t running = 0;
    for (std::uint32_t i = 0; i < n_docs; ++i) {
        DocRange range;
        range.passage_id = get_string(in);
        range.start = get_u32(in);
        range.count = get_u32(in);
        if (!ids.insert(range.passage_id).second) {
            throw DataError("duplicate passage id '" + range.passage_id + "' in index");
        }
        if (range.count == 0 || range.start != running) {
            throw DataError("corrupt document table in multi-vector index");
        }
        running += range.count;
        index.docs_.push_back(std::move(range));
    }
    if (running != n_vectors) {
        throw DataError("document table does not cover all vectors");
    }

    const std::size_t code_bytes = index.quantizer_.code_bytes();
    index.centroid_ids_.resize(n_vectors);
    index.codes_.resize(static_cast<std::size_t>(n_vectors) * code_bytes);
    for (std::uint32_t i = 0; i < n_vectors; ++i) {
        index.centroid_ids_[i] = get_u32(in);
        if (index.centroid_ids_[i] >= index.centroid_count_) {
            throw DataError("centroid id out of range in multi-vector index");
        }
        get_bytes(in, index.codes_.data() + static_cast<std::size_t>(i) * code_bytes,
                  code_bytes);
    }
    if (!in) throw DataError("truncated multi-vector index");
    return index;
}

CompressedMultiVectorIndex CompressedMultiVectorIndex::load_file(const std::string& path,
                                                                 ArtifactMeta* meta_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open index file: " + path);
    return load(in, meta_out);
}

} // namespace vilegal
