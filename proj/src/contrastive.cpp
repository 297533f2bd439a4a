#include "vilegal/contrastive.hpp"

#include "vilegal/errors.hpp"
#include "vilegal/hash.hpp"
#include "vilegal/rng.hpp"
#include "vilegal/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace vilegal {

using ordered_json = nlohmann::ordered_json;

std::vector<TrainingExample> mine_hard_negatives(
    const std::vector<SyntheticQuery>& queries,
    const std::map<std::string, std::set<std::string>>& positives, const Retriever& retriever,
    std::size_t n_neg, std::size_t pool_depth, const Corpus& corpus, std::uint64_t seed) {
    if (n_neg < 1) throw DataError("n_neg must be at least 1");
    if (pool_depth < n_neg) throw DataError("pool_depth must be at least n_neg");

    const auto& passages = corpus.passages();
    std::vector<TrainingExample> out;
    for (const auto& q : queries) {
        auto it = positives.find(q.id);
        if (it == positives.end() || it->second.empty()) {
            throw DataError("query '" + q.id + "' has no positive passages");
        }
        const auto& pos_set = it->second;
        for (const auto& pid : pos_set) {
            if (!corpus.has_passage(pid)) {
                throw DataError("positive passage '" + pid + "' of query '" + q.id +
                                "' is not in the corpus");
            }
        }
        if (passages.size() < n_neg + pos_set.size()) {
            throw DataError("corpus has " + std::to_string(passages.size()) +
                            " passages, too few to mine " + std::to_string(n_neg) +
                            " negatives for query '" + q.id + "'");
        }

        std::vector<std::string> negatives;
        std::set<std::string> used;
        for (const auto& hit : retriever.search(q.text, pool_depth)) {
            if (pos_set.count(hit.passage_id)) continue;
            if (!used.insert(hit.passage_id).second) continue;
            negatives.push_back(hit.passage_id);
            if (negatives.size() == n_neg) break;
        }
        if (negatives.size() < n_neg) {
            Rng rng(hash_combine(seed, fnv1a64(q.id)));
            while (negatives.size() < n_neg) {
                const Passage& p = passages[static_cast<std::size_t>(rng.below(passages.size()))];
                if (pos_set.count(p.id) || used.count(p.id)) continue;
                used.insert(p.id);
                negatives.push_back(p.id);
            }
        }

        for (const auto& pid : pos_set) {
            TrainingExample ex;
            ex.query_id = q.id;
            ex.positive_id = pid;
            ex.hard_negative_ids = negatives;
            ex.source = q.source;
            out.push_back(std::move(ex));
        }
    }
    return out;
}

void write_examples(std::ostream& out, const std::vector<TrainingExample>& examples,
                    const ArtifactMeta* meta) {
    if (meta) {
        ordered_json header;
        header["_meta"] = meta->to_string();
        out << header.dump() << '\n';
    }
    for (const auto& ex : examples) {
        ordered_json j;
        j["query_id"] = ex.query_id;
        j["positive_id"] = ex.positive_id;
        j["negative_ids"] = ex.hard_negative_ids;
        j["source"] = ex.source;
        out << j.dump() << '\n';
    }
}

void write_examples_file(const std::string& path, const std::vector<TrainingExample>& examples,
                         const ArtifactMeta* meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write examples file: " + path);
    write_examples(out, examples, meta);
}

std::vector<TrainingExample> read_examples(std::istream& in) {
    std::vector<TrainingExample> examples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const ordered_json::exception& e) {
            throw DataError("examples line " + std::to_string(line_no) + ": " + e.what());
        }
        if (j.contains("_meta")) continue;
        TrainingExample ex;
        try {
            ex.query_id = j.at("query_id").get<std::string>();
            ex.positive_id = j.at("positive_id").get<std::string>();
            ex.hard_negative_ids = j.at("negative_ids").get<std::vector<std::string>>();
            ex.source = j.value("source", "synthetic");
        } catch (const ordered_json::exception& e) {
            throw DataError("examples line " + std::to_string(line_no) + ": " + e.what());
        }
        for (const auto& nid : ex.hard_negative_ids) {
            if (nid == ex.positive_id) {
                throw DataError("examples line " + std::to_string(line_no) +
                                ": positive listed among negatives");
            }
        }
        examples.push_back(std::move(ex));
    }
    return examples;
}

std::vector<TrainingExample> read_examples_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open examples file: " + path);
    return read_examples(in);
}

namespace {

void validate_batch(const InfoNceBatch& batch) {
    if (batch.batch_size == 0) throw DataError("InfoNCE batch is empty");
    if (batch.dim == 0) throw DataError("InfoNCE batch has zero dimension");
    if (batch.temperature <= 0.0) throw DataError("temperature must be positive");
    if (batch.queries.size() != batch.batch_size * batch.dim ||
        batch.positives.size() != batch.batch_size * batch.dim ||
        batch.negatives.size() != batch.batch_size * batch.n_neg * batch.dim) {
        throw DataError("InfoNCE batch shapes are inconsistent");
    }
    for (const auto* arr : {&batch.queries, &batch.positives, &batch.negatives}) {
        for (double v : *arr) {
            if (!std::isfinite(v)) throw DataError("non-finite value in InfoNCE batch");
        }
    }
}

double dot_d(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

// Candidate passage vectors for example i: own positive first, own negatives,
// then (optionally) the other examples' positives.
struct Candidates {
    std::vector<const double*> vectors;
    std::vector<std::size_t> in_batch_owner; // positives index for trailing candidates
};

Candidates candidates_for(const InfoNceBatch& batch, std::size_t i) {
    Candidates c;
    const std::size_t d = batch.dim;
    c.vectors.push_back(batch.positives.data() + i * d);
    for (std::size_t j = 0; j < batch.n_neg; ++j) {
        c.vectors.push_back(batch.negatives.data() + (i * batch.n_neg + j) * d);
    }
    if (batch.use_in_batch) {
        for (std::size_t m = 0; m < batch.batch_size; ++m) {
            if (m == i) continue;
            c.vectors.push_back(batch.positives.data() + m * d);
            c.in_batch_owner.push_back(m);
        }
    }
    return c;
}

std::vector<double> softmax_scores(const InfoNceBatch& batch, std::size_t i,
                                   const Candidates& c, double* loss_out) {
    const std::size_t d = batch.dim;
    const double* q = batch.queries.data() + i * d;
    std::vector<double> scores(c.vectors.size());
    for (std::size_t k = 0; k < c.vectors.size(); ++k) {
        scores[k] = dot_d(q, c.vectors[k], d) / batch.temperature;
    }
    double m = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - m);
    double lse = m + std::log(sum);
    if (loss_out) *loss_out = lse - scores[0];
    for (double& s : scores) s = std::exp(s - lse); // now probabilities
    return scores;
}

} // namespace

double infonce_loss(const InfoNceBatch& batch) {
    validate_batch(batch);
    double total = 0.0;
    for (std::size_t i = 0; i < batch.batch_size; ++i) {
        auto c = candidates_for(batch, i);
        double loss = 0.0;
        softmax_scores(batch, i, c, &loss);
        total += loss;
    }
    return total / static_cast<double>(batch.batch_size);
}

InfoNceGrad infonce_grad(const InfoNceBatch& batch) {
    validate_batch(batch);
    InfoNceGrad grad;
    grad.queries.assign(batch.queries.size(), 0.0);
    grad.positives.assign(batch.positives.size(), 0.0);
    grad.negatives.assign(batch.negatives.size(), 0.0);

    const std::size_t d = batch.dim;
    const double scale = 1.0 / (batch.temperature * static_cast<double>(batch.batch_size));
    for (std::size_t i = 0; i < batch.batch_size; ++i) {
        auto c = candidates_for(batch, i);
        auto pi = softmax_scores(batch, i, c, nullptr);
        const double* q = batch.queries.data() + i * d;
        double* gq = grad.queries.data() + i * d;
        for (std::size_t k = 0; k < c.vectors.size(); ++k) {
            double coeff = (pi[k] - (k == 0 ? 1.0 : 0.0)) * scale;
            const double* v = c.vectors[k];
            for (std::size_t x = 0; x < d; ++x) gq[x] += coeff * v[x];

            double* gv = nullptr;
            if (k == 0) {
                gv = grad.positives.data() + i * d;
            } else if (k <= batch.n_neg) {
                gv = grad.negatives.data() + (i * batch.n_neg + (k - 1)) * d;
            } else {
                gv = grad.positives.data() + c.in_batch_owner[k - 1 - batch.n_neg] * d;
            }
            for (std::size_t x = 0; x < d; ++x) gv[x] += coeff * q[x];
        }
    }
    return grad;
}

ToyEncoder::ToyEncoder(std::vector<std::string> vocabulary, std::size_t dim, std::uint64_t seed)
    : vocabulary_(std::move(vocabulary)), dim_(dim) {
    if (dim_ < 2) throw DataError("encoder dimension must be at least 2");
    std::sort(vocabulary_.begin(), vocabulary_.end());
    vocabulary_.erase(std::unique(vocabulary_.begin(), vocabulary_.end()), vocabulary_.end());
    if (vocabulary_.empty()) throw DataError("encoder vocabulary is empty");
    for (std::size_t i = 0; i < vocabulary_.size(); ++i) index_[vocabulary_[i]] = i;

    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
    table_.resize(vocabulary_.size() * dim_);
    for (double& v : table_) v = rng.normal() * scale;
}

ToyEncoder ToyEncoder::from_corpus(const Corpus& corpus, std::size_t dim, std::uint64_t seed) {
    std::set<std::string> vocab;
    for (const auto& p : corpus.passages()) {
        for (auto& tok : tokenize_folded(p.content)) vocab.insert(std::move(tok));
    }
    return ToyEncoder(std::vector<std::string>(vocab.begin(), vocab.end()), dim, seed);
}

std::optional<std::size_t> ToyEncoder::token_index(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::size_t> ToyEncoder::resolve_tokens(const std::string& text) const {
    std::vector<std::size_t> indices;
    for (const auto& tok : tokenize_folded(text)) {
        if (auto idx = token_index(tok)) indices.push_back(*idx);
    }
    return indices;
}

ToyEncoder::Encoded ToyEncoder::encode_indices(std::vector<std::size_t> token_indices) const {
    Encoded enc;
    enc.token_indices = std::move(token_indices);
    enc.mean.assign(dim_, 0.0);
    enc.unit.assign(dim_, 0.0);
    if (enc.token_indices.empty()) return enc;
    for (std::size_t idx : enc.token_indices) {
        const double* row = table_.data() + idx * dim_;
        for (std::size_t k = 0; k < dim_; ++k) enc.mean[k] += row[k];
    }
    const double inv = 1.0 / static_cast<double>(enc.token_indices.size());
    for (double& v : enc.mean) v *= inv;
    double norm2 = 0.0;
    for (double v : enc.mean) norm2 += v * v;
    enc.mean_norm = std::sqrt(norm2);
    if (enc.mean_norm > 0.0) {
        for (std::size_t k = 0; k < dim_; ++k) enc.unit[k] = enc.mean[k] / enc.mean_norm;
    }
    return enc;
}

ToyEncoder::Encoded ToyEncoder::encode_tokens(
    const std::vector<std::string>& folded_tokens) const {
    std::vector<std::size_t> indices;
    for (const auto& tok : folded_tokens) {
        if (auto idx = token_index(tok)) indices.push_back(*idx);
    }
    return encode_indices(std::move(indices));
}

ToyEncoder::Encoded ToyEncoder::encode_text(const std::string& text) const {
    return encode_indices(resolve_tokens(text));
}

std::vector<float> ToyEncoder::embed_query(const std::string& text) const {
    auto enc = encode_text(text);
    return std::vector<float>(enc.unit.begin(), enc.unit.end());
}

std::vector<float> ToyEncoder::embed_passage(const Passage& p) const {
    auto enc = encode_text(p.content);
    return std::vector<float>(enc.unit.begin(), enc.unit.end());
}

void ToyEncoder::accumulate_grad(const Encoded& enc, const std::vector<double>& dloss_dunit,
                                 std::vector<double>& grad_table) const {
    if (enc.token_indices.empty() || enc.mean_norm <= 0.0) return;
    if (dloss_dunit.size() != dim_ || grad_table.size() != table_.size()) {
        throw DataError("gradient buffer shapes are inconsistent");
    }
    double h_dot_g = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) h_dot_g += enc.unit[k] * dloss_dunit[k];
    std::vector<double> dmean(dim_);
    for (std::size_t k = 0; k < dim_; ++k) {
        dmean[k] = (dloss_dunit[k] - enc.unit[k] * h_dot_g) / enc.mean_norm;
    }
    const double inv = 1.0 / static_cast<double>(enc.token_indices.size());
    for (std::size_t idx : enc.token_indices) {
        double* row = grad_table.data() + idx * dim_;
        for (std::size_t k = 0; k < dim_; ++k) row[k] += dmean[k] * inv;
    }
}

namespace {
constexpr char kEncoderMagic[4] = {'V', 'L', 'T', 'Y'};
constexpr std::uint8_t kEncoderVersion = 1;
} // namespace

void ToyEncoder::save(std::ostream& out, const ArtifactMeta& meta) const {
    out.write(kEncoderMagic, 4);
    put_u8(out, kEncoderVersion);
    put_string(out, meta.to_string());
    put_u32(out, static_cast<std::uint32_t>(vocabulary_.size()));
    put_u32(out, static_cast<std::uint32_t>(dim_));
    for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
        put_string(out, vocabulary_[i]);
        for (std::size_t k = 0; k < dim_; ++k) put_f64(out, table_[i * dim_ + k]);
    }
    if (!out) throw DataError("failed while writing encoder");
}

void ToyEncoder::save_file(const std::string& path, const ArtifactMeta& meta) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write encoder file: " + path);
    save(out, meta);
}

ToyEncoder ToyEncoder::load(std::istream& in, ArtifactMeta* meta_out) {
    expect_magic(in, kEncoderMagic, "encoder");
    if (get_u8(in) != kEncoderVersion) throw DataError("unsupported encoder version");
    std::string meta_str = get_string(in);
    if (meta_out) {
        if (auto parsed = ArtifactMeta::parse(meta_str)) *meta_out = *parsed;
    }
    std::uint32_t vocab_size = get_u32(in);
    std::uint32_t dim = get_u32(in);
    if (vocab_size == 0 || dim < 2) throw DataError("encoder file has empty tables");
    std::vector<std::string> vocab(vocab_size);
    std::vector<double> table(static_cast<std::size_t>(vocab_size) * dim);
    for (std::uint32_t i = 0; i < vocab_size; ++i) {
        vocab[i] = get_string(in);
        for (std::uint32_t k = 0; k < dim; ++k) {
            table[static_cast<std::size_t>(i) * dim + k] = get_f64(in);
        }
    }
    if (!in) throw DataError("truncated encoder file");
    ToyEncoder encoder(vocab, dim, 0);
    if (encoder.vocabulary_ != vocab) {
        throw DataError("encoder vocabulary is not sorted and unique");
    }
    encoder.table_ = std::move(table);
    return encoder;
}

ToyEncoder ToyEncoder::load_file(const std::string& path, ArtifactMeta* meta_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open encoder file: " + path);
    return load(in, meta_out);
}

TrainResult train_toy(const Corpus& corpus, const std::vector<SyntheticQuery>& queries,
                      const std::vector<TrainingExample>& examples, ToyEncoder& encoder,
                      const TrainOptions& options) {
    if (examples.empty()) throw DataError("no training examples");
    if (options.steps < 1) throw DataError("steps must be at least 1");
    if (options.batch_size < 1) throw DataError("batch_size must be at least 1");
    if (options.temperature <= 0.0) throw DataError("temperature must be positive");

    std::map<std::string, const SyntheticQuery*> query_by_id;
    for (const auto& q : queries) query_by_id[q.id] = &q;

    // Token indices are fixed; resolve everything once.
    std::map<std::string, std::vector<std::size_t>> passage_tokens;
    auto passage_indices = [&](const std::string& pid) -> const std::vector<std::size_t>& {
        auto it = passage_tokens.find(pid);
        if (it != passage_tokens.end()) return it->second;
        if (!corpus.has_passage(pid)) {
            throw DataError("training example references unknown passage '" + pid + "'");
        }
        auto [ins, _] = passage_tokens.emplace(
            pid, encoder.resolve_tokens(corpus.passage(pid).content));
        return ins->second;
    };

    const std::size_t n_neg = examples.front().hard_negative_ids.size();
    struct Resolved {
        std::vector<std::size_t> query;
        const std::vector<std::size_t>* positive;
        std::vector<const std::vector<std::size_t>*> negatives;
    };
    std::vector<Resolved> resolved(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        if (ex.hard_negative_ids.size() != n_neg) {
            throw DataError("training examples must share one negative count");
        }
        auto qit = query_by_id.find(ex.query_id);
        if (qit == query_by_id.end()) {
            throw DataError("training example references unknown query '" + ex.query_id + "'");
        }
        resolved[i].query = encoder.resolve_tokens(qit->second->text);
        resolved[i].positive = &passage_indices(ex.positive_id);
        for (const auto& nid : ex.hard_negative_ids) {
            resolved[i].negatives.push_back(&passage_indices(nid));
        }
    }

    const std::size_t d = encoder.dim();
    Rng rng(options.seed);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();

    std::vector<double> grad_table(encoder.table().size());
    std::vector<double> velocity;
    if (options.momentum != 0.0) velocity.assign(encoder.table().size(), 0.0);

    TrainResult result;
    result.trace.reserve(options.steps);
    for (std::size_t step = 1; step <= options.steps; ++step) {
        if (cursor >= order.size()) {
            rng.shuffle(order);
            cursor = 0;
        }
        std::size_t take = std::min(options.batch_size, order.size() - cursor);
        std::vector<std::size_t> batch_ids(order.begin() + cursor,
                                           order.begin() + cursor + take);
        cursor += take;

        InfoNceBatch batch;
        batch.batch_size = take;
        batch.dim = d;
        batch.n_neg = n_neg;
        batch.temperature = options.temperature;
        batch.use_in_batch = options.use_in_batch;
        batch.queries.resize(take * d);
        batch.positives.resize(take * d);
        batch.negatives.resize(take * n_neg * d);

        std::vector<ToyEncoder::Encoded> enc_q(take), enc_p(take);
        std::vector<ToyEncoder::Encoded> enc_n(take * n_neg);
        for (std::size_t b = 0; b < take; ++b) {
            const Resolved& r = resolved[batch_ids[b]];
            enc_q[b] = encoder.encode_indices(r.query);
            enc_p[b] = encoder.encode_indices(*r.positive);
            std::copy(enc_q[b].unit.begin(), enc_q[b].unit.end(),
                      batch.queries.begin() + b * d);
            std::copy(enc_p[b].unit.begin(), enc_p[b].unit.end(),
                      batch.positives.begin() + b * d);
            for (std::size_t j = 0; j < n_neg; ++j) {
                enc_n[b * n_neg + j] = encoder.encode_indices(*r.negatives[j]);
                std::copy(enc_n[b * n_neg + j].unit.begin(), enc_n[b * n_neg + j].unit.end(),
                          batch.negatives.begin() + (b * n_neg + j) * d);
            }
        }

        double loss = infonce_loss(batch);
        InfoNceGrad grads = infonce_grad(batch);

        std::fill(grad_table.begin(), grad_table.end(), 0.0);
        std::vector<double> slice(d);
        for (std::size_t b = 0; b < take; ++b) {
            std::copy_n(grads.queries.begin() + b * d, d, slice.begin());
            encoder.accumulate_grad(enc_q[b], slice, grad_table);
            std::copy_n(grads.positives.begin() + b * d, d, slice.begin());
            encoder.accumulate_grad(enc_p[b], slice, grad_table);
            for (std::size_t j = 0; j < n_neg; ++j) {
                std::copy_n(grads.negatives.begin() + (b * n_neg + j) * d, d, slice.begin());
                encoder.accumulate_grad(enc_n[b * n_neg + j], slice, grad_table);
            }
        }

        auto& table = encoder.mutable_table();
        if (options.momentum != 0.0) {
            for (std::size_t k = 0; k < table.size(); ++k) {
                velocity[k] = options.momentum * velocity[k] -
                              options.learning_rate * grad_table[k];
                table[k] += velocity[k];
            }
        } else {
            for (std::size_t k = 0; k < table.size(); ++k) {
                table[k] -= options.learning_rate * grad_table[k];
            }
        }
        result.trace.push_back(TracePoint{step, loss});
    }
    return result;
}

void write_trace(std::ostream& out, const std::vector<TracePoint>& trace,
                 const ArtifactMeta* meta) {
    if (meta) out << meta->to_comment_line() << '\n';
    out << "step,loss\n";
    char buf[64];
    for (const auto& point : trace) {
        std::snprintf(buf, sizeof(buf), "%.17g", point.loss);
        out << point.step << ',' << buf << '\n';
    }
}

void write_trace_file(const std::string& path, const std::vector<TracePoint>& trace,
                      const ArtifactMeta* meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write trace file: " + path);
    write_trace(out, trace, meta);
}

} // namespace vilegal
