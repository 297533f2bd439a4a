#include "vilegal/bm25.hpp"

#include "vilegal/errors.hpp"
#include "vilegal/text.hpp"

#include <cmath>
#include <fstream>
#include <unordered_map>

namespace vilegal {

InvertedIndex InvertedIndex::build(const Corpus& corpus, Bm25Params params) {
    if (corpus.empty()) throw DataError("cannot build BM25 index over an empty corpus");
    InvertedIndex index;
    index.params_ = params;
    index.ids_.reserve(corpus.size());
    index.doc_lengths_.reserve(corpus.size());

    std::uint64_t total_tokens = 0;
    for (std::size_t ordinal = 0; ordinal < corpus.size(); ++ordinal) {
        const Passage& p = corpus.at(ordinal);
        index.ids_.push_back(p.id);
        std::vector<std::string> tokens = tokenize_folded(p.content);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total_tokens += tokens.size();

        std::unordered_map<std::string, std::uint32_t> tf;
        for (const std::string& t : tokens) ++tf[t];
        for (const auto& [term, freq] : tf) {
            index.postings_[term].push_back({static_cast<std::uint32_t>(ordinal), freq});
        }
    }
    // Passages are visited in ordinal order, so postings are already sorted.
    index.avg_doc_length_ = static_cast<double>(total_tokens) / static_cast<double>(corpus.size());
    return index;
}

double InvertedIndex::score(const std::vector<std::string>& query_tokens, std::size_t ordinal) const {
    if (ordinal >= doc_lengths_.size()) throw DataError("BM25 ordinal out of range");
    const double n = static_cast<double>(doc_count());
    const double dl = static_cast<double>(doc_lengths_[ordinal]);
    double score = 0.0;
    for (const std::string& t : query_tokens) {
        auto it = postings_.find(t);
        if (it == postings_.end()) continue;
        const std::vector<Posting>& plist = it->second;
        double df = static_cast<double>(plist.size());
        double tf = 0.0;
        for (const Posting& post : plist) {
            if (post.ordinal == ordinal) {
                tf = static_cast<double>(post.tf);
                break;
            }
            if (post.ordinal > ordinal) break;
        }
        if (tf == 0.0) continue;
        double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        double norm = params_.k1 * (1.0 - params_.b + params_.b * dl / avg_doc_length_);
        score += idf * tf * (params_.k1 + 1.0) / (tf + norm);
    }
    return score;
}

Ranking InvertedIndex::search(const std::string& query_text, std::size_t top_k) const {
    std::vector<std::string> query_tokens = tokenize_folded(query_text);
    std::vector<double> scores(doc_count(), 0.0);
    const double n = static_cast<double>(doc_count());
    for (const std::string& t : query_tokens) {
        auto it = postings_.find(t);
        if (it == postings_.end()) continue;
        const std::vector<Posting>& plist = it->second;
        double df = static_cast<double>(plist.size());
        double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (const Posting& post : plist) {
            double dl = static_cast<double>(doc_lengths_[post.ordinal]);
            double tf = static_cast<double>(post.tf);
            double norm = params_.k1 * (1.0 - params_.b + params_.b * dl / avg_doc_length_);
            scores[post.ordinal] += idf * tf * (params_.k1 + 1.0) / (tf + norm);
        }
    }
    Ranking ranked;
    ranked.reserve(doc_count());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        ranked.push_back({ids_[i], scores[i]});
    }
    rank_and_truncate(ranked, top_k);
    return ranked;
}

void InvertedIndex::save(std::ostream& out, const ArtifactMeta* meta) const {
    put_bytes(out, "VLBM", 4);
    put_u8(out, 1);
    put_string(out, meta != nullptr ? meta->to_string() : std::string());
    put_f64(out, params_.k1);
    put_f64(out, params_.b);
    put_u32(out, static_cast<std::uint32_t>(doc_count()));
    for (std::size_t i = 0; i < doc_count(); ++i) {
        put_string(out, ids_[i]);
        put_u32(out, doc_lengths_[i]);
    }
    put_u32(out, static_cast<std::uint32_t>(postings_.size()));
    for (const auto& [term, plist] : postings_) {
        put_string(out, term);
        put_u32(out, static_cast<std::uint32_t>(plist.size()));
        for (const Posting& p : plist) {
            put_u32(out, p.ordinal);
            put_u32(out, p.tf);
        }
    }
}

void InvertedIndex::save_file(const std::string& path, const ArtifactMeta* meta) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    save(out, meta);
    if (!out.good()) throw DataError("write failed: " + path);
}

InvertedIndex InvertedIndex::load(std::istream& in) {
    expect_magic(in, "VLBM", "BM25 index");
    std::uint8_t version = get_u8(in);
    if (version != 1) throw DataError("unsupported VLBM version " + std::to_string(version));
    (void)get_string(in); // metadata line
    InvertedIndex index;
    index.params_.k1 = get_f64(in);
    index.params_.b = get_f64(in);
    std::uint32_t docs = get_u32(in);
    if (docs == 0) throw DataError("VLBM file has zero documents");
    std::uint64_t total_tokens = 0;
    for (std::uint32_t i = 0; i < docs; ++i) {
        index.ids_.push_back(get_string(in));
        index.doc_lengths_.push_back(get_u32(in));
        total_tokens += index.doc_lengths_.back();
    }
    index.avg_doc_length_ = static_cast<double>(total_tokens) / static_cast<double>(docs);
    std::uint32_t terms = get_u32(in);
    for (std::uint32_t t = 0; t < terms; ++t) {
        std::string term = get_string(in);
        std::uint32_t n = get_u32(in);
        std::vector<Posting> plist;
        plist.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            Posting p;
            p.ordinal = get_u32(in);
            p.tf = get_u32(in);
            if (p.ordinal >= docs) throw DataError("VLBM posting ordinal out of range");
            plist.push_back(p);
        }
        index.postings_.emplace(std::move(term), std::move(plist));
    }
    return index;
}

InvertedIndex InvertedIndex::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return load(in);
}

} // namespace vilegal
