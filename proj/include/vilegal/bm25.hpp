#pragma once

#include "vilegal/corpus.hpp"
#include "vilegal/io.hpp"
#include "vilegal/retriever.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace vilegal {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t ordinal;
    std::uint32_t tf;
};

// Okapi BM25 over case-folded whitespace terms, with the Lucene-style
// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)) floor so scores stay
// non-negative.
class InvertedIndex : public Retriever {
public:
    static InvertedIndex build(const Corpus& corpus, Bm25Params params = {});

    // score(doc, query) = sum over query tokens of
    //   idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
    double score(const std::vector<std::string>& query_tokens, std::size_t ordinal) const;

    Ranking search(const std::string& query_text, std::size_t top_k) const override;
    std::string name() const override { return "bm25"; }

    std::size_t doc_count() const { return doc_lengths_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
    const std::map<std::string, std::vector<Posting>>& postings() const { return postings_; }
    const std::string& passage_id(std::size_t ordinal) const { return ids_[ordinal]; }
    const Bm25Params& params() const { return params_; }

    // VLBM binary format; round-trips bit-exactly. See README for the layout.
    void save(std::ostream& out, const ArtifactMeta* meta = nullptr) const;
    void save_file(const std::string& path, const ArtifactMeta* meta = nullptr) const;
    static InvertedIndex load(std::istream& in);
    static InvertedIndex load_file(const std::string& path);

private:
    std::map<std::string, std::vector<Posting>> postings_; // term -> postings, ordinal asc
    std::vector<std::uint32_t> doc_lengths_;
    std::vector<std::string> ids_; // ordinal -> passage id
    double avg_doc_length_ = 0.0;
    Bm25Params params_;
};

} // namespace vilegal
