#pragma once

#include "vilegal/io.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace vilegal {

struct Section {
    std::vector<std::string> header_path;
    std::string body;
};

struct LegalDocument {
    std::string id;
    std::string domain;
    std::string title;
    std::vector<Section> sections;
};

// The retrieval unit: one contiguous chunk of a document section, carrying the
// hierarchical context (domain, title, joined header path) it came from.
struct Passage {
    std::string id;
    std::string doc_id;
    std::string domain;
    std::string title;
    std::string header; // header path joined with ", "
    std::string content;
    std::size_t token_count = 0;
};

class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<Passage> passages);

    const std::vector<Passage>& passages() const { return passages_; }
    std::size_t size() const { return passages_.size(); }
    bool empty() const { return passages_.empty(); }
    const Passage& at(std::size_t ordinal) const { return passages_[ordinal]; }

    // doc_id -> passage ids, grouped in passage order.
    const std::map<std::string, std::vector<std::string>>& doc_index() const { return doc_index_; }

    bool has_passage(const std::string& passage_id) const;
    const Passage& passage(const std::string& passage_id) const; // DataError if unknown
    std::size_t ordinal_of(const std::string& passage_id) const; // DataError if unknown

private:
    std::vector<Passage> passages_;
    std::map<std::string, std::vector<std::string>> doc_index_;
    std::map<std::string, std::size_t> ordinals_;
};

// Parse a stream of document records (one JSON object per line, see README for
// the schema) into a corpus of one passage per section, document order
// preserved. Throws DataError naming the record index and field on malformed
// records, and the id on duplicate document ids.
Corpus ingest_documents(std::istream& records);
Corpus ingest_documents_file(const std::string& path);

// Split a passage into greedy non-overlapping token windows of at most
// max_tokens tokens (overlap > 0 makes consecutive windows share that many
// tokens and forfeits the reconstruction property). A passage already within
// budget comes back unchanged except for a recomputed token_count; otherwise
// chunk k gets id "<parent_id>#<k>" and content rebuilt as the window's tokens
// joined by single spaces.
std::vector<Passage> chunk_passage(const Passage& p, std::size_t max_tokens,
                                   std::size_t overlap = 0);

// chunk_passage over the whole corpus, rebuilding the document index.
Corpus chunk_corpus(const Corpus& corpus, std::size_t max_tokens, std::size_t overlap = 0);

// Passages file: one JSON record per line with fields
// {"id","doc_id","domain","title","header","content"}. token_count is
// recomputed on load. An optional leading {"_meta":...} record is skipped.
void write_passages(std::ostream& out, const Corpus& corpus, const ArtifactMeta* meta);
void write_passages_file(const std::string& path, const Corpus& corpus, const ArtifactMeta* meta);
Corpus read_passages(std::istream& in);
Corpus read_passages_file(const std::string& path);

} // namespace vilegal
