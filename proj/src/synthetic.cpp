#include "vilegal/synthetic.hpp"

#include "vilegal/errors.hpp"
#include "vilegal/hash.hpp"
#include "vilegal/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>

namespace vilegal {

namespace {

const char* kDomains[] = {"Tiền tệ - Ngân hàng", "Lao động - Tiền lương", "Đất đai - Nhà ở",
                          "Thuế - Phí - Lệ phí"};

std::string padded(std::size_t value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

// 110..130 tokens, every position its own token "p<idx>t<pos>". Disjoint
// vocabularies keep passages separable, and because no token repeats, a short
// query window shares only a sliver of its source's vocabulary: an untrained
// bag-of-vectors encoder scores the source barely above the cross-passage
// noise floor, so retrieval quality before fine-tuning is genuinely poor.
std::string toy_passage_body(std::size_t passage_index, std::uint64_t seed) {
    Rng rng(hash_combine(seed, passage_index));
    std::size_t length = 110 + static_cast<std::size_t>(rng.below(21));
    std::ostringstream body;
    for (std::size_t pos = 0; pos < length; ++pos) {
        if (pos > 0) body << ' ';
        body << 'p' << padded(passage_index, 3) << 't' << padded(pos, 3);
    }
    return body.str();
}

} // namespace

std::string toy_documents_jsonl(std::size_t n_docs, std::size_t sections_per_doc,
                                std::uint64_t seed) {
    if (n_docs == 0 || sections_per_doc == 0) {
        throw DataError("toy collection needs at least one document and one section");
    }
    std::ostringstream out;
    for (std::size_t doc = 0; doc < n_docs; ++doc) {
        nlohmann::ordered_json j;
        j["id"] = "vb" + padded(doc, 3);
        j["domain"] = kDomains[doc % (sizeof(kDomains) / sizeof(kDomains[0]))];
        j["title"] = "Văn bản " + padded(doc, 3) + "/2016/TT-TOY";
        j["sections"] = nlohmann::ordered_json::array();
        for (std::size_t sec = 0; sec < sections_per_doc; ++sec) {
            std::size_t passage_index = doc * sections_per_doc + sec;
            nlohmann::ordered_json section;
            section["header"] = {"Chương " + std::to_string(sec / 2 + 1),
                                 "Điều " + std::to_string(sec + 1)};
            section["body"] = toy_passage_body(passage_index, seed);
            j["sections"].push_back(std::move(section));
        }
        out << j.dump() << '\n';
    }
    return out.str();
}

Corpus make_toy_corpus(std::size_t n_docs, std::size_t sections_per_doc, std::uint64_t seed) {
    std::istringstream in(toy_documents_jsonl(n_docs, sections_per_doc, seed));
    return ingest_documents(in);
}

std::vector<std::vector<float>> random_unit_rows(std::size_t n, std::size_t dim,
                                                 std::uint64_t seed) {
    if (dim < 2) throw DataError("row dimension must be at least 2");
    Rng rng(seed);
    std::vector<std::vector<float>> rows(n);
    for (auto& row : rows) {
        std::vector<double> v(dim);
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (auto& x : v) {
                x = rng.normal();
                norm2 += x * x;
            }
        } while (norm2 == 0.0);
        double norm = std::sqrt(norm2);
        row.resize(dim);
        for (std::size_t k = 0; k < dim; ++k) row[k] = static_cast<float>(v[k] / norm);
    }
    return rows;
}

std::vector<MultiVectorDoc> random_multivector_docs(std::size_t n_docs, std::size_t min_tokens,
                                                    std::size_t max_tokens, std::size_t dim,
                                                    std::uint64_t seed) {
    if (min_tokens == 0 || max_tokens < min_tokens) {
        throw DataError("invalid token count range");
    }
    Rng rng(seed);
    std::vector<MultiVectorDoc> docs(n_docs);
    for (std::size_t i = 0; i < n_docs; ++i) {
        docs[i].passage_id = "syn" + padded(i, 4);
        std::size_t count =
            min_tokens + static_cast<std::size_t>(rng.below(max_tokens - min_tokens + 1));
        docs[i].token_vectors =
            random_unit_rows(count, dim, hash_combine(seed, 0x9000 + i));
    }
    return docs;
}

} // namespace vilegal
