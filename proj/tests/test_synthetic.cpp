#include "doctest.h"

#include "vilegal/errors.hpp"
#include "vilegal/synthetic.hpp"
#include "vilegal/text.hpp"

#include <cmath>
#include <set>
#include <string>
#include <vector>

using namespace vilegal;

TEST_SUITE("synthetic") {

TEST_CASE("toy corpus has one passage per section with stable ids") {
    Corpus corpus = make_toy_corpus(3, 4, 7);
    REQUIRE(corpus.size() == 12);
    CHECK(corpus.at(0).id == "vb000:0");
    CHECK(corpus.at(11).id == "vb002:3");
    CHECK(corpus.at(0).doc_id == "vb000");
    CHECK(corpus.at(0).title == "Văn bản 000/2016/TT-TOY");
    CHECK(corpus.at(0).header == "Chương 1, Điều 1");
    CHECK(corpus.at(3).header == "Chương 2, Điều 4");
    CHECK_FALSE(corpus.at(0).domain.empty());
    // Domains rotate per document, not per passage.
    CHECK(corpus.at(0).domain == corpus.at(1).domain);
    CHECK(corpus.at(0).domain != corpus.at(4).domain);
}

TEST_CASE("toy passages are long and never share a token") {
    Corpus corpus = make_toy_corpus(6, 3, 11);
    std::set<std::string> seen;
    for (const auto& p : corpus.passages()) {
        auto tokens = tokenize(p.content);
        CHECK(tokens.size() >= 110);
        CHECK(tokens.size() <= 130);
        std::set<std::string> here(tokens.begin(), tokens.end());
        // no repetition inside a passage
        CHECK(here.size() == tokens.size());
        for (const auto& t : here) {
            CAPTURE(t);
            CHECK(seen.insert(t).second); // and none shared across passages
        }
    }
}

TEST_CASE("toy collection is a pure function of its arguments") {
    CHECK(toy_documents_jsonl(4, 2, 3) == toy_documents_jsonl(4, 2, 3));
    CHECK(toy_documents_jsonl(4, 2, 3) != toy_documents_jsonl(4, 2, 4));
    CHECK_THROWS_AS(toy_documents_jsonl(0, 2, 3), DataError);
    CHECK_THROWS_AS(toy_documents_jsonl(2, 0, 3), DataError);
}

TEST_CASE("random unit rows are unit and deterministic") {
    auto rows = random_unit_rows(20, 16, 99);
    REQUIRE(rows.size() == 20);
    for (const auto& row : rows) {
        double norm2 = 0.0;
        for (float v : row) norm2 += static_cast<double>(v) * v;
        CHECK(std::sqrt(norm2) == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(rows == random_unit_rows(20, 16, 99));
    CHECK(rows != random_unit_rows(20, 16, 100));
    CHECK_THROWS_AS(random_unit_rows(2, 1, 0), DataError);
}

TEST_CASE("random multivector docs respect the token range") {
    auto docs = random_multivector_docs(40, 4, 8, 12, 5);
    REQUIRE(docs.size() == 40);
    CHECK(docs[0].passage_id == "syn0000");
    CHECK(docs[39].passage_id == "syn0039");
    bool saw_min = false, saw_max = false;
    for (const auto& d : docs) {
        CHECK(d.token_vectors.size() >= 4);
        CHECK(d.token_vectors.size() <= 8);
        saw_min |= d.token_vectors.size() == 4;
        saw_max |= d.token_vectors.size() == 8;
        for (const auto& row : d.token_vectors) CHECK(row.size() == 12);
    }
    // 40 draws over 5 sizes: both endpoints ought to appear.
    CHECK(saw_min);
    CHECK(saw_max);

    CHECK_THROWS_AS(random_multivector_docs(4, 0, 3, 8, 0), DataError);
    CHECK_THROWS_AS(random_multivector_docs(4, 5, 3, 8, 0), DataError);
}

} // TEST_SUITE
