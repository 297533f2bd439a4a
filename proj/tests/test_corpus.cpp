#include "doctest.h"

#include "support/tmpdir.hpp"
#include "vilegal/corpus.hpp"
#include "vilegal/errors.hpp"
#include "vilegal/io.hpp"
#include "vilegal/rng.hpp"
#include "vilegal/text.hpp"

#include <sstream>
#include <string>
#include <vector>

using namespace vilegal;

namespace {

const char* kTwoDocs =
    R"({"id":"59/2020/QH14","domain":"doanh nghiệp","title":"Luật Doanh nghiệp","sections":[{"header":["Chương I","Điều 1"],"body":"Phạm vi điều chỉnh của luật."},{"header":["Chương I","Điều 2"],"body":"Đối tượng áp dụng gồm doanh nghiệp."}]})"
    "\n"
    R"({"id":"45/2019/QH14","domain":"lao động","title":"Bộ luật Lao động","sections":[{"body":"Người lao động là người làm việc theo thỏa thuận."}]})"
    "\n";

Corpus ingest_str(const std::string& s) {
    std::istringstream in(s);
    return ingest_documents(in);
}

Passage make_passage(const std::string& id, const std::string& content) {
    Passage p;
    p.id = id;
    p.doc_id = "doc";
    p.domain = "d";
    p.title = "t";
    p.header = "h";
    p.content = content;
    p.token_count = count_tokens(content);
    return p;
}

std::string spaced_tokens(std::size_t n, const std::string& prefix) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) out += ' ';
        out += prefix + std::to_string(i);
    }
    return out;
}

} // namespace

TEST_SUITE("corpus") {

TEST_CASE("ingest maps one passage per section") {
    Corpus corpus = ingest_str(kTwoDocs);
    REQUIRE(corpus.size() == 3);

    const Passage& p0 = corpus.at(0);
    CHECK(p0.id == "59/2020/QH14:0");
    CHECK(p0.doc_id == "59/2020/QH14");
    CHECK(p0.domain == "doanh nghiệp");
    CHECK(p0.title == "Luật Doanh nghiệp");
    CHECK(p0.header == "Chương I, Điều 1");
    CHECK(p0.content == "Phạm vi điều chỉnh của luật.");
    CHECK(p0.token_count == 6);

    CHECK(corpus.at(1).id == "59/2020/QH14:1");
    const Passage& p2 = corpus.at(2);
    CHECK(p2.id == "45/2019/QH14:0");
    CHECK(p2.header.empty());

    auto doc_index = corpus.doc_index();
    REQUIRE(doc_index.count("59/2020/QH14") == 1);
    CHECK(doc_index.at("59/2020/QH14") ==
          std::vector<std::string>{"59/2020/QH14:0", "59/2020/QH14:1"});
    CHECK(corpus.ordinal_of("45/2019/QH14:0") == 2);
    CHECK(corpus.passage("59/2020/QH14:1").content == "Đối tượng áp dụng gồm doanh nghiệp.");
    CHECK(corpus.has_passage("59/2020/QH14:0"));
    CHECK_FALSE(corpus.has_passage("59/2020/QH14:9"));
}

TEST_CASE("ingest skips meta records, blank lines and CR line ends") {
    std::string input = "{\"_meta\":\"tool=vilegal\"}\r\n\n  \n";
    input += R"({"id":"a","domain":"d","title":"t","sections":[{"body":"một hai ba"}]})";
    input += "\r\n";
    Corpus corpus = ingest_str(input);
    REQUIRE(corpus.size() == 1);
    CHECK(corpus.at(0).id == "a:0");
    CHECK(corpus.at(0).token_count == 3);
}

TEST_CASE("ingest errors name the record and field") {
    CHECK_THROWS_WITH_AS(ingest_str("not json\n"), "document record 0: not a JSON object",
                         DataError);
    CHECK_THROWS_WITH_AS(ingest_str(R"({"domain":"d","title":"t","sections":[]})" "\n"),
                         "document record 0: missing field \"id\"", DataError);
    CHECK_THROWS_WITH_AS(
        ingest_str(R"({"id":"","domain":"d","title":"t","sections":[]})" "\n"),
        "document record 0: field \"id\" must be a non-empty string", DataError);
    CHECK_THROWS_WITH_AS(
        ingest_str(R"({"id":"a","domain":"d","title":"t","sections":{}})" "\n"),
        "document record 0: field \"sections\" must be an array", DataError);
    CHECK_THROWS_WITH_AS(
        ingest_str(R"({"id":"a","domain":"d","title":"t","sections":[{"header":[]}]})" "\n"),
        "document record 0: missing field \"sections[0].body\"", DataError);
    CHECK_THROWS_WITH_AS(
        ingest_str(R"({"id":"a","domain":"d","title":"t","sections":[{"body":"  "}]})" "\n"),
        "document record 0: section 0 body empty after trimming", DataError);

    std::string dup = R"({"id":"a","domain":"d","title":"t","sections":[{"body":"x y"}]})";
    CHECK_THROWS_WITH_AS(ingest_str(dup + "\n" + dup + "\n"), "duplicate document id: a",
                         DataError);

    // The record index counts every line that parses, including skipped meta.
    std::string second_bad = "{\"_meta\":1}\n" R"({"title":"t"})" "\n";
    CHECK_THROWS_WITH_AS(ingest_str(second_bad), "document record 1: missing field \"id\"",
                         DataError);
}

TEST_CASE("corpus rejects duplicate passage ids") {
    std::vector<Passage> ps{make_passage("p1", "a"), make_passage("p1", "b")};
    CHECK_THROWS_WITH_AS(Corpus(std::move(ps)), "duplicate passage id: p1", DataError);
    CHECK_THROWS_AS(ingest_str(kTwoDocs).ordinal_of("nope"), DataError);
}

TEST_CASE("chunk_passage splits into greedy windows with derived ids") {
    Passage p = make_passage("luat:0", spaced_tokens(25, "t"));
    auto chunks = chunk_passage(p, 10);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].id == "luat:0#0");
    CHECK(chunks[1].id == "luat:0#1");
    CHECK(chunks[2].id == "luat:0#2");
    CHECK(chunks[0].token_count == 10);
    CHECK(chunks[1].token_count == 10);
    CHECK(chunks[2].token_count == 5);
    CHECK(chunks[0].content == spaced_tokens(10, "t"));
    CHECK(chunks[2].content == "t20 t21 t22 t23 t24");
    // Provenance fields carry over to every chunk.
    for (const auto& c : chunks) {
        CHECK(c.doc_id == "doc");
        CHECK(c.domain == "d");
        CHECK(c.title == "t");
        CHECK(c.header == "h");
    }
}

TEST_CASE("chunk_passage leaves short passages alone") {
    Passage p = make_passage("x", "  một   hai ba  ");
    p.token_count = 999; // stale on purpose
    auto chunks = chunk_passage(p, 10);
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].id == "x");            // no "#k" suffix
    CHECK(chunks[0].content == p.content); // content untouched
    CHECK(chunks[0].token_count == 3);     // but the count is recomputed
}

TEST_CASE("chunk_passage overlap shares a tail between windows") {
    Passage p = make_passage("x", spaced_tokens(20, "w"));
    auto chunks = chunk_passage(p, 8, 3);
    // stride 5: windows [0,8) [5,13) [10,18) [15,20)
    REQUIRE(chunks.size() == 4);
    CHECK(chunks[0].content == spaced_tokens(8, "w"));
    CHECK(chunks[1].content == "w5 w6 w7 w8 w9 w10 w11 w12");
    CHECK(chunks[3].content == "w15 w16 w17 w18 w19");
    auto first = tokenize(chunks[0].content);
    auto second = tokenize(chunks[1].content);
    // last 3 of one window are the first 3 of the next
    CHECK(std::vector<std::string>(first.end() - 3, first.end()) ==
          std::vector<std::string>(second.begin(), second.begin() + 3));
}

TEST_CASE("chunk_passage validates its bounds") {
    Passage p = make_passage("x", "a b c");
    CHECK_THROWS_WITH_AS(chunk_passage(p, 7), "max_tokens must be >= 8", DataError);
    CHECK_THROWS_WITH_AS(chunk_passage(p, 8, 8), "overlap must be smaller than max_tokens",
                         DataError);
    CHECK_THROWS_AS(chunk_passage(p, 8, 12), DataError);
}

TEST_CASE("non-overlapping chunks reconstruct the token stream") {
    Rng rng(404);
    for (int round = 0; round < 50; ++round) {
        std::size_t n_tokens = 1 + rng.below(300);
        std::string content;
        for (std::size_t i = 0; i < n_tokens; ++i) {
            if (i > 0) content += (rng.below(4) == 0) ? "  " : " ";
            content += "tk" + std::to_string(rng.below(1000));
        }
        Passage p = make_passage("p", content);
        std::size_t max_tokens = 8 + rng.below(64);
        auto original = tokenize(p.content);
        std::vector<std::string> rebuilt;
        for (const auto& chunk : chunk_passage(p, max_tokens)) {
            auto toks = tokenize(chunk.content);
            CHECK(toks.size() <= max_tokens);
            CHECK(toks.size() == chunk.token_count);
            rebuilt.insert(rebuilt.end(), toks.begin(), toks.end());
        }
        CHECK(rebuilt == original);
    }
}

TEST_CASE("chunk_corpus regroups the document index") {
    Corpus corpus = ingest_str(kTwoDocs);
    // max 8 keeps everything intact aside from ids, 8-token bodies and under
    Corpus same = chunk_corpus(corpus, 64);
    CHECK(same.size() == corpus.size());
    CHECK(same.at(0).id == corpus.at(0).id);

    Passage big = make_passage("big:0", spaced_tokens(30, "b"));
    big.doc_id = "big";
    Corpus mixed(std::vector<Passage>{corpus.at(2), big});
    Corpus chunked = chunk_corpus(mixed, 10);
    REQUIRE(chunked.size() == 4);
    CHECK(chunked.at(0).id == "45/2019/QH14:0");
    CHECK(chunked.at(1).id == "big:0#0");
    CHECK(chunked.doc_index().at("big") ==
          std::vector<std::string>{"big:0#0", "big:0#1", "big:0#2"});
}

TEST_CASE("passages round-trip through JSONL with a meta header") {
    Corpus corpus = ingest_str(kTwoDocs);
    ArtifactMeta meta = make_meta("00ff00ff00ff00ff", 42);

    std::ostringstream out;
    write_passages(out, corpus, &meta);
    std::string text = out.str();
    CHECK(text.find("\"_meta\"") != std::string::npos);
    CHECK(text.find("00ff00ff00ff00ff") != std::string::npos);

    std::istringstream in(text);
    Corpus back = read_passages(in);
    REQUIRE(back.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(back.at(i).id == corpus.at(i).id);
        CHECK(back.at(i).doc_id == corpus.at(i).doc_id);
        CHECK(back.at(i).domain == corpus.at(i).domain);
        CHECK(back.at(i).title == corpus.at(i).title);
        CHECK(back.at(i).header == corpus.at(i).header);
        CHECK(back.at(i).content == corpus.at(i).content);
        CHECK(back.at(i).token_count == corpus.at(i).token_count);
    }
}

TEST_CASE("read_passages reports missing fields") {
    std::istringstream in(R"({"id":"a","doc_id":"d","domain":"x","title":"t","header":""})" "\n");
    CHECK_THROWS_WITH_AS(read_passages(in), "passage record 0: missing field \"content\"",
                         DataError);
}

TEST_CASE("passage file helpers hit the filesystem") {
    testsupport::TempDir tmp;
    Corpus corpus = ingest_str(kTwoDocs);
    write_passages_file(tmp.file("p.jsonl"), corpus, nullptr);
    Corpus back = read_passages_file(tmp.file("p.jsonl"));
    CHECK(back.size() == corpus.size());
    CHECK_THROWS_AS(read_passages_file(tmp.file("absent.jsonl")), DataError);
    CHECK_THROWS_AS(ingest_documents_file(tmp.file("absent.jsonl")), DataError);
}

} // TEST_SUITE

TEST_SUITE("io") {

TEST_CASE("binary primitives are little-endian") {
    std::ostringstream out;
    put_u32(out, 0x01020304u);
    std::string bytes = out.str();
    REQUIRE(bytes.size() == 4);
    CHECK(static_cast<unsigned char>(bytes[0]) == 0x04);
    CHECK(static_cast<unsigned char>(bytes[1]) == 0x03);
    CHECK(static_cast<unsigned char>(bytes[2]) == 0x02);
    CHECK(static_cast<unsigned char>(bytes[3]) == 0x01);

    std::ostringstream out64;
    put_u64(out64, 0x1122334455667788ull);
    std::string b64 = out64.str();
    REQUIRE(b64.size() == 8);
    CHECK(static_cast<unsigned char>(b64[0]) == 0x88);
    CHECK(static_cast<unsigned char>(b64[7]) == 0x11);
}

TEST_CASE("binary primitives round-trip") {
    std::stringstream buf;
    put_u8(buf, 0xAB);
    put_u32(buf, 4294967295u);
    put_u64(buf, 0xDEADBEEFCAFEF00Dull);
    put_f32(buf, -0.125f);
    put_f64(buf, 2.718281828459045);
    put_string(buf, "điều khoản");
    put_string(buf, "");
    CHECK(get_u8(buf) == 0xAB);
    CHECK(get_u32(buf) == 4294967295u);
    CHECK(get_u64(buf) == 0xDEADBEEFCAFEF00Dull);
    CHECK(get_f32(buf) == -0.125f);
    CHECK(get_f64(buf) == 2.718281828459045);
    CHECK(get_string(buf) == "điều khoản");
    CHECK(get_string(buf) == "");
}

TEST_CASE("reads past the end fail loudly") {
    std::stringstream buf;
    put_u8(buf, 7);
    CHECK(get_u8(buf) == 7);
    CHECK_THROWS_AS(get_u32(buf), DataError);
}

TEST_CASE("expect_magic names the artifact on mismatch") {
    std::stringstream buf;
    put_bytes(buf, "VLBM", 4);
    CHECK_NOTHROW(expect_magic(buf, "VLBM", "index"));

    std::stringstream bad;
    put_bytes(bad, "XXXX", 4);
    CHECK_THROWS_WITH_AS(expect_magic(bad, "VLBM", "index"), "bad magic, not a index file",
                         DataError);
}

TEST_CASE("artifact meta formats and parses") {
    ArtifactMeta meta = make_meta("a1b2c3d4e5f60718", 99);
    CHECK(meta.to_string() == "tool=vilegal version=0.1.0 config=a1b2c3d4e5f60718 seed=99");
    CHECK(meta.to_comment_line() ==
          "# tool=vilegal version=0.1.0 config=a1b2c3d4e5f60718 seed=99");

    auto parsed = ArtifactMeta::parse(meta.to_string());
    REQUIRE(parsed.has_value());
    CHECK(parsed->tool_version == "0.1.0");
    CHECK(parsed->config_hash == "a1b2c3d4e5f60718");
    CHECK(parsed->seed == 99);

    auto from_comment = ArtifactMeta::parse(meta.to_comment_line());
    REQUIRE(from_comment.has_value());
    CHECK(from_comment->config_hash == "a1b2c3d4e5f60718");

    CHECK_FALSE(ArtifactMeta::parse("").has_value());
    CHECK_FALSE(ArtifactMeta::parse("just a comment").has_value());
}

TEST_CASE("read_lines handles universal newlines") {
    testsupport::TempDir tmp;
    write_text_file(tmp.file("mixed.txt"), "one\r\ntwo\nba\tba\r\n");
    auto lines = read_lines(tmp.file("mixed.txt"));
    CHECK(lines == std::vector<std::string>{"one", "two", "ba\tba"});
    CHECK_THROWS_AS(read_lines(tmp.file("missing.txt")), DataError);
}

TEST_CASE("text file round-trip preserves bytes") {
    testsupport::TempDir tmp;
    std::string content = "điều\n\nkhoản\tcuối\n";
    write_text_file(tmp.file("t.txt"), content);
    CHECK(read_text_file(tmp.file("t.txt")) == content);
    CHECK_THROWS_AS(read_text_file(tmp.file("absent.txt")), DataError);
}

} // TEST_SUITE
