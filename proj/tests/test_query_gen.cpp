#include "doctest.h"

#include "vilegal/corpus.hpp"
#include "vilegal/errors.hpp"
#include "vilegal/query_gen.hpp"
#include "vilegal/rng.hpp"
#include "vilegal/text.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

using namespace vilegal;

namespace {

Passage passage_of(const std::string& id, const std::string& content) {
    Passage p;
    p.id = id;
    p.doc_id = "vb";
    p.domain = "Thuế - Phí - Lệ phí";
    p.title = "Thông tư 219/2013/TT-BTC";
    p.header = "Chương I, Điều 4";
    p.content = content;
    p.token_count = count_tokens(content);
    return p;
}

const char* kBody =
    "Đối tượng không chịu thuế giá trị gia tăng gồm sản phẩm trồng trọt chăn nuôi "
    "thủy sản nuôi trồng chưa chế biến thành các sản phẩm khác";

// A backend that fails with a transport error a fixed number of times per
// prompt before answering.
class FlakyBackend : public CompletionBackend {
public:
    FlakyBackend(int failures, std::string answer)
        : failures_(failures), answer_(std::move(answer)) {}
    std::string complete(const std::string&) override {
        if (calls_.fetch_add(1) < failures_) throw BackendError("connection reset");
        return answer_;
    }
    std::string name() const override { return "flaky"; }
    int calls() const { return calls_.load(); }

private:
    std::atomic<int> calls_{0};
    int failures_;
    std::string answer_;
};

class FixedBackend : public CompletionBackend {
public:
    explicit FixedBackend(std::string answer) : answer_(std::move(answer)) {}
    std::string complete(const std::string&) override { return answer_; }
    std::string name() const override { return "fixed"; }

private:
    std::string answer_;
};

GenerationOptions fast_options() {
    GenerationOptions options;
    options.backoff_base = std::chrono::milliseconds(0);
    return options;
}

// True if `window` appears as a contiguous subsequence of `tokens`.
bool contiguous_in(const std::vector<std::string>& tokens,
                   const std::vector<std::string>& window) {
    if (window.empty() || window.size() > tokens.size()) return false;
    return std::search(tokens.begin(), tokens.end(), window.begin(), window.end()) !=
           tokens.end();
}

} // namespace

TEST_SUITE("query_gen") {

TEST_CASE("prompt carries the passage and its provenance") {
    Passage p = passage_of("tt219:3", kBody);
    std::string prompt = build_prompt(p, PromptMode::kAspectGuided, {});
    CHECK(prompt.find("Domain: Thuế - Phí - Lệ phí\n") != std::string::npos);
    CHECK(prompt.find("Header: Chương I, Điều 4\n") != std::string::npos);
    CHECK(prompt.find(std::string("<<<\n") + kBody + "\n>>>") != std::string::npos);
    CHECK(prompt.find("Aspect 1:") != std::string::npos);
    CHECK(prompt.find("Query 1:") != std::string::npos);
    // Aspect-guided mode asks for aspects first; basic mode does not.
    CHECK(prompt.find("identify 1-5 distinct aspects") != std::string::npos);
    std::string basic = build_prompt(p, PromptMode::kBasic, {});
    CHECK(basic.find("identify 1-5 distinct aspects") == std::string::npos);
    CHECK(basic.find("1-5 natural-language questions") != std::string::npos);
    // Neither embeds an examples block unless examples are given.
    CHECK(prompt.find("Examples:") == std::string::npos);
}

TEST_CASE("few-shot examples are quoted verbatim under a header") {
    Passage p = passage_of("x:0", kBody);
    std::vector<std::string> shots{
        "Aspect 1: thuế suất\nQuery 1: Mức thuế suất thuế GTGT với nước sạch là bao nhiêu?"};
    std::string prompt = build_prompt(p, PromptMode::kAspectGuided, shots);
    auto at = prompt.find("Examples:\n");
    REQUIRE(at != std::string::npos);
    CHECK(prompt.find(shots[0], at) != std::string::npos);
    // Examples precede the passage itself.
    CHECK(at < prompt.find("<<<\n"));
}

TEST_CASE("prompt rejects blank passages") {
    Passage p = passage_of("blank:0", "   ");
    CHECK_THROWS_WITH_AS(build_prompt(p, PromptMode::kBasic, {}),
                         "passage 'blank:0' has empty content", DataError);
}

TEST_CASE("prompt_mode_from_string accepts only the two modes") {
    CHECK(prompt_mode_from_string("aspect_guided") == PromptMode::kAspectGuided);
    CHECK(prompt_mode_from_string("basic") == PromptMode::kBasic);
    CHECK_THROWS_AS(prompt_mode_from_string("fancy"), DataError);
}

TEST_CASE("parser accepts label variants") {
    std::string raw =
        "Some preamble the model added.\n"
        "aspect 1: phạm vi áp dụng\n"
        "QUERY 1.: Thông tư áp dụng cho ai?\n"
        "  Aspect 2) : đối tượng miễn thuế  \n"
        "Query 2: Những đối tượng nào được miễn thuế?\n"
        "Aspect: không số\n"
        "Query: Câu hỏi không đánh số được không?\n";
    auto items = parse_generation(raw);
    REQUIRE(items.size() == 3);
    CHECK(items[0].aspect == "phạm vi áp dụng");
    CHECK(items[0].query_text == "Thông tư áp dụng cho ai?");
    CHECK(items[1].aspect == "đối tượng miễn thuế");
    CHECK(items[2].aspect == "không số");
    CHECK(items[2].query_text == "Câu hỏi không đánh số được không?");
}

TEST_CASE("parser drops incomplete or empty pairs") {
    // Aspect without a query, query without an aspect, empty values.
    CHECK(parse_generation("Aspect 1: lonely\n").empty());
    CHECK(parse_generation("Query 1: no aspect came first\n").empty());
    CHECK(parse_generation("Aspect 1: a\nAspect 2: b\nQuery 2: only second\n").size() == 1);
    CHECK(parse_generation("Aspect 1: a\nQuery 1:\nQuery 2: dangling\n").empty());
    CHECK(parse_generation("Aspect 1:\nQuery 1: q\n").empty());
    CHECK(parse_generation("").empty());
    CHECK(parse_generation("The model refused to answer.").empty());

    // A second aspect replaces a pending one rather than pairing backwards.
    auto items = parse_generation("Aspect 1: first\nAspect 2: second\nQuery 2: q?\n");
    REQUIRE(items.size() == 1);
    CHECK(items[0].aspect == "second");
}

TEST_CASE("render and parse are inverse on clean items") {
    std::vector<AspectQuery> items{{"thuế suất", "Thuế suất là bao nhiêu phần trăm?"},
                                   {"hoàn thuế", "Khi nào được hoàn thuế GTGT?"},
                                   {"kê khai", "Hồ sơ kê khai gồm những gì?"}};
    std::string rendered = render_generation(items);
    auto back = parse_generation(rendered);
    REQUIRE(back.size() == items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        CHECK(back[i].aspect == items[i].aspect);
        CHECK(back[i].query_text == items[i].query_text);
    }
}

TEST_CASE("mock backend is a pure function of prompt and seed") {
    Passage p = passage_of("tt219:0", kBody);
    std::string prompt = build_prompt(p, PromptMode::kAspectGuided, {});
    MockCompletionBackend one(7), two(7), other(8);
    CHECK(one.complete(prompt) == two.complete(prompt));
    CHECK(one.complete(prompt) != other.complete(prompt));

    // The prompt embeds the header but not the id, so only the former moves
    // the sample.
    Passage renamed = passage_of("tt219:1", kBody);
    CHECK(one.complete(build_prompt(renamed, PromptMode::kAspectGuided, {})) ==
          one.complete(prompt));
    Passage reheaded = passage_of("tt219:0", kBody);
    reheaded.header = "Chương II, Điều 5";
    CHECK(one.complete(build_prompt(reheaded, PromptMode::kAspectGuided, {})) !=
          one.complete(prompt));
}

TEST_CASE("mock backend answers with 2-4 parseable content windows") {
    auto passage_tokens = tokenize(kBody);
    bool saw_suffix = false;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        MockCompletionBackend backend(seed);
        Passage p = passage_of("w:0", kBody);
        auto items = parse_generation(backend.complete(build_prompt(p, PromptMode::kBasic, {})));
        REQUIRE(items.size() >= 2);
        REQUIRE(items.size() <= 4);
        for (const auto& item : items) {
            CHECK_FALSE(item.aspect.empty());
            REQUIRE_FALSE(item.query_text.empty());
            CHECK(item.query_text.back() == '?');
            std::string text = item.query_text.substr(0, item.query_text.size() - 1);
            const std::string tail = " theo quy định này";
            if (text.size() > tail.size() &&
                text.compare(text.size() - tail.size(), tail.size(), tail) == 0) {
                saw_suffix = true;
                text.resize(text.size() - tail.size());
            }
            auto window = tokenize(text);
            CHECK(window.size() >= 6);
            CHECK(window.size() <= 12);
            CHECK(contiguous_in(passage_tokens, window));
            // The aspect is the window's head.
            auto aspect_tokens = tokenize(item.aspect);
            REQUIRE(aspect_tokens.size() <= 3);
            CHECK(std::equal(aspect_tokens.begin(), aspect_tokens.end(), window.begin()));
        }
    }
    CHECK(saw_suffix); // the self-reference tail fires at its 10% rate
}

TEST_CASE("generation walks the corpus in order and flattens to queries") {
    Corpus corpus({passage_of("a:0", kBody), passage_of("b:0", kBody)});
    MockCompletionBackend backend(3);
    GenerationRun run = generate_for_corpus(corpus, backend, fast_options());
    REQUIRE(run.results.size() == 2);
    CHECK(run.skipped.empty());
    CHECK(run.truncated_items == 0);
    CHECK(run.results[0].passage_id == "a:0");
    CHECK(run.results[1].passage_id == "b:0");
    CHECK(run.results[0].attempt_count == 1);
    CHECK_FALSE(run.results[0].raw_response.empty());

    auto queries = to_queries(run);
    REQUIRE(queries.size() == run.results[0].items.size() + run.results[1].items.size());
    CHECK(queries[0].id == "a:0.q1");
    CHECK(queries[1].id == "a:0.q2");
    CHECK(queries[0].passage_id == "a:0");
    CHECK(queries[0].source == "synthetic");
    CHECK(queries[0].text == run.results[0].items[0].query_text);
    // Ids restart numbering per passage.
    auto b_first = std::find_if(queries.begin(), queries.end(),
                                [](const SyntheticQuery& q) { return q.passage_id == "b:0"; });
    REQUIRE(b_first != queries.end());
    CHECK(b_first->id == "b:0.q1");
}

TEST_CASE("transport failures are retried with attempts recorded") {
    Corpus corpus({passage_of("a:0", kBody)});
    FlakyBackend backend(2, "Aspect 1: thuế\nQuery 1: Ai phải nộp thuế?\n");
    GenerationOptions options = fast_options();
    options.max_retries = 2;
    GenerationRun run = generate_for_corpus(corpus, backend, options);
    REQUIRE(run.results.size() == 1);
    CHECK(run.results[0].attempt_count == 3);
    CHECK(run.results[0].items.size() == 1);
    CHECK(backend.calls() == 3);
}

TEST_CASE("exhausted retries become a skip with the last reason") {
    Corpus corpus({passage_of("a:0", kBody)});
    FlakyBackend backend(10, "unused");
    GenerationOptions options = fast_options();
    options.max_retries = 1;
    GenerationRun run = generate_for_corpus(corpus, backend, options);
    CHECK(run.results.empty());
    REQUIRE(run.skipped.size() == 1);
    CHECK(run.skipped[0].passage_id == "a:0");
    CHECK(run.skipped[0].reason == "backend error: connection reset");
    CHECK(run.skipped[0].attempt_count == 2);
    CHECK(backend.calls() == 2);
}

TEST_CASE("unparseable answers are retried then skipped") {
    Corpus corpus({passage_of("a:0", kBody)});
    FixedBackend backend("I cannot help with that.");
    GenerationOptions options = fast_options();
    options.max_retries = 2;
    GenerationRun run = generate_for_corpus(corpus, backend, options);
    CHECK(run.results.empty());
    REQUIRE(run.skipped.size() == 1);
    CHECK(run.skipped[0].reason == "unparseable response");
    CHECK(run.skipped[0].attempt_count == 3);
}

TEST_CASE("a blank passage is skipped without burning retries") {
    Corpus corpus({passage_of("a:0", "   "), passage_of("b:0", kBody)});
    MockCompletionBackend backend(0);
    GenerationOptions options = fast_options();
    options.max_retries = 3;
    GenerationRun run = generate_for_corpus(corpus, backend, options);
    REQUIRE(run.skipped.size() == 1);
    CHECK(run.skipped[0].passage_id == "a:0");
    CHECK(run.skipped[0].reason == "passage 'a:0' has empty content");
    CHECK(run.skipped[0].attempt_count == 1);
    REQUIRE(run.results.size() == 1);
    CHECK(run.results[0].passage_id == "b:0");
}

TEST_CASE("overlong answers are truncated to five items") {
    std::string eight;
    for (int i = 1; i <= 8; ++i) {
        eight += "Aspect " + std::to_string(i) + ": a" + std::to_string(i) + "\n";
        eight += "Query " + std::to_string(i) + ": q" + std::to_string(i) + "?\n";
    }
    Corpus corpus({passage_of("a:0", kBody)});
    FixedBackend backend(eight);
    GenerationRun run = generate_for_corpus(corpus, backend, fast_options());
    REQUIRE(run.results.size() == 1);
    CHECK(run.results[0].items.size() == 5);
    CHECK(run.truncated_items == 3);
    CHECK(run.results[0].items[4].query_text == "q5?");
}

TEST_CASE("invalid max_retries is rejected") {
    Corpus corpus({passage_of("a:0", kBody)});
    MockCompletionBackend backend(0);
    GenerationOptions options;
    options.max_retries = -1;
    CHECK_THROWS_AS(generate_for_corpus(corpus, backend, options), DataError);
}

TEST_CASE("concurrent generation matches the sequential run") {
    std::vector<Passage> ps;
    for (int i = 0; i < 24; ++i) {
        ps.push_back(passage_of("p" + std::to_string(i) + ":0",
                                std::string(kBody) + " biến thể " + std::to_string(i)));
    }
    Corpus corpus(std::move(ps));
    MockCompletionBackend backend(5);

    GenerationOptions sequential = fast_options();
    GenerationOptions parallel = fast_options();
    parallel.concurrency = 4;

    GenerationRun a = generate_for_corpus(corpus, backend, sequential);
    GenerationRun b = generate_for_corpus(corpus, backend, parallel);
    REQUIRE(a.results.size() == b.results.size());
    for (std::size_t i = 0; i < a.results.size(); ++i) {
        CHECK(a.results[i].passage_id == b.results[i].passage_id);
        CHECK(a.results[i].raw_response == b.results[i].raw_response);
        REQUIRE(a.results[i].items.size() == b.results[i].items.size());
        for (std::size_t j = 0; j < a.results[i].items.size(); ++j) {
            CHECK(a.results[i].items[j].query_text == b.results[i].items[j].query_text);
        }
    }
}

TEST_CASE("http backend speaks the completions protocol") {
    httplib::Server server;
    std::string seen_body, seen_auth, seen_path;
    server.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_path = req.path;
        seen_body = req.body;
        if (req.has_header("Authorization")) seen_auth = req.get_header_value("Authorization");
        res.set_content(R"({"choices":[{"text":"Aspect 1: a\nQuery 1: q?"}]})",
                        "application/json");
    });
    server.Post("/fail", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
    });

    int port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) {
        MESSAGE("skipping: cannot bind a localhost socket in this environment");
        return;
    }
    std::thread serving([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpCompletionBackend::Settings settings;
    settings.base_url = "http://127.0.0.1:" + std::to_string(port);
    settings.api_key = "sk-test";
    settings.model = "legal-gen";
    settings.timeout_seconds = 5;

    HttpCompletionBackend backend(settings);
    CHECK(backend.name() == "http");
    std::string text = backend.complete("viết câu hỏi");
    CHECK(text == "Aspect 1: a\nQuery 1: q?");
    CHECK(seen_path == "/v1/completions");
    CHECK(seen_auth == "Bearer sk-test");
    CHECK(seen_body.find("\"model\":\"legal-gen\"") != std::string::npos);
    CHECK(seen_body.find("viết câu hỏi") != std::string::npos);

    server.stop();
    serving.join();
}

TEST_CASE("http backend surfaces bad status and bad payloads") {
    httplib::Server server;
    server.Post("/v1/completions", [](const httplib::Request& req, httplib::Response& res) {
        if (req.body.find("break") != std::string::npos) {
            res.set_content("{\"unexpected\":true}", "application/json");
        } else {
            res.status = 503;
        }
    });
    int port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) {
        MESSAGE("skipping: cannot bind a localhost socket in this environment");
        return;
    }
    std::thread serving([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpCompletionBackend::Settings settings;
    settings.base_url = "http://127.0.0.1:" + std::to_string(port);
    settings.timeout_seconds = 5;
    HttpCompletionBackend backend(settings);
    CHECK_THROWS_WITH_AS(backend.complete("x"), "backend returned HTTP 503", BackendError);
    CHECK_THROWS_AS(backend.complete("break"), BackendError);

    server.stop();
    serving.join();

    // No server at all: transport error.
    HttpCompletionBackend::Settings dead = settings;
    dead.base_url = "http://127.0.0.1:1";
    dead.timeout_seconds = 1;
    CHECK_THROWS_AS(HttpCompletionBackend(dead).complete("x"), BackendError);
}

TEST_CASE("settings_from_env requires the url and honors overrides") {
    unsetenv("VILEGAL_BACKEND_URL");
    unsetenv("VILEGAL_API_KEY");
    unsetenv("VILEGAL_MODEL");
    CHECK_THROWS_AS(HttpCompletionBackend::settings_from_env(), DataError);
    CHECK_THROWS_AS(HttpCompletionBackend(HttpCompletionBackend::Settings{}), DataError);

    setenv("VILEGAL_BACKEND_URL", "http://example.invalid:9", 1);
    auto s = HttpCompletionBackend::settings_from_env();
    CHECK(s.base_url == "http://example.invalid:9");
    CHECK(s.api_key.empty());
    CHECK(s.model == "default");

    setenv("VILEGAL_API_KEY", "sk-abc", 1);
    setenv("VILEGAL_MODEL", "viq", 1);
    s = HttpCompletionBackend::settings_from_env();
    CHECK(s.api_key == "sk-abc");
    CHECK(s.model == "viq");

    unsetenv("VILEGAL_BACKEND_URL");
    unsetenv("VILEGAL_API_KEY");
    unsetenv("VILEGAL_MODEL");
}

} // TEST_SUITE
