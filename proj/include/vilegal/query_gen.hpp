#pragma once

#include "vilegal/corpus.hpp"
#include "vilegal/query.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace vilegal {

// Transport-level backend failure; retried with exponential backoff.
class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& msg) : std::runtime_error(msg) {}
};

struct AspectQuery {
    std::string aspect;
    std::string query_text;
};

enum class PromptMode { kAspectGuided, kBasic };

PromptMode prompt_mode_from_string(const std::string& s); // "aspect_guided" | "basic"

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual std::string complete(const std::string& prompt) = 0;
    virtual std::string name() const = 0;
};

// Builds the generation prompt. Aspect-guided mode asks the model to first
// identify 1-5 distinct aspects and then write one query per aspect; basic
// mode asks for questions directly. Both demand numbered "Aspect n:" /
// "Query n:" answer lines so the output stays parseable.
std::string build_prompt(const Passage& p, PromptMode mode,
                         const std::vector<std::string>& few_shot);

// Extracts ordered (aspect, query) pairs from labeled lines, tolerating
// numbering and surrounding whitespace. An Aspect line without a following
// Query line is dropped. Empty result means the response was unparseable.
std::vector<AspectQuery> parse_generation(const std::string& raw);

// Renders items in the exact labeled format parse_generation understands.
std::string render_generation(const std::vector<AspectQuery>& items);

struct GenerationResult {
    std::string passage_id;
    std::vector<AspectQuery> items; // 1..5 entries
    std::string raw_response;
    int attempt_count = 1;
};

struct GenerationSkip {
    std::string passage_id;
    std::string reason;
    int attempt_count = 0;
};

struct GenerationRun {
    std::vector<GenerationResult> results; // corpus passage order
    std::vector<GenerationSkip> skipped;   // corpus passage order
    std::size_t truncated_items = 0;       // parsed pairs dropped beyond the 5-item cap
};

struct GenerationOptions {
    PromptMode mode = PromptMode::kAspectGuided;
    std::vector<std::string> few_shot;
    int max_retries = 2;   // attempts = max_retries + 1
    int concurrency = 1;   // parallel backend calls
    std::chrono::milliseconds backoff_base{100}; // doubles per transport retry
};

GenerationRun generate_for_corpus(const Corpus& corpus, CompletionBackend& backend,
                                  const GenerationOptions& options);

// Flattens results into queries with ids "<passage_id>.q<n>", n starting at 1.
std::vector<SyntheticQuery> to_queries(const GenerationRun& run);

// Deterministic stand-in for the LLM: output depends only on the prompt (and
// the constructor seed). Queries are contiguous windows of passage content
// tokens, so a lexical retriever can recover the source passage.
class MockCompletionBackend : public CompletionBackend {
public:
    explicit MockCompletionBackend(std::uint64_t seed = 0) : seed_(seed) {}
    std::string complete(const std::string& prompt) override;
    std::string name() const override { return "mock"; }

private:
    std::uint64_t seed_;
};

// Text-completion HTTP client: POST {base_url}/v1/completions with a JSON
// body {"model","prompt","max_tokens","temperature"}, bearer-token auth,
// answer read from choices[0].text.
class HttpCompletionBackend : public CompletionBackend {
public:
    struct Settings {
        std::string base_url;  // e.g. "http://localhost:8080"
        std::string api_key;   // empty -> no Authorization header
        std::string model = "default";
        int max_tokens = 512;
        double temperature = 0.7;
        int timeout_seconds = 30;
    };

    explicit HttpCompletionBackend(Settings settings);
    std::string complete(const std::string& prompt) override;
    std::string name() const override { return "http"; }

    // Reads VILEGAL_BACKEND_URL (required), VILEGAL_API_KEY, VILEGAL_MODEL.
    static Settings settings_from_env();

private:
    Settings settings_;
};

} // namespace vilegal
