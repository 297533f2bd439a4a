#include "vilegal/query_gen.hpp"

#include "vilegal/errors.hpp"
#include "vilegal/hash.hpp"
#include "vilegal/rng.hpp"
#include "vilegal/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <sstream>
#include <thread>

namespace vilegal {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Matches "<label>[ <number>][./)]*:" case-insensitively (ASCII label only)
// against a trimmed line; on success fills value_out with the trimmed rest.
bool match_label(const std::string& line, const char* label, std::string& value_out) {
    const std::size_t label_len = std::strlen(label);
    if (line.size() < label_len + 1) return false;
    for (std::size_t k = 0; k < label_len; ++k) {
        if (std::tolower(static_cast<unsigned char>(line[k])) != label[k]) return false;
    }
    std::size_t i = label_len;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    while (i < line.size() &&
           (line[i] == ' ' || line[i] == '\t' || line[i] == '.' || line[i] == ')')) {
        ++i;
    }
    if (i >= line.size() || line[i] != ':') return false;
    value_out = trim(line.substr(i + 1));
    return true;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t start,
                        std::size_t count) {
    std::string out;
    for (std::size_t i = 0; i < count; ++i) {
        if (i > 0) out += ' ';
        out += tokens[start + i];
    }
    return out;
}

constexpr char kContentOpen[] = "<<<\n";
constexpr char kContentClose[] = "\n>>>";

} // namespace

PromptMode prompt_mode_from_string(const std::string& s) {
    if (s == "aspect_guided") return PromptMode::kAspectGuided;
    if (s == "basic") return PromptMode::kBasic;
    throw DataError("unknown prompt mode '" + s + "' (expected aspect_guided or basic)");
}

std::string build_prompt(const Passage& p, PromptMode mode,
                         const std::vector<std::string>& few_shot) {
    std::string content = trim(p.content);
    if (content.empty()) {
        throw DataError("passage '" + p.id + "' has empty content");
    }
    std::ostringstream out;
    out << "You are an expert assistant writing Vietnamese legal search queries.\n\n";
    if (mode == PromptMode::kAspectGuided) {
        out << "Read the passage below. First identify 1-5 distinct aspects covered in the "
               "passage, then write exactly one natural-language question per aspect that the "
               "passage answers.\n\n";
    } else {
        out << "Read the passage below and write 1-5 natural-language questions that the "
               "passage answers.\n\n";
    }
    out << "Answer with numbered label pairs and nothing else, one pair per question:\n"
           "Aspect 1: <short topic of the question>\n"
           "Query 1: <the question>\n\n";
    if (!few_shot.empty()) {
        out << "Examples:\n";
        for (const auto& example : few_shot) {
            out << example << "\n\n";
        }
    }
    out << "Domain: " << p.domain << '\n';
    out << "Header: " << p.header << '\n';
    out << "Passage:\n" << kContentOpen << content << kContentClose << '\n';
    return out.str();
}

std::vector<AspectQuery> parse_generation(const std::string& raw) {
    std::vector<AspectQuery> items;
    std::optional<std::string> pending_aspect;
    std::istringstream in(raw);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        std::string value;
        if (match_label(t, "aspect", value)) {
            if (value.empty()) {
                pending_aspect.reset();
            } else {
                pending_aspect = value;
            }
        } else if (match_label(t, "query", value)) {
            if (pending_aspect && !value.empty()) {
                items.push_back(AspectQuery{*pending_aspect, value});
            }
            pending_aspect.reset();
        }
    }
    return items;
}

std::string render_generation(const std::vector<AspectQuery>& items) {
    std::ostringstream out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out << "Aspect " << (i + 1) << ": " << items[i].aspect << '\n';
        out << "Query " << (i + 1) << ": " << items[i].query_text << '\n';
    }
    return out.str();
}

GenerationRun generate_for_corpus(const Corpus& corpus, CompletionBackend& backend,
                                  const GenerationOptions& options) {
    if (options.max_retries < 0) throw DataError("max_retries must be >= 0");

    const auto& passages = corpus.passages();
    struct Slot {
        std::optional<GenerationResult> result;
        std::optional<GenerationSkip> skip;
        std::size_t truncated = 0;
    };
    std::vector<Slot> slots(passages.size());
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= passages.size()) break;
            const Passage& p = passages[i];
            Slot& slot = slots[i];
            int attempts = 0;
            std::string last_reason;
            for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
                ++attempts;
                std::string raw;
                try {
                    std::string prompt = build_prompt(p, options.mode, options.few_shot);
                    raw = backend.complete(prompt);
                } catch (const BackendError& e) {
                    last_reason = std::string("backend error: ") + e.what();
                    if (attempt < options.max_retries && options.backoff_base.count() > 0) {
                        std::this_thread::sleep_for(options.backoff_base * (1ll << attempt));
                    }
                    continue;
                } catch (const DataError& e) {
                    last_reason = e.what();
                    break;
                }
                auto items = parse_generation(raw);
                if (items.empty()) {
                    last_reason = "unparseable response";
                    continue;
                }
                GenerationResult result;
                result.passage_id = p.id;
                if (items.size() > 5) {
                    slot.truncated = items.size() - 5;
                    items.resize(5);
                }
                result.items = std::move(items);
                result.raw_response = std::move(raw);
                result.attempt_count = attempts;
                slot.result = std::move(result);
                break;
            }
            if (!slot.result) {
                slot.skip = GenerationSkip{p.id, last_reason, attempts};
            }
        }
    };

    int workers = std::max(1, options.concurrency);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    GenerationRun run;
    for (auto& slot : slots) {
        run.truncated_items += slot.truncated;
        if (slot.result) run.results.push_back(std::move(*slot.result));
        if (slot.skip) run.skipped.push_back(std::move(*slot.skip));
    }
    return run;
}

std::vector<SyntheticQuery> to_queries(const GenerationRun& run) {
    std::vector<SyntheticQuery> queries;
    for (const auto& result : run.results) {
        std::size_t n = 1;
        for (const auto& item : result.items) {
            SyntheticQuery q;
            q.id = result.passage_id + ".q" + std::to_string(n++);
            q.passage_id = result.passage_id;
            q.aspect = item.aspect;
            q.text = item.query_text;
            queries.push_back(std::move(q));
        }
    }
    return queries;
}

std::string MockCompletionBackend::complete(const std::string& prompt) {
    Rng rng(splitmix64(fnv1a64(prompt) ^ seed_));
    std::string content = prompt;
    std::size_t open = prompt.find(kContentOpen);
    std::size_t close = prompt.rfind(kContentClose);
    if (open != std::string::npos && close != std::string::npos &&
        close > open + std::strlen(kContentOpen)) {
        std::size_t begin = open + std::strlen(kContentOpen);
        content = prompt.substr(begin, close - begin);
    }
    auto tokens = tokenize(content);
    if (tokens.empty()) return "no usable passage content";

    std::size_t n_items = 2 + static_cast<std::size_t>(rng.below(3));
    std::ostringstream out;
    for (std::size_t i = 0; i < n_items; ++i) {
        std::size_t len = 6 + static_cast<std::size_t>(rng.below(7));
        len = std::min(len, tokens.size());
        std::size_t start = 0;
        if (tokens.size() > len) {
            start = static_cast<std::size_t>(rng.below(tokens.size() - len + 1));
        }
        std::string aspect = join_tokens(tokens, start, std::min<std::size_t>(3, len));
        std::string query = join_tokens(tokens, start, len);
        if (rng.below(10) == 0) query += " theo quy định này";
        out << "Aspect " << (i + 1) << ": " << aspect << '\n';
        out << "Query " << (i + 1) << ": " << query << "?\n";
    }
    return out.str();
}

HttpCompletionBackend::HttpCompletionBackend(Settings settings)
    : settings_(std::move(settings)) {
    if (settings_.base_url.empty()) {
        throw DataError("http backend requires a base URL");
    }
}

std::string HttpCompletionBackend::complete(const std::string& prompt) {
    httplib::Client client(settings_.base_url);
    client.set_connection_timeout(settings_.timeout_seconds, 0);
    client.set_read_timeout(settings_.timeout_seconds, 0);
    client.set_write_timeout(settings_.timeout_seconds, 0);

    httplib::Headers headers;
    if (!settings_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + settings_.api_key);
    }
    nlohmann::json body{{"model", settings_.model},
                        {"prompt", prompt},
                        {"max_tokens", settings_.max_tokens},
                        {"temperature", settings_.temperature}};
    auto res = client.Post("/v1/completions", headers, body.dump(), "application/json");
    if (!res) {
        throw BackendError("transport failure: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw BackendError("backend returned HTTP " + std::to_string(res->status));
    }
    try {
        auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("malformed backend response: ") + e.what());
    }
}

HttpCompletionBackend::Settings HttpCompletionBackend::settings_from_env() {
    Settings s;
    const char* url = std::getenv("VILEGAL_BACKEND_URL");
    if (!url || !*url) {
        throw DataError("VILEGAL_BACKEND_URL is not set");
    }
    s.base_url = url;
    if (const char* key = std::getenv("VILEGAL_API_KEY")) s.api_key = key;
    if (const char* model = std::getenv("VILEGAL_MODEL"); model && *model) s.model = model;
    return s;
}

} // namespace vilegal
