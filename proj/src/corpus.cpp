#include "vilegal/corpus.hpp"

#include "vilegal/errors.hpp"
#include "vilegal/text.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

using json = nlohmann::ordered_json;

namespace vilegal {

namespace {

std::string trim_copy(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string join_header(const std::vector<std::string>& path) {
    std::string out;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i > 0) out += ", ";
        out += path[i];
    }
    return out;
}

const json& require_field(const json& record, const char* field, std::size_t record_index) {
    auto it = record.find(field);
    if (it == record.end()) {
        throw DataError("document record " + std::to_string(record_index) +
                        ": missing field \"" + field + "\"");
    }
    return *it;
}

} // namespace

Corpus::Corpus(std::vector<Passage> passages) : passages_(std::move(passages)) {
    for (std::size_t i = 0; i < passages_.size(); ++i) {
        const Passage& p = passages_[i];
        if (!ordinals_.emplace(p.id, i).second) {
            throw DataError("duplicate passage id: " + p.id);
        }
        doc_index_[p.doc_id].push_back(p.id);
    }
}

bool Corpus::has_passage(const std::string& passage_id) const {
    return ordinals_.count(passage_id) > 0;
}

const Passage& Corpus::passage(const std::string& passage_id) const {
    return passages_[ordinal_of(passage_id)];
}

std::size_t Corpus::ordinal_of(const std::string& passage_id) const {
    auto it = ordinals_.find(passage_id);
    if (it == ordinals_.end()) throw DataError("unknown passage id: " + passage_id);
    return it->second;
}

Corpus ingest_documents(std::istream& records) {
    std::vector<Passage> passages;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t record_index = 0;
    while (std::getline(records, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim_copy(line).empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            throw DataError("document record " + std::to_string(record_index) + ": not a JSON object");
        }
        if (rec.contains("_meta")) {
            ++record_index;
            continue;
        }
        const json& jid = require_field(rec, "id", record_index);
        const json& jdomain = require_field(rec, "domain", record_index);
        const json& jtitle = require_field(rec, "title", record_index);
        const json& jsections = require_field(rec, "sections", record_index);
        if (!jid.is_string() || jid.get<std::string>().empty()) {
            throw DataError("document record " + std::to_string(record_index) +
                            ": field \"id\" must be a non-empty string");
        }
        if (!jsections.is_array()) {
            throw DataError("document record " + std::to_string(record_index) +
                            ": field \"sections\" must be an array");
        }
        std::string doc_id = jid.get<std::string>();
        if (!seen_ids.insert(doc_id).second) {
            throw DataError("duplicate document id: " + doc_id);
        }
        std::string domain = jdomain.is_string() ? jdomain.get<std::string>() : jdomain.dump();
        std::string title = jtitle.is_string() ? jtitle.get<std::string>() : jtitle.dump();

        std::size_t section_index = 0;
        for (const json& jsec : jsections) {
            if (!jsec.is_object() || !jsec.contains("body")) {
                throw DataError("document record " + std::to_string(record_index) +
                                ": missing field \"sections[" + std::to_string(section_index) +
                                "].body\"");
            }
            std::string body = jsec.at("body").get<std::string>();
            if (trim_copy(body).empty()) {
                throw DataError("document record " + std::to_string(record_index) + ": section " +
                                std::to_string(section_index) + " body empty after trimming");
            }
            std::vector<std::string> header_path;
            if (jsec.contains("header")) {
                for (const json& h : jsec.at("header")) header_path.push_back(h.get<std::string>());
            }
            Passage p;
            p.id = doc_id + ":" + std::to_string(section_index);
            p.doc_id = doc_id;
            p.domain = domain;
            p.title = title;
            p.header = join_header(header_path);
            p.content = body;
            p.token_count = count_tokens(body);
            passages.push_back(std::move(p));
            ++section_index;
        }
        ++record_index;
    }
    return Corpus(std::move(passages));
}

Corpus ingest_documents_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return ingest_documents(in);
}

std::vector<Passage> chunk_passage(const Passage& p, std::size_t max_tokens, std::size_t overlap) {
    if (max_tokens < 8) throw DataError("max_tokens must be >= 8");
    if (overlap >= max_tokens) throw DataError("overlap must be smaller than max_tokens");

    std::vector<std::string> tokens = tokenize(p.content);
    if (tokens.size() <= max_tokens) {
        Passage single = p;
        single.token_count = tokens.size();
        return {single};
    }

    std::vector<Passage> chunks;
    std::size_t stride = max_tokens - overlap;
    std::size_t k = 0;
    for (std::size_t start = 0; start < tokens.size(); start += stride) {
        std::size_t end = std::min(start + max_tokens, tokens.size());
        std::string content;
        for (std::size_t i = start; i < end; ++i) {
            if (i > start) content += ' ';
            content += tokens[i];
        }
        Passage chunk = p;
        chunk.id = p.id + "#" + std::to_string(k++);
        chunk.content = std::move(content);
        chunk.token_count = end - start;
        chunks.push_back(std::move(chunk));
        if (end == tokens.size()) break;
    }
    return chunks;
}

Corpus chunk_corpus(const Corpus& corpus, std::size_t max_tokens, std::size_t overlap) {
    std::vector<Passage> out;
    for (const Passage& p : corpus.passages()) {
        for (Passage& chunk : chunk_passage(p, max_tokens, overlap)) {
            out.push_back(std::move(chunk));
        }
    }
    return Corpus(std::move(out));
}

void write_passages(std::ostream& out, const Corpus& corpus, const ArtifactMeta* meta) {
    if (meta != nullptr) {
        json m;
        m["_meta"] = {{"tool", "vilegal"},
                      {"version", meta->tool_version},
                      {"config", meta->config_hash},
                      {"seed", meta->seed}};
        out << m.dump() << '\n';
    }
    for (const Passage& p : corpus.passages()) {
        json rec;
        rec["id"] = p.id;
        rec["doc_id"] = p.doc_id;
        rec["domain"] = p.domain;
        rec["title"] = p.title;
        rec["header"] = p.header;
        rec["content"] = p.content;
        out << rec.dump() << '\n';
    }
}

void write_passages_file(const std::string& path, const Corpus& corpus, const ArtifactMeta* meta) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    write_passages(out, corpus, meta);
    if (!out.good()) throw DataError("write failed: " + path);
}

Corpus read_passages(std::istream& in) {
    std::vector<Passage> passages;
    std::string line;
    std::size_t record_index = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim_copy(line).empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            throw DataError("passage record " + std::to_string(record_index) + ": not a JSON object");
        }
        if (rec.contains("_meta")) {
            ++record_index;
            continue;
        }
        for (const char* field : {"id", "doc_id", "domain", "title", "header", "content"}) {
            if (!rec.contains(field)) {
                throw DataError("passage record " + std::to_string(record_index) +
                                ": missing field \"" + field + "\"");
            }
        }
        Passage p;
        p.id = rec.at("id").get<std::string>();
        p.doc_id = rec.at("doc_id").get<std::string>();
        p.domain = rec.at("domain").get<std::string>();
        p.title = rec.at("title").get<std::string>();
        p.header = rec.at("header").get<std::string>();
        p.content = rec.at("content").get<std::string>();
        p.token_count = count_tokens(p.content);
        passages.push_back(std::move(p));
        ++record_index;
    }
    return Corpus(std::move(passages));
}

Corpus read_passages_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return read_passages(in);
}

} // namespace vilegal
