#include "vilegal/query.hpp"

#include "vilegal/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>

namespace vilegal {

using ordered_json = nlohmann::ordered_json;

void write_queries(std::ostream& out, const std::vector<SyntheticQuery>& queries,
                   const ArtifactMeta* meta) {
    if (meta) {
        ordered_json header;
        header["_meta"] = meta->to_string();
        out << header.dump() << '\n';
    }
    for (const auto& q : queries) {
        ordered_json j;
        j["id"] = q.id;
        j["passage_id"] = q.passage_id;
        j["aspect"] = q.aspect;
        j["text"] = q.text;
        j["source"] = q.source;
        out << j.dump() << '\n';
    }
}

void write_queries_file(const std::string& path, const std::vector<SyntheticQuery>& queries,
                        const ArtifactMeta* meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write queries file: " + path);
    write_queries(out, queries, meta);
}

std::vector<SyntheticQuery> read_queries(std::istream& in) {
    std::vector<SyntheticQuery> queries;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const ordered_json::exception& e) {
            throw DataError("queries line " + std::to_string(line_no) + ": " + e.what());
        }
        if (j.contains("_meta")) continue;
        SyntheticQuery q;
        try {
            q.id = j.at("id").get<std::string>();
            q.passage_id = j.at("passage_id").get<std::string>();
            q.aspect = j.at("aspect").get<std::string>();
            q.text = j.at("text").get<std::string>();
            q.source = j.value("source", "synthetic");
        } catch (const ordered_json::exception& e) {
            throw DataError("queries line " + std::to_string(line_no) + ": " + e.what());
        }
        if (q.id.empty() || q.passage_id.empty() || q.text.empty()) {
            throw DataError("queries line " + std::to_string(line_no) +
                            ": id, passage_id and text must be non-empty");
        }
        if (!ids.insert(q.id).second) {
            throw DataError("queries line " + std::to_string(line_no) + ": duplicate query id '" +
                            q.id + "'");
        }
        queries.push_back(std::move(q));
    }
    return queries;
}

std::vector<SyntheticQuery> read_queries_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open queries file: " + path);
    return read_queries(in);
}

} // namespace vilegal
