#pragma once

#include "vilegal/io.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace vilegal {

struct SyntheticQuery {
    std::string id;         // "<passage_id>.q<n>"
    std::string passage_id; // source passage
    std::string aspect;
    std::string text;
    std::string source = "synthetic";
};

// Queries travel as JSONL records {"id","passage_id","aspect","text","source"}.
void write_queries(std::ostream& out, const std::vector<SyntheticQuery>& queries,
                   const ArtifactMeta* meta = nullptr);
void write_queries_file(const std::string& path, const std::vector<SyntheticQuery>& queries,
                        const ArtifactMeta* meta = nullptr);
std::vector<SyntheticQuery> read_queries(std::istream& in);
std::vector<SyntheticQuery> read_queries_file(const std::string& path);

} // namespace vilegal
