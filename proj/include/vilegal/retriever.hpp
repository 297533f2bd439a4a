#pragma once

#include <string>
#include <vector>

namespace vilegal {

struct ScoredPassage {
    std::string passage_id;
    double score = 0.0;
};

// One ranked result list: score descending, ties broken by passage id
// ascending. Every retriever in the toolkit produces this shape.
using Ranking = std::vector<ScoredPassage>;

// Sort a scored list into the canonical order and truncate to top_k.
void rank_and_truncate(Ranking& scored, std::size_t top_k);

// The only thing filtering, mining and evaluation are allowed to know about a
// retriever: query text in, ranked passage ids out.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual Ranking search(const std::string& query_text, std::size_t top_k) const = 0;
    virtual std::string name() const = 0;
};

} // namespace vilegal
