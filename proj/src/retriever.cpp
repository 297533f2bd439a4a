#include "vilegal/retriever.hpp"

#include <algorithm>

namespace vilegal {

void rank_and_truncate(Ranking& scored, std::size_t top_k) {
    std::sort(scored.begin(), scored.end(), [](const ScoredPassage& a, const ScoredPassage& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.passage_id < b.passage_id;
    });
    if (scored.size() > top_k) scored.resize(top_k);
}

} // namespace vilegal
