#pragma once

#include "vilegal/query.hpp"
#include "vilegal/retriever.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vilegal {

// The two self-reference phrases the pipeline always blocks.
std::vector<std::string> default_blacklist();

struct SelfRefDecision {
    bool keep = true;
    std::string matched_phrase; // set when dropped
};

// Drop iff the NFC-normalized, case-folded query text contains any blacklist
// phrase (matched the same way) as a substring.
SelfRefDecision self_reference_filter(const SyntheticQuery& q,
                                      const std::vector<std::string>& blacklist);

struct DroppedSelfRef {
    std::string query_id;
    std::string phrase;
};

struct DroppedRecovery {
    std::string query_id;
    std::optional<std::size_t> rank_found; // absent: not in the top k at all
};

struct FilterReport {
    std::size_t input_count = 0;
    std::vector<std::string> kept;       // query ids, input order
    std::vector<std::size_t> kept_ranks; // rank of the source passage, parallel to kept
    std::vector<DroppedSelfRef> dropped_self_ref;
    std::vector<DroppedRecovery> dropped_recovery;
    double pass_rate = 0.0; // |kept| / input_count, 0 when input empty

    std::string to_json() const;
};

// Keeps a query iff the retriever ranks its source passage within the top k
// for the query text. known_passage_ids is the corpus id set used to enforce
// that every query references an existing passage.
FilterReport recovery_filter(const std::vector<SyntheticQuery>& queries,
                             const Retriever& retriever, std::size_t k,
                             const std::set<std::string>& known_passage_ids);

// Self-reference filter first, then the recovery filter on the survivors;
// one combined report over the original input.
FilterReport apply_filters(const std::vector<SyntheticQuery>& queries,
                           const std::vector<std::string>& blacklist,
                           const Retriever& retriever, std::size_t k,
                           const std::set<std::string>& known_passage_ids);

// The queries named by report.kept, in report order.
std::vector<SyntheticQuery> kept_queries(const std::vector<SyntheticQuery>& queries,
                                         const FilterReport& report);

} // namespace vilegal
