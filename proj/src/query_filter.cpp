#include "vilegal/query_filter.hpp"

#include "vilegal/errors.hpp"
#include "vilegal/text.hpp"

#include <nlohmann/json.hpp>

#include <map>

namespace vilegal {

std::vector<std::string> default_blacklist() {
    return {"quy định này", "thông tư này"};
}

SelfRefDecision self_reference_filter(const SyntheticQuery& q,
                                      const std::vector<std::string>& blacklist) {
    std::string folded = fold_case(q.text);
    for (const auto& phrase : blacklist) {
        if (phrase.empty()) throw DataError("blacklist phrases must be non-empty");
        if (folded.find(fold_case(phrase)) != std::string::npos) {
            return SelfRefDecision{false, phrase};
        }
    }
    return SelfRefDecision{true, ""};
}

FilterReport recovery_filter(const std::vector<SyntheticQuery>& queries,
                             const Retriever& retriever, std::size_t k,
                             const std::set<std::string>& known_passage_ids) {
    if (k < 1) throw DataError("recovery filter requires k >= 1");
    FilterReport report;
    report.input_count = queries.size();
    for (const auto& q : queries) {
        if (!known_passage_ids.count(q.passage_id)) {
            throw DataError("query '" + q.id + "' references unknown passage '" +
                            q.passage_id + "'");
        }
        Ranking ranking = retriever.search(q.text, k);
        std::optional<std::size_t> rank;
        for (std::size_t i = 0; i < ranking.size(); ++i) {
            if (ranking[i].passage_id == q.passage_id) {
                rank = i + 1;
                break;
            }
        }
        if (rank) {
            report.kept.push_back(q.id);
            report.kept_ranks.push_back(*rank);
        } else {
            report.dropped_recovery.push_back(DroppedRecovery{q.id, std::nullopt});
        }
    }
    report.pass_rate = report.input_count == 0
                           ? 0.0
                           : static_cast<double>(report.kept.size()) /
                                 static_cast<double>(report.input_count);
    return report;
}

FilterReport apply_filters(const std::vector<SyntheticQuery>& queries,
                           const std::vector<std::string>& blacklist,
                           const Retriever& retriever, std::size_t k,
                           const std::set<std::string>& known_passage_ids) {
    std::vector<SyntheticQuery> survivors;
    survivors.reserve(queries.size());
    FilterReport report;
    report.input_count = queries.size();
    for (const auto& q : queries) {
        auto decision = self_reference_filter(q, blacklist);
        if (decision.keep) {
            survivors.push_back(q);
        } else {
            report.dropped_self_ref.push_back(DroppedSelfRef{q.id, decision.matched_phrase});
        }
    }
    FilterReport recovery = recovery_filter(survivors, retriever, k, known_passage_ids);
    report.kept = std::move(recovery.kept);
    report.kept_ranks = std::move(recovery.kept_ranks);
    report.dropped_recovery = std::move(recovery.dropped_recovery);
    report.pass_rate = report.input_count == 0
                           ? 0.0
                           : static_cast<double>(report.kept.size()) /
                                 static_cast<double>(report.input_count);
    return report;
}

std::string FilterReport::to_json() const {
    nlohmann::ordered_json j;
    j["input_count"] = input_count;
    j["kept"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < kept.size(); ++i) {
        j["kept"].push_back({{"id", kept[i]}, {"rank", kept_ranks[i]}});
    }
    j["dropped_self_ref"] = nlohmann::ordered_json::array();
    for (const auto& d : dropped_self_ref) {
        j["dropped_self_ref"].push_back({{"id", d.query_id}, {"phrase", d.phrase}});
    }
    j["dropped_recovery"] = nlohmann::ordered_json::array();
    for (const auto& d : dropped_recovery) {
        nlohmann::ordered_json entry{{"id", d.query_id}};
        if (d.rank_found) entry["rank"] = *d.rank_found;
        j["dropped_recovery"].push_back(entry);
    }
    j["pass_rate"] = pass_rate;
    return j.dump(2);
}

std::vector<SyntheticQuery> kept_queries(const std::vector<SyntheticQuery>& queries,
                                         const FilterReport& report) {
    std::map<std::string, const SyntheticQuery*> by_id;
    for (const auto& q : queries) by_id[q.id] = &q;
    std::vector<SyntheticQuery> out;
    out.reserve(report.kept.size());
    for (const auto& id : report.kept) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("kept query '" + id + "' missing from input");
        out.push_back(*it->second);
    }
    return out;
}

} // namespace vilegal
