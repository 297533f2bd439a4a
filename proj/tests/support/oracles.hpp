#pragma once

// Brute-force reference implementations, written against the definitions and
// kept deliberately separate from the library code paths they check. Slow is
// fine here; clarity and independence are the point.

#include "vilegal/corpus.hpp"
#include "vilegal/dense.hpp"
#include "vilegal/metrics.hpp"
#include "vilegal/retriever.hpp"
#include "vilegal/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracles {

// --- ranked-retrieval metrics ------------------------------------------------

struct Instance {
    // query -> ranked passage ids (already in retrieval order)
    std::map<std::string, std::vector<std::string>> run;
    // query -> judged passage -> grade
    std::map<std::string, std::map<std::string, int>> qrels;
};

inline std::set<std::string> relevant_of(const Instance& inst, const std::string& qid) {
    std::set<std::string> rel;
    auto it = inst.qrels.find(qid);
    if (it == inst.qrels.end()) return rel;
    for (const auto& [pid, grade] : it->second) {
        if (grade >= 1) rel.insert(pid);
    }
    return rel;
}

// Mean over judged queries with at least one relevant passage. Queries absent
// from the run contribute the metric of an empty ranking.
inline double metric_mean(const Instance& inst,
                          const std::function<double(const std::vector<std::string>&,
                                                     const std::set<std::string>&)>& per_query) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [qid, judged] : inst.qrels) {
        (void)judged;
        std::set<std::string> rel = relevant_of(inst, qid);
        if (rel.empty()) continue;
        auto it = inst.run.find(qid);
        static const std::vector<std::string> kEmpty;
        sum += per_query(it == inst.run.end() ? kEmpty : it->second, rel);
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

inline double mrr_at_k(const Instance& inst, std::size_t k) {
    return metric_mean(inst, [k](const std::vector<std::string>& ranked,
                                 const std::set<std::string>& rel) {
        for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
            if (rel.count(ranked[i])) return 1.0 / static_cast<double>(i + 1);
        }
        return 0.0;
    });
}

inline double map_at_k(const Instance& inst, std::size_t k) {
    return metric_mean(inst, [k](const std::vector<std::string>& ranked,
                                 const std::set<std::string>& rel) {
        double ap = 0.0;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
            if (rel.count(ranked[i])) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(i + 1);
            }
        }
        double denom = static_cast<double>(std::min(rel.size(), k));
        return denom == 0.0 ? 0.0 : ap / denom;
    });
}

inline double recall_at_k(const Instance& inst, std::size_t k) {
    return metric_mean(inst, [k](const std::vector<std::string>& ranked,
                                 const std::set<std::string>& rel) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
            if (rel.count(ranked[i])) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(rel.size());
    });
}

inline double f_beta_at_k(const Instance& inst, std::size_t k, double beta) {
    return metric_mean(inst, [k, beta](const std::vector<std::string>& ranked,
                                       const std::set<std::string>& rel) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
            if (rel.count(ranked[i])) ++hits;
        }
        double p = static_cast<double>(hits) / static_cast<double>(k);
        double r = static_cast<double>(hits) / static_cast<double>(rel.size());
        if (p == 0.0 && r == 0.0) return 0.0;
        double b2 = beta * beta;
        return (1.0 + b2) * p * r / (b2 * p + r);
    });
}

struct HitRateResult {
    double passage_pct = 0.0;
    double document_pct = 0.0;
};

inline HitRateResult hit_rates(
    const std::map<std::string, std::vector<std::string>>& run,
    const std::map<std::string, std::pair<std::string, std::string>>& sources, // qid -> (pid, doc)
    const std::map<std::string, std::string>& passage_to_doc, std::size_t k) {
    std::size_t p_hits = 0, d_hits = 0;
    for (const auto& [qid, src] : sources) {
        auto it = run.find(qid);
        if (it == run.end()) continue;
        bool p_hit = false, d_hit = false;
        for (std::size_t i = 0; i < it->second.size() && i < k; ++i) {
            const std::string& pid = it->second[i];
            if (pid == src.first) p_hit = true;
            auto doc_it = passage_to_doc.find(pid);
            if (doc_it != passage_to_doc.end() && doc_it->second == src.second) d_hit = true;
        }
        if (p_hit) ++p_hits;
        if (d_hit) ++d_hits;
    }
    double n = static_cast<double>(sources.size());
    if (n == 0) return {};
    return {100.0 * static_cast<double>(p_hits) / n, 100.0 * static_cast<double>(d_hits) / n};
}

// --- BM25 -----------------------------------------------------------------------

// Double-loop scorer from the definition. Tokenization goes through the same
// public text pipeline the index uses; everything after that is recomputed
// from scratch.
struct Bm25Oracle {
    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> docs; // folded tokens per doc
    double k1 = 1.2;
    double b = 0.75;

    static Bm25Oracle from_corpus(const vilegal::Corpus& corpus, double k1 = 1.2,
                                  double b = 0.75) {
        Bm25Oracle o;
        o.k1 = k1;
        o.b = b;
        for (const auto& p : corpus.passages()) {
            o.ids.push_back(p.id);
            o.docs.push_back(vilegal::tokenize_folded(p.content));
        }
        return o;
    }

    double avgdl() const {
        double total = 0.0;
        for (const auto& d : docs) total += static_cast<double>(d.size());
        return docs.empty() ? 0.0 : total / static_cast<double>(docs.size());
    }

    double idf(const std::string& term) const {
        std::size_t df = 0;
        for (const auto& d : docs) {
            if (std::find(d.begin(), d.end(), term) != d.end()) ++df;
        }
        double n = static_cast<double>(docs.size());
        double dfd = static_cast<double>(df);
        return std::log(1.0 + (n - dfd + 0.5) / (dfd + 0.5));
    }

    double score(const std::string& query, std::size_t doc_index) const {
        std::vector<std::string> q = vilegal::tokenize_folded(query);
        const auto& d = docs[doc_index];
        double dl = static_cast<double>(d.size());
        double avg = avgdl();
        double total = 0.0;
        for (const auto& term : q) {
            double tf = static_cast<double>(std::count(d.begin(), d.end(), term));
            if (tf == 0.0) continue;
            double norm = k1 * (1.0 - b + b * dl / avg);
            total += idf(term) * tf * (k1 + 1.0) / (tf + norm);
        }
        return total;
    }

    // Canonical order: score desc, passage id asc.
    std::vector<std::pair<std::string, double>> ranking(const std::string& query,
                                                        std::size_t top_k) const {
        std::vector<std::pair<std::string, double>> scored;
        for (std::size_t i = 0; i < ids.size(); ++i) scored.emplace_back(ids[i], score(query, i));
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (scored.size() > top_k) scored.resize(top_k);
        return scored;
    }
};

// --- MaxSim -------------------------------------------------------------------------

inline double maxsim(const std::vector<std::vector<float>>& query,
                     const std::vector<std::vector<float>>& doc) {
    double total = 0.0;
    for (const auto& q : query) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& d : doc) {
            double s = 0.0;
            for (std::size_t k = 0; k < q.size(); ++k) {
                s += static_cast<double>(q[k]) * static_cast<double>(d[k]);
            }
            best = std::max(best, s);
        }
        total += best;
    }
    return total;
}

// --- dense retrieval ------------------------------------------------------------------

// Exhaustive ranking by dot product recomputed in double, canonical order.
inline std::vector<std::pair<std::string, double>> dense_ranking(
    const std::vector<std::string>& ids, const std::vector<std::vector<float>>& rows,
    const std::vector<float>& query) {
    std::vector<std::pair<std::string, double>> scored;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < query.size(); ++k) {
            s += static_cast<double>(rows[i][k]) * static_cast<double>(query[k]);
        }
        scored.emplace_back(ids[i], s);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return scored;
}

// Rank (1-based) of `target` when every corpus passage is scored against the
// query with the given provider. The recovery filter must agree with this.
inline std::size_t source_rank(const vilegal::EmbeddingProvider& provider,
                               const vilegal::Corpus& corpus, const std::string& query_text,
                               const std::string& target) {
    std::vector<std::string> ids;
    std::vector<std::vector<float>> rows;
    for (const auto& p : corpus.passages()) {
        ids.push_back(p.id);
        rows.push_back(provider.embed_passage(p));
    }
    auto ranked = dense_ranking(ids, rows, provider.embed_query(query_text));
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (ranked[i].first == target) return i + 1;
    }
    return ranked.size() + 1;
}

// --- numeric helpers --------------------------------------------------------------------

// Central finite difference of f along coordinate i of x.
inline double central_diff(std::vector<double>& x, std::size_t i,
                           const std::function<double(const std::vector<double>&)>& f,
                           double eps = 1e-6) {
    double saved = x[i];
    x[i] = saved + eps;
    double up = f(x);
    x[i] = saved - eps;
    double down = f(x);
    x[i] = saved;
    return (up - down) / (2.0 * eps);
}

} // namespace oracles
