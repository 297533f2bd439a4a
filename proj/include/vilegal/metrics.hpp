#pragma once

#include "vilegal/io.hpp"
#include "vilegal/retriever.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace vilegal {

// Relevance judgments: query id -> passage id -> grade. Relevant means
// grade >= 1.
class Judgments {
public:
    void add(const std::string& query_id, const std::string& passage_id, int grade);
    bool has_query(const std::string& query_id) const;
    const std::map<std::string, int>* for_query(const std::string& query_id) const;
    std::set<std::string> relevant(const std::string& query_id) const;
    const std::map<std::string, std::map<std::string, int>>& all() const { return judgments_; }
    std::size_t query_count() const { return judgments_.size(); }

    // Tab-separated "query_id<TAB>0<TAB>passage_id<TAB>grade". Duplicate
    // (query, passage) pairs and negative grades are rejected.
    static Judgments load(std::istream& in);
    static Judgments load_file(const std::string& path);
    void save(std::ostream& out, const ArtifactMeta* meta = nullptr) const;
    void save_file(const std::string& path, const ArtifactMeta* meta = nullptr) const;

private:
    std::map<std::string, std::map<std::string, int>> judgments_;
};

// A retrieval run: per query, the ranked (passage, score) list. The load path
// enforces the ordering invariant (score desc, ties by passage id asc) and
// rejects duplicate passages within a query.
class Run {
public:
    void set(const std::string& query_id, Ranking ranking);
    const Ranking* for_query(const std::string& query_id) const;
    const std::map<std::string, Ranking>& all() const { return rankings_; }
    std::size_t query_count() const { return rankings_.size(); }

    // Tab-separated "query_id<TAB>Q0<TAB>passage_id<TAB>rank<TAB>score<TAB>tag".
    static Run load(std::istream& in);
    static Run load_file(const std::string& path);
    void save(std::ostream& out, const std::string& tag, const ArtifactMeta* meta = nullptr) const;
    void save_file(const std::string& path, const std::string& tag,
                   const ArtifactMeta* meta = nullptr) const;

private:
    std::map<std::string, Ranking> rankings_;
};

struct MetricOptions {
    // Standard behavior: queries judged but with no relevant passage are
    // excluded from averages. Set to include them as zeros instead.
    bool include_zero_relevant = false;
};

struct EvalWarnings {
    std::size_t unjudged_run_queries = 0;  // in run, absent from judgments
    std::size_t zero_relevant_queries = 0; // judged, nothing relevant
};

double mrr_at_k(const Run& run, const Judgments& judgments, std::size_t k,
                MetricOptions opts = {}, EvalWarnings* warnings = nullptr);
double map_at_k(const Run& run, const Judgments& judgments, std::size_t k,
                MetricOptions opts = {}, EvalWarnings* warnings = nullptr);
double recall_at_k(const Run& run, const Judgments& judgments, std::size_t k,
                   MetricOptions opts = {}, EvalWarnings* warnings = nullptr);
double f_beta_at_k(const Run& run, const Judgments& judgments, std::size_t k, double beta = 2.0,
                   MetricOptions opts = {}, EvalWarnings* warnings = nullptr);

// Source of each query for hit-rate evaluation.
struct QuerySource {
    std::string passage_id;
    std::string doc_id;
};

struct HitRates {
    double passage_pct = 0.0;  // % of queries whose source passage is in the top k
    double document_pct = 0.0; // % of queries retrieving any passage of the source document
};

// passage_to_doc resolves retrieved passage ids to their documents; it must
// cover every source passage in `sources` (DataError otherwise).
HitRates hit_rates(const Run& run, const std::map<std::string, QuerySource>& sources,
                   const std::map<std::string, std::string>& passage_to_doc, std::size_t k);

struct MetricRow {
    std::size_t k = 0;
    double mrr = 0.0;
    double map = 0.0;
    double recall = 0.0;
    double f2 = 0.0;
};

struct MetricTable {
    std::vector<MetricRow> rows; // one per requested k, ascending
    EvalWarnings warnings;

    const MetricRow& row_for(std::size_t k) const; // DataError if absent
    // Aligned table, one header line, one line per k.
    std::string to_text() const;
    // Single line mirroring the benchmark layout: MRR@k0 MAP@k0 R@k0 R@k1 F2@k0.
    std::string to_benchmark_line() const;
    std::string to_json() const;
};

MetricTable evaluate_run(const Run& run, const Judgments& judgments,
                         const std::vector<std::size_t>& ks, MetricOptions opts = {});

} // namespace vilegal
