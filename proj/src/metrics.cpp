#include "vilegal/metrics.hpp"

#include "vilegal/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vilegal {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

bool skippable(const std::string& line) {
    return line.empty() || line[0] == '#';
}

std::string format_score(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void Judgments::add(const std::string& query_id, const std::string& passage_id, int grade) {
    if (grade < 0) {
        throw DataError("negative relevance grade for query '" + query_id + "'");
    }
    auto& per_query = judgments_[query_id];
    if (!per_query.emplace(passage_id, grade).second) {
        throw DataError("duplicate judgment for query '" + query_id + "' passage '" +
                        passage_id + "'");
    }
}

bool Judgments::has_query(const std::string& query_id) const {
    return judgments_.count(query_id) > 0;
}

const std::map<std::string, int>* Judgments::for_query(const std::string& query_id) const {
    auto it = judgments_.find(query_id);
    return it == judgments_.end() ? nullptr : &it->second;
}

std::set<std::string> Judgments::relevant(const std::string& query_id) const {
    std::set<std::string> out;
    if (const auto* per_query = for_query(query_id)) {
        for (const auto& [pid, grade] : *per_query) {
            if (grade >= 1) out.insert(pid);
        }
    }
    return out;
}

Judgments Judgments::load(std::istream& in) {
    Judgments j;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (skippable(line)) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 4) {
            throw DataError("qrels line " + std::to_string(line_no) +
                            ": expected 4 tab-separated fields, got " +
                            std::to_string(fields.size()));
        }
        if (fields[1] != "0") {
            throw DataError("qrels line " + std::to_string(line_no) +
                            ": second field must be '0'");
        }
        int grade = 0;
        try {
            std::size_t used = 0;
            grade = std::stoi(fields[3], &used);
            if (used != fields[3].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw DataError("qrels line " + std::to_string(line_no) + ": bad grade '" +
                            fields[3] + "'");
        }
        try {
            j.add(fields[0], fields[2], grade);
        } catch (const DataError& e) {
            throw DataError("qrels line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return j;
}

Judgments Judgments::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open qrels file: " + path);
    return load(in);
}

void Judgments::save(std::ostream& out, const ArtifactMeta* meta) const {
    if (meta) out << meta->to_comment_line() << '\n';
    for (const auto& [qid, per_query] : judgments_) {
        for (const auto& [pid, grade] : per_query) {
            out << qid << "\t0\t" << pid << '\t' << grade << '\n';
        }
    }
}

void Judgments::save_file(const std::string& path, const ArtifactMeta* meta) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write qrels file: " + path);
    save(out, meta);
}

void Run::set(const std::string& query_id, Ranking ranking) {
    rankings_[query_id] = std::move(ranking);
}

const Ranking* Run::for_query(const std::string& query_id) const {
    auto it = rankings_.find(query_id);
    return it == rankings_.end() ? nullptr : &it->second;
}

Run Run::load(std::istream& in) {
    Run run;
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::set<std::string>> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (skippable(line)) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 6) {
            throw DataError("run line " + std::to_string(line_no) +
                            ": expected 6 tab-separated fields, got " +
                            std::to_string(fields.size()));
        }
        if (fields[1] != "Q0") {
            throw DataError("run line " + std::to_string(line_no) +
                            ": second field must be 'Q0'");
        }
        const std::string& qid = fields[0];
        const std::string& pid = fields[2];
        std::size_t rank = 0;
        double score = 0.0;
        try {
            std::size_t used = 0;
            rank = static_cast<std::size_t>(std::stoull(fields[3], &used));
            if (used != fields[3].size()) throw std::invalid_argument("trailing");
            score = std::stod(fields[4], &used);
            if (used != fields[4].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw DataError("run line " + std::to_string(line_no) + ": bad rank or score");
        }
        if (!seen[qid].insert(pid).second) {
            throw DataError("run line " + std::to_string(line_no) + ": duplicate passage '" +
                            pid + "' for query '" + qid + "'");
        }
        auto& ranking = run.rankings_[qid];
        if (rank != ranking.size() + 1) {
            throw DataError("run line " + std::to_string(line_no) + ": rank " +
                            std::to_string(rank) + " out of sequence for query '" + qid + "'");
        }
        if (!ranking.empty()) {
            const auto& prev = ranking.back();
            if (score > prev.score ||
                (score == prev.score && pid < prev.passage_id)) {
                throw DataError("run line " + std::to_string(line_no) +
                                ": ordering violated for query '" + qid + "'");
            }
        }
        ranking.push_back(ScoredPassage{pid, score});
    }
    return run;
}

Run Run::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open run file: " + path);
    return load(in);
}

void Run::save(std::ostream& out, const std::string& tag, const ArtifactMeta* meta) const {
    if (meta) out << meta->to_comment_line() << '\n';
    for (const auto& [qid, ranking] : rankings_) {
        std::size_t rank = 1;
        for (const auto& sp : ranking) {
            out << qid << "\tQ0\t" << sp.passage_id << '\t' << rank << '\t'
                << format_score(sp.score) << '\t' << tag << '\n';
            ++rank;
        }
    }
}

void Run::save_file(const std::string& path, const std::string& tag,
                    const ArtifactMeta* meta) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write run file: " + path);
    save(out, tag, meta);
}

namespace {

struct QueryStats {
    std::size_t hits_at_k = 0;     // relevant retrieved within top k
    std::size_t relevant_total = 0;
    double reciprocal_rank = 0.0;  // 0 when no relevant result in top k
    double ap_sum = 0.0;           // sum of precision@r over relevant hits
};

QueryStats stats_for_query(const Ranking* ranking, const std::set<std::string>& relevant,
                           std::size_t k) {
    QueryStats s;
    s.relevant_total = relevant.size();
    if (!ranking) return s;
    std::size_t limit = std::min(k, ranking->size());
    for (std::size_t i = 0; i < limit; ++i) {
        if (relevant.count((*ranking)[i].passage_id)) {
            ++s.hits_at_k;
            if (s.hits_at_k == 1) s.reciprocal_rank = 1.0 / static_cast<double>(i + 1);
            s.ap_sum += static_cast<double>(s.hits_at_k) / static_cast<double>(i + 1);
        }
    }
    return s;
}

void count_warnings(const Run& run, const Judgments& judgments, EvalWarnings* warnings) {
    if (!warnings) return;
    warnings->unjudged_run_queries = 0;
    warnings->zero_relevant_queries = 0;
    for (const auto& [qid, ranking] : run.all()) {
        (void)ranking;
        if (!judgments.has_query(qid)) ++warnings->unjudged_run_queries;
    }
    for (const auto& [qid, per_query] : judgments.all()) {
        (void)per_query;
        if (judgments.relevant(qid).empty()) ++warnings->zero_relevant_queries;
    }
}

// Averages f(stats) over the evaluable query set.
template <typename Fn>
double average_metric(const Run& run, const Judgments& judgments, std::size_t k,
                      MetricOptions opts, EvalWarnings* warnings, Fn&& per_query_value) {
    if (k == 0) throw DataError("metric cutoff k must be positive");
    count_warnings(run, judgments, warnings);
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& [qid, per_query] : judgments.all()) {
        (void)per_query;
        auto relevant = judgments.relevant(qid);
        if (relevant.empty() && !opts.include_zero_relevant) continue;
        total += per_query_value(stats_for_query(run.for_query(qid), relevant, k));
        ++n;
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

} // namespace

double mrr_at_k(const Run& run, const Judgments& judgments, std::size_t k, MetricOptions opts,
                EvalWarnings* warnings) {
    return average_metric(run, judgments, k, opts, warnings,
                          [](const QueryStats& s) { return s.reciprocal_rank; });
}

double map_at_k(const Run& run, const Judgments& judgments, std::size_t k, MetricOptions opts,
                EvalWarnings* warnings) {
    return average_metric(run, judgments, k, opts, warnings, [k](const QueryStats& s) {
        std::size_t den = std::min(s.relevant_total, k);
        return den == 0 ? 0.0 : s.ap_sum / static_cast<double>(den);
    });
}

double recall_at_k(const Run& run, const Judgments& judgments, std::size_t k, MetricOptions opts,
                   EvalWarnings* warnings) {
    return average_metric(run, judgments, k, opts, warnings, [](const QueryStats& s) {
        return s.relevant_total == 0
                   ? 0.0
                   : static_cast<double>(s.hits_at_k) / static_cast<double>(s.relevant_total);
    });
}

double f_beta_at_k(const Run& run, const Judgments& judgments, std::size_t k, double beta,
                   MetricOptions opts, EvalWarnings* warnings) {
    if (beta <= 0.0) throw DataError("f-beta requires beta > 0");
    const double b2 = beta * beta;
    return average_metric(run, judgments, k, opts, warnings, [k, b2](const QueryStats& s) {
        double precision = static_cast<double>(s.hits_at_k) / static_cast<double>(k);
        double recall = s.relevant_total == 0 ? 0.0
                                              : static_cast<double>(s.hits_at_k) /
                                                    static_cast<double>(s.relevant_total);
        if (precision == 0.0 && recall == 0.0) return 0.0;
        return (1.0 + b2) * precision * recall / (b2 * precision + recall);
    });
}

HitRates hit_rates(const Run& run, const std::map<std::string, QuerySource>& sources,
                   const std::map<std::string, std::string>& passage_to_doc, std::size_t k) {
    if (k == 0) throw DataError("metric cutoff k must be positive");
    HitRates rates;
    if (sources.empty()) return rates;
    std::size_t passage_hits = 0;
    std::size_t doc_hits = 0;
    for (const auto& [qid, source] : sources) {
        if (!passage_to_doc.count(source.passage_id)) {
            throw DataError("hit rates: source passage '" + source.passage_id +
                            "' for query '" + qid + "' is not in the passage map");
        }
        const Ranking* ranking = run.for_query(qid);
        if (!ranking) continue;
        std::size_t limit = std::min(k, ranking->size());
        bool passage_hit = false;
        bool doc_hit = false;
        for (std::size_t i = 0; i < limit; ++i) {
            const std::string& pid = (*ranking)[i].passage_id;
            if (pid == source.passage_id) passage_hit = true;
            auto it = passage_to_doc.find(pid);
            if (it != passage_to_doc.end() && it->second == source.doc_id) doc_hit = true;
        }
        if (passage_hit) ++passage_hits;
        if (doc_hit) ++doc_hits;
    }
    double denom = static_cast<double>(sources.size());
    rates.passage_pct = 100.0 * static_cast<double>(passage_hits) / denom;
    rates.document_pct = 100.0 * static_cast<double>(doc_hits) / denom;
    return rates;
}

const MetricRow& MetricTable::row_for(std::size_t k) const {
    for (const auto& row : rows) {
        if (row.k == k) return row;
    }
    throw DataError("no metric row for k=" + std::to_string(k));
}

std::string MetricTable::to_text() const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << std::setw(6) << "k" << std::setw(10) << "MRR" << std::setw(10) << "MAP"
        << std::setw(10) << "Recall" << std::setw(10) << "F2" << '\n';
    for (const auto& row : rows) {
        out << std::setw(6) << row.k << std::setw(10) << row.mrr << std::setw(10) << row.map
            << std::setw(10) << row.recall << std::setw(10) << row.f2 << '\n';
    }
    if (warnings.unjudged_run_queries > 0) {
        out << "warning: " << warnings.unjudged_run_queries
            << " run queries had no judgments\n";
    }
    return out.str();
}

std::string MetricTable::to_benchmark_line() const {
    if (rows.empty()) throw DataError("metric table is empty");
    const MetricRow& head = rows.front();
    const MetricRow& deep = rows.size() > 1 ? rows[1] : rows.front();
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "MRR@" << head.k << "=" << head.mrr << " MAP@" << head.k << "=" << head.map
        << " R@" << head.k << "=" << head.recall << " R@" << deep.k << "=" << deep.recall
        << " F2@" << head.k << "=" << head.f2;
    return out.str();
}

std::string MetricTable::to_json() const {
    nlohmann::ordered_json j;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        j["rows"].push_back({{"k", row.k},
                             {"mrr", row.mrr},
                             {"map", row.map},
                             {"recall", row.recall},
                             {"f2", row.f2}});
    }
    j["warnings"] = {{"unjudged_run_queries", warnings.unjudged_run_queries},
                     {"zero_relevant_queries", warnings.zero_relevant_queries}};
    return j.dump(2);
}

MetricTable evaluate_run(const Run& run, const Judgments& judgments,
                         const std::vector<std::size_t>& ks, MetricOptions opts) {
    if (ks.empty()) throw DataError("evaluate_run requires at least one cutoff");
    std::vector<std::size_t> sorted_ks = ks;
    std::sort(sorted_ks.begin(), sorted_ks.end());
    sorted_ks.erase(std::unique(sorted_ks.begin(), sorted_ks.end()), sorted_ks.end());

    MetricTable table;
    count_warnings(run, judgments, &table.warnings);
    for (std::size_t k : sorted_ks) {
        MetricRow row;
        row.k = k;
        row.mrr = mrr_at_k(run, judgments, k, opts);
        row.map = map_at_k(run, judgments, k, opts);
        row.recall = recall_at_k(run, judgments, k, opts);
        row.f2 = f_beta_at_k(run, judgments, k, 2.0, opts);
        table.rows.push_back(row);
    }
    return table;
}

} // namespace vilegal
