#pragma once

#include "vilegal/corpus.hpp"
#include "vilegal/io.hpp"
#include "vilegal/query.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace vilegal {

// One query-as-context pre-training pair: the passage tokens x, the chosen
// query's tokens y, and the masked positions on each side. Originals are kept
// so an external trainer can form reconstruction targets.
struct PretrainPair {
    std::string passage_id;
    std::vector<std::string> x_tokens;    // passage tokens
    std::vector<std::string> y_tokens;    // query tokens
    std::vector<std::size_t> enc_mask;    // indices into x_tokens, sorted, distinct
    std::vector<std::size_t> dec_mask;    // indices into y_tokens, sorted, distinct
    std::uint64_t seed = 0;               // per-pair masking seed

    bool operator==(const PretrainPair&) const = default;
};

struct SampledPair {
    const Passage* passage = nullptr;
    const SyntheticQuery* query = nullptr;
};

struct SampleResult {
    std::vector<SampledPair> pairs;       // corpus passage order
    std::size_t skipped_passages = 0;     // passages with no surviving query
};

// One pair per passage with at least one kept query; the query is chosen
// uniformly (seeded per passage). Queries referencing unknown passages are an
// error.
SampleResult sample_pairs(const Corpus& corpus, const std::vector<SyntheticQuery>& queries,
                          std::uint64_t seed);

struct MaskRatios {
    double encoder = 0.30;
    double decoder = 0.45;
};

// Masks floor(ratio*len) distinct positions per side, uniform without
// replacement. Either token list shorter than 2 tokens is an error.
PretrainPair apply_masking(const Passage& passage, const SyntheticQuery& query,
                           MaskRatios ratios, std::uint64_t seed);

// Full stage: sample, mask (per-pair seed derived from the global seed and
// the passage id), return pairs in corpus order.
std::vector<PretrainPair> build_pretrain_pairs(const Corpus& corpus,
                                               const std::vector<SyntheticQuery>& queries,
                                               MaskRatios ratios, std::uint64_t seed,
                                               std::size_t* skipped_out = nullptr);

// JSONL {"passage_id","x_tokens","y_tokens","enc_mask","dec_mask","seed"}.
std::size_t serialize_pairs(std::ostream& out, const std::vector<PretrainPair>& pairs,
                            const ArtifactMeta* meta = nullptr);
std::size_t serialize_pairs_file(const std::string& path,
                                 const std::vector<PretrainPair>& pairs,
                                 const ArtifactMeta* meta = nullptr);
std::vector<PretrainPair> load_pairs(std::istream& in);
std::vector<PretrainPair> load_pairs_file(const std::string& path);

} // namespace vilegal
