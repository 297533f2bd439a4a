#include "vilegal/pretrain.hpp"

#include "vilegal/errors.hpp"
#include "vilegal/hash.hpp"
#include "vilegal/rng.hpp"
#include "vilegal/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>

namespace vilegal {

using ordered_json = nlohmann::ordered_json;

SampleResult sample_pairs(const Corpus& corpus, const std::vector<SyntheticQuery>& queries,
                          std::uint64_t seed) {
    std::map<std::string, std::vector<const SyntheticQuery*>> by_passage;
    for (const auto& q : queries) {
        if (!corpus.has_passage(q.passage_id)) {
            throw DataError("query '" + q.id + "' references unknown passage '" +
                            q.passage_id + "'");
        }
        by_passage[q.passage_id].push_back(&q);
    }

    SampleResult result;
    for (const auto& p : corpus.passages()) {
        auto it = by_passage.find(p.id);
        if (it == by_passage.end() || it->second.empty()) {
            ++result.skipped_passages;
            continue;
        }
        const auto& candidates = it->second;
        Rng rng(hash_combine(seed, fnv1a64(p.id)));
        const SyntheticQuery* chosen =
            candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
        result.pairs.push_back(SampledPair{&p, chosen});
    }
    return result;
}

namespace {

std::vector<std::size_t> sample_mask(std::size_t len, double ratio, Rng& rng) {
    std::size_t count = static_cast<std::size_t>(ratio * static_cast<double>(len));
    return rng.sample_indices(len, count); // sorted, distinct
}

} // namespace

PretrainPair apply_masking(const Passage& passage, const SyntheticQuery& query,
                           MaskRatios ratios, std::uint64_t seed) {
    if (ratios.encoder <= 0.0 || ratios.encoder >= 1.0 || ratios.decoder <= 0.0 ||
        ratios.decoder >= 1.0) {
        throw DataError("mask ratios must lie strictly between 0 and 1");
    }
    PretrainPair pair;
    pair.passage_id = passage.id;
    pair.x_tokens = tokenize(passage.content);
    pair.y_tokens = tokenize(query.text);
    pair.seed = seed;
    if (pair.x_tokens.size() < 2) {
        throw DataError("passage '" + passage.id + "' has fewer than 2 tokens");
    }
    if (pair.y_tokens.size() < 2) {
        throw DataError("query '" + query.id + "' has fewer than 2 tokens");
    }
    Rng rng(seed);
    pair.enc_mask = sample_mask(pair.x_tokens.size(), ratios.encoder, rng);
    pair.dec_mask = sample_mask(pair.y_tokens.size(), ratios.decoder, rng);
    return pair;
}

std::vector<PretrainPair> build_pretrain_pairs(const Corpus& corpus,
                                               const std::vector<SyntheticQuery>& queries,
                                               MaskRatios ratios, std::uint64_t seed,
                                               std::size_t* skipped_out) {
    SampleResult sampled = sample_pairs(corpus, queries, seed);
    if (skipped_out) *skipped_out = sampled.skipped_passages;
    std::vector<PretrainPair> pairs;
    pairs.reserve(sampled.pairs.size());
    for (const auto& sp : sampled.pairs) {
        std::uint64_t pair_seed =
            hash_combine(hash_combine(seed, fnv1a64("mask")), fnv1a64(sp.passage->id));
        pairs.push_back(apply_masking(*sp.passage, *sp.query, ratios, pair_seed));
    }
    return pairs;
}

std::size_t serialize_pairs(std::ostream& out, const std::vector<PretrainPair>& pairs,
                            const ArtifactMeta* meta) {
    if (meta) {
        ordered_json header;
        header["_meta"] = meta->to_string();
        out << header.dump() << '\n';
    }
    std::size_t written = 0;
    for (const auto& pair : pairs) {
        ordered_json j;
        j["passage_id"] = pair.passage_id;
        j["x_tokens"] = pair.x_tokens;
        j["y_tokens"] = pair.y_tokens;
        j["enc_mask"] = pair.enc_mask;
        j["dec_mask"] = pair.dec_mask;
        j["seed"] = pair.seed;
        out << j.dump() << '\n';
        if (!out) throw DataError("failed while writing pre-training pairs");
        ++written;
    }
    return written;
}

std::size_t serialize_pairs_file(const std::string& path, const std::vector<PretrainPair>& pairs,
                                 const ArtifactMeta* meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write pairs file: " + path);
    return serialize_pairs(out, pairs, meta);
}

std::vector<PretrainPair> load_pairs(std::istream& in) {
    std::vector<PretrainPair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const ordered_json::exception& e) {
            throw DataError("pairs line " + std::to_string(line_no) + ": " + e.what());
        }
        if (j.contains("_meta")) continue;
        PretrainPair pair;
        try {
            pair.passage_id = j.at("passage_id").get<std::string>();
            pair.x_tokens = j.at("x_tokens").get<std::vector<std::string>>();
            pair.y_tokens = j.at("y_tokens").get<std::vector<std::string>>();
            pair.enc_mask = j.at("enc_mask").get<std::vector<std::size_t>>();
            pair.dec_mask = j.at("dec_mask").get<std::vector<std::size_t>>();
            pair.seed = j.at("seed").get<std::uint64_t>();
        } catch (const ordered_json::exception& e) {
            throw DataError("pairs line " + std::to_string(line_no) + ": " + e.what());
        }
        for (std::size_t idx : pair.enc_mask) {
            if (idx >= pair.x_tokens.size()) {
                throw DataError("pairs line " + std::to_string(line_no) +
                                ": encoder mask index out of range");
            }
        }
        for (std::size_t idx : pair.dec_mask) {
            if (idx >= pair.y_tokens.size()) {
                throw DataError("pairs line " + std::to_string(line_no) +
                                ": decoder mask index out of range");
            }
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::vector<PretrainPair> load_pairs_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open pairs file: " + path);
    return load_pairs(in);
}

} // namespace vilegal
