#pragma once

#include "vilegal/corpus.hpp"
#include "vilegal/late_interaction.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vilegal {

// Deterministic toy document collection for demos and end-to-end tests. Every
// passage owns a disjoint vocabulary and never repeats a token, so any
// contiguous content window identifies its source passage exactly, while
// nothing is shared across passages for an untrained encoder to latch onto.
std::string toy_documents_jsonl(std::size_t n_docs, std::size_t sections_per_doc,
                                std::uint64_t seed);

// Convenience wrapper: build the toy collection and ingest it.
Corpus make_toy_corpus(std::size_t n_docs, std::size_t sections_per_doc, std::uint64_t seed);

// Unit-row random matrices for the compression study.
std::vector<std::vector<float>> random_unit_rows(std::size_t n, std::size_t dim,
                                                 std::uint64_t seed);
std::vector<MultiVectorDoc> random_multivector_docs(std::size_t n_docs, std::size_t min_tokens,
                                                    std::size_t max_tokens, std::size_t dim,
                                                    std::uint64_t seed);

} // namespace vilegal
