// SPDX-License-Identifier: Apache-2.0
#pragma once

// Decoding over an explicit set of scored candidate continuations. Scores play
// the role of LM logits: Random divides by temperature and samples from the
// softmax over the top_k, Greedy takes the maximum, Beam runs a character-level
// beam search over the candidate trie with length-normalized final scores.
// Ties are always broken toward the lexicographically smaller text.

#include <string>
#include <utility>
#include <vector>

#include "talm/generator.hpp"
#include "talm/text.hpp"

namespace talm::gen {

struct Candidate {
    std::string text;
    double score = 0.0;
};

/// Indices of candidates ordered best-first (score desc, text asc).
[[nodiscard]] std::vector<std::size_t> rank_candidates(const std::vector<Candidate>& candidates);

/// Renormalized sampling distribution: (candidate index, probability) for the
/// top_k candidates after dividing scores by temperature.
[[nodiscard]] std::vector<std::pair<std::size_t, double>> top_k_distribution(
    const std::vector<Candidate>& candidates, double temperature, std::size_t top_k);

[[nodiscard]] std::size_t pick_greedy(const std::vector<Candidate>& candidates);
[[nodiscard]] std::size_t pick_random(const std::vector<Candidate>& candidates, double temperature,
                                      std::size_t top_k, Rng& rng);
[[nodiscard]] std::size_t pick_beam(const std::vector<Candidate>& candidates, std::size_t beam_width);

/// Dispatches on spec.mode. candidates must be non-empty.
[[nodiscard]] std::size_t pick(const std::vector<Candidate>& candidates, const SamplingSpec& spec, Rng& rng);

}  // namespace talm::gen
