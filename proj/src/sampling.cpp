// SPDX-License-Identifier: Apache-2.0
#include "talm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "talm/error.hpp"

namespace talm::gen {

std::vector<std::size_t> rank_candidates(const std::vector<Candidate>& candidates) {
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (candidates[a].score != candidates[b].score) return candidates[a].score > candidates[b].score;
        return candidates[a].text < candidates[b].text;
    });
    return order;
}

std::vector<std::pair<std::size_t, double>> top_k_distribution(const std::vector<Candidate>& candidates,
                                                               double temperature, std::size_t top_k) {
    auto order = rank_candidates(candidates);
    if (order.size() > top_k) order.resize(top_k);
    std::vector<std::pair<std::size_t, double>> dist;
    if (order.empty()) return dist;
    const double best = candidates[order.front()].score / temperature;
    double total = 0.0;
    for (auto i : order) {
        const double w = std::exp(candidates[i].score / temperature - best);
        dist.emplace_back(i, w);
        total += w;
    }
    for (auto& entry : dist) entry.second /= total;
    return dist;
}

std::size_t pick_greedy(const std::vector<Candidate>& candidates) { return rank_candidates(candidates).front(); }

std::size_t pick_random(const std::vector<Candidate>& candidates, double temperature, std::size_t top_k,
                        Rng& rng) {
    const auto dist = top_k_distribution(candidates, temperature, top_k);
    double u = rng.uniform();
    for (const auto& [index, p] : dist) {
        if (u < p) return index;
        u -= p;
    }
    return dist.back().first;
}

namespace {

struct TrieNode {
    double mass = 0.0;
    double end_mass = 0.0;
    std::size_t end_candidate = 0;
    std::map<char, std::size_t> children;  // ordered, so expansion is lexicographic
};

struct Hypothesis {
    std::size_t node = 0;
    double logp = 0.0;
    std::string text;
};

}  // namespace

std::size_t pick_beam(const std::vector<Candidate>& candidates, std::size_t beam_width) {
    if (beam_width == 0) throw Error(ErrorCode::ConfigError, "beam_width must be >= 1");
    // Candidate probabilities at temperature 1; identical texts share one path.
    const auto dist = top_k_distribution(candidates, 1.0, candidates.size());

    std::vector<TrieNode> trie(1);
    for (const auto& [index, p] : dist) {
        std::size_t node = 0;
        trie[0].mass += p;
        for (char c : candidates[index].text) {
            auto it = trie[node].children.find(c);
            if (it == trie[node].children.end()) {
                trie.emplace_back();
                it = trie[node].children.emplace(c, trie.size() - 1).first;
            }
            node = it->second;
            trie[node].mass += p;
        }
        if (trie[node].end_mass == 0.0) trie[node].end_candidate = index;
        trie[node].end_mass += p;
    }

    auto better = [](const Hypothesis& a, const Hypothesis& b) {
        if (a.logp != b.logp) return a.logp > b.logp;
        return a.text < b.text;
    };

    std::vector<Hypothesis> beam{{0, 0.0, ""}};
    std::size_t best_candidate = dist.front().first;
    double best_score = -std::numeric_limits<double>::infinity();
    std::string best_text;
    bool have_best = false;

    while (!beam.empty()) {
        std::vector<Hypothesis> next;
        for (const auto& hyp : beam) {
            const auto& node = trie[hyp.node];
            if (node.end_mass > 0.0) {
                // Finished hypothesis: length-normalized log probability.
                const double logp = hyp.logp + std::log(node.end_mass / node.mass);
                const double score = logp / static_cast<double>(std::max<std::size_t>(1, hyp.text.size()));
                if (!have_best || score > best_score || (score == best_score && hyp.text < best_text)) {
                    have_best = true;
                    best_score = score;
                    best_text = hyp.text;
                    best_candidate = node.end_candidate;
                }
            }
            for (const auto& [c, child] : node.children) {
                next.push_back({child, hyp.logp + std::log(trie[child].mass / node.mass), hyp.text + c});
            }
        }
        std::sort(next.begin(), next.end(), better);
        if (next.size() > beam_width) next.resize(beam_width);
        beam = std::move(next);
    }
    return best_candidate;
}

std::size_t pick(const std::vector<Candidate>& candidates, const SamplingSpec& spec, Rng& rng) {
    if (candidates.empty()) throw Error(ErrorCode::GeneratorError, "no candidate continuations");
    switch (spec.mode) {
        case SamplingMode::Greedy: return pick_greedy(candidates);
        case SamplingMode::Beam: return pick_beam(candidates, spec.beam_width);
        case SamplingMode::Random: return pick_random(candidates, spec.temperature, spec.top_k, rng);
    }
    return pick_greedy(candidates);
}

}  // namespace talm::gen
