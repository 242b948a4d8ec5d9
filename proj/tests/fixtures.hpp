// SPDX-License-Identifier: Apache-2.0
#pragma once
// Generators, oracles and corpora shared by the tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "talm/bm25.hpp"
#include "talm/protocol.hpp"
#include "test_util.hpp"

namespace talm::test {

struct FormulaAnswer {
    std::string formula;
    std::string answer;
};

/// 140 records whose formula reproduces the answer, then 60 that do not
/// (10 each: wrong answer, syntax error, unknown operator, wrong arity,
/// division by zero, non-numeric answer).
inline std::vector<FormulaAnswer> validity_corpus(std::uint64_t seed = 140) {
    Gen g(seed);
    std::vector<FormulaAnswer> out;
    char buf[64];
    for (int i = 0; i < 140; ++i) {
        const auto a = g.integer(1, 999), b = g.integer(1, 999), c = g.integer(2, 9);
        std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(a + b) / static_cast<double>(c));
        out.push_back({"divide(add(" + std::to_string(a) + "," + std::to_string(b) + ")," + std::to_string(c) + ")",
                       buf});
    }
    for (int i = 0; i < 10; ++i) {
        const auto n = std::to_string(i);
        out.push_back({"Add(" + n + ", 1)", std::to_string(i + 50)});
        out.push_back({"Add(" + n + ", ", "1"});
        out.push_back({"Frob(" + n + ")", "1"});
        out.push_back({"Add(" + n + ")", "1"});
        out.push_back({"Divide(" + n + ", 0)", "1"});
        out.push_back({"Add(" + n + ", 1)", "n/a"});
    }
    return out;
}

/// JSONL lines {"formula": ..., "answer": ...}; the corpus needs no escaping.
inline std::string validity_jsonl(const std::vector<FormulaAnswer>& records) {
    std::string out;
    for (const auto& r : records) out += R"j({"formula":")j" + r.formula + R"j(","answer":")j" + r.answer + "\"}\n";
    return out;
}

// Body alphabet deliberately rich in delimiter look-alikes.
inline constexpr std::string_view kBodyChars = "ab z09|\\ |\\-_.,?!\t\n";

inline std::string random_label(Gen& g) {
    for (;;) {
        auto label = g.from("abcdefghijklmnopqrstuvwxyz0123456789-_", 1, 8);
        if (label != protocol::kResultLabel && label != protocol::kOutputLabel) return label;
    }
}

inline std::string random_body(Gen& g) {
    std::string body = g.from(kBodyChars, 0, 24);
    if (g.chance(0.2)) body += "|result ";
    if (g.chance(0.2)) body = " |output " + body;
    if (g.chance(0.1)) body += "\xc3\xa9\xe2\x82\xac";  // multi-byte UTF-8
    return body;
}

inline protocol::ToolAugmentedSequence random_sequence(Gen& g, std::size_t max_hops) {
    protocol::ToolAugmentedSequence s;
    s.task_input = protocol::make_task_input(random_body(g), g.chance(0.5) ? "question" : random_label(g));
    const auto hops = g.below(max_hops + 1);
    for (std::size_t i = 0; i < hops; ++i) {
        s.hops.push_back({protocol::make_tool_call(random_label(g), random_body(g)), protocol::make_tool_result(random_body(g))});
    }
    if (g.chance(0.8)) s.task_output = protocol::make_task_output(random_body(g));
    return s;
}

// Brute-force scorer written straight from the Okapi BM25 definition.
struct Bm25Oracle {
    std::vector<bm25::Document> docs;
    std::vector<std::vector<std::string>> tokens;
    double k1 = 1.2;
    double b = 0.75;

    static std::vector<std::string> split(const std::string& text) {
        std::vector<std::string> out;
        std::string cur;
        for (const char ch : text) {
            const bool alnum = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9');
            if (alnum) {
                cur.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : ch);
            } else if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        }
        if (!cur.empty()) out.push_back(cur);
        return out;
    }

    explicit Bm25Oracle(std::vector<bm25::Document> d) : docs(std::move(d)) {
        for (const auto& doc : docs) tokens.push_back(split(doc.text));
    }

    std::vector<bm25::Hit> search(const std::string& query, std::size_t k) const {
        const double n = static_cast<double>(docs.size());
        double total = 0;
        for (const auto& t : tokens) total += static_cast<double>(t.size());
        const double avgdl = total / n;
        std::vector<std::string> terms;
        for (const auto& t : split(query)) {
            if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
        }
        std::vector<bm25::Hit> hits;
        for (std::size_t d = 0; d < docs.size(); ++d) {
            double score = 0;
            for (const auto& term : terms) {
                double df = 0;
                for (const auto& t : tokens) df += std::count(t.begin(), t.end(), term) > 0 ? 1 : 0;
                const double tf = static_cast<double>(std::count(tokens[d].begin(), tokens[d].end(), term));
                if (tf == 0) continue;
                const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
                const double dl = static_cast<double>(tokens[d].size());
                score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
            }
            if (score > 0) hits.push_back({docs[d].doc_id, score});
        }
        std::sort(hits.begin(), hits.end(), [](const bm25::Hit& x, const bm25::Hit& y) {
            return x.score != y.score ? x.score > y.score : x.doc_id < y.doc_id;
        });
        if (hits.size() > k) hits.resize(k);
        return hits;
    }
};

inline const std::vector<std::string> kVocab{"alpha", "beta", "gamma", "delta", "boil", "hops", "wort", "yeast",
                                      "malt",  "barley", "water", "time", "Brew", "BREW", "x1", "42"};

inline std::vector<bm25::Document> random_corpus(Gen& g, std::size_t max_docs) {
    std::vector<bm25::Document> docs;
    const auto n = 1 + g.below(max_docs);
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        const auto len = g.below(30);
        for (std::size_t w = 0; w < len; ++w) {
            text += kVocab[g.below(g.chance(0.5) ? 4 : kVocab.size())];
            text += g.chance(0.2) ? ", " : " ";
        }
        docs.push_back({"d" + std::to_string(g.below(100000)) + "-" + std::to_string(i), text});
    }
    return docs;
}

inline std::string random_query(Gen& g) {
    std::string q;
    const auto len = 1 + g.below(4);
    for (std::size_t i = 0; i < len; ++i) q += kVocab[g.below(kVocab.size())] + " ";
    return q;
}

}  // namespace talm::test
