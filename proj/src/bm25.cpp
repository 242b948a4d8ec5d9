// SPDX-License-Identifier: Apache-2.0
#include "talm/bm25.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <json.hpp>

#include "talm/error.hpp"

namespace talm::bm25 {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

double idf(std::size_t doc_count, std::size_t doc_freq) noexcept {
    const double n = static_cast<double>(doc_count);
    const double df = static_cast<double>(doc_freq);
    return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

Index Index::build(std::vector<Document> corpus, Params params) {
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus has no documents");
    Index index;
    index.params_ = params;
    index.documents_ = std::move(corpus);
    index.doc_lengths_.reserve(index.documents_.size());

    for (std::uint32_t d = 0; d < index.documents_.size(); ++d) {
        const auto tokens = tokenize(index.documents_[d].text);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        std::map<std::string, std::uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (auto& [term, count] : tf) index.postings_[term].push_back({d, count});
    }
    index.finalize();
    return index;
}

void Index::finalize() {
    by_id_.clear();
    for (std::uint32_t d = 0; d < documents_.size(); ++d) {
        if (!by_id_.emplace(documents_[d].doc_id, d).second) {
            throw Error(ErrorCode::DuplicateDocId, "duplicate doc_id '" + documents_[d].doc_id + "'");
        }
    }
    double total = 0.0;
    for (auto len : doc_lengths_) total += len;
    avg_doc_length_ = documents_.empty() ? 0.0 : total / static_cast<double>(documents_.size());
}

const Document* Index::find(std::string_view doc_id) const {
    auto it = by_id_.find(std::string(doc_id));
    return it == by_id_.end() ? nullptr : &documents_[it->second];
}

std::vector<Hit> Index::search(std::string_view query, std::size_t k) const {
    if (k == 0) throw Error(ErrorCode::ConfigError, "k must be at least 1");
    auto tokens = tokenize(query);
    if (tokens.empty()) throw Error(ErrorCode::EmptyQuery, "query has no searchable tokens");

    // Unique query terms in order of first appearance.
    std::vector<std::string> terms;
    for (auto& t : tokens) {
        if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(std::move(t));
    }

    std::vector<double> scores(documents_.size(), 0.0);
    std::vector<bool> touched(documents_.size(), false);
    const double avgdl = avg_doc_length_ > 0.0 ? avg_doc_length_ : 1.0;
    for (const auto& term : terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double w = idf(documents_.size(), it->second.size());
        for (const auto& p : it->second) {
            const double tf = p.tf;
            const double norm = params_.k1 * (1.0 - params_.b + params_.b * doc_lengths_[p.doc] / avgdl);
            scores[p.doc] += w * (tf * (params_.k1 + 1.0)) / (tf + norm);
            touched[p.doc] = true;
        }
    }

    std::vector<std::uint32_t> hits;
    for (std::uint32_t d = 0; d < documents_.size(); ++d) {
        if (touched[d] && scores[d] > 0.0) hits.push_back(d);
    }
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return documents_[a].doc_id < documents_[b].doc_id;
    };
    const std::size_t keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
    hits.resize(keep);

    std::vector<Hit> out;
    out.reserve(keep);
    for (auto d : hits) out.push_back({documents_[d].doc_id, scores[d]});
    return out;
}

void Index::save(const std::filesystem::path& path) const {
    nlohmann::ordered_json j;
    j["format_version"] = kIndexFormatVersion;
    j["params"] = {{"k1", params_.k1}, {"b", params_.b}};
    auto& docs = j["documents"] = nlohmann::ordered_json::array();
    for (std::size_t d = 0; d < documents_.size(); ++d) {
        docs.push_back({{"doc_id", documents_[d].doc_id},
                        {"text", documents_[d].text},
                        {"length", doc_lengths_[d]}});
    }
    // Terms sorted so the artifact is byte-stable.
    std::vector<const std::string*> terms;
    terms.reserve(postings_.size());
    for (const auto& [term, _] : postings_) terms.push_back(&term);
    std::sort(terms.begin(), terms.end(), [](auto* a, auto* b) { return *a < *b; });
    auto& post = j["postings"] = nlohmann::ordered_json::object();
    for (const auto* term : terms) {
        auto& list = post[*term] = nlohmann::ordered_json::array();
        for (const auto& p : postings_.at(*term)) list.push_back({p.doc, p.tf});
    }

    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write index to " + path.string());
    out << j.dump() << '\n';
    if (!out) throw Error(ErrorCode::IoError, "failed writing index to " + path.string());
}

Index Index::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open index " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::PersistenceError, "corrupt index " + path.string() + ": " + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != kIndexFormatVersion) {
            throw Error(ErrorCode::PersistenceError, "unsupported index format_version in " + path.string());
        }
        Index index;
        index.params_ = {j.at("params").at("k1").get<double>(), j.at("params").at("b").get<double>()};
        for (const auto& d : j.at("documents")) {
            index.documents_.push_back({d.at("doc_id").get<std::string>(), d.at("text").get<std::string>()});
            index.doc_lengths_.push_back(d.at("length").get<std::uint32_t>());
        }
        for (const auto& [term, list] : j.at("postings").items()) {
            auto& postings = index.postings_[term];
            for (const auto& p : list) {
                const auto doc = p.at(0).get<std::uint32_t>();
                if (doc >= index.documents_.size()) {
                    throw Error(ErrorCode::PersistenceError, "posting references unknown document");
                }
                postings.push_back({doc, p.at(1).get<std::uint32_t>()});
            }
        }
        if (index.documents_.empty()) throw Error(ErrorCode::EmptyCorpus, "index has no documents");
        index.finalize();
        return index;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::PersistenceError, "malformed index " + path.string() + ": " + e.what());
    }
}

}  // namespace talm::bm25
