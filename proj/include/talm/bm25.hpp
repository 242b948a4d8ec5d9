// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace talm::bm25 {

struct Document {
    std::string doc_id;
    std::string text;
};

struct Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t doc = 0;  // index into documents()
    std::uint32_t tf = 0;
};

struct Hit {
    std::string doc_id;
    double score = 0.0;
};

/// Lowercase, split on every non-alphanumeric run; no stemming or stop words.
[[nodiscard]] std::vector<std::string> tokenize(std::string_view text);

/// ln((N - df + 0.5) / (df + 0.5) + 1)
[[nodiscard]] double idf(std::size_t doc_count, std::size_t doc_freq) noexcept;

/// Immutable Okapi BM25 inverted index.
class Index {
public:
    /// Throws Error(EmptyCorpus | DuplicateDocId).
    static Index build(std::vector<Document> corpus, Params params = {});

    /// Ranked hits with score > 0, non-increasing by score, ties by ascending doc_id.
    /// Throws Error(EmptyQuery) when the query has no tokens; k must be >= 1.
    [[nodiscard]] std::vector<Hit> search(std::string_view query, std::size_t k) const;

    [[nodiscard]] const std::vector<Document>& documents() const noexcept { return documents_; }
    [[nodiscard]] const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_lengths_; }
    [[nodiscard]] const std::unordered_map<std::string, std::vector<Posting>>& postings() const noexcept {
        return postings_;
    }
    [[nodiscard]] double avg_doc_length() const noexcept { return avg_doc_length_; }
    [[nodiscard]] std::size_t doc_count() const noexcept { return documents_.size(); }
    [[nodiscard]] const Params& params() const noexcept { return params_; }
    [[nodiscard]] const Document* find(std::string_view doc_id) const;

    /// Single JSON artifact with a format_version field.
    void save(const std::filesystem::path& path) const;
    static Index load(const std::filesystem::path& path);

private:
    Index() = default;
    void finalize();

    std::vector<Document> documents_;
    std::vector<std::uint32_t> doc_lengths_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::unordered_map<std::string, std::uint32_t> by_id_;
    double avg_doc_length_ = 0.0;
    Params params_;
};

inline constexpr int kIndexFormatVersion = 1;

}  // namespace talm::bm25
