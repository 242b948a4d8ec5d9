// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <unordered_map>

namespace talm::gen {

/// Character n-gram counts with add-one smoothing and backoff to shorter
/// contexts when a context was never observed. Orders up to 4 are supported.
class CharNgramModel {
public:
    explicit CharNgramModel(std::size_t order = 4);

    void add(std::string_view text);

    /// Sum of log P(c | context) over the text and an end-of-text symbol.
    /// `vocab` is the smoothing alphabet size shared by competing models.
    [[nodiscard]] double log_likelihood(std::string_view text, std::size_t vocab) const;

    [[nodiscard]] bool empty() const noexcept { return documents_ == 0; }
    [[nodiscard]] std::size_t documents() const noexcept { return documents_; }
    [[nodiscard]] std::size_t order() const noexcept { return order_; }

private:
    [[nodiscard]] static std::uint32_t context_key(std::uint32_t packed, std::size_t length) noexcept;

    std::size_t order_;
    std::size_t documents_ = 0;
    std::unordered_map<std::uint32_t, std::uint32_t> context_totals_;
    std::unordered_map<std::uint64_t, std::uint32_t> joint_;
};

}  // namespace talm::gen
