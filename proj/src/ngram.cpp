// SPDX-License-Identifier: Apache-2.0
#include "talm/ngram.hpp"

#include <cmath>

#include "talm/error.hpp"

namespace talm::gen {

namespace {

constexpr unsigned char kStart = 0x02;
constexpr unsigned char kEnd = 0x03;

// Keeps the last `n` bytes of history packed into the low bits.
std::uint32_t push(std::uint32_t history, unsigned char c) noexcept { return (history << 8) | c; }

std::uint32_t mask_for(std::size_t length) noexcept {
    return length == 0 ? 0u : (length >= 4 ? 0xFFFFFFFFu : ((1u << (8 * length)) - 1u));
}

}  // namespace

CharNgramModel::CharNgramModel(std::size_t order) : order_(order) {
    if (order_ < 1 || order_ > 4) throw Error(ErrorCode::ConfigError, "n-gram order must be in [1, 4]");
}

std::uint32_t CharNgramModel::context_key(std::uint32_t packed, std::size_t length) noexcept {
    // Top byte tags the context length; three history bytes fit below it.
    return (static_cast<std::uint32_t>(length) << 24) | (packed & mask_for(length) & 0x00FFFFFFu);
}

void CharNgramModel::add(std::string_view text) {
    ++documents_;
    std::uint32_t history = 0;
    for (std::size_t i = 0; i + 1 < order_; ++i) history = push(history, kStart);
    auto count = [&](unsigned char c) {
        for (std::size_t len = 0; len < order_; ++len) {
            const auto key = context_key(history, len);
            ++context_totals_[key];
            ++joint_[(static_cast<std::uint64_t>(key) << 8) | c];
        }
        history = push(history, c);
    };
    for (char ch : text) count(static_cast<unsigned char>(ch));
    count(kEnd);
}

double CharNgramModel::log_likelihood(std::string_view text, std::size_t vocab) const {
    const double v = static_cast<double>(vocab);
    std::uint32_t history = 0;
    for (std::size_t i = 0; i + 1 < order_; ++i) history = push(history, kStart);
    double total = 0.0;
    auto score = [&](unsigned char c) {
        double lp = -std::log(v);
        for (std::size_t len = order_; len-- > 0;) {
            const auto key = context_key(history, len);
            auto it = context_totals_.find(key);
            if (it == context_totals_.end()) continue;
            auto jt = joint_.find((static_cast<std::uint64_t>(key) << 8) | c);
            const double joint = jt == joint_.end() ? 0.0 : jt->second;
            lp = std::log((joint + 1.0) / (static_cast<double>(it->second) + v));
            break;
        }
        total += lp;
        history = push(history, c);
    };
    for (char ch : text) score(static_cast<unsigned char>(ch));
    score(kEnd);
    return total;
}

}  // namespace talm::gen
