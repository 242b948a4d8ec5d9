// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace talm {

/// Acceptance predicate comparing a produced answer with a target.
struct MatchSpec {
    enum class Kind { NumericAbsRel, NormalizedExact };

    Kind kind = Kind::NumericAbsRel;
    double abs_tol = 1e-2;
    double rel_tol = 5e-3;

    [[nodiscard]] static MatchSpec numeric(double abs_tol = 1e-2, double rel_tol = 5e-3) {
        return {Kind::NumericAbsRel, abs_tol, rel_tol};
    }
    [[nodiscard]] static MatchSpec exact() { return {Kind::NormalizedExact, 0.0, 0.0}; }

    /// Throws Error(ConfigError) on negative or non-finite tolerances.
    void validate() const;

    /// "numeric", "numeric:ABS,REL" or "exact".
    [[nodiscard]] static MatchSpec parse(std::string_view text);
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const MatchSpec&, const MatchSpec&) = default;
};

/// Lowercase, punctuation removed, whitespace collapsed, leading article dropped.
[[nodiscard]] std::string normalize_answer(std::string_view text);

/// NumericAbsRel: both parse and |a - b| <= max(abs_tol, rel_tol * |b|), where b
/// is the target. NormalizedExact: equal after normalize_answer.
[[nodiscard]] bool match(std::string_view candidate, std::string_view target, const MatchSpec& spec);

}  // namespace talm
