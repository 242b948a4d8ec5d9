// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace talm {

// UTF-8 helpers. Lengths are counted in code points; malformed bytes count as one each.
[[nodiscard]] std::size_t utf8_length(std::string_view text) noexcept;
[[nodiscard]] std::string_view utf8_prefix(std::string_view text, std::size_t max_chars) noexcept;

[[nodiscard]] std::string to_lower_ascii(std::string_view text);
[[nodiscard]] std::string_view trim(std::string_view text) noexcept;

/// Fixed 10-decimal rendering with trailing zeros (and a trailing point) removed.
[[nodiscard]] std::string format_value(double value);
/// Same as format_value but with the given number of decimals.
[[nodiscard]] std::string format_fixed_trimmed(double value, int decimals);
/// Shortest representation that parses back to the identical double.
[[nodiscard]] std::string format_roundtrip(double value);

/// Parses the whole (trimmed) text as a real number; thousands separators are accepted.
[[nodiscard]] std::optional<double> parse_number(std::string_view text);

/// A decimal number found inside free text.
struct NumberToken {
    std::size_t offset = 0;
    std::string text;
};

/// Unsigned decimal literals that are not part of an identifier (so "const_100" yields none).
[[nodiscard]] std::vector<NumberToken> scan_numbers(std::string_view text);

[[nodiscard]] std::uint64_t fnv1a64(std::string_view data) noexcept;
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;
[[nodiscard]] std::string hex64(std::uint64_t value);

/// Deterministic random source. The engine output is fixed by the standard; the
/// distribution mappings are implemented here so results do not depend on the
/// standard library vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform();
    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);
    /// Uniform integer in [lo, hi].
    std::int64_t between(std::int64_t lo, std::int64_t hi);

private:
    std::mt19937_64 engine_;
};

}  // namespace talm
