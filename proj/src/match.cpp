// SPDX-License-Identifier: Apache-2.0
#include "talm/match.hpp"

#include <cctype>
#include <cmath>

#include "talm/error.hpp"
#include "talm/text.hpp"

namespace talm {

void MatchSpec::validate() const {
    if (!std::isfinite(abs_tol) || !std::isfinite(rel_tol) || abs_tol < 0 || rel_tol < 0) {
        throw Error(ErrorCode::ConfigError, "match tolerances must be finite and >= 0");
    }
}

MatchSpec MatchSpec::parse(std::string_view text) {
    const auto t = trim(text);
    if (t == "exact") return exact();
    if (t == "numeric") return numeric();
    if (t.starts_with("numeric:")) {
        const auto rest = t.substr(8);
        const auto comma = rest.find(',');
        if (comma != std::string_view::npos) {
            const auto a = parse_number(rest.substr(0, comma));
            const auto r = parse_number(rest.substr(comma + 1));
            if (a && r) {
                auto spec = numeric(*a, *r);
                spec.validate();
                return spec;
            }
        }
    }
    throw Error(ErrorCode::ConfigError,
                "bad match spec '" + std::string(text) + "' (expected exact, numeric or numeric:ABS,REL)");
}

std::string MatchSpec::to_string() const {
    if (kind == Kind::NormalizedExact) return "exact";
    return "numeric:" + format_roundtrip(abs_tol) + "," + format_roundtrip(rel_tol);
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = true;
        } else if (std::ispunct(c)) {
            // Punctuation is dropped without splitting words ("don't" -> "dont").
        } else {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    for (const std::string_view article : {"a ", "an ", "the "}) {
        if (out.starts_with(article)) {
            out.erase(0, article.size());
            break;
        }
    }
    return out;
}

bool match(std::string_view candidate, std::string_view target, const MatchSpec& spec) {
    if (spec.kind == MatchSpec::Kind::NormalizedExact) {
        return normalize_answer(candidate) == normalize_answer(target);
    }
    const auto a = parse_number(candidate);
    const auto b = parse_number(target);
    if (!a || !b) return false;
    return std::fabs(*a - *b) <= std::max(spec.abs_tol, spec.rel_tol * std::fabs(*b));
}

}  // namespace talm
