// SPDX-License-Identifier: Apache-2.0
#pragma once

// MathQA-style formula language: nested operator applications over numeric
// literals, e.g. "Divide(Add(85, Add(88, 95)), 3)". Operator names are
// case-insensitive; named constants may be written bare ("const_pi") or with
// empty parentheses.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace talm::formula {

enum class Op {
    Add,
    Subtract,
    Multiply,
    Divide,
    Power,
    Sqrt,
    Log,
    Negate,
    Inverse,
    Max,
    Min,
    Floor,
    Abs,
    ConstPi,
    Const100,
};

/// Canonical lowercase name ("add", "const_pi").
[[nodiscard]] std::string_view op_name(Op op) noexcept;
[[nodiscard]] std::size_t op_arity(Op op) noexcept;
[[nodiscard]] std::optional<Op> op_from_name(std::string_view name);
[[nodiscard]] const std::vector<Op>& all_ops();

struct Node;

struct Literal {
    double value = 0.0;
};

struct Apply {
    Op op = Op::Add;
    std::vector<Node> args;
};

struct Node {
    std::variant<Literal, Apply> value;
};

bool operator==(const Node& a, const Node& b);

struct Formula {
    Node root;

    friend bool operator==(const Formula& a, const Formula& b) { return a.root == b.root; }
};

[[nodiscard]] Node literal(double value);
[[nodiscard]] Node apply(Op op, std::vector<Node> args);

/// Throws FormulaSyntaxError, Error(UnknownOperator) or ArityError.
[[nodiscard]] Formula parse_formula(std::string_view text);

/// Strict recursive evaluation in IEEE double precision.
/// Throws Error(MathError) instead of producing NaN or infinity.
[[nodiscard]] double eval_formula(const Formula& f);

/// Canonical text ("Divide(Add(85, Add(88, 95)), 3)") with capitalised operator names.
[[nodiscard]] std::string to_string(const Formula& f);

/// Numeric tolerance for comparing a formula result against a printed answer:
/// |value - answer| <= max(abs_tol, rel_tol * |answer|).
struct ValidityTolerance {
    double abs_tol = 1e-2;
    double rel_tol = 5e-3;

    [[nodiscard]] bool accepts(double value, double answer) const;
};

struct ValidityRecord {
    std::string formula;
    std::string answer;
};

struct ValidityReport {
    std::size_t valid_count = 0;
    std::size_t invalid_count = 0;
    /// Reason -> count for every invalid record: "mismatch", "syntax_error",
    /// "unknown_operator", "arity_error", "math_error", "unparseable_answer".
    std::map<std::string, std::size_t> error_breakdown;

    [[nodiscard]] std::size_t total() const noexcept { return valid_count + invalid_count; }
    [[nodiscard]] double valid_fraction() const noexcept {
        return total() == 0 ? 0.0 : static_cast<double>(valid_count) / static_cast<double>(total());
    }
};

/// Extracts the numeric value from an answer string ("89.33", "1,250", "rs. 40").
[[nodiscard]] std::optional<double> parse_answer(std::string_view answer);

[[nodiscard]] ValidityReport check_validity(const std::vector<ValidityRecord>& records,
                                            const ValidityTolerance& tol = {});

}  // namespace talm::formula
