// SPDX-License-Identifier: Apache-2.0
#include "talm/formula.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

#include "talm/error.hpp"
#include "talm/text.hpp"

namespace talm::formula {

namespace {

struct OpInfo {
    Op op;
    std::string_view name;
    std::string_view display;
    std::size_t arity;
};

constexpr OpInfo kOps[] = {
    {Op::Add, "add", "Add", 2},
    {Op::Subtract, "subtract", "Subtract", 2},
    {Op::Multiply, "multiply", "Multiply", 2},
    {Op::Divide, "divide", "Divide", 2},
    {Op::Power, "power", "Power", 2},
    {Op::Sqrt, "sqrt", "Sqrt", 1},
    {Op::Log, "log", "Log", 1},
    {Op::Negate, "negate", "Negate", 1},
    {Op::Inverse, "inverse", "Inverse", 1},
    {Op::Max, "max", "Max", 2},
    {Op::Min, "min", "Min", 2},
    {Op::Floor, "floor", "Floor", 1},
    {Op::Abs, "abs", "Abs", 1},
    {Op::ConstPi, "const_pi", "const_pi", 0},
    {Op::Const100, "const_100", "const_100", 0},
};

const OpInfo& info(Op op) {
    for (const auto& entry : kOps) {
        if (entry.op == op) return entry;
    }
    return kOps[0];
}

constexpr std::size_t kMaxDepth = 200;

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Formula parse() {
        Formula f{parse_expr(0)};
        skip_space();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return f;
    }

private:
    [[noreturn]] void fail(const std::string& message) const { throw FormulaSyntaxError(pos_, message); }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool at(char c) {
        skip_space();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    Node parse_expr(std::size_t depth) {
        if (depth > kMaxDepth) fail("formula nested too deeply");
        skip_space();
        if (pos_ >= text_.size()) fail("expected an expression");
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
            return parse_number();
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_apply(depth);
        fail(std::string("unexpected character '") + c + "'");
    }

    Node parse_number() {
        const std::size_t start = pos_;
        if (text_[pos_] == '+' || text_[pos_] == '-') ++pos_;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            const bool exponent_sign =
                (c == '+' || c == '-') && (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E');
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' ||
                exponent_sign) {
                ++pos_;
            } else {
                break;
            }
        }
        std::string_view token = text_.substr(start, pos_ - start);
        if (!token.empty() && token.front() == '+') token.remove_prefix(1);
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
            const std::string bad(text_.substr(start, pos_ - start));
            pos_ = start;
            fail("invalid number '" + bad + "'");
        }
        return literal(value);
    }

    Node parse_apply(std::size_t depth) {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        const std::string name = to_lower_ascii(text_.substr(start, pos_ - start));
        const auto op = op_from_name(name);
        if (!op) throw Error(ErrorCode::UnknownOperator, "unknown operator '" + name + "'");

        std::vector<Node> args;
        if (at('(')) {
            ++pos_;
            if (at(')')) {
                ++pos_;
            } else {
                while (true) {
                    args.push_back(parse_expr(depth + 1));
                    if (at(',')) {
                        ++pos_;
                        continue;
                    }
                    if (at(')')) {
                        ++pos_;
                        break;
                    }
                    fail("expected ',' or ')'");
                }
            }
        } else if (op_arity(*op) != 0) {
            fail("expected '(' after operator '" + name + "'");
        }
        if (args.size() != op_arity(*op)) throw ArityError(name, args.size(), op_arity(*op));
        return apply(*op, std::move(args));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

[[noreturn]] void math_error(const std::string& message) { throw Error(ErrorCode::MathError, message); }

double evaluate(const Node& node) {
    if (const auto* lit = std::get_if<Literal>(&node.value)) return lit->value;
    const auto& app = std::get<Apply>(node.value);
    std::vector<double> a;
    a.reserve(app.args.size());
    for (const auto& arg : app.args) a.push_back(evaluate(arg));

    double r = 0.0;
    switch (app.op) {
        case Op::Add: r = a[0] + a[1]; break;
        case Op::Subtract: r = a[0] - a[1]; break;
        case Op::Multiply: r = a[0] * a[1]; break;
        case Op::Divide:
            if (a[1] == 0.0) math_error("division by zero");
            r = a[0] / a[1];
            break;
        case Op::Power: r = std::pow(a[0], a[1]); break;
        case Op::Sqrt:
            if (a[0] < 0.0) math_error("sqrt of negative value");
            r = std::sqrt(a[0]);
            break;
        case Op::Log:
            if (a[0] <= 0.0) math_error("log of non-positive value");
            r = std::log(a[0]);
            break;
        case Op::Negate: r = -a[0]; break;
        case Op::Inverse:
            if (a[0] == 0.0) math_error("inverse of zero");
            r = 1.0 / a[0];
            break;
        case Op::Max: r = std::max(a[0], a[1]); break;
        case Op::Min: r = std::min(a[0], a[1]); break;
        case Op::Floor: r = std::floor(a[0]); break;
        case Op::Abs: r = std::fabs(a[0]); break;
        case Op::ConstPi: r = std::numbers::pi; break;
        case Op::Const100: r = 100.0; break;
    }
    if (!std::isfinite(r)) math_error(std::string(op_name(app.op)) + " produced a non-finite result");
    return r;
}

void render(const Node& node, std::string& out) {
    if (const auto* lit = std::get_if<Literal>(&node.value)) {
        out += format_roundtrip(lit->value);
        return;
    }
    const auto& app = std::get<Apply>(node.value);
    out += info(app.op).display;
    if (app.args.empty()) return;
    out.push_back('(');
    for (std::size_t i = 0; i < app.args.size(); ++i) {
        if (i > 0) out += ", ";
        render(app.args[i], out);
    }
    out.push_back(')');
}

}  // namespace

std::string_view op_name(Op op) noexcept { return info(op).name; }

std::size_t op_arity(Op op) noexcept { return info(op).arity; }

std::optional<Op> op_from_name(std::string_view name) {
    const auto lower = to_lower_ascii(name);
    for (const auto& entry : kOps) {
        if (entry.name == lower) return entry.op;
    }
    return std::nullopt;
}

const std::vector<Op>& all_ops() {
    static const std::vector<Op> ops = [] {
        std::vector<Op> v;
        for (const auto& entry : kOps) v.push_back(entry.op);
        return v;
    }();
    return ops;
}

bool operator==(const Node& a, const Node& b) {
    if (a.value.index() != b.value.index()) return false;
    if (const auto* la = std::get_if<Literal>(&a.value)) {
        return la->value == std::get<Literal>(b.value).value;
    }
    const auto& x = std::get<Apply>(a.value);
    const auto& y = std::get<Apply>(b.value);
    return x.op == y.op && x.args == y.args;
}

Node literal(double value) { return Node{Literal{value}}; }

Node apply(Op op, std::vector<Node> args) { return Node{Apply{op, std::move(args)}}; }

Formula parse_formula(std::string_view text) { return Parser(text).parse(); }

double eval_formula(const Formula& f) { return evaluate(f.root); }

std::string to_string(const Formula& f) {
    std::string out;
    render(f.root, out);
    return out;
}

bool ValidityTolerance::accepts(double value, double answer) const {
    return std::fabs(value - answer) <= std::max(abs_tol, rel_tol * std::fabs(answer));
}

std::optional<double> parse_answer(std::string_view answer) {
    if (auto whole = parse_number(answer)) return whole;
    // Fall back to the first number embedded in the text, keeping a leading minus.
    const auto tokens = scan_numbers(answer);
    if (tokens.empty()) return std::nullopt;
    auto value = parse_number(tokens.front().text);
    if (value && tokens.front().offset > 0 && answer[tokens.front().offset - 1] == '-') *value = -*value;
    return value;
}

ValidityReport check_validity(const std::vector<ValidityRecord>& records, const ValidityTolerance& tol) {
    ValidityReport report;
    auto invalid = [&](const char* reason) {
        ++report.invalid_count;
        ++report.error_breakdown[reason];
    };
    for (const auto& rec : records) {
        double value = 0.0;
        try {
            value = eval_formula(parse_formula(rec.formula));
        } catch (const Error& e) {
            switch (e.code()) {
                case ErrorCode::SyntaxError: invalid("syntax_error"); break;
                case ErrorCode::UnknownOperator: invalid("unknown_operator"); break;
                case ErrorCode::ArityError: invalid("arity_error"); break;
                default: invalid("math_error"); break;
            }
            continue;
        }
        const auto answer = parse_answer(rec.answer);
        if (!answer) {
            invalid("unparseable_answer");
        } else if (tol.accepts(value, *answer)) {
            ++report.valid_count;
        } else {
            invalid("mismatch");
        }
    }
    return report;
}

}  // namespace talm::formula
