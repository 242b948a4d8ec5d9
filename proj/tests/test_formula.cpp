// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>

#include "talm/error.hpp"
#include "talm/formula.hpp"
#include "talm/text.hpp"
#include "test_util.hpp"

using namespace talm;
using namespace talm::formula;
using talm::test::error_of;

namespace {

// Independent tree-walking evaluator over a tree built by the test itself.
struct Tree {
    std::string op;  // empty for a literal
    std::string literal;
    std::vector<Tree> args;
};

std::string text_of(const Tree& t, test::Gen& g) {
    if (t.op.empty()) return t.literal;
    std::string name = t.op;
    if (g.chance(0.3)) {
        for (auto& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    } else if (g.chance(0.5)) {
        name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    }
    if (t.args.empty() && g.chance(0.5)) return name;  // bare constant
    std::string s = name + (g.chance(0.2) ? " (" : "(");
    for (std::size_t i = 0; i < t.args.size(); ++i) {
        if (i) s += g.chance(0.5) ? ", " : ",";
        s += text_of(t.args[i], g);
    }
    return s + ")";
}

// nullopt stands for a math error.
std::optional<double> oracle(const Tree& t) {
    if (t.op.empty()) return std::strtod(t.literal.c_str(), nullptr);
    std::vector<double> v;
    for (const auto& a : t.args) {
        const auto x = oracle(a);
        if (!x) return std::nullopt;
        v.push_back(*x);
    }
    double r = 0;
    if (t.op == "add") r = v[0] + v[1];
    else if (t.op == "subtract") r = v[0] - v[1];
    else if (t.op == "multiply") r = v[0] * v[1];
    else if (t.op == "divide") { if (v[1] == 0) return std::nullopt; r = v[0] / v[1]; }
    else if (t.op == "power") r = std::pow(v[0], v[1]);
    else if (t.op == "sqrt") { if (v[0] < 0) return std::nullopt; r = std::sqrt(v[0]); }
    else if (t.op == "log") { if (v[0] <= 0) return std::nullopt; r = std::log(v[0]); }
    else if (t.op == "negate") r = -v[0];
    else if (t.op == "inverse") { if (v[0] == 0) return std::nullopt; r = 1 / v[0]; }
    else if (t.op == "max") r = v[0] > v[1] ? v[0] : v[1];
    else if (t.op == "min") r = v[0] < v[1] ? v[0] : v[1];
    else if (t.op == "floor") r = std::floor(v[0]);
    else if (t.op == "abs") r = v[0] < 0 ? -v[0] : v[0];
    else if (t.op == "const_pi") r = std::numbers::pi;
    else if (t.op == "const_100") r = 100;
    if (!std::isfinite(r)) return std::nullopt;
    return r;
}

Tree random_tree(test::Gen& g, int depth) {
    static const std::vector<std::pair<std::string, int>> ops{
        {"add", 2},    {"subtract", 2}, {"multiply", 2}, {"divide", 2}, {"power", 2},
        {"sqrt", 1},   {"log", 1},      {"negate", 1},   {"inverse", 1}, {"max", 2},
        {"min", 2},    {"floor", 1},    {"abs", 1},      {"const_pi", 0}, {"const_100", 0}};
    if (depth == 0 || g.chance(0.25)) {
        char buf[32];
        if (g.chance(0.5)) {
            std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(g.integer(0, 120)));
        } else {
            std::snprintf(buf, sizeof buf, "%.3f", g.real(0, 50));
        }
        return {"", buf, {}};
    }
    const auto& [name, arity] = ops[g.below(ops.size())];
    Tree t{name, "", {}};
    for (int i = 0; i < arity; ++i) t.args.push_back(random_tree(g, depth - 1));
    return t;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

TEST_CASE("solver golden") {
    const auto f = parse_formula("Divide(Add(85, Add(88, 95)), 3)");
    CHECK(f.root == apply(Op::Divide, {apply(Op::Add, {literal(85), apply(Op::Add, {literal(88), literal(95)})}),
                                        literal(3)}));
    CHECK(format_value(eval_formula(f)) == "89.3333333333");
    CHECK(to_string(f) == "Divide(Add(85, Add(88, 95)), 3)");
}

TEST_CASE("parse: literals, case, whitespace, constants") {
    CHECK(parse_formula("42").root == literal(42));
    CHECK(eval_formula(parse_formula("  add ( 1 ,2 )  ")) == 3);
    CHECK(eval_formula(parse_formula("ADD(1, 2)")) == 3);
    CHECK(eval_formula(parse_formula("multiply(const_100, 2)")) == 200);
    CHECK(eval_formula(parse_formula("const_pi()")) == doctest::Approx(std::numbers::pi));
    CHECK(format_value(eval_formula(parse_formula("Add(0, 0)"))) == "0");
    CHECK(format_value(4.0) == "4");
}

TEST_CASE("parse: errors") {
    try {
        (void)parse_formula("Frobnicate(1)");
        FAIL("expected UnknownOperator");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownOperator);
        CHECK(std::string(e.what()).find("frobnicate") != std::string::npos);
    }
    try {
        (void)parse_formula("Add(1)");
        FAIL("expected ArityError");
    } catch (const ArityError& e) {
        CHECK(e.op() == "add");
        CHECK(e.got() == 1);
        CHECK(e.want() == 2);
    }
    try {
        (void)parse_formula("Add(1, 2");
        FAIL("expected SyntaxError");
    } catch (const FormulaSyntaxError& e) {
        CHECK(e.position() == 8);
    }
    for (const char* bad : {"", "(", "Add(1,,2)", "Add(1, 2))", "1 2", "Add 1 2"}) {
        INFO(bad);
        CHECK(error_of([&] { (void)parse_formula(bad); }) == ErrorCode::SyntaxError);
    }
}

TEST_CASE("eval: math errors are reported") {
    for (const char* bad : {"Divide(1, 0)", "Sqrt(Negate(4))", "Log(0)", "Inverse(0)", "Power(10, 400)"}) {
        INFO(bad);
        CHECK(error_of([&] { (void)eval_formula(parse_formula(bad)); }) == ErrorCode::MathError);
    }
}

TEST_CASE("eval: deep nesting is rejected, not a crash") {
    std::string deep;
    for (int i = 0; i < 5000; ++i) deep += "Negate(";
    deep += "1";
    for (int i = 0; i < 5000; ++i) deep += ")";
    CHECK(error_of([&] { (void)parse_formula(deep); }) == ErrorCode::SyntaxError);
}

TEST_CASE("property: 500 random formulas agree with an independent evaluator") {
    test::Gen g(4242);
    int errors = 0;
    for (int i = 0; i < 500; ++i) {
        const auto tree = random_tree(g, 4);
        const auto text = text_of(tree, g);
        INFO(text);
        const auto expected = oracle(tree);
        if (!expected) {
            ++errors;
            CHECK(error_of([&] { (void)eval_formula(parse_formula(text)); }) == ErrorCode::MathError);
            continue;
        }
        const auto f = parse_formula(text);
        CHECK(eval_formula(f) == *expected);
        CHECK(eval_formula(f) == eval_formula(f));
        // Printing and re-parsing preserves the value.
        CHECK(eval_formula(parse_formula(to_string(f))) == *expected);
    }
    CHECK(errors < 250);
}

TEST_CASE("property: algebraic identities") {
    test::Gen g(17);
    for (int i = 0; i < 300; ++i) {
        const auto x = format_roundtrip(g.real(-1e6, 1e6));
        const auto y = format_roundtrip(g.real(-1e6, 1e6));
        auto ev = [](const std::string& s) { return eval_formula(parse_formula(s)); };
        CHECK(ev("Add(" + x + ", " + y + ")") == ev("Add(" + y + ", " + x + ")"));
        CHECK(ev("Multiply(" + x + ", 1)") == ev(x));
        CHECK(ev("Divide(" + x + ", 1)") == ev(x));
        CHECK(ev("Subtract(" + x + ", " + x + ")") == 0.0);
    }
}

TEST_CASE("validity: examples") {
    CHECK(check_validity({{"Divide(Add(85, Add(88, 95)), 3)", "89.33"}}).valid_count == 1);
    const auto r = check_validity({{"Add(1,1)", "3"}});
    CHECK(r.invalid_count == 1);
    CHECK(r.error_breakdown.at("mismatch") == 1);
    CHECK(check_validity({}).total() == 0);
    CHECK(check_validity({}).valid_fraction() == 0.0);
}

TEST_CASE("validity: tolerance boundary") {
    const ValidityTolerance tol;
    CHECK(tol.accepts(100.0, 100.5));    // 0.5% of 100.5
    CHECK_FALSE(tol.accepts(100.0, 100.6));
    CHECK(tol.accepts(1.0, 1.0099));     // absolute floor
    CHECK_FALSE(tol.accepts(1.0, 1.0101));
}

TEST_CASE("validity: answers with units and separators") {
    CHECK(parse_answer("1,250") == 1250.0);
    CHECK(parse_answer("rs. 40") == 40.0);
    CHECK(parse_answer("-3.5 m") == -3.5);
    CHECK_FALSE(parse_answer("none").has_value());
}

TEST_CASE("validity: constructed 140 valid / 60 invalid corpus") {
    test::Gen g(140);
    std::vector<ValidityRecord> records;
    for (int i = 0; i < 140; ++i) {
        const auto a = g.integer(1, 999);
        const auto b = g.integer(1, 999);
        const auto c = g.integer(2, 9);
        const double v = static_cast<double>(a + b) / static_cast<double>(c);
        records.push_back({"divide(add(" + std::to_string(a) + "," + std::to_string(b) + ")," + std::to_string(c) + ")",
                           fmt(v)});
    }
    // 60 invalid, 10 of each kind.
    for (int i = 0; i < 10; ++i) {
        records.push_back({"Add(" + std::to_string(i) + ", 1)", std::to_string(i + 50)});
        records.push_back({"Add(" + std::to_string(i) + ", ", "1"});
        records.push_back({"Frob(" + std::to_string(i) + ")", "1"});
        records.push_back({"Add(" + std::to_string(i) + ")", "1"});
        records.push_back({"Divide(" + std::to_string(i) + ", 0)", "1"});
        records.push_back({"Add(" + std::to_string(i) + ", 1)", "n/a"});
    }
    const auto report = check_validity(records);
    CHECK(report.valid_count == 140);
    CHECK(report.invalid_count == 60);
    CHECK(report.valid_fraction() == 0.7);
    for (const char* reason : {"mismatch", "syntax_error", "unknown_operator", "arity_error", "math_error",
                               "unparseable_answer"}) {
        INFO(reason);
        CHECK(report.error_breakdown.at(reason) == 10);
    }
}
