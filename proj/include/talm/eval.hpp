// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "talm/generator.hpp"
#include "talm/match.hpp"
#include "talm/records.hpp"
#include "talm/tools.hpp"

namespace talm::eval {

enum class Verdict { Correct, WrongOutput, UnknownTool, ToolError, BudgetExhausted, GeneratorError };

inline constexpr std::array kAllVerdicts{Verdict::Correct,         Verdict::WrongOutput,
                                         Verdict::UnknownTool,     Verdict::ToolError,
                                         Verdict::BudgetExhausted, Verdict::GeneratorError};

[[nodiscard]] std::string_view to_string(Verdict v) noexcept;

struct EvalConfig {
    /// Beam width; 1 means greedy decoding.
    std::size_t beams = 4;
    MatchSpec match;
    std::optional<std::size_t> max_examples;
    /// false: baseline mode, generation runs against an empty registry.
    bool tool_enabled = true;
    std::size_t budget = 2048;
    std::string input_label = "question";
    std::size_t jobs = 0;

    /// Throws Error(ConfigError).
    void validate() const;
};

struct ExampleResult {
    std::string id;
    Verdict verdict = Verdict::WrongOutput;
    std::string prediction;
    std::string target;
    /// Rendered (possibly partial) sequence.
    std::string sequence;
    std::string detail;
};

struct EvalReport {
    double accuracy = 0.0;
    std::size_t n = 0;
    std::size_t correct = 0;
    /// Indexed by Verdict.
    std::array<std::size_t, kAllVerdicts.size()> taxonomy{};
    std::vector<ExampleResult> per_example;
    /// "beam:4", "greedy", or "greedy (beam unsupported)".
    std::string decoding;
    /// Registry invocations made during this evaluation.
    std::size_t tool_calls = 0;

    [[nodiscard]] std::size_t count(Verdict v) const noexcept { return taxonomy[static_cast<std::size_t>(v)]; }
};

/// Decodes every example (in input order, up to max_examples) and scores the
/// output against its target. Failures are recorded per example; only an
/// empty task set or a bad config throws.
[[nodiscard]] EvalReport evaluate(gen::Generator& generator, const tools::ToolRegistry& registry,
                                  const std::vector<TaskExample>& tasks, const EvalConfig& config);

/// One JSON object per example.
void save_per_example(const std::filesystem::path& path, const EvalReport& report);

/// One row of the rounds-vs-accuracy curve.
struct CurvePoint {
    int round = 0;
    double accuracy = 0.0;
    std::size_t n = 0;
    double acceptance_rate = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// "round,accuracy,n,acceptance_rate" header plus rows sorted by round. Reals
/// use the shortest text that reads back to the same double.
[[nodiscard]] std::string emit_csv(std::vector<CurvePoint> points);
/// Throws Error(SchemaError) on malformed rows.
[[nodiscard]] std::vector<CurvePoint> parse_csv(std::string_view csv);
/// Human-readable table of the same rows.
[[nodiscard]] std::string emit_summary(std::vector<CurvePoint> points);

/// Writes curve.csv and summary.txt into `dir`. Throws Error(IoError).
void emit_report(const std::filesystem::path& dir, const std::vector<CurvePoint>& points);

}  // namespace talm::eval
