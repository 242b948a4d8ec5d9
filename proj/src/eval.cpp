// SPDX-License-Identifier: Apache-2.0
#include "talm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "talm/datasets.hpp"
#include "talm/driver.hpp"
#include "talm/error.hpp"
#include "talm/parallel.hpp"
#include "talm/text.hpp"

namespace talm::eval {

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::Correct: return "correct";
        case Verdict::WrongOutput: return "wrong_output";
        case Verdict::UnknownTool: return "unknown_tool";
        case Verdict::ToolError: return "tool_error";
        case Verdict::BudgetExhausted: return "budget_exhausted";
        case Verdict::GeneratorError: return "generator_error";
    }
    return "?";
}

void EvalConfig::validate() const {
    if (beams < 1) throw Error(ErrorCode::ConfigError, "beams must be >= 1");
    if (max_examples && *max_examples == 0) throw Error(ErrorCode::ConfigError, "max_examples must be >= 1");
    match.validate();
}

namespace {

ExampleResult judge(const TaskExample& task, const DriveResult& run, const MatchSpec& spec) {
    ExampleResult r;
    r.id = task.id;
    r.target = task.target;
    try {
        r.sequence = run.text();
    } catch (const Error&) {
        r.sequence.clear();
    }
    r.detail = run.error;
    if (run.complete()) {
        r.prediction = run.sequence.task_output->body;
        if (match(r.prediction, task.target, spec)) {
            r.verdict = Verdict::Correct;
        } else {
            r.verdict = run.tool_error ? Verdict::ToolError : Verdict::WrongOutput;
        }
        return r;
    }
    switch (run.status) {
        case DriveStatus::UnknownTool: r.verdict = Verdict::UnknownTool; break;
        case DriveStatus::BudgetExhausted: r.verdict = Verdict::BudgetExhausted; break;
        case DriveStatus::GeneratorError: r.verdict = Verdict::GeneratorError; break;
        default: r.verdict = run.tool_error ? Verdict::ToolError : Verdict::WrongOutput; break;
    }
    return r;
}

}  // namespace

EvalReport evaluate(gen::Generator& generator, const tools::ToolRegistry& registry,
                    const std::vector<TaskExample>& tasks, const EvalConfig& config) {
    config.validate();
    if (tasks.empty()) throw Error(ErrorCode::ConfigError, "evaluation needs a non-empty task set");
    const auto n = config.max_examples ? std::min(*config.max_examples, tasks.size()) : tasks.size();

    EvalReport report;
    DriveOptions options;
    options.input_label = config.input_label;
    options.budget = config.budget;
    if (config.beams > 1 && generator.capabilities().supports_beam) {
        options.sampling = gen::SamplingSpec::beam(config.beams);
        report.decoding = "beam:" + std::to_string(config.beams);
    } else {
        options.sampling = gen::SamplingSpec::greedy();
        report.decoding = config.beams > 1 ? "greedy (beam unsupported)" : "greedy";
    }

    const tools::ToolRegistry no_tools;
    const auto& active = config.tool_enabled ? registry : no_tools;
    const auto calls_before = registry.call_count();

    report.per_example.resize(n);
    const auto jobs = effective_jobs(config.jobs, generator.capabilities().concurrent_requests);
    parallel_for(n, jobs, [&](std::size_t i) {
        const auto run = drive_generation(generator, active, tasks[i].input, options);
        report.per_example[i] = judge(tasks[i], run, config.match);
    });

    report.n = n;
    for (const auto& r : report.per_example) ++report.taxonomy[static_cast<std::size_t>(r.verdict)];
    report.correct = report.count(Verdict::Correct);
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(n);
    report.tool_calls = registry.call_count() - calls_before;
    return report;
}

void save_per_example(const std::filesystem::path& path, const EvalReport& report) {
    std::string out;
    for (const auto& r : report.per_example) {
        nlohmann::ordered_json j;
        j["id"] = r.id;
        j["verdict"] = std::string(to_string(r.verdict));
        j["prediction"] = r.prediction;
        j["target"] = r.target;
        j["sequence"] = r.sequence;
        if (!r.detail.empty()) j["detail"] = r.detail;
        out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        out += '\n';
    }
    data::write_file_atomic(path, out);
}

namespace {

constexpr std::string_view kCsvHeader = "round,accuracy,n,acceptance_rate";

void sort_points(std::vector<CurvePoint>& points) {
    std::stable_sort(points.begin(), points.end(),
                     [](const CurvePoint& a, const CurvePoint& b) { return a.round < b.round; });
}

}  // namespace

std::string emit_csv(std::vector<CurvePoint> points) {
    sort_points(points);
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& p : points) {
        out += std::to_string(p.round) + "," + format_roundtrip(p.accuracy) + "," + std::to_string(p.n) + "," +
               format_roundtrip(p.acceptance_rate) + "\n";
    }
    return out;
}

std::vector<CurvePoint> parse_csv(std::string_view csv) {
    std::vector<CurvePoint> points;
    std::istringstream in{std::string(csv)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            if (line != kCsvHeader) throw SchemaError(1, "<header>", "expected '" + std::string(kCsvHeader) + "'");
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != 4) throw SchemaError(line_no, "<row>", "expected 4 columns");
        const auto round = parse_number(cells[0]);
        const auto acc = parse_number(cells[1]);
        const auto n = parse_number(cells[2]);
        const auto rate = parse_number(cells[3]);
        if (!round || *round != std::floor(*round)) throw SchemaError(line_no, "round", "not an integer");
        if (!acc) throw SchemaError(line_no, "accuracy", "not a number");
        if (!n || *n < 0 || *n != std::floor(*n)) throw SchemaError(line_no, "n", "not a count");
        if (!rate) throw SchemaError(line_no, "acceptance_rate", "not a number");
        points.push_back({static_cast<int>(*round), *acc, static_cast<std::size_t>(*n), *rate});
    }
    return points;
}

std::string emit_summary(std::vector<CurvePoint> points) {
    sort_points(points);
    std::string out = "round  accuracy  n      acceptance_rate\n";
    char line[128];
    for (const auto& p : points) {
        std::snprintf(line, sizeof line, "%-6d %7.2f%%  %-6zu %6.2f%%\n", p.round, 100.0 * p.accuracy, p.n,
                      100.0 * p.acceptance_rate);
        out += line;
    }
    if (points.empty()) out += "(no rounds)\n";
    return out;
}

void emit_report(const std::filesystem::path& dir, const std::vector<CurvePoint>& points) {
    data::write_file_atomic(dir / "curve.csv", emit_csv(points));
    data::write_file_atomic(dir / "summary.txt", emit_summary(points));
}

}  // namespace talm::eval
