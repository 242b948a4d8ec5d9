// SPDX-License-Identifier: Apache-2.0
#include "talm/selfplay.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "talm/datasets.hpp"
#include "talm/driver.hpp"
#include "talm/error.hpp"
#include "talm/parallel.hpp"
#include "talm/text.hpp"

namespace talm::selfplay {

namespace {

using TrajectoryKey = std::tuple<std::string, std::string, std::string, std::string, std::string>;

TrajectoryKey key_of(const ToolUseRecord& r) {
    return {r.input, r.tool_label, r.tool_input, r.tool_output, r.output};
}

std::uint64_t sample_seed(std::uint64_t base, int round, std::string_view id, std::size_t n) {
    return mix_seed(mix_seed(mix_seed(base, static_cast<std::uint64_t>(round)), fnv1a64(id)), n);
}

struct ExampleOutcome {
    ExampleStats stats;
    std::vector<ToolUseRecord> accepted;
};

}  // namespace

void SelfPlayConfig::validate() const {
    if (rounds < 1) throw Error(ErrorCode::ConfigError, "rounds must be >= 1");
    if (samples_per_example < 1) throw Error(ErrorCode::ConfigError, "samples_per_example must be >= 1");
    if (max_accepts_per_example < 1) throw Error(ErrorCode::ConfigError, "max_accepts_per_example must be >= 1");
    if (budget < 1) throw Error(ErrorCode::ConfigError, "budget must be >= 1");
    match.validate();
    sampling.validate();
}

RoundResult run_round(gen::Generator& generator, const tools::ToolRegistry& registry,
                      const std::vector<TaskExample>& tasks, const ToolUseSet& dataset,
                      const SelfPlayConfig& config, int round) {
    config.validate();
    RoundReport report;
    report.round = round;
    report.examples = tasks.size();
    report.dataset_before = dataset.size();

    // Phase 1: training. Generators without update support sample as they are.
    if (generator.capabilities().supports_update) {
        report.generator_version = generator.update(dataset).version;
    }

    std::set<TrajectoryKey> known;
    if (config.dedup) {
        for (const auto& r : dataset) known.insert(key_of(r));
    }

    // Phase 2: sampling, concurrent across examples.
    DriveOptions options;
    options.input_label = config.input_label;
    options.budget = config.budget;
    options.max_hops = 1;
    options.sampling = config.sampling;

    std::vector<ExampleOutcome> outcomes(tasks.size());
    const auto jobs = effective_jobs(config.jobs, generator.capabilities().concurrent_requests);
    parallel_for(tasks.size(), jobs, [&](std::size_t i) {
        const auto& task = tasks[i];
        auto& out = outcomes[i];
        out.stats.id = task.id;
        std::set<TrajectoryKey> local;
        auto drive = options;
        for (std::size_t n = 0; n < config.samples_per_example; ++n) {
            if (out.accepted.size() >= config.max_accepts_per_example) break;
            drive.sampling.seed = sample_seed(config.sampling.seed, round, task.id, n);
            const auto run = drive_generation(generator, registry, task.input, drive);
            ++out.stats.samples;
            if (run.status == DriveStatus::GeneratorError) {
                throw Error(ErrorCode::GeneratorError, "round " + std::to_string(round) + ", task " + task.id +
                                                           ": " + run.error);
            }
            if (!run.complete()) continue;
            ++out.stats.completed;
            if (run.sequence.hops.size() != 1 || run.tool_error) continue;
            const auto& y = run.sequence.task_output->body;
            if (!match(y, task.target, config.match)) continue;
            ++out.stats.matched;
            const auto& hop = run.sequence.hops.front();
            ToolUseRecord rec{task.id,     task.input, hop.call.label,       hop.call.body, hop.result.body, y,
                              round, Provenance::SelfPlay};
            if (config.dedup) {
                const auto k = key_of(rec);
                if (known.count(k) || !local.insert(k).second) continue;
            }
            out.accepted.push_back(std::move(rec));
        }
    });

    // Phase 3: single ordered collection point.
    RoundResult result;
    result.dataset = dataset;
    std::set<TrajectoryKey> added;
    for (auto& out : outcomes) {
        for (auto& rec : out.accepted) {
            if (config.dedup && !added.insert(key_of(rec)).second) continue;
            result.dataset.push_back(std::move(rec));
            ++out.stats.accepted;
        }
        report.samples += out.stats.samples;
        report.matched_samples += out.stats.matched;
        report.accepted_records += out.stats.accepted;
        report.examples_with_accept += out.stats.accepted > 0;
        report.per_example.push_back(std::move(out.stats));
    }
    report.dataset_after = result.dataset.size();
    report.acceptance_rate =
        tasks.empty() ? 0.0 : static_cast<double>(report.examples_with_accept) / static_cast<double>(tasks.size());
    report.sample_acceptance_rate =
        report.samples == 0 ? 0.0 : static_cast<double>(report.accepted_records) / static_cast<double>(report.samples);
    result.report = std::move(report);
    return result;
}

// ---------------------------------------------------------------------------
// Reports

std::string report_to_json_line(const RoundReport& r, bool with_examples) {
    nlohmann::ordered_json j;
    j["round"] = r.round;
    j["examples"] = r.examples;
    j["samples"] = r.samples;
    j["matched_samples"] = r.matched_samples;
    j["accepted_records"] = r.accepted_records;
    j["examples_with_accept"] = r.examples_with_accept;
    j["acceptance_rate"] = r.acceptance_rate;
    j["sample_acceptance_rate"] = r.sample_acceptance_rate;
    j["dataset_before"] = r.dataset_before;
    j["dataset_after"] = r.dataset_after;
    j["generator_version"] = r.generator_version;
    if (r.eval_accuracy) j["eval_accuracy"] = *r.eval_accuracy;
    if (r.eval_n) j["eval_n"] = *r.eval_n;
    if (with_examples) {
        auto& per = j["per_example"] = nlohmann::ordered_json::array();
        for (const auto& e : r.per_example) {
            nlohmann::ordered_json x;
            x["id"] = e.id;
            x["samples"] = e.samples;
            x["completed"] = e.completed;
            x["matched"] = e.matched;
            x["accepted"] = e.accepted;
            per.push_back(std::move(x));
        }
    }
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

RoundReport report_from_json(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        RoundReport r;
        r.round = j.at("round").get<int>();
        r.examples = j.at("examples").get<std::size_t>();
        r.samples = j.at("samples").get<std::size_t>();
        r.matched_samples = j.at("matched_samples").get<std::size_t>();
        r.accepted_records = j.at("accepted_records").get<std::size_t>();
        r.examples_with_accept = j.at("examples_with_accept").get<std::size_t>();
        r.acceptance_rate = j.at("acceptance_rate").get<double>();
        r.sample_acceptance_rate = j.at("sample_acceptance_rate").get<double>();
        r.dataset_before = j.at("dataset_before").get<std::size_t>();
        r.dataset_after = j.at("dataset_after").get<std::size_t>();
        r.generator_version = j.at("generator_version").get<std::uint64_t>();
        if (j.contains("eval_accuracy")) r.eval_accuracy = j["eval_accuracy"].get<double>();
        if (j.contains("eval_n")) r.eval_n = j["eval_n"].get<std::size_t>();
        if (j.contains("per_example")) {
            for (const auto& x : j["per_example"]) {
                r.per_example.push_back({x.at("id").get<std::string>(), x.at("samples").get<std::size_t>(),
                                         x.at("completed").get<std::size_t>(), x.at("matched").get<std::size_t>(),
                                         x.at("accepted").get<std::size_t>()});
            }
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::PersistenceError, std::string("bad round report: ") + e.what());
    }
}

std::string summarize(const std::vector<RoundReport>& reports) {
    std::string out = "round  |D| before -> after  accepted  examples_with_accept  acceptance  eval_accuracy\n";
    char line[256];
    for (const auto& r : reports) {
        const auto eval = r.eval_accuracy ? format_fixed_trimmed(100.0 * *r.eval_accuracy, 2) + "%" : std::string("-");
        std::snprintf(line, sizeof line, "%-6d %6zu -> %-10zu %-9zu %-21zu %6.2f%%     %s\n", r.round,
                      r.dataset_before, r.dataset_after, r.accepted_records, r.examples_with_accept,
                      100.0 * r.acceptance_rate, eval.c_str());
        out += line;
    }
    return out;
}

std::vector<eval::CurvePoint> PipelineResult::curve() const {
    std::vector<eval::CurvePoint> points;
    if (bootstrap_eval) points.push_back({0, bootstrap_eval->accuracy, bootstrap_eval->n, 0.0});
    for (const auto& r : reports) {
        if (r.eval_accuracy && r.eval_n) points.push_back({r.round, *r.eval_accuracy, *r.eval_n, r.acceptance_rate});
    }
    return points;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

std::string round_dir_name(int round) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "round_%03d", round);
    return buf;
}

// Identifies the inputs a persisted run was produced from, so that resume never
// mixes runs. The round count is excluded: a finished run may be extended.
std::string run_fingerprint(const std::vector<TaskExample>& tasks, const ToolUseSet& bootstrap,
                            const SelfPlayConfig& c, const PipelineOptions& o) {
    std::ostringstream s;
    for (const auto& t : tasks) s << data::task_to_json_line(t) << '\n';
    for (const auto& r : bootstrap) s << data::record_to_json_line(r) << '\n';
    s << c.samples_per_example << '|' << c.match.to_string() << '|' << gen::to_string(c.sampling.mode) << '|'
      << format_roundtrip(c.sampling.temperature) << '|' << c.sampling.top_k << '|' << c.sampling.beam_width << '|'
      << c.sampling.seed << '|' << c.max_accepts_per_example << '|' << c.dedup << '|' << c.budget << '|'
      << c.input_label;
    if (o.eval_tasks) {
        for (const auto& t : *o.eval_tasks) s << data::task_to_json_line(t) << '\n';
        s << o.eval_config.beams << '|' << o.eval_config.match.to_string() << '|' << o.eval_config.tool_enabled;
    }
    return hex64(fnv1a64(s.str()));
}

eval::EvalReport train_and_evaluate(gen::Generator& generator, const tools::ToolRegistry& registry,
                                    const ToolUseSet& dataset, const PipelineOptions& options) {
    if (generator.capabilities().supports_update) (void)generator.update(dataset);
    return eval::evaluate(generator, registry, *options.eval_tasks, options.eval_config);
}

void persist(const std::filesystem::path& dir, const PipelineResult& result, const std::string& fingerprint,
             const std::optional<eval::EvalReport>& round_eval) {
    const auto& last = result.reports.back();
    const auto round_dir = dir / "rounds" / round_dir_name(last.round);
    data::save_tool_use_set(round_dir / "tool_use_set.jsonl", result.dataset);
    data::write_file_atomic(round_dir / "report.json", report_to_json_line(last, true) + "\n");
    if (round_eval) eval::save_per_example(round_dir / "eval.jsonl", *round_eval);

    data::save_tool_use_set(dir / "tool_use_set.jsonl", result.dataset);
    std::string lines;
    for (const auto& r : result.reports) lines += report_to_json_line(r) + "\n";
    data::write_file_atomic(dir / "round_reports.jsonl", lines);
    data::write_file_atomic(dir / "round_summary.txt", summarize(result.reports));
    const auto curve = result.curve();
    if (!curve.empty()) eval::emit_report(dir, curve);

    // Written last: the commit point for resume.
    nlohmann::ordered_json state;
    state["completed_rounds"] = last.round;
    state["fingerprint"] = fingerprint;
    if (result.bootstrap_eval) {
        state["bootstrap_eval_accuracy"] = result.bootstrap_eval->accuracy;
        state["bootstrap_eval_n"] = result.bootstrap_eval->n;
    }
    data::write_file_atomic(dir / "state.json", state.dump() + "\n");
}

// Restores the rounds recorded in dir; returns false when there is nothing to resume.
bool restore(const std::filesystem::path& dir, const std::string& fingerprint, PipelineResult& result) {
    std::error_code ec;
    if (!std::filesystem::exists(dir / "state.json", ec)) return false;
    nlohmann::json state;
    try {
        state = nlohmann::json::parse(data::read_file(dir / "state.json"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::PersistenceError, std::string("corrupt state.json: ") + e.what());
    }
    if (state.value("fingerprint", std::string()) != fingerprint) {
        throw Error(ErrorCode::ConfigError,
                    "output directory '" + dir.string() + "' holds a different run; use a fresh directory");
    }
    const int completed = state.value("completed_rounds", 0);
    if (completed <= 0) return false;
    result.dataset = data::load_tool_use_set(dir / "rounds" / round_dir_name(completed) / "tool_use_set.jsonl");
    for (int round = 1; round <= completed; ++round) {
        auto text = data::read_file(dir / "rounds" / round_dir_name(round) / "report.json");
        auto report = report_from_json(text);
        if (report.round != round) {
            throw Error(ErrorCode::PersistenceError, "report for round " + std::to_string(round) + " is mislabeled");
        }
        result.reports.push_back(std::move(report));
    }
    if (state.contains("bootstrap_eval_accuracy")) {
        eval::EvalReport boot;
        boot.accuracy = state["bootstrap_eval_accuracy"].get<double>();
        boot.n = state["bootstrap_eval_n"].get<std::size_t>();
        boot.correct = static_cast<std::size_t>(boot.accuracy * static_cast<double>(boot.n) + 0.5);
        result.bootstrap_eval = std::move(boot);
    }
    result.resumed_rounds = static_cast<std::size_t>(completed);
    return true;
}

}  // namespace

PipelineResult run_pipeline(gen::Generator& generator, const tools::ToolRegistry& registry,
                            const std::vector<TaskExample>& tasks, const ToolUseSet& bootstrap,
                            const SelfPlayConfig& config, const PipelineOptions& options) {
    config.validate();
    if (options.eval_tasks) options.eval_config.validate();
    const auto fingerprint = run_fingerprint(tasks, bootstrap, config, options);

    PipelineResult result;
    result.dataset = bootstrap;
    bool resumed = false;
    if (options.out_dir && options.resume) resumed = restore(*options.out_dir, fingerprint, result);
    if (!resumed && options.out_dir) {
        std::error_code ec;
        std::filesystem::create_directories(*options.out_dir, ec);
        if (ec) throw Error(ErrorCode::PersistenceError, "cannot create '" + options.out_dir->string() + "'");
        data::save_tool_use_set(*options.out_dir / "bootstrap.jsonl", bootstrap);
    }

    if (!resumed && options.eval_tasks) {
        result.bootstrap_eval = train_and_evaluate(generator, registry, bootstrap, options);
        if (options.out_dir) {
            eval::save_per_example(*options.out_dir / "rounds" / round_dir_name(0) / "eval.jsonl",
                                   *result.bootstrap_eval);
        }
    }

    for (int round = static_cast<int>(result.reports.size()) + 1; round <= static_cast<int>(config.rounds);
         ++round) {
        auto step = run_round(generator, registry, tasks, result.dataset, config, round);
        result.dataset = std::move(step.dataset);
        std::optional<eval::EvalReport> round_eval;
        if (options.eval_tasks) {
            round_eval = train_and_evaluate(generator, registry, result.dataset, options);
            step.report.eval_accuracy = round_eval->accuracy;
            step.report.eval_n = round_eval->n;
        }
        result.reports.push_back(std::move(step.report));
        if (options.out_dir) {
            try {
                persist(*options.out_dir, result, fingerprint, round_eval);
            } catch (const Error& e) {
                throw Error(ErrorCode::PersistenceError, std::string("cannot persist round: ") + e.what());
            }
        }
        if (options.on_round) options.on_round(result.reports.back());
    }
    return result;
}

// ---------------------------------------------------------------------------
// Audit

AuditReport audit(const ToolUseSet& dataset, const std::vector<TaskExample>& tasks,
                  const tools::ToolRegistry& registry, const MatchSpec& spec, bool dedup) {
    AuditReport report;
    std::map<std::string, const TaskExample*> by_id;
    for (const auto& t : tasks) by_id.emplace(t.id, &t);
    std::set<TrajectoryKey> seen;
    std::size_t index = 0;
    for (const auto& r : dataset) {
        ++index;
        ++report.records;
        const auto where = "record " + std::to_string(index) + " (" + r.id + ")";
        try {
            (void)to_sequence(r);
        } catch (const Error& e) {
            report.problems.push_back(where + ": does not render: " + e.what());
        }
        if (dedup && !seen.insert(key_of(r)).second) report.problems.push_back(where + ": duplicate trajectory");
        if (r.provenance == Provenance::SelfPlay) {
            ++report.self_play_records;
            const auto it = by_id.find(r.id);
            if (it == by_id.end()) {
                report.problems.push_back(where + ": unknown task id");
            } else if (!match(r.output, it->second->target, spec)) {
                report.problems.push_back(where + ": output '" + r.output + "' does not match target '" +
                                          it->second->target + "'");
            }
        }
        const auto* tool = registry.find(r.tool_label);
        if (!tool && r.provenance == Provenance::SelfPlay) {
            report.problems.push_back(where + ": tool '" + r.tool_label + "' is not registered");
        }
        if (tool && tool->descriptor().deterministic) {
            ++report.replayed;
            try {
                const auto replay = registry.invoke(r.tool_label, r.tool_input);
                if (replay != r.tool_output) {
                    report.problems.push_back(where + ": replay gave '" + replay + "', recorded '" + r.tool_output + "'");
                }
            } catch (const Error& e) {
                report.problems.push_back(where + ": replay failed: " + e.what());
            }
        }
    }
    return report;
}

}  // namespace talm::selfplay
