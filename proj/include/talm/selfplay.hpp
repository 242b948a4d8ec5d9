// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "talm/eval.hpp"
#include "talm/generator.hpp"
#include "talm/match.hpp"
#include "talm/records.hpp"
#include "talm/tools.hpp"

namespace talm::selfplay {

struct SelfPlayConfig {
    std::size_t rounds = 3;
    /// Trajectories sampled per example per round, at most.
    std::size_t samples_per_example = 600;
    MatchSpec match;
    /// Used for both the tool-call and the answer leg.
    gen::SamplingSpec sampling;
    /// Per example per round; sampling for an example stops once reached.
    std::size_t max_accepts_per_example = 4;
    bool dedup = true;
    std::size_t budget = 2048;
    std::string input_label = "question";
    std::size_t jobs = 0;

    /// Throws Error(ConfigError).
    void validate() const;
};

struct ExampleStats {
    std::string id;
    std::size_t samples = 0;
    std::size_t completed = 0;
    std::size_t matched = 0;
    std::size_t accepted = 0;
};

struct RoundReport {
    int round = 0;
    std::size_t examples = 0;
    std::size_t samples = 0;
    std::size_t matched_samples = 0;
    std::size_t accepted_records = 0;
    std::size_t examples_with_accept = 0;
    /// Fraction of examples with at least one accepted trajectory.
    double acceptance_rate = 0.0;
    /// Fraction of sampled trajectories that were accepted.
    double sample_acceptance_rate = 0.0;
    std::size_t dataset_before = 0;
    std::size_t dataset_after = 0;
    std::uint64_t generator_version = 0;
    std::vector<ExampleStats> per_example;
    /// Held-out evaluation after training on this round's output, if requested.
    std::optional<double> eval_accuracy;
    std::optional<std::size_t> eval_n;
};

struct RoundResult {
    ToolUseSet dataset;
    RoundReport report;
};

/// One iteration: update the generator on D, sample trajectories for every
/// task, keep those whose answer matches the target and return D plus the
/// accepted records (ordered by task, then sample index).
[[nodiscard]] RoundResult run_round(gen::Generator& generator, const tools::ToolRegistry& registry,
                                    const std::vector<TaskExample>& tasks, const ToolUseSet& dataset,
                                    const SelfPlayConfig& config, int round);

struct PipelineOptions {
    /// Persist D and reports here after every round and resume from it.
    std::optional<std::filesystem::path> out_dir;
    bool resume = true;
    /// Held-out set evaluated after every round (and once on the bootstrap).
    const std::vector<TaskExample>* eval_tasks = nullptr;
    eval::EvalConfig eval_config;
    /// Called after each round is persisted.
    std::function<void(const RoundReport&)> on_round;
};

struct PipelineResult {
    ToolUseSet dataset;
    std::vector<RoundReport> reports;
    /// Accuracy of the generator trained on the bootstrap only (round 0).
    std::optional<eval::EvalReport> bootstrap_eval;
    /// Rounds restored from a previous run rather than executed.
    std::size_t resumed_rounds = 0;

    /// Round 0 (bootstrap eval, if any) followed by one point per round.
    [[nodiscard]] std::vector<eval::CurvePoint> curve() const;
};

/// Chains run_round config.rounds times starting from the bootstrap set.
[[nodiscard]] PipelineResult run_pipeline(gen::Generator& generator, const tools::ToolRegistry& registry,
                                          const std::vector<TaskExample>& tasks, const ToolUseSet& bootstrap,
                                          const SelfPlayConfig& config, const PipelineOptions& options = {});

[[nodiscard]] std::string report_to_json_line(const RoundReport& report, bool with_examples = false);
[[nodiscard]] RoundReport report_from_json(const std::string& line);
/// Human-readable summary of the round reports.
[[nodiscard]] std::string summarize(const std::vector<RoundReport>& reports);

struct AuditReport {
    std::size_t records = 0;
    std::size_t self_play_records = 0;
    std::size_t replayed = 0;
    std::vector<std::string> problems;

    [[nodiscard]] bool ok() const noexcept { return problems.empty(); }
};

/// Re-checks D after the fact: every record renders, every self-play record
/// matches its task target, deterministic tools reproduce every tool output,
/// and (with dedup) no trajectory appears twice.
[[nodiscard]] AuditReport audit(const ToolUseSet& dataset, const std::vector<TaskExample>& tasks,
                                const tools::ToolRegistry& registry, const MatchSpec& match, bool dedup = true);

}  // namespace talm::selfplay
