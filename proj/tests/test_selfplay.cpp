// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <map>

#include "talm/datasets.hpp"
#include "talm/error.hpp"
#include "talm/protocol.hpp"
#include "talm/scripted.hpp"
#include "talm/selfplay.hpp"
#include "talm/text.hpp"
#include "talm/trainable.hpp"
#include "test_util.hpp"

using namespace talm;
using namespace talm::selfplay;
using talm::test::error_of;

namespace {

// Always calls the gold formula; copies the tool result into the answer with
// probability p per sample (decided from the sample seed), else answers "wrong".
class NoisyOracle final : public gen::Generator {
public:
    NoisyOracle(const std::vector<TaskExample>& tasks, double p) : p_(p) {
        for (const auto& t : tasks) formulas_[t.input] = t.formula.value_or("");
    }
    [[nodiscard]] gen::GeneratorKind kind() const override { return gen::GeneratorKind::Scripted; }
    [[nodiscard]] gen::Capabilities capabilities() const override { return {false, false, 64}; }
    gen::GenerateResponse generate(const gen::GenerateRequest& r) override {
        std::string_view prefix = r.prefix;
        if (prefix.ends_with(' ')) prefix.remove_suffix(1);
        const auto seq = protocol::parse_sequence(prefix);
        std::string text;
        if (seq.hops.empty()) {
            text = "|formula " + formulas_.at(seq.task_input.body) + " |result";
        } else {
            Rng rng(mix_seed(r.sampling.seed, 0x6e6f697379));
            text = "|output " + (rng.uniform() < p_ ? protocol::escape_body(seq.hops[0].result.body) : "wrong");
        }
        return gen::apply_stop_rules(text, r.stop_markers, r.max_chars);
    }

private:
    std::map<std::string, std::string> formulas_;
    double p_;
};

struct FormulaRegistry : tools::ToolRegistry {
    FormulaRegistry() { add(std::make_shared<tools::FormulaTool>()); }
};

data::SyntheticSet synth(std::size_t count, std::size_t bootstrap, std::uint64_t seed = 7) {
    data::SyntheticSpec spec;
    spec.example_count = count;
    spec.bootstrap_count = bootstrap;
    spec.seed = seed;
    return data::generate_synthetic(spec);
}

// Reports equal up to the generator version, which counts updates of this process.
std::string comparable(RoundReport r) {
    r.generator_version = 0;
    return report_to_json_line(r, true);
}

}  // namespace

TEST_CASE("answer matching") {
    const auto num = MatchSpec::numeric();
    CHECK(match("89.3333333333", "89.33", num));
    CHECK(match("42", "42.0", num));
    CHECK(match("1000", "1004", num));  // within 0.5% of the target
    CHECK_FALSE(match("1000", "1006", num));
    CHECK(match("0.005", "0", num));
    CHECK_FALSE(match("0.02", "0", num));
    CHECK_FALSE(match("forty-two", "42", num));
    CHECK_FALSE(match("", "42", num));

    const auto ex = MatchSpec::exact();
    CHECK(match("The Eiffel Tower!", "eiffel tower", ex));
    CHECK(match("  chemical   reactions. ", "Chemical Reactions", ex));
    CHECK(match("don't", "dont", ex));
    CHECK_FALSE(match("the tower", "eiffel tower", ex));
    CHECK(normalize_answer("An Apple") == "apple");
    CHECK(normalize_answer("the") == "the");

    CHECK(MatchSpec::parse("numeric:0.1,0.2") == MatchSpec::numeric(0.1, 0.2));
    CHECK(MatchSpec::parse("exact") == MatchSpec::exact());
    CHECK(MatchSpec::parse(MatchSpec::numeric(0.25, 0.5).to_string()) == MatchSpec::numeric(0.25, 0.5));
    CHECK(error_of([] { (void)MatchSpec::parse("numeric:-1,0"); }) == ErrorCode::ConfigError);
    CHECK(error_of([] { (void)MatchSpec::parse("fuzzy"); }) == ErrorCode::ConfigError);
}

TEST_CASE("oracle generator: every example accepted") {
    const auto s = synth(50, 0);
    gen::ScriptedGenerator oracle(gen::oracle_rules(s.tasks.records));
    const FormulaRegistry reg;
    SelfPlayConfig cfg;
    cfg.samples_per_example = 3;
    const auto res = run_round(oracle, reg, s.tasks.records, {}, cfg, 1);
    CHECK(res.report.acceptance_rate == 1.0);
    CHECK(res.report.examples_with_accept == 50);
    // The oracle is deterministic, so dedup keeps one record per example.
    CHECK(res.dataset.size() == 50);
    for (const auto& r : res.dataset) {
        CHECK(r.provenance == Provenance::SelfPlay);
        CHECK(r.round == 1);
    }
    CHECK(audit(res.dataset, s.tasks.records, reg, cfg.match).ok());
}

TEST_CASE("a generator that is always wrong leaves D unchanged") {
    const auto s = synth(40, 10);
    NoisyOracle wrong(s.tasks.records, 0.0);
    const FormulaRegistry reg;
    SelfPlayConfig cfg;
    cfg.samples_per_example = 5;
    const auto res = run_round(wrong, reg, s.tasks.records, s.bootstrap, cfg, 1);
    CHECK(res.dataset == s.bootstrap);
    CHECK(res.report.accepted_records == 0);
    CHECK(res.report.acceptance_rate == 0.0);
    CHECK(res.report.samples == 40 * 5);
}

TEST_CASE("noisy oracle: acceptance follows the binomial model") {
    const auto s = synth(200, 0);
    const FormulaRegistry reg;
    for (const auto& [p, n] : {std::pair{0.5, std::size_t{20}}, std::pair{0.1, std::size_t{10}}}) {
        CAPTURE(p);
        NoisyOracle noisy(s.tasks.records, p);
        SelfPlayConfig cfg;
        cfg.samples_per_example = n;
        cfg.sampling.seed = 99;
        const auto res = run_round(noisy, reg, s.tasks.records, {}, cfg, 1);
        const double expect = 1.0 - std::pow(1.0 - p, static_cast<double>(n));
        const double se = std::sqrt(std::max(expect * (1 - expect), 1e-12) / 200.0);
        CHECK(std::abs(res.report.acceptance_rate - expect) <= std::max(3 * se, 1.0 / 200.0));

        // Without dedup and with a cap of n, every matched sample is kept.
        cfg.dedup = false;
        cfg.max_accepts_per_example = n;
        const auto all = run_round(noisy, reg, s.tasks.records, {}, cfg, 1);
        CHECK(all.report.samples == 200 * n);
        CHECK(all.report.accepted_records == all.report.matched_samples);
        const double rate = all.report.sample_acceptance_rate;
        const double sample_se = std::sqrt(p * (1 - p) / static_cast<double>(all.report.samples));
        CHECK(std::abs(rate - p) <= 3 * sample_se);
    }
}

TEST_CASE("cap and dedup") {
    const auto s = synth(30, 0);
    const FormulaRegistry reg;
    NoisyOracle noisy(s.tasks.records, 0.5);
    SelfPlayConfig cfg;
    cfg.samples_per_example = 40;
    cfg.dedup = false;
    cfg.max_accepts_per_example = 3;
    const auto capped = run_round(noisy, reg, s.tasks.records, {}, cfg, 2);
    for (const auto& e : capped.report.per_example) {
        CHECK(e.accepted <= 3);
        // Sampling stops as soon as the cap is reached.
        if (e.accepted == 3) CHECK(e.matched == 3);
    }
    CHECK(capped.report.samples < 30 * 40);

    cfg.dedup = true;
    const auto deduped = run_round(noisy, reg, s.tasks.records, {}, cfg, 2);
    for (const auto& e : deduped.report.per_example) CHECK(e.accepted <= 1);
    CHECK(audit(deduped.dataset, s.tasks.records, reg, cfg.match).ok());
    // Re-running against its own output adds nothing new.
    const auto again = run_round(noisy, reg, s.tasks.records, deduped.dataset, cfg, 3);
    CHECK(again.dataset == deduped.dataset);
}

TEST_CASE("one-round pipeline equals run_round") {
    const auto s = synth(60, 10);
    const FormulaRegistry reg;
    SelfPlayConfig cfg;
    cfg.rounds = 1;
    cfg.samples_per_example = 1;
    cfg.sampling.seed = 3;
    gen::TrainableGenerator a, b;
    const auto step = run_round(a, reg, s.tasks.records, s.bootstrap, cfg, 1);
    const auto pipe = run_pipeline(b, reg, s.tasks.records, s.bootstrap, cfg);
    CHECK(pipe.dataset == step.dataset);
    REQUIRE(pipe.reports.size() == 1);
    CHECK(comparable(pipe.reports[0]) == comparable(step.report));
}

TEST_CASE("pipeline: persistence and resume") {
    const auto s = synth(60, 10);
    const auto eval_set = synth(40, 0, 8);
    const FormulaRegistry reg;
    SelfPlayConfig cfg;
    cfg.rounds = 3;
    cfg.samples_per_example = 6;
    cfg.sampling.seed = 5;
    PipelineOptions opts;
    opts.eval_tasks = &eval_set.tasks.records;
    opts.eval_config.beams = 1;

    test::TempDir full_dir, split_dir;
    gen::TrainableGenerator g_full;
    opts.out_dir = full_dir.path();
    const auto full = run_pipeline(g_full, reg, s.tasks.records, s.bootstrap, cfg, opts);
    REQUIRE(full.reports.size() == 3);
    CHECK(full.curve().size() == 4);
    for (const auto* f : {"bootstrap.jsonl", "tool_use_set.jsonl", "round_reports.jsonl", "round_summary.txt",
                          "curve.csv", "summary.txt", "state.json", "rounds/round_000/eval.jsonl",
                          "rounds/round_002/tool_use_set.jsonl", "rounds/round_003/report.json"}) {
        CHECK_MESSAGE(std::filesystem::exists(full_dir / f), f);
    }
    CHECK(data::load_tool_use_set(full_dir / "tool_use_set.jsonl") == full.dataset);
    CHECK(audit(full.dataset, s.tasks.records, reg, cfg.match).ok());

    SUBCASE("interrupted after round 2, then resumed") {
        opts.out_dir = split_dir.path();
        {
            gen::TrainableGenerator g;
            auto interrupt = opts;
            interrupt.on_round = [](const RoundReport& r) {
                if (r.round == 2) throw std::runtime_error("interrupted");
            };
            CHECK_THROWS_AS((void)run_pipeline(g, reg, s.tasks.records, s.bootstrap, cfg, interrupt),
                            std::runtime_error);
        }
        gen::TrainableGenerator g;
        const auto resumed = run_pipeline(g, reg, s.tasks.records, s.bootstrap, cfg, opts);
        CHECK(resumed.resumed_rounds == 2);
        CHECK(resumed.dataset == full.dataset);
        REQUIRE(resumed.reports.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) CHECK(comparable(resumed.reports[i]) == comparable(full.reports[i]));
        CHECK(resumed.curve() == full.curve());
        CHECK(data::read_file(split_dir / "tool_use_set.jsonl") == data::read_file(full_dir / "tool_use_set.jsonl"));
        CHECK(data::read_file(split_dir / "curve.csv") == data::read_file(full_dir / "curve.csv"));
    }
    SUBCASE("a finished run can be extended") {
        opts.out_dir = split_dir.path();
        auto one = cfg;
        one.rounds = 1;
        gen::TrainableGenerator g1;
        (void)run_pipeline(g1, reg, s.tasks.records, s.bootstrap, one, opts);
        gen::TrainableGenerator g3;
        const auto extended = run_pipeline(g3, reg, s.tasks.records, s.bootstrap, cfg, opts);
        CHECK(extended.resumed_rounds == 1);
        CHECK(extended.dataset == full.dataset);
    }
    SUBCASE("a different configuration is refused") {
        auto other = cfg;
        other.samples_per_example = 7;
        gen::TrainableGenerator g;
        CHECK(error_of([&] { (void)run_pipeline(g, reg, s.tasks.records, s.bootstrap, other, opts); }) ==
              ErrorCode::ConfigError);
        opts.resume = false;
        auto fresh_dir = test::TempDir("fresh");
        opts.out_dir = fresh_dir.path();
        CHECK(run_pipeline(g, reg, s.tasks.records, s.bootstrap, other, opts).resumed_rounds == 0);
    }
    SUBCASE("a corrupt state file is a persistence error") {
        data::write_file_atomic(full_dir / "state.json", "{nope");
        gen::TrainableGenerator g;
        CHECK(error_of([&] { (void)run_pipeline(g, reg, s.tasks.records, s.bootstrap, cfg, opts); }) ==
              ErrorCode::PersistenceError);
    }
}

TEST_CASE("generator failures abort the round") {
    class Broken final : public gen::Generator {
    public:
        [[nodiscard]] gen::GeneratorKind kind() const override { return gen::GeneratorKind::External; }
        [[nodiscard]] gen::Capabilities capabilities() const override { return {}; }
        gen::GenerateResponse generate(const gen::GenerateRequest&) override {
            throw Error(ErrorCode::GeneratorError, "connection lost");
        }
    } broken;
    const auto s = synth(5, 0);
    const FormulaRegistry reg;
    CHECK(error_of([&] { (void)run_round(broken, reg, s.tasks.records, {}, SelfPlayConfig{}, 1); }) ==
          ErrorCode::GeneratorError);
}

TEST_CASE("config validation") {
    SelfPlayConfig cfg;
    cfg.rounds = 0;
    CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
    cfg = {};
    cfg.samples_per_example = 0;
    CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
    cfg = {};
    cfg.max_accepts_per_example = 0;
    CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
    cfg = {};
    cfg.sampling.temperature = -1;
    CHECK(error_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
}

TEST_CASE("audit catches tampering") {
    const auto s = synth(20, 0);
    const FormulaRegistry reg;
    gen::ScriptedGenerator oracle(gen::oracle_rules(s.tasks.records));
    SelfPlayConfig cfg;
    cfg.samples_per_example = 1;
    auto d = run_round(oracle, reg, s.tasks.records, {}, cfg, 1).dataset;
    const auto clean = audit(d, s.tasks.records, reg, cfg.match);
    CHECK(clean.ok());
    CHECK(clean.records == 20);
    CHECK(clean.self_play_records == 20);
    CHECK(clean.replayed == 20);

    auto wrong_answer = d;
    wrong_answer[3].output = "-1";
    CHECK(audit(wrong_answer, s.tasks.records, reg, cfg.match).problems.size() == 1);
    auto wrong_result = d;
    wrong_result[4].tool_output = "12345";
    CHECK(audit(wrong_result, s.tasks.records, reg, cfg.match).problems.size() == 1);
    auto dup = d;
    dup.push_back(d[0]);
    CHECK(audit(dup, s.tasks.records, reg, cfg.match).problems.size() == 1);
    CHECK(audit(dup, s.tasks.records, reg, cfg.match, false).ok());
    auto unknown = d;
    unknown[5].tool_label = "calculator";
    CHECK_FALSE(audit(unknown, s.tasks.records, reg, cfg.match).ok());
    auto orphan = d;
    orphan[6].id = "nowhere";
    CHECK_FALSE(audit(orphan, s.tasks.records, reg, cfg.match).ok());
}

TEST_CASE("round reports round-trip") {
    RoundReport r;
    r.round = 2;
    r.examples = 10;
    r.samples = 100;
    r.matched_samples = 7;
    r.accepted_records = 5;
    r.examples_with_accept = 4;
    r.acceptance_rate = 0.4;
    r.sample_acceptance_rate = 0.05;
    r.dataset_before = 20;
    r.dataset_after = 25;
    r.generator_version = 9;
    r.eval_accuracy = 0.125;
    r.eval_n = 8;
    r.per_example = {{"a", 10, 9, 1, 1}};
    const auto line = report_to_json_line(r, true);
    CHECK(report_to_json_line(report_from_json(line), true) == line);
    CHECK(error_of([] { (void)report_from_json("{}"); }) == ErrorCode::PersistenceError);
    CHECK(summarize({r}).find("12.5%") != std::string::npos);
}
