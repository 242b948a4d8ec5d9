// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Limits and tolerances are the constants below.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "talm/bm25.hpp"
#include "talm/cli.hpp"
#include "talm/datasets.hpp"
#include "talm/driver.hpp"
#include "talm/error.hpp"
#include "talm/eval.hpp"
#include "talm/formula.hpp"
#include "talm/protocol.hpp"
#include "talm/scripted.hpp"
#include "talm/selfplay.hpp"
#include "talm/text.hpp"
#include "talm/tools.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace talm;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kSolverSeconds = 1.0;
constexpr double kFuzzSeconds = 30.0;
constexpr double kBm25Seconds = 60.0;
constexpr double kTrendSeconds = 300.0;
constexpr double kBm25ScoreTol = 1e-9;
constexpr int kFuzzValid = 10'000;
constexpr int kFuzzArbitrary = 10'000;
constexpr int kBm25Corpora = 50;
constexpr int kBm25Queries = 20;
constexpr std::size_t kBm25MaxDocs = 100;
// Optional check on a real converted MathQA file (TALM_MATHQA_JSONL).
constexpr double kMathQaExpected = 0.70;
constexpr double kMathQaTol = 0.10;

// Trend run: synthetic benchmark, trainable generator.
constexpr const char* kTrendCount = "500";
constexpr const char* kTrendBootstrap = "20";
constexpr const char* kTrendEvalCount = "200";
constexpr const char* kTrendSamples = "50";
constexpr const char* kTrendRounds = "3";
constexpr const char* kTrendSeed = "1";

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Verdict()>& check) {
    const auto start = Clock::now();
    Verdict v;
    try {
        v = check();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (!v.pass) ++failures;
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2fs", secs);
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << " [" << timing << "]" << std::endl;
}

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult cli_run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::map<std::string, std::string> outputs(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        files[fs::relative(e.path(), dir).string()] = data::read_file(e.path());
    }
    return files;
}

struct FormulaRegistry : tools::ToolRegistry {
    FormulaRegistry() { add(std::make_shared<tools::FormulaTool>()); }
};

// -- criteria --------------------------------------------------------------

Verdict solver_golden() {
    const auto start = Clock::now();
    const std::string cmd = std::string(TALM_CLI_PATH) + " solve \"Divide(Add(85, Add(88, 95)), 3)\"";
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
    if (!pipe) return {false, "cannot start " + cmd};
    std::string out;
    char buf[256];
    while (const auto n = std::fread(buf, 1, sizeof buf, pipe.get())) out.append(buf, n);
    const int status = pclose(pipe.release());
    const double secs = seconds_since(start);
    const bool ok = status == 0 && out == "89.3333333333\n" && secs < kSolverSeconds;
    return {ok, "printed '" + out.substr(0, out.find('\n')) + "' in " + std::to_string(secs) + "s (limit " +
                    std::to_string(kSolverSeconds) + "s)"};
}

Verdict protocol_fuzz() {
    const auto start = Clock::now();
    test::Gen g(20260101);
    int identity_failures = 0;
    for (int i = 0; i < kFuzzValid; ++i) {
        const auto s = test::random_sequence(g, 3);
        try {
            const auto text = protocol::render_sequence(s);
            const auto back = protocol::parse_sequence(text, 3);
            if (!(back == s) || protocol::render_sequence(back) != text) ++identity_failures;
        } catch (const std::exception&) {
            ++identity_failures;
        }
    }
    const std::vector<std::string> atoms{"|", " ", "\\", "result", "output", "question", "|result ", "|output ",
                                         "|q ", "\n", std::string(1, '\0'), "\xff", "\xc3\xa9"};
    int panics = 0, values = 0, typed = 0;
    for (int i = 0; i < kFuzzArbitrary; ++i) {
        std::string text;
        const auto n = g.below(40);
        for (std::size_t k = 0; k < n; ++k) {
            if (g.chance(0.5)) {
                text.push_back(static_cast<char>(g.below(256)));
            } else {
                text += atoms[g.below(atoms.size())];
            }
        }
        try {
            const auto s = protocol::parse_sequence(text, g.below(3));
            ++values;
            if (!(protocol::parse_sequence(protocol::render_sequence(s), 3) == s)) ++panics;
        } catch (const Error&) {
            ++typed;
        } catch (...) {
            ++panics;
        }
    }
    const double secs = seconds_since(start);
    return {identity_failures == 0 && panics == 0 && secs < kFuzzSeconds,
            std::to_string(kFuzzValid) + " round-trips with " + std::to_string(identity_failures) + " failures; " +
                std::to_string(kFuzzArbitrary) + " arbitrary inputs: " + std::to_string(values) + " values, " +
                std::to_string(typed) + " typed errors, " + std::to_string(panics) + " panics"};
}

Verdict bm25_equivalence() {
    const auto start = Clock::now();
    test::Gen g(5150);
    int mismatches = 0;
    double worst = 0.0;
    for (int c = 0; c < kBm25Corpora; ++c) {
        const auto docs = test::random_corpus(g, kBm25MaxDocs);
        const auto index = bm25::Index::build(docs);
        const test::Bm25Oracle oracle(docs);
        for (int q = 0; q < kBm25Queries; ++q) {
            const auto query = test::random_query(g);
            const auto k = 1 + g.below(docs.size() + 2);
            const auto got = index.search(query, k);
            const auto want = oracle.search(query, k);
            if (got.size() != want.size()) {
                ++mismatches;
                continue;
            }
            for (std::size_t i = 0; i < got.size(); ++i) {
                const double diff = std::fabs(got[i].score - want[i].score);
                worst = std::max(worst, diff);
                if (got[i].doc_id != want[i].doc_id || diff > kBm25ScoreTol) {
                    ++mismatches;
                    break;
                }
            }
        }
    }
    const double secs = seconds_since(start);
    char detail[160];
    std::snprintf(detail, sizeof detail, "%d corpora x %d queries, %d ranking mismatches, max score diff %.3g",
                  kBm25Corpora, kBm25Queries, mismatches, worst);
    return {mismatches == 0 && secs < kBm25Seconds, detail};
}

Verdict interception_golden() {
    class Weather final : public tools::Tool {
    public:
        [[nodiscard]] const tools::ToolDescriptor& descriptor() const override { return d_; }
        [[nodiscard]] std::string call(std::string_view input) const override {
            return input == "lookup region=NYC" ? "precipitation chance: 10, high temp: 20c, low-temp: 12c"
                                                : "unknown region";
        }

    private:
        tools::ToolDescriptor d_{"weather", true, true, 1000};
    };
    tools::ToolRegistry reg;
    reg.add(std::make_shared<Weather>());
    gen::ScriptedGenerator g({{"how hot will it get in NYC today?", "|weather lookup region=NYC |result",
                               "|output today's high will be 20C"}});
    const auto res = drive_generation(g, reg, "how hot will it get in NYC today?");
    const std::string expected =
        "|question how hot will it get in NYC today? |weather lookup region=NYC |result precipitation chance: 10, "
        "high temp: 20c, low-temp: 12c |output today's high will be 20C";
    const auto text = res.text();
    return {res.complete() && text == expected, text};
}

Verdict validity_calibration(const fs::path& work) {
    const auto path = work / "validity.jsonl";
    test::spit(path, test::validity_jsonl(test::validity_corpus()));
    const auto r = cli_run({"check-validity", "--mathqa", path.string()});
    const auto first = r.out.substr(0, r.out.find('\n'));
    return {r.code == 0 && first == "70.0% valid (140 of 200 records)", first};
}

void optional_mathqa() {
    const char* path = std::getenv("TALM_MATHQA_JSONL");
    if (!path || !*path) {
        std::cout << "SKIP real MathQA validity rate: set TALM_MATHQA_JSONL to a {formula, answer} JSONL file"
                  << std::endl;
        return;
    }
    report("real MathQA validity rate within 70% +/- 10 points", [&] {
        const auto r = cli_run({"check-validity", "--mathqa", path});
        const auto first = r.out.substr(0, r.out.find('\n'));
        if (r.code != 0) return Verdict{false, r.err};
        const double rate = std::stod(first) / 100.0;
        return Verdict{std::fabs(rate - kMathQaExpected) <= kMathQaTol, first};
    });
}

struct TrendRun {
    fs::path data_dir;
    fs::path run_dir;
    double seconds = 0.0;
    bool ok = false;
    std::string error;
};

TrendRun run_trend(const fs::path& work) {
    TrendRun t;
    t.data_dir = work / "synthetic";
    t.run_dir = work / "selfplay";
    const auto start = Clock::now();
    auto synth = cli_run({"synth", "--out", t.data_dir.string(), "--count", kTrendCount, "--bootstrap",
                          kTrendBootstrap, "--eval-count", kTrendEvalCount, "--seed", kTrendSeed});
    if (synth.code != 0) {
        t.error = synth.err;
        return t;
    }
    auto sp = cli_run({"selfplay", "--tasks", (t.data_dir / "tasks.jsonl").string(), "--bootstrap",
                       (t.data_dir / "bootstrap.jsonl").string(), "--eval-tasks",
                       (t.data_dir / "eval_tasks.jsonl").string(), "--generator", "trainable", "--samples",
                       kTrendSamples, "--rounds", kTrendRounds, "--seed", kTrendSeed, "--out", t.run_dir.string()});
    t.seconds = seconds_since(start);
    t.ok = sp.code == 0;
    if (!t.ok) t.error = sp.err;
    return t;
}

Verdict trend(const TrendRun& t) {
    if (!t.ok) return {false, "self-play run failed: " + t.error};
    std::vector<selfplay::RoundReport> reports;
    std::istringstream lines(data::read_file(t.run_dir / "round_reports.jsonl"));
    for (std::string line; std::getline(lines, line);) {
        if (!line.empty()) reports.push_back(selfplay::report_from_json(line));
    }
    const auto curve = eval::parse_csv(data::read_file(t.run_dir / "curve.csv"));
    if (reports.size() != 3 || curve.size() != 4) return {false, "unexpected number of rounds"};
    const bool grows = reports[0].dataset_after > reports[0].dataset_before &&
                       reports[1].dataset_after > reports[1].dataset_before;
    const bool first_round_gain = curve[1].accuracy > curve[0].accuracy;
    const bool holds = curve[3].accuracy >= curve[1].accuracy;
    const bool fast = t.seconds < kTrendSeconds;
    std::ostringstream d;
    d << "|D| " << reports[0].dataset_before;
    for (const auto& r : reports) d << " -> " << r.dataset_after;
    d << "; accuracy";
    for (const auto& p : curve) d << " r" << p.round << "=" << format_fixed_trimmed(100.0 * p.accuracy, 1) << "%";
    d << "; (a) " << (grows ? "yes" : "no") << " (b) " << (first_round_gain ? "yes" : "no") << " (c) "
      << (holds ? "yes" : "no") << "; run " << format_fixed_trimmed(t.seconds, 2) << "s";
    return {grows && first_round_gain && holds && fast, d.str()};
}

Verdict audit(const TrendRun& t) {
    if (!t.ok) return {false, "self-play run failed"};
    const auto tasks = data::load_task_set(t.data_dir / "tasks.jsonl", data::TaskKind::Synthetic).records;
    const auto d = data::load_tool_use_set(t.run_dir / "tool_use_set.jsonl");
    const FormulaRegistry reg;
    const auto a = selfplay::audit(d, tasks, reg, MatchSpec::numeric());
    std::string detail = std::to_string(a.records) + " records, " + std::to_string(a.self_play_records) +
                         " from self-play, " + std::to_string(a.replayed) + " tool replays, " +
                         std::to_string(a.problems.size()) + " problems";
    if (!a.ok()) detail += "; first: " + a.problems.front();
    return {a.ok() && a.self_play_records > 0 && a.replayed == a.records, detail};
}

Verdict determinism(const fs::path& work, const TrendRun& t) {
    if (!t.ok) return {false, "self-play run failed"};
    const auto runs = work / "determinism";
    // Commands with file outputs, each run once and then rerun from its manifest.
    std::vector<std::pair<std::string, std::vector<std::string>>> commands{
        {"index", {"index", "--tasks", (t.data_dir / "tasks.jsonl").string(), "--task-kind", "synthetic"}},
        {"eval",
         {"eval", "--tasks", (t.data_dir / "eval_tasks.jsonl").string(), "--train",
          (t.run_dir / "tool_use_set.jsonl").string()}},
        {"check-validity", {"check-validity", "--mathqa", (work / "validity.jsonl").string()}},
        {"synth", {"synth", "--count", "50", "--eval-count", "10", "--ood-count", "10", "--seed", "4"}},
    };
    std::vector<std::string> checked{"selfplay"};
    std::vector<std::string> diverged;
    {
        const auto again = cli_run({"rerun", "--manifest", (t.run_dir / "manifest.json").string(), "--out",
                                    (runs / "selfplay").string()});
        if (again.code != 0 || outputs(runs / "selfplay") != outputs(t.run_dir)) diverged.push_back("selfplay");
    }
    for (auto& [name, args] : commands) {
        if (name == "index") continue;  // index writes a single file, handled below
        const auto first = runs / (name + "-1");
        const auto second = runs / (name + "-2");
        args.push_back("--out");
        args.push_back(first.string());
        const auto r1 = cli_run(args);
        const auto r2 = cli_run({"rerun", "--manifest", (first / "manifest.json").string(), "--out", second.string()});
        checked.push_back(name);
        if (r1.code != 0 || r2.code != 0 || outputs(first) != outputs(second)) diverged.push_back(name);
    }
    {
        fs::create_directories(runs);
        const auto a = runs / "index-1.bin";
        const auto b = runs / "index-2.bin";
        const auto corpus = runs / "corpus.jsonl";
        data::save_corpus(corpus, {{"a", "boil the wort"}, {"b", "add hops"}, {"c", "ferment with yeast"}});
        const auto r1 = cli_run({"index", "--corpus", corpus.string(), "--out", a.string()});
        const auto r2 = cli_run({"rerun", "--manifest", a.string() + ".manifest.json", "--out", b.string()});
        checked.push_back("index");
        if (r1.code != 0 || r2.code != 0 || data::read_file(a) != data::read_file(b)) diverged.push_back("index");
    }
    std::string detail = "reran";
    for (const auto& c : checked) detail += " " + c;
    if (diverged.empty()) {
        detail += "; all outputs byte-identical";
    } else {
        detail += "; diverged:";
        for (const auto& c : diverged) detail += " " + c;
    }
    return {diverged.empty(), detail};
}

}  // namespace

int main() {
    test::TempDir work("talm-acceptance");
    report("solver golden", solver_golden);
    report("protocol fuzz", protocol_fuzz);
    report("BM25 oracle equivalence", bm25_equivalence);
    report("interception golden", interception_golden);
    report("validity-checker calibration", [&] { return validity_calibration(work.path()); });
    optional_mathqa();
    const auto run = run_trend(work.path());
    report("closed-loop self-play trend", [&] { return trend(run); });
    report("filter soundness audit", [&] { return audit(run); });
    report("determinism from run manifests", [&] { return determinism(work.path(), run); });
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
