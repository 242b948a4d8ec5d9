// SPDX-License-Identifier: Apache-2.0
#include "talm/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "talm/bm25.hpp"
#include "talm/conformance.hpp"
#include "talm/datasets.hpp"
#include "talm/eval.hpp"
#include "talm/external.hpp"
#include "talm/formula.hpp"
#include "talm/manifest.hpp"
#include "talm/scripted.hpp"
#include "talm/selfplay.hpp"
#include "talm/text.hpp"
#include "talm/trainable.hpp"
#include "talm/websearch.hpp"

namespace talm::cli {

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ConfigError: return kExitUsage;
        case ErrorCode::IoError:
        case ErrorCode::PersistenceError:
        case ErrorCode::SchemaError: return kExitIo;
        default: return kExitDomain;
    }
}

namespace {

using ordered = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = text.find(sep, start);
        parts.emplace_back(trim(text.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

// A missing input named on the command line is an IoError reported with the
// usage exit status.
struct MissingInput : Error {
    explicit MissingInput(const std::string& message) : Error(ErrorCode::IoError, message) {}
};

void require_file(const std::string& path, const char* flag) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw MissingInput(std::string(flag) + " '" + path + "': no such file");
}

std::size_t parse_count(const std::string& value, const char* what) {
    const auto v = parse_number(value);
    if (!v || *v < 0 || *v != static_cast<double>(static_cast<std::size_t>(*v))) {
        throw Error(ErrorCode::ConfigError, std::string(what) + " must be a non-negative integer");
    }
    return static_cast<std::size_t>(*v);
}

// Shared bookkeeping for commands that write a manifest.
struct Session {
    RunManifest manifest;

    Session(std::string command, const std::vector<std::string>& argv) {
        manifest.command = std::move(command);
        manifest.argv = argv;
        manifest.started_at = utc_timestamp();
        manifest.tool_version = kVersion;
    }

    void hash_input(const std::string& path) { manifest.dataset_hashes[path] = data::file_digest(path); }

    void write(const fs::path& path) {
        manifest.finished_at = utc_timestamp();
        write_manifest(path, manifest);
    }
};

void describe_tools(Session& s, const tools::ToolRegistry& registry) { s.manifest.tools = registry.describe(); }

// ---------------------------------------------------------------------------

struct GlobalOptions {
    std::size_t jobs = 0;
};

int cmd_solve(const std::string& formula_text, const std::string& manifest_path, const std::vector<std::string>& argv,
              std::ostream& out) {
    Session session("solve", argv);
    const auto value = formula::eval_formula(formula::parse_formula(formula_text));
    const auto text = format_value(value);
    out << text << '\n';
    if (!manifest_path.empty()) {
        session.manifest.config["formula"] = formula_text;
        session.manifest.config["result"] = text;
        session.write(manifest_path);
    }
    return kExitOk;
}

struct IndexArgs {
    std::string corpus;
    std::string tasks;
    std::string out;
    double k1 = 1.2;
    double b = 0.75;
};

int cmd_index(const IndexArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
    if (a.corpus.empty() == a.tasks.empty()) {
        throw Error(ErrorCode::ConfigError, "give exactly one of --corpus or --tasks");
    }
    if (!(a.k1 >= 0) || !(a.b >= 0 && a.b <= 1)) throw Error(ErrorCode::ConfigError, "need k1 >= 0 and 0 <= b <= 1");
    Session session("index", argv);
    std::vector<bm25::Document> docs;
    if (!a.corpus.empty()) {
        require_file(a.corpus, "--corpus");
        docs = data::load_corpus(a.corpus);
        session.hash_input(a.corpus);
    } else {
        require_file(a.tasks, "--tasks");
        docs = data::build_corpus_from_contexts(data::load_task_set(a.tasks, data::TaskKind::QA));
        session.hash_input(a.tasks);
    }
    const auto index = bm25::Index::build(std::move(docs), {a.k1, a.b});
    index.save(a.out);
    out << "indexed " << index.doc_count() << " documents, " << index.postings().size() << " terms -> " << a.out
        << '\n';
    session.manifest.config["k1"] = a.k1;
    session.manifest.config["b"] = a.b;
    session.manifest.artifacts["index"] = a.out;
    session.write(a.out + ".manifest.json");
    return kExitOk;
}

int cmd_search(const std::string& index_path, const std::string& query, std::size_t k, std::ostream& out) {
    require_file(index_path, "--index");
    const auto index = bm25::Index::load(index_path);
    const auto hits = index.search(query, k);
    std::size_t rank = 0;
    char score[64];
    for (const auto& h : hits) {
        std::snprintf(score, sizeof score, "%.6f", h.score);
        out << ++rank << '\t' << h.doc_id << '\t' << score << '\t'
            << std::string(utf8_prefix(index.find(h.doc_id)->text, 120)) << '\n';
    }
    if (hits.empty()) out << "no matching documents\n";
    return kExitOk;
}

// Accepts {"formula", "answer"} or {"formula", "target"} per line.
std::vector<formula::ValidityRecord> load_validity_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::vector<formula::ValidityRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaError(line_no, "<line>", std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw SchemaError(line_no, "<line>", "expected a JSON object");
        const auto f = j.find("formula");
        if (f == j.end() || !f->is_string()) throw SchemaError(line_no, "formula", "missing or not a string");
        auto a = j.find("answer");
        if (a == j.end()) a = j.find("target");
        if (a == j.end()) throw SchemaError(line_no, "answer", "missing (also accepted: target)");
        records.push_back({f->get<std::string>(), a->is_string() ? a->get<std::string>() : a->dump()});
    }
    return records;
}

int cmd_check_validity(const std::string& path, const std::string& out_dir, const std::vector<std::string>& argv,
                       std::ostream& out) {
    require_file(path, "--mathqa");
    Session session("check-validity", argv);
    session.hash_input(path);
    const auto records = load_validity_records(path);
    const auto report = formula::check_validity(records);
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.1f%%", 100.0 * report.valid_fraction());
    out << pct << " valid (" << report.valid_count << " of " << report.total() << " records)\n";
    out << "invalid: " << report.invalid_count << '\n';
    for (const auto& [reason, count] : report.error_breakdown) out << "  " << reason << ": " << count << '\n';
    if (!out_dir.empty()) {
        ordered j;
        j["records"] = report.total();
        j["valid"] = report.valid_count;
        j["invalid"] = report.invalid_count;
        j["valid_fraction"] = report.valid_fraction();
        j["error_breakdown"] = report.error_breakdown;
        data::write_file_atomic(fs::path(out_dir) / "validity.json", j.dump(2) + "\n");
        session.manifest.artifacts["report"] = (fs::path(out_dir) / "validity.json").string();
        session.write(fs::path(out_dir) / kManifestFile);
    }
    return kExitOk;
}

struct SynthArgs {
    std::string out;
    std::size_t count = 500;
    std::size_t bootstrap = 20;
    std::size_t eval_count = 0;
    std::size_t ood_count = 0;
    std::uint64_t seed = 7;
    std::int64_t min = 2;
    std::int64_t max = 999;
    std::string ops = "add,subtract,multiply,divide";
    std::string prefix = "syn";
};

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
    data::SyntheticSpec spec;
    spec.example_count = a.count;
    spec.bootstrap_count = a.bootstrap;
    spec.seed = a.seed;
    spec.operand_min = a.min;
    spec.operand_max = a.max;
    spec.id_prefix = a.prefix;
    spec.ops.clear();
    for (const auto& name : split(a.ops, ',')) {
        const auto op = formula::op_from_name(name);
        if (!op) throw Error(ErrorCode::ConfigError, "unknown operator '" + name + "'");
        spec.ops.push_back(*op);
    }
    Session session("synth", argv);
    const fs::path dir(a.out);
    const auto set = data::generate_synthetic(spec);
    data::save_task_set(dir / "tasks.jsonl", set.tasks.records);
    data::save_tool_use_set(dir / "bootstrap.jsonl", set.bootstrap);
    session.manifest.artifacts["tasks"] = (dir / "tasks.jsonl").string();
    session.manifest.artifacts["bootstrap"] = (dir / "bootstrap.jsonl").string();
    session.manifest.seeds["synthetic"] = a.seed;
    out << "wrote " << set.tasks.records.size() << " tasks and " << set.bootstrap.size() << " bootstrap records\n";
    if (a.eval_count > 0) {
        auto eval_spec = spec;
        eval_spec.example_count = a.eval_count;
        eval_spec.bootstrap_count = 0;
        eval_spec.seed = a.seed + 1;
        eval_spec.id_prefix = "eval";
        data::save_task_set(dir / "eval_tasks.jsonl", data::generate_synthetic(eval_spec).tasks.records);
        session.manifest.artifacts["eval_tasks"] = (dir / "eval_tasks.jsonl").string();
        session.manifest.seeds["synthetic_eval"] = a.seed + 1;
        out << "wrote " << a.eval_count << " held-out tasks\n";
    }
    if (a.ood_count > 0) {
        const auto ood = data::large_number_spec(a.seed + 2, a.ood_count);
        data::save_task_set(dir / "ood_tasks.jsonl", data::generate_synthetic(ood).tasks.records);
        session.manifest.artifacts["ood_tasks"] = (dir / "ood_tasks.jsonl").string();
        session.manifest.seeds["synthetic_ood"] = a.seed + 2;
        out << "wrote " << a.ood_count << " large-number tasks\n";
    }
    session.manifest.config["count"] = a.count;
    session.manifest.config["bootstrap"] = a.bootstrap;
    session.manifest.config["operand_min"] = a.min;
    session.manifest.config["operand_max"] = a.max;
    session.manifest.config["ops"] = a.ops;
    session.manifest.config["prefix"] = a.prefix;
    session.write(dir / kManifestFile);
    return kExitOk;
}

struct RunArgs {
    std::string tasks;
    std::string task_kind = "synthetic";
    std::string bootstrap;
    std::string generator = "trainable";
    std::string tools = "formula";
    std::string eval_tasks;
    std::string train;
    std::size_t rounds = 3;
    std::size_t samples = 600;
    double temperature = 1.0;
    std::size_t top_k = 40;
    std::string threshold = "auto";
    std::uint64_t seed = 0;
    std::size_t max_accepts = 4;
    bool no_dedup = false;
    bool fresh = false;
    std::size_t beams = 4;
    bool baseline = false;
    std::size_t max_examples = 0;
    int round = 0;
    std::string out;
};

// "auto" picks the answer metric from the task kind.
MatchSpec match_spec(const RunArgs& a) {
    if (a.threshold != "auto") return MatchSpec::parse(a.threshold);
    return data::task_kind_from_string(a.task_kind) == data::TaskKind::QA ? MatchSpec::exact() : MatchSpec::numeric();
}

std::vector<TaskExample> load_tasks(const std::string& path, const std::string& kind, Session& session,
                                    std::ostream& err) {
    require_file(path, "--tasks");
    auto file = data::load_task_set(path, data::task_kind_from_string(kind));
    for (const auto& issue : file.formula_issues) {
        err << "warning: line " << issue.line << " (" << issue.id << "): formula does not parse: " << issue.message
            << '\n';
    }
    session.hash_input(path);
    return std::move(file.records);
}

int cmd_selfplay(const RunArgs& a, const GlobalOptions& g, const std::vector<std::string>& argv, std::ostream& out,
                 std::ostream& err) {
    selfplay::SelfPlayConfig config;
    config.rounds = a.rounds;
    config.samples_per_example = a.samples;
    config.match = match_spec(a);
    config.sampling.mode = gen::SamplingMode::Random;
    config.sampling.temperature = a.temperature;
    config.sampling.top_k = a.top_k;
    config.sampling.seed = a.seed;
    config.max_accepts_per_example = a.max_accepts;
    config.dedup = !a.no_dedup;
    config.jobs = g.jobs;
    config.validate();

    Session session("selfplay", argv);
    const auto tasks = load_tasks(a.tasks, a.task_kind, session, err);
    require_file(a.bootstrap, "--bootstrap");
    const auto bootstrap = data::load_tool_use_set(a.bootstrap);
    session.hash_input(a.bootstrap);
    std::vector<TaskExample> eval_tasks;
    selfplay::PipelineOptions options;
    options.out_dir = fs::path(a.out);
    options.resume = !a.fresh;
    if (!a.eval_tasks.empty()) {
        require_file(a.eval_tasks, "--eval-tasks");
        eval_tasks = data::load_task_set(a.eval_tasks, data::task_kind_from_string(a.task_kind)).records;
        session.hash_input(a.eval_tasks);
        options.eval_tasks = &eval_tasks;
        options.eval_config.beams = a.beams;
        options.eval_config.match = config.match;
        options.eval_config.jobs = g.jobs;
        if (a.max_examples > 0) options.eval_config.max_examples = a.max_examples;
    }

    auto generator = make_generator(a.generator, tasks);
    auto registry = make_registry(a.tools);
    describe_tools(session, *registry);
    session.manifest.generator = generator->describe();
    session.manifest.seeds["sampling"] = a.seed;

    auto& c = session.manifest.config;
    c["rounds"] = config.rounds;
    c["samples_per_example"] = config.samples_per_example;
    c["match"] = config.match.to_string();
    c["temperature"] = config.sampling.temperature;
    c["top_k"] = config.sampling.top_k;
    c["max_accepts_per_example"] = config.max_accepts_per_example;
    c["dedup"] = config.dedup;
    c["budget"] = config.budget;
    c["task_kind"] = a.task_kind;
    if (options.eval_tasks) c["eval_beams"] = a.beams;

    options.on_round = [&out](const selfplay::RoundReport& r) {
        out << "round " << r.round << ": |D| " << r.dataset_before << " -> " << r.dataset_after << ", accepted "
            << r.accepted_records << ", acceptance " << format_fixed_trimmed(100.0 * r.acceptance_rate, 2) << "%";
        if (r.eval_accuracy) out << ", eval accuracy " << format_fixed_trimmed(100.0 * *r.eval_accuracy, 2) << "%";
        out << '\n';
    };
    const auto result = selfplay::run_pipeline(*generator, *registry, tasks, bootstrap, config, options);
    if (result.resumed_rounds > 0) out << "resumed after round " << result.resumed_rounds << '\n';
    if (result.bootstrap_eval) {
        out << "bootstrap-only eval accuracy " << format_fixed_trimmed(100.0 * result.bootstrap_eval->accuracy, 2)
            << "%\n";
    }
    out << selfplay::summarize(result.reports);

    const fs::path dir(a.out);
    session.manifest.artifacts["tool_use_set"] = (dir / "tool_use_set.jsonl").string();
    session.manifest.artifacts["round_reports"] = (dir / "round_reports.jsonl").string();
    if (options.eval_tasks) session.manifest.artifacts["curve"] = (dir / "curve.csv").string();
    session.write(dir / kManifestFile);
    return kExitOk;
}

int cmd_eval(const RunArgs& a, const GlobalOptions& g, const std::vector<std::string>& argv, std::ostream& out,
             std::ostream& err) {
    eval::EvalConfig config;
    config.beams = a.beams;
    config.match = match_spec(a);
    config.tool_enabled = !a.baseline;
    config.jobs = g.jobs;
    if (a.max_examples > 0) config.max_examples = a.max_examples;
    config.validate();

    Session session("eval", argv);
    const auto tasks = load_tasks(a.tasks, a.task_kind, session, err);
    auto generator = make_generator(a.generator, tasks);
    auto registry = make_registry(a.tools);
    describe_tools(session, *registry);
    session.manifest.generator = generator->describe();
    if (!a.train.empty()) {
        require_file(a.train, "--train");
        (void)generator->update(data::load_tool_use_set(a.train));
        session.hash_input(a.train);
    }
    const auto report = eval::evaluate(*generator, *registry, tasks, config);

    out << "accuracy " << format_fixed_trimmed(100.0 * report.accuracy, 2) << "% (" << report.correct << "/"
        << report.n << ", " << report.decoding << (a.baseline ? ", baseline" : "") << ")\n";
    for (const auto v : eval::kAllVerdicts) {
        if (v != eval::Verdict::Correct && report.count(v) > 0) {
            out << "  " << eval::to_string(v) << ": " << report.count(v) << '\n';
        }
    }

    const fs::path dir(a.out);
    eval::save_per_example(dir / "eval.jsonl", report);
    ordered j;
    j["accuracy"] = report.accuracy;
    j["n"] = report.n;
    j["correct"] = report.correct;
    j["decoding"] = report.decoding;
    j["baseline"] = a.baseline;
    j["tool_calls"] = report.tool_calls;
    auto& tax = j["taxonomy"] = ordered::object();
    for (const auto v : eval::kAllVerdicts) tax[std::string(eval::to_string(v))] = report.count(v);
    data::write_file_atomic(dir / "report.json", j.dump(2) + "\n");
    eval::emit_report(dir, {{a.round, report.accuracy, report.n, 0.0}});

    auto& c = session.manifest.config;
    c["beams"] = a.beams;
    c["baseline"] = a.baseline;
    c["match"] = config.match.to_string();
    c["task_kind"] = a.task_kind;
    if (config.max_examples) c["max_examples"] = *config.max_examples;
    session.manifest.artifacts["per_example"] = (dir / "eval.jsonl").string();
    session.manifest.artifacts["report"] = (dir / "report.json").string();
    session.manifest.artifacts["curve"] = (dir / "curve.csv").string();
    session.write(dir / kManifestFile);
    return kExitOk;
}

int cmd_conformance(const std::string& generator_spec, const std::string& tasks_path, std::ostream& out) {
    std::vector<TaskExample> tasks;
    if (!tasks_path.empty()) {
        require_file(tasks_path, "--tasks");
        tasks = data::load_task_set(tasks_path, data::TaskKind::Synthetic).records;
    }
    auto generator = make_generator(generator_spec, tasks);
    const auto report = gen::conformance_check(*generator);
    out << report.summary();
    return report.passed() ? kExitOk : kExitDomain;
}

int cmd_serve(const std::string& generator_spec, const std::string& train, int port, std::ostream& err) {
    auto generator = make_generator(generator_spec);
    if (!train.empty()) {
        require_file(train, "--train");
        (void)generator->update(data::load_tool_use_set(train));
    }
    if (port < 0) {
        gen::serve_wire_protocol(*generator, STDIN_FILENO, STDOUT_FILENO);
    } else {
        gen::serve_tcp(*generator, port, [&err](int bound) { err << "listening on 127.0.0.1:" << bound << std::endl; });
    }
    return kExitOk;
}

int cmd_rerun(const std::string& manifest_path, const std::string& out_override, std::ostream& out,
              std::ostream& err) {
    require_file(manifest_path, "--manifest");
    auto manifest = read_manifest(manifest_path);
    auto argv = manifest.argv;
    if (argv.empty()) throw Error(ErrorCode::ConfigError, "manifest has no argv");
    if (std::find(argv.begin(), argv.end(), "rerun") != argv.end()) {
        throw Error(ErrorCode::ConfigError, "manifest records a rerun; point at the original manifest");
    }
    if (!out_override.empty()) {
        bool replaced = false;
        for (std::size_t i = 0; i < argv.size(); ++i) {
            if (argv[i] == "--out" && i + 1 < argv.size()) {
                argv[i + 1] = out_override;
                replaced = true;
            } else if (argv[i].starts_with("--out=")) {
                argv[i] = "--out=" + out_override;
                replaced = true;
            }
        }
        if (!replaced) throw Error(ErrorCode::ConfigError, "the recorded command has no --out to redirect");
    }
    // Inputs must be unchanged for the rerun to reproduce the original outputs.
    for (const auto& [path, digest] : manifest.dataset_hashes) {
        std::error_code ec;
        if (!fs::is_regular_file(path, ec)) throw MissingInput("recorded input '" + path + "' is gone");
        if (data::file_digest(path) != digest) {
            err << "warning: input '" << path << "' changed since the recorded run\n";
        }
    }
    return run(argv, out, err);
}

}  // namespace

// ---------------------------------------------------------------------------

std::unique_ptr<gen::Generator> make_generator(const std::string& spec, const std::vector<TaskExample>& tasks) {
    if (spec == "trainable") return std::make_unique<gen::TrainableGenerator>();
    if (spec == "oracle") {
        if (tasks.empty()) throw Error(ErrorCode::ConfigError, "the oracle generator needs a task file with formulas");
        return std::make_unique<gen::ScriptedGenerator>(gen::oracle_rules(tasks), "oracle");
    }
    if (spec.starts_with("scripted:")) {
        const auto path = spec.substr(9);
        require_file(path, "scripted generator");
        return std::make_unique<gen::ScriptedGenerator>(gen::ScriptedGenerator::load(path));
    }
    if (spec.starts_with("external:")) return gen::connect_external(spec.substr(9));
    throw Error(ErrorCode::ConfigError, "unknown generator spec '" + spec +
                                            "' (expected trainable, oracle, scripted:PATH or external:...)");
}

std::unique_ptr<tools::ToolRegistry> make_registry(const std::string& spec) {
    auto registry = std::make_unique<tools::ToolRegistry>();
    if (trim(spec).empty() || trim(spec) == "none") return registry;
    for (const auto& item : split(spec, ',')) {
        const auto colon = item.find(':');
        const auto name = item.substr(0, colon);
        std::map<std::string, std::string> opts;
        if (colon != std::string::npos) {
            for (const auto& kv : split(std::string_view(item).substr(colon + 1), ';')) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "tool option '" + kv + "' needs key=value");
                opts[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
        }
        auto take = [&](const std::string& key) -> std::optional<std::string> {
            const auto it = opts.find(key);
            if (it == opts.end()) return std::nullopt;
            auto v = it->second;
            opts.erase(it);
            return v;
        };
        const auto label = take("label");
        if (name == "formula") {
            registry->add(std::make_shared<tools::FormulaTool>(label.value_or("formula")));
        } else if (name == "search") {
            const auto path = take("index");
            if (!path) throw Error(ErrorCode::ConfigError, "search tool needs index=PATH");
            require_file(*path, "search index");
            const auto k = take("k");
            auto index = std::make_shared<const bm25::Index>(bm25::Index::load(*path));
            registry->add(std::make_shared<tools::SearchTool>(index, k ? parse_count(*k, "search k") : 1,
                                                              label.value_or("search")));
        } else if (name == "websearch") {
            tools::WebSearchConfig cfg;
            const auto endpoint = take("endpoint");
            if (!endpoint) throw Error(ErrorCode::ConfigError, "websearch tool needs endpoint=URL");
            cfg.endpoint = *endpoint;
            if (const auto p = take("param")) cfg.query_param = *p;
            if (const auto p = take("pointer")) cfg.snippet_pointer = *p;
            if (const auto p = take("header")) cfg.api_key_header = *p;
            if (const auto p = take("timeout_ms")) cfg.timeout = std::chrono::milliseconds(parse_count(*p, "timeout_ms"));
            if (const auto p = take("max_concurrent")) cfg.max_concurrent = parse_count(*p, "max_concurrent");
            cfg.label = label.value_or("websearch");
            if (const char* key = std::getenv(kWebSearchKeyEnv)) cfg.api_key = key;
            registry->add(std::make_shared<tools::WebSearchTool>(std::move(cfg)));
        } else {
            throw Error(ErrorCode::ConfigError, "unknown tool '" + name + "' (expected formula, search, websearch)");
        }
        if (!opts.empty()) {
            throw Error(ErrorCode::ConfigError, "unknown option '" + opts.begin()->first + "' for tool " + name);
        }
    }
    return registry;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tool-augmented language model runtime and self-play toolkit", "talm"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.set_version_flag("--version", kVersion);
    GlobalOptions global;
    app.add_option("--jobs", global.jobs, "Worker threads (0 = all cores)");

    std::string formula_text;
    std::string manifest_path;
    auto* solve = app.add_subcommand("solve", "Evaluate a formula and print its value");
    solve->add_option("formula", formula_text, "e.g. \"Divide(Add(85, Add(88, 95)), 3)\"")->required();
    solve->add_option("--manifest", manifest_path, "Also write a run manifest here");

    IndexArgs index_args;
    auto* index = app.add_subcommand("index", "Build a BM25 index");
    index->add_option("--corpus", index_args.corpus, "Corpus JSONL {doc_id, text}");
    index->add_option("--tasks", index_args.tasks, "QA task set; indexes the distinct contexts");
    index->add_option("--out", index_args.out, "Index file to write")->required();
    index->add_option("--k1", index_args.k1, "Term-frequency saturation");
    index->add_option("--b", index_args.b, "Length normalization");

    std::string search_index;
    std::string query;
    std::size_t search_k = 5;
    auto* search = app.add_subcommand("search", "Query a BM25 index");
    search->add_option("--index", search_index, "Index file from `talm index`")->required();
    search->add_option("--query", query, "Free-text query")->required();
    search->add_option("--k", search_k, "Number of hits")->check(CLI::PositiveNumber);

    std::string mathqa;
    std::string validity_out;
    auto* validity = app.add_subcommand("check-validity", "Report how many formulas reproduce their answers");
    validity->add_option("--mathqa", mathqa, "JSONL {formula, answer}")->required();
    validity->add_option("--out", validity_out, "Write validity.json and a manifest here");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate the synthetic arithmetic benchmark");
    synth->add_option("--out", synth_args.out, "Output directory")->required();
    synth->add_option("--count", synth_args.count, "Training examples");
    synth->add_option("--bootstrap", synth_args.bootstrap, "Leading examples written as bootstrap tool-use records");
    synth->add_option("--eval-count", synth_args.eval_count, "Also write a held-out set of this size");
    synth->add_option("--ood-count", synth_args.ood_count, "Also write a large-number set of this size");
    synth->add_option("--seed", synth_args.seed, "Generator seed");
    synth->add_option("--min", synth_args.min, "Smallest operand");
    synth->add_option("--max", synth_args.max, "Largest operand");
    synth->add_option("--ops", synth_args.ops, "Comma-separated subset of add,subtract,multiply,divide");
    synth->add_option("--prefix", synth_args.prefix, "Id prefix");

    RunArgs sp;
    auto* selfplay_cmd = app.add_subcommand("selfplay", "Run iterative self-play");
    selfplay_cmd->add_option("--tasks", sp.tasks, "Task set JSONL")->required();
    selfplay_cmd->add_option("--task-kind", sp.task_kind, "qa | math | synthetic");
    selfplay_cmd->add_option("--bootstrap", sp.bootstrap, "Initial tool-use set JSONL")->required();
    selfplay_cmd->add_option("--generator", sp.generator, "trainable | oracle | scripted:PATH | external:cmd=... | external:tcp=HOST:PORT");
    selfplay_cmd->add_option("--tools", sp.tools, "e.g. formula or search:index=PATH;k=1");
    selfplay_cmd->add_option("--rounds", sp.rounds, "Self-play rounds");
    selfplay_cmd->add_option("--samples", sp.samples, "Samples per example per round");
    selfplay_cmd->add_option("--temperature", sp.temperature, "Sampling temperature");
    selfplay_cmd->add_option("--top-k", sp.top_k, "Sample among the k best candidates");
    selfplay_cmd->add_option("--threshold", sp.threshold, "auto (exact for qa, numeric otherwise) | numeric | numeric:ABS,REL | exact");
    selfplay_cmd->add_option("--seed", sp.seed, "Base sampling seed");
    selfplay_cmd->add_option("--max-accepts", sp.max_accepts, "Accepted trajectories per example per round");
    selfplay_cmd->add_flag("--no-dedup", sp.no_dedup, "Keep duplicate trajectories");
    selfplay_cmd->add_flag("--fresh", sp.fresh, "Ignore any previous run in --out");
    selfplay_cmd->add_option("--eval-tasks", sp.eval_tasks, "Evaluate on this set after every round");
    selfplay_cmd->add_option("--beams", sp.beams, "Beam width for evaluation");
    selfplay_cmd->add_option("--max-examples", sp.max_examples, "Evaluate at most this many examples");
    selfplay_cmd->add_option("--out", sp.out, "Run directory (resumed if it holds the same run)")->required();

    RunArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a generator on a task set");
    eval_cmd->add_option("--tasks", ev.tasks, "Task set JSONL")->required();
    eval_cmd->add_option("--task-kind", ev.task_kind, "qa | math | synthetic");
    eval_cmd->add_option("--generator", ev.generator, "Same forms as selfplay");
    eval_cmd->add_option("--tools", ev.tools, "Same forms as selfplay");
    eval_cmd->add_option("--train", ev.train, "Update the generator on this tool-use set first");
    eval_cmd->add_option("--beams", ev.beams, "Beam width; 1 means greedy");
    eval_cmd->add_flag("--baseline", ev.baseline, "Run without tools");
    eval_cmd->add_option("--threshold", ev.threshold, "auto (exact for qa, numeric otherwise) | numeric | numeric:ABS,REL | exact");
    eval_cmd->add_option("--max-examples", ev.max_examples, "Evaluate at most this many examples");
    eval_cmd->add_option("--round", ev.round, "Round number for the CSV row");
    eval_cmd->add_option("--out", ev.out, "Output directory")->required();

    std::string conf_generator;
    std::string conf_tasks;
    auto* conformance = app.add_subcommand("conformance", "Run the generator conformance suite");
    conformance->add_option("--generator", conf_generator, "Generator under test")->required();
    conformance->add_option("--tasks", conf_tasks, "Task file for the oracle generator");

    std::string serve_generator = "trainable";
    std::string serve_train;
    int serve_port = -1;
    auto* serve = app.add_subcommand("serve", "Serve a built-in generator over the wire protocol");
    serve->add_option("--generator", serve_generator, "trainable | scripted:PATH");
    serve->add_option("--train", serve_train, "Tool-use set to train on before serving");
    serve->add_option("--tcp", serve_port, "Listen on this port instead of stdin/stdout");

    std::string rerun_manifest;
    std::string rerun_out;
    auto* rerun = app.add_subcommand("rerun", "Re-execute a recorded run");
    rerun->add_option("--manifest", rerun_manifest, "manifest.json of a previous run")->required();
    rerun->add_option("--out", rerun_out, "Write outputs here instead of the recorded directory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*solve) return cmd_solve(formula_text, manifest_path, args, out);
        if (*index) return cmd_index(index_args, args, out);
        if (*search) return cmd_search(search_index, query, search_k, out);
        if (*validity) return cmd_check_validity(mathqa, validity_out, args, out);
        if (*synth) return cmd_synth(synth_args, args, out);
        if (*selfplay_cmd) return cmd_selfplay(sp, global, args, out, err);
        if (*eval_cmd) return cmd_eval(ev, global, args, out, err);
        if (*conformance) return cmd_conformance(conf_generator, conf_tasks, out);
        if (*serve) return cmd_serve(serve_generator, serve_train, serve_port, err);
        if (*rerun) return cmd_rerun(rerun_manifest, rerun_out, out, err);
    } catch (const MissingInput& e) {
        err << "error: IoError: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        err << "error: IoError: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitDomain;
    }
    return kExitUsage;
}

}  // namespace talm::cli
