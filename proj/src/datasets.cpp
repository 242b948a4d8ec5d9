// SPDX-License-Identifier: Apache-2.0
#include "talm/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "talm/error.hpp"
#include "talm/text.hpp"

namespace talm::data {

namespace {

using ordered = nlohmann::ordered_json;

std::string dump_line(const ordered& j) {
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

nlohmann::json parse_line(const std::string& line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(line_no, "<line>", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError(line_no, "<line>", "expected a JSON object");
    return j;
}

std::string required_string(const nlohmann::json& j, const char* field, std::size_t line_no,
                            bool allow_empty = false) {
    const auto it = j.find(field);
    if (it == j.end()) throw SchemaError(line_no, field, "missing");
    if (!it->is_string()) throw SchemaError(line_no, field, "must be a string");
    auto value = it->get<std::string>();
    if (!allow_empty && value.empty()) throw SchemaError(line_no, field, "must be non-empty");
    return value;
}

std::optional<std::string> optional_string(const nlohmann::json& j, const char* field, std::size_t line_no) {
    const auto it = j.find(field);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw SchemaError(line_no, field, "must be a string");
    return it->get<std::string>();
}

// Calls fn(line, line_no) for every non-blank line.
template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        fn(line, line_no);
    }
    if (in.bad()) throw Error(ErrorCode::IoError, "read failed");
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "': no such file");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    return in;
}

}  // namespace

std::string_view to_string(TaskKind kind) noexcept {
    switch (kind) {
        case TaskKind::QA: return "qa";
        case TaskKind::Math: return "math";
        case TaskKind::Synthetic: return "synthetic";
    }
    return "?";
}

TaskKind task_kind_from_string(std::string_view s) {
    if (s == "qa") return TaskKind::QA;
    if (s == "math") return TaskKind::Math;
    if (s == "synthetic") return TaskKind::Synthetic;
    throw Error(ErrorCode::ConfigError, "unknown task kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Task sets

TaskSetFile parse_task_set(std::istream& in, TaskKind kind) {
    TaskSetFile file;
    file.kind = kind;
    std::unordered_map<std::string, std::size_t> seen;
    for_each_line(in, [&](const std::string& line, std::size_t line_no) {
        const auto j = parse_line(line, line_no);
        TaskExample task;
        task.id = required_string(j, "id", line_no);
        task.input = required_string(j, "input", line_no);
        task.target = required_string(j, "target", line_no);
        task.context = optional_string(j, "context", line_no);
        task.formula = optional_string(j, "formula", line_no);
        if (const auto [it, fresh] = seen.emplace(task.id, line_no); !fresh) {
            throw SchemaError(line_no, "id",
                              "duplicate id '" + task.id + "' (first seen on line " + std::to_string(it->second) + ")");
        }
        if (task.formula && kind != TaskKind::QA) {
            try {
                (void)formula::parse_formula(*task.formula);
            } catch (const Error& e) {
                file.formula_issues.push_back({line_no, task.id, e.what()});
            }
        }
        file.records.push_back(std::move(task));
    });
    return file;
}

TaskSetFile load_task_set(const std::filesystem::path& path, TaskKind kind) {
    auto in = open_input(path);
    return parse_task_set(in, kind);
}

std::string task_to_json_line(const TaskExample& task) {
    ordered j;
    j["id"] = task.id;
    j["input"] = task.input;
    j["target"] = task.target;
    if (task.context) j["context"] = *task.context;
    if (task.formula) j["formula"] = *task.formula;
    return dump_line(j);
}

void write_task_set(std::ostream& out, const std::vector<TaskExample>& tasks) {
    for (const auto& t : tasks) out << task_to_json_line(t) << '\n';
}

void save_task_set(const std::filesystem::path& path, const std::vector<TaskExample>& tasks) {
    std::ostringstream out;
    write_task_set(out, tasks);
    write_file_atomic(path, out.str());
}

// ---------------------------------------------------------------------------
// Tool-use sets

ToolUseSet parse_tool_use_set(std::istream& in) {
    ToolUseSet records;
    for_each_line(in, [&](const std::string& line, std::size_t line_no) {
        const auto j = parse_line(line, line_no);
        ToolUseRecord r;
        r.id = required_string(j, "id", line_no);
        r.input = required_string(j, "input", line_no);
        r.tool_label = required_string(j, "tool_label", line_no);
        r.tool_input = required_string(j, "tool_input", line_no, true);
        r.tool_output = required_string(j, "tool_output", line_no, true);
        r.output = required_string(j, "output", line_no, true);
        const auto round = j.find("round");
        if (round == j.end()) throw SchemaError(line_no, "round", "missing");
        if (!round->is_number_integer() || round->get<std::int64_t>() < 0) {
            throw SchemaError(line_no, "round", "must be a non-negative integer");
        }
        r.round = round->get<int>();
        const auto prov = provenance_from_string(required_string(j, "provenance", line_no));
        if (!prov) throw SchemaError(line_no, "provenance", "must be \"bootstrap\" or \"self_play\"");
        r.provenance = *prov;
        if (!protocol::is_valid_label(r.tool_label) || r.tool_label == protocol::kResultLabel ||
            r.tool_label == protocol::kOutputLabel) {
            throw SchemaError(line_no, "tool_label", "invalid tool label '" + r.tool_label + "'");
        }
        try {
            (void)to_sequence(r);
        } catch (const Error& e) {
            throw SchemaError(line_no, "<record>", std::string("not a renderable sequence: ") + e.what());
        }
        records.push_back(std::move(r));
    });
    return records;
}

ToolUseSet load_tool_use_set(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_tool_use_set(in);
}

std::string record_to_json_line(const ToolUseRecord& r) {
    ordered j;
    j["id"] = r.id;
    j["input"] = r.input;
    j["tool_label"] = r.tool_label;
    j["tool_input"] = r.tool_input;
    j["tool_output"] = r.tool_output;
    j["output"] = r.output;
    j["round"] = r.round;
    j["provenance"] = std::string(to_string(r.provenance));
    return dump_line(j);
}

void write_tool_use_set(std::ostream& out, const ToolUseSet& records) {
    for (const auto& r : records) out << record_to_json_line(r) << '\n';
}

void save_tool_use_set(const std::filesystem::path& path, const ToolUseSet& records) {
    std::ostringstream out;
    write_tool_use_set(out, records);
    write_file_atomic(path, out.str());
}

// ---------------------------------------------------------------------------
// Corpora

std::vector<bm25::Document> load_corpus(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<bm25::Document> docs;
    for_each_line(in, [&](const std::string& line, std::size_t line_no) {
        const auto j = parse_line(line, line_no);
        docs.push_back({required_string(j, "doc_id", line_no), required_string(j, "text", line_no, true)});
    });
    return docs;
}

void save_corpus(const std::filesystem::path& path, const std::vector<bm25::Document>& docs) {
    std::string out;
    for (const auto& d : docs) {
        ordered j;
        j["doc_id"] = d.doc_id;
        j["text"] = d.text;
        out += dump_line(j);
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<bm25::Document> build_corpus_from_contexts(const TaskSetFile& tasks) {
    std::vector<std::string> missing;
    std::vector<bm25::Document> docs;
    std::unordered_set<std::string> seen;
    for (const auto& t : tasks.records) {
        if (!t.context || t.context->empty()) {
            missing.push_back(t.id);
            continue;
        }
        if (seen.insert(*t.context).second) {
            docs.push_back({"ctx-" + hex64(fnv1a64(*t.context)), *t.context});
        }
    }
    if (tasks.records.empty() || !missing.empty()) {
        std::string ids;
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) ids += (i ? ", " : "") + missing[i];
        if (missing.size() > 20) ids += ", ...";
        throw Error(ErrorCode::MissingContext,
                    tasks.records.empty() ? std::string("task set has no records")
                                          : std::to_string(missing.size()) + " record(s) without context: " + ids);
    }
    return docs;
}

// ---------------------------------------------------------------------------
// Files

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::IoError, "write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot rename into '" + path.string() + "': " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string file_digest(const std::filesystem::path& path) { return hex64(fnv1a64(read_file(path))); }

// ---------------------------------------------------------------------------
// Synthetic benchmark

namespace {

struct Template {
    formula::Op op;   // operator the template exercises
    int slots;        // number of operands
    int order;        // 0 free, 1 slot0 > slot1, 2 slot1 > slot0
    const char* text;
    const char* program;
};

// The average template needs both Add and Divide enabled.
constexpr Template kTemplates[] = {
    {formula::Op::Add, 2, 0, "{name} has {0} {item} and buys {1} more. How many {item} does {name} have now?",
     "Add({0}, {1})"},
    {formula::Op::Add, 2, 0,
     "A shop sold {0} {item} in the morning and {1} {item} in the afternoon. How many {item} were sold in total?",
     "Add({0}, {1})"},
    {formula::Op::Add, 2, 0, "What is the sum of {0} and {1}?", "Add({0}, {1})"},
    {formula::Op::Subtract, 2, 1, "{name} had {0} {item} and gave away {1}. How many {item} are left?",
     "Subtract({0}, {1})"},
    {formula::Op::Subtract, 2, 1,
     "A tank holds {0} liters of water. After {1} liters leak out, how many liters remain?",
     "Subtract({0}, {1})"},
    {formula::Op::Subtract, 2, 2,
     "{name} needs {0} more {item} to reach a total of {1}. How many {item} does {name} already have?",
     "Subtract({1}, {0})"},
    {formula::Op::Multiply, 2, 0, "Each box holds {0} {item}. How many {item} are in {1} boxes?",
     "Multiply({0}, {1})"},
    {formula::Op::Multiply, 2, 0, "A car travels at {0} miles per hour for {1} hours. How many miles does it travel?",
     "Multiply({0}, {1})"},
    {formula::Op::Multiply, 2, 0, "What is the product of {0} and {1}?", "Multiply({0}, {1})"},
    {formula::Op::Divide, 2, 1,
     "{name} shares {0} {item} equally among {1} friends. How many {item} does each friend get?",
     "Divide({0}, {1})"},
    {formula::Op::Divide, 2, 2,
     "A car is driving {0} miles per hour. How many hours does it take to travel {1} miles?",
     "Divide({1}, {0})"},
    {formula::Op::Divide, 2, 1, "What is {0} divided by {1}?", "Divide({0}, {1})"},
    {formula::Op::Divide, 3, 0,
     "If {name}'s test scores are {0}, {1} and {2} in 3 different subjects, what is the average score?",
     "Divide(Add({0}, Add({1}, {2})), 3)"},
};

constexpr const char* kNames[] = {"Lily", "Tom", "Ana", "Omar", "Priya", "Ken", "Sara", "Luis"};
constexpr const char* kItems[] = {"apples", "pencils", "stickers", "marbles", "cookies", "books"};

std::string fill(std::string_view pattern, const std::vector<std::string>& operands, std::string_view name,
                 std::string_view item) {
    std::string out;
    for (std::size_t i = 0; i < pattern.size();) {
        if (pattern[i] == '{') {
            const auto close = pattern.find('}', i);
            const auto key = pattern.substr(i + 1, close - i - 1);
            if (key == "name") {
                out += name;
            } else if (key == "item") {
                out += item;
            } else {
                out += operands.at(static_cast<std::size_t>(key[0] - '0'));
            }
            i = close + 1;
        } else {
            out.push_back(pattern[i++]);
        }
    }
    return out;
}

bool enabled(const std::vector<formula::Op>& ops, formula::Op op) {
    return std::find(ops.begin(), ops.end(), op) != ops.end();
}

}  // namespace

void SyntheticSpec::validate() const {
    if (example_count == 0) throw Error(ErrorCode::ConfigError, "synthetic example_count must be >= 1");
    if (operand_min < 1 || operand_max - operand_min < 2) {
        throw Error(ErrorCode::ConfigError, "synthetic operand range must satisfy 1 <= min and max - min >= 2");
    }
    if (operand_max > 1'000'000'000) throw Error(ErrorCode::ConfigError, "synthetic operand_max too large");
    if (bootstrap_count > example_count) {
        throw Error(ErrorCode::ConfigError, "bootstrap_count exceeds example_count");
    }
    if (ops.empty()) throw Error(ErrorCode::ConfigError, "synthetic operator subset is empty");
    for (const auto op : ops) {
        if (op != formula::Op::Add && op != formula::Op::Subtract && op != formula::Op::Multiply &&
            op != formula::Op::Divide) {
            throw Error(ErrorCode::ConfigError,
                        "synthetic operator '" + std::string(formula::op_name(op)) + "' has no templates");
        }
    }
    if (!protocol::is_valid_label(tool_label)) throw Error(ErrorCode::ConfigError, "invalid tool label");
}

SyntheticSet generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::vector<const Template*> templates;
    for (const auto& t : kTemplates) {
        if (!enabled(spec.ops, t.op)) continue;
        if (t.slots == 3 && !enabled(spec.ops, formula::Op::Add)) continue;
        templates.push_back(&t);
    }

    Rng rng(mix_seed(spec.seed, 0x53594e54));
    SyntheticSet out;
    out.tasks.kind = TaskKind::Synthetic;
    const auto width = std::max<std::size_t>(4, std::to_string(spec.example_count - 1).size());
    for (std::size_t i = 0; i < spec.example_count; ++i) {
        const auto& tpl = *templates[rng.below(templates.size())];
        std::vector<std::int64_t> values;
        while (values.size() < static_cast<std::size_t>(tpl.slots)) {
            const auto v = rng.between(spec.operand_min, spec.operand_max);
            if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
        }
        if ((tpl.order == 1 && values[0] < values[1]) || (tpl.order == 2 && values[1] < values[0])) {
            std::swap(values[0], values[1]);
        }
        std::vector<std::string> operands;
        for (const auto v : values) operands.push_back(std::to_string(v));
        const auto name = kNames[rng.below(std::size(kNames))];
        const auto item = kItems[rng.below(std::size(kItems))];

        auto id = std::to_string(i);
        id.insert(0, width - std::min(width, id.size()), '0');

        TaskExample task;
        task.id = spec.id_prefix + "-" + id;
        task.input = fill(tpl.text, operands, name, item);
        task.formula = fill(tpl.program, operands, name, item);
        const double value = formula::eval_formula(formula::parse_formula(*task.formula));
        task.target = format_fixed_trimmed(value, 2);

        if (i < spec.bootstrap_count) {
            ToolUseRecord r;
            r.id = task.id;
            r.input = task.input;
            r.tool_label = spec.tool_label;
            r.tool_input = *task.formula;
            r.tool_output = format_value(value);
            r.output = task.target;
            r.round = 0;
            r.provenance = Provenance::Bootstrap;
            out.bootstrap.push_back(std::move(r));
        }
        out.tasks.records.push_back(std::move(task));
    }
    return out;
}

SyntheticSpec large_number_spec(std::uint64_t seed, std::size_t count) {
    SyntheticSpec spec;
    spec.example_count = count;
    spec.operand_min = 10'000;
    spec.operand_max = 1'000'000;
    spec.seed = seed;
    spec.bootstrap_count = 0;
    spec.id_prefix = "ood";
    return spec;
}

}  // namespace talm::data
