// SPDX-License-Identifier: Apache-2.0
#include "talm/scripted.hpp"

#include <fstream>
#include <limits>
#include <json.hpp>

#include "talm/error.hpp"
#include "talm/protocol.hpp"

namespace talm::gen {

namespace {

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

protocol::ToolAugmentedSequence parse_prefix(std::string_view prefix) {
    if (!prefix.empty() && prefix.back() == ' ') prefix.remove_suffix(1);
    try {
        return protocol::parse_sequence(prefix, std::numeric_limits<std::size_t>::max());
    } catch (const Error& e) {
        throw Error(ErrorCode::GeneratorError, std::string("unparseable prefix: ") + e.what());
    }
}

}  // namespace

ScriptedGenerator::ScriptedGenerator(std::vector<ScriptRule> rules, std::string name)
    : rules_(std::move(rules)), name_(std::move(name)) {}

ScriptedGenerator ScriptedGenerator::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open script " + path.string());
    std::vector<ScriptRule> rules;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ScriptRule rule;
            rule.input = j.value("input", std::string("*"));
            rule.call = j.value("call", std::string());
            rule.output = j.value("output", std::string());
            rules.push_back(std::move(rule));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(lineno, "rule", e.what());
        }
    }
    return ScriptedGenerator(std::move(rules), path.string());
}

GenerateResponse ScriptedGenerator::generate(const GenerateRequest& request) {
    if (request.sampling.mode == SamplingMode::Beam) {
        throw Error(ErrorCode::CapabilityUnsupported, "scripted generator does not support beam decoding");
    }
    const auto seq = parse_prefix(request.prefix);
    const ScriptRule* rule = nullptr;
    for (const auto& r : rules_) {
        if (r.input == seq.task_input.body) {
            rule = &r;
            break;
        }
        if (!rule && r.input == "*") rule = &r;
    }
    std::string continuation;
    if (rule) {
        if (seq.hops.empty() && !rule->call.empty()) {
            continuation = rule->call;
        } else {
            const std::string result = seq.hops.empty() ? "" : protocol::escape_body(seq.hops.back().result.body);
            continuation = replace_all(rule->output, "{result}", result);
        }
    }
    return apply_stop_rules(continuation, request.stop_markers, request.max_chars);
}

std::vector<ScriptRule> oracle_rules(const std::vector<TaskExample>& tasks, std::string_view tool_label) {
    std::vector<ScriptRule> rules;
    for (const auto& t : tasks) {
        if (!t.formula) continue;
        rules.push_back({t.input, "|" + std::string(tool_label) + " " + protocol::escape_body(*t.formula) + " |result",
                         "|output {result}"});
    }
    return rules;
}

}  // namespace talm::gen
