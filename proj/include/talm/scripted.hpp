// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "talm/generator.hpp"

namespace talm::gen {

/// One scripted behaviour. `call` is emitted verbatim when the prefix has no
/// tool hop yet; otherwise `output` is emitted with every "{result}" replaced by
/// the (escaped) body of the last tool result.
struct ScriptRule {
    std::string input = "*";  // exact task-input body, or "*" for any
    std::string call;          // e.g. "|weather lookup region=NYC |result"
    std::string output;        // e.g. "|output today's high will be 20C"
};

/// Deterministic, stateless generator replaying fixed continuations. Ignores
/// sampling parameters; does not support update or beam decoding.
class ScriptedGenerator final : public Generator {
public:
    explicit ScriptedGenerator(std::vector<ScriptRule> rules, std::string name = "inline");

    /// JSONL, one rule per line: {"input": ..., "call": ..., "output": ...}.
    static ScriptedGenerator load(const std::filesystem::path& path);

    [[nodiscard]] GeneratorKind kind() const override { return GeneratorKind::Scripted; }
    [[nodiscard]] Capabilities capabilities() const override { return {false, false, 64}; }
    [[nodiscard]] GenerateResponse generate(const GenerateRequest& request) override;
    [[nodiscard]] std::string describe() const override { return "scripted:" + name_; }

    [[nodiscard]] const std::vector<ScriptRule>& rules() const noexcept { return rules_; }

private:
    std::vector<ScriptRule> rules_;
    std::string name_;
};

/// Rules that always call `tool_label` with each example's gold formula and
/// copy the tool result into the output.
[[nodiscard]] std::vector<ScriptRule> oracle_rules(const std::vector<TaskExample>& tasks,
                                                   std::string_view tool_label = "formula");

}  // namespace talm::gen
