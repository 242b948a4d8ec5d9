// SPDX-License-Identifier: Apache-2.0
#include "talm/records.hpp"

namespace talm {

std::string_view to_string(Provenance p) noexcept {
    return p == Provenance::Bootstrap ? "bootstrap" : "self_play";
}

std::optional<Provenance> provenance_from_string(std::string_view s) noexcept {
    if (s == "bootstrap") return Provenance::Bootstrap;
    if (s == "self_play") return Provenance::SelfPlay;
    return std::nullopt;
}

protocol::ToolAugmentedSequence to_sequence(const ToolUseRecord& record, std::string_view input_label) {
    protocol::ToolAugmentedSequence seq;
    seq.task_input = protocol::make_task_input(record.input, std::string(input_label));
    seq.hops.push_back({protocol::make_tool_call(record.tool_label, record.tool_input),
                        protocol::make_tool_result(record.tool_output)});
    seq.task_output = protocol::make_task_output(record.output);
    protocol::validate(seq);
    return seq;
}

bool same_trajectory(const ToolUseRecord& a, const ToolUseRecord& b) noexcept {
    return a.input == b.input && a.tool_label == b.tool_label && a.tool_input == b.tool_input &&
           a.tool_output == b.tool_output && a.output == b.output;
}

}  // namespace talm
