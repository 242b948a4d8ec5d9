// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "talm/protocol.hpp"

namespace talm {

/// One {x, y} pair of a task set.
struct TaskExample {
    std::string id;
    std::string input;
    std::string target;
    std::optional<std::string> context;  // QA oracle context
    std::optional<std::string> formula;  // gold formula for math tasks

    friend bool operator==(const TaskExample&, const TaskExample&) = default;
};

enum class Provenance { Bootstrap, SelfPlay };

[[nodiscard]] std::string_view to_string(Provenance p) noexcept;
[[nodiscard]] std::optional<Provenance> provenance_from_string(std::string_view s) noexcept;

/// One {x, t, r, y} tuple of the tool-use set.
struct ToolUseRecord {
    std::string id;
    std::string input;
    std::string tool_label;
    std::string tool_input;
    std::string tool_output;
    std::string output;
    int round = 0;
    Provenance provenance = Provenance::Bootstrap;

    friend bool operator==(const ToolUseRecord&, const ToolUseRecord&) = default;
};

using ToolUseSet = std::vector<ToolUseRecord>;

/// Complete single-hop sequence for a record; throws Error(InvariantViolation)
/// if the record cannot be rendered.
[[nodiscard]] protocol::ToolAugmentedSequence to_sequence(
    const ToolUseRecord& record, std::string_view input_label = protocol::kDefaultInputLabel);

[[nodiscard]] bool same_trajectory(const ToolUseRecord& a, const ToolUseRecord& b) noexcept;

}  // namespace talm
