// SPDX-License-Identifier: Apache-2.0
#pragma once

// Canonical text form of a tool-augmented sequence:
//
//   |question how hot will it get in NYC today? |weather lookup region=NYC |result ... |output ...
//
// A delimiter is an unescaped '|' at the start of the text or after a single
// separating space, followed by a label and exactly one space. Literal bars and
// backslashes inside bodies are escaped as "\|" and "\\".

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace talm::protocol {

inline constexpr std::string_view kResultLabel = "result";
inline constexpr std::string_view kOutputLabel = "output";
inline constexpr std::string_view kDefaultInputLabel = "question";
inline constexpr std::string_view kResultMarker = "|result";
inline constexpr std::string_view kOutputMarker = "|output";

enum class SegmentKind { TaskInput, ToolCall, ToolResult, TaskOutput };

[[nodiscard]] std::string_view to_string(SegmentKind kind) noexcept;

struct Segment {
    SegmentKind kind = SegmentKind::TaskInput;
    std::string label;
    std::string body;

    friend bool operator==(const Segment&, const Segment&) = default;
};

struct Hop {
    Segment call;
    Segment result;

    friend bool operator==(const Hop&, const Hop&) = default;
};

struct ToolAugmentedSequence {
    Segment task_input;
    std::vector<Hop> hops;
    std::optional<Segment> task_output;

    [[nodiscard]] bool complete() const noexcept { return task_output.has_value(); }

    friend bool operator==(const ToolAugmentedSequence&, const ToolAugmentedSequence&) = default;
};

/// Lowercase letters, digits, '-' and '_'; non-empty.
[[nodiscard]] bool is_valid_label(std::string_view label) noexcept;

[[nodiscard]] Segment make_task_input(std::string body, std::string label = std::string(kDefaultInputLabel));
[[nodiscard]] Segment make_tool_call(std::string label, std::string body);
[[nodiscard]] Segment make_tool_result(std::string body);
[[nodiscard]] Segment make_task_output(std::string body);

[[nodiscard]] std::string escape_body(std::string_view body);
[[nodiscard]] std::string unescape_body(std::string_view raw);

/// "|label body" for a single segment.
[[nodiscard]] std::string render_segment(const Segment& segment);

/// A delimiter-separated piece of text before role assignment.
struct RawSegment {
    std::string label;
    std::string body;  // unescaped
    std::size_t offset = 0;
};

/// Splits canonical text into labelled pieces without assigning roles.
/// Throws Error(EmptyInput | MalformedDelimiter).
[[nodiscard]] std::vector<RawSegment> lex_segments(std::string_view text);

/// Throws Error with MalformedDelimiter, DanglingToolCall, HopLimitExceeded or EmptyInput.
[[nodiscard]] ToolAugmentedSequence parse_sequence(std::string_view text, std::size_t max_hops = 1);

/// Throws Error(InvariantViolation) when the sequence breaks a segment invariant.
[[nodiscard]] std::string render_sequence(const ToolAugmentedSequence& seq);

/// Rendered text of everything present followed by the separator space; this is
/// the prefix handed to a generator to continue from.
[[nodiscard]] std::string render_prefix(const ToolAugmentedSequence& seq);

void validate(const ToolAugmentedSequence& seq);

}  // namespace talm::protocol
