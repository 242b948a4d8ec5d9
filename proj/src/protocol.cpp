// SPDX-License-Identifier: Apache-2.0
#include "talm/protocol.hpp"

#include "talm/error.hpp"

namespace talm::protocol {

namespace {

bool is_label_char(char c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
}

[[noreturn]] void malformed(std::size_t pos, const std::string& what) {
    throw Error(ErrorCode::MalformedDelimiter, what + " at offset " + std::to_string(pos));
}

bool is_reserved(std::string_view label) { return label == kResultLabel || label == kOutputLabel; }

}  // namespace

std::string_view to_string(SegmentKind kind) noexcept {
    switch (kind) {
        case SegmentKind::TaskInput: return "TaskInput";
        case SegmentKind::ToolCall: return "ToolCall";
        case SegmentKind::ToolResult: return "ToolResult";
        case SegmentKind::TaskOutput: return "TaskOutput";
    }
    return "Unknown";
}

bool is_valid_label(std::string_view label) noexcept {
    if (label.empty()) return false;
    for (char c : label) {
        if (!is_label_char(c)) return false;
    }
    return true;
}

Segment make_task_input(std::string body, std::string label) {
    return {SegmentKind::TaskInput, std::move(label), std::move(body)};
}

Segment make_tool_call(std::string label, std::string body) {
    return {SegmentKind::ToolCall, std::move(label), std::move(body)};
}

Segment make_tool_result(std::string body) {
    return {SegmentKind::ToolResult, std::string(kResultLabel), std::move(body)};
}

Segment make_task_output(std::string body) {
    return {SegmentKind::TaskOutput, std::string(kOutputLabel), std::move(body)};
}

std::string escape_body(std::string_view body) {
    std::string out;
    out.reserve(body.size());
    for (char c : body) {
        if (c == '|' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string unescape_body(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '\\' && i + 1 < raw.size() && (raw[i + 1] == '|' || raw[i + 1] == '\\')) {
            out.push_back(raw[++i]);
        } else {
            out.push_back(raw[i]);
        }
    }
    return out;
}

std::string render_segment(const Segment& segment) {
    std::string out;
    out.reserve(segment.label.size() + segment.body.size() + 2);
    out.push_back('|');
    out += segment.label;
    out.push_back(' ');
    out += escape_body(segment.body);
    return out;
}

std::vector<RawSegment> lex_segments(std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::EmptyInput, "empty sequence text");
    if (text.front() != '|') malformed(0, "sequence must begin with a delimiter");

    std::vector<RawSegment> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        // text[pos] is an unescaped '|'.
        std::size_t label_end = pos + 1;
        while (label_end < text.size() && is_label_char(text[label_end])) ++label_end;
        if (label_end == pos + 1) malformed(pos, "'|' not followed by a valid label");
        if (label_end >= text.size() || text[label_end] != ' ') {
            malformed(label_end, "delimiter label must be followed by one space");
        }
        const std::size_t body_start = label_end + 1;
        std::size_t i = body_start;
        std::size_t next = text.size();
        while (i < text.size()) {
            if (text[i] == '\\' && i + 1 < text.size()) {
                i += 2;
                continue;
            }
            if (text[i] == '|') {
                if (i == body_start || text[i - 1] != ' ') malformed(i, "unescaped '|' inside a body");
                next = i;
                break;
            }
            ++i;
        }
        const std::size_t body_end = next == text.size() ? text.size() : next - 1;
        out.push_back({std::string(text.substr(pos + 1, label_end - pos - 1)),
                       unescape_body(text.substr(body_start, body_end - body_start)), pos});
        pos = next;
    }
    return out;
}

ToolAugmentedSequence parse_sequence(std::string_view text, std::size_t max_hops) {
    auto raw = lex_segments(text);

    ToolAugmentedSequence seq;
    const auto& first = raw.front();
    if (is_reserved(first.label)) {
        malformed(first.offset, "sequence must start with a task input, found '|" + first.label + "'");
    }
    seq.task_input = make_task_input(first.body, first.label);

    std::optional<Segment> pending_call;
    for (std::size_t i = 1; i < raw.size(); ++i) {
        auto& piece = raw[i];
        if (seq.task_output) malformed(piece.offset, "segment after |output");
        if (piece.label == kResultLabel) {
            if (!pending_call) malformed(piece.offset, "|result without a preceding tool call");
            if (seq.hops.size() >= max_hops) {
                throw Error(ErrorCode::HopLimitExceeded,
                            "more than " + std::to_string(max_hops) + " tool hop(s)");
            }
            seq.hops.push_back({std::move(*pending_call), make_tool_result(std::move(piece.body))});
            pending_call.reset();
        } else if (pending_call) {
            throw Error(ErrorCode::DanglingToolCall,
                        "tool call '|" + pending_call->label + "' has no |result");
        } else if (piece.label == kOutputLabel) {
            seq.task_output = make_task_output(std::move(piece.body));
        } else {
            pending_call = make_tool_call(std::move(piece.label), std::move(piece.body));
        }
    }
    if (pending_call) {
        throw Error(ErrorCode::DanglingToolCall, "tool call '|" + pending_call->label + "' has no |result");
    }
    return seq;
}

void validate(const ToolAugmentedSequence& seq) {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvariantViolation, what); };
    auto check_label = [&](const Segment& s) {
        if (!is_valid_label(s.label)) fail("invalid label '" + s.label + "'");
    };
    check_label(seq.task_input);
    if (seq.task_input.kind != SegmentKind::TaskInput) fail("first segment must be a task input");
    if (is_reserved(seq.task_input.label)) fail("task input may not use a reserved label");
    for (const auto& hop : seq.hops) {
        check_label(hop.call);
        if (hop.call.kind != SegmentKind::ToolCall) fail("hop must start with a tool call");
        if (is_reserved(hop.call.label)) fail("tool call may not use a reserved label");
        if (hop.result.kind != SegmentKind::ToolResult || hop.result.label != kResultLabel) {
            fail("tool call must be followed by a |result segment");
        }
    }
    if (seq.task_output) {
        if (seq.task_output->kind != SegmentKind::TaskOutput || seq.task_output->label != kOutputLabel) {
            fail("task output must use the |output label");
        }
    }
}

std::string render_sequence(const ToolAugmentedSequence& seq) {
    validate(seq);
    std::string out = render_segment(seq.task_input);
    for (const auto& hop : seq.hops) {
        out.push_back(' ');
        out += render_segment(hop.call);
        out.push_back(' ');
        out += render_segment(hop.result);
    }
    if (seq.task_output) {
        out.push_back(' ');
        out += render_segment(*seq.task_output);
    }
    return out;
}

std::string render_prefix(const ToolAugmentedSequence& seq) {
    auto out = render_sequence(seq);
    out.push_back(' ');
    return out;
}

}  // namespace talm::protocol
