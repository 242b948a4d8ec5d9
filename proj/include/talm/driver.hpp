// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "talm/generator.hpp"
#include "talm/protocol.hpp"
#include "talm/tools.hpp"

namespace talm {

/// Why a generation leg stopped. ToolCallBoundary only fires on an emitted
/// "|result" delimiter; position is a byte offset into the sequence text.
struct StopEvent {
    enum class Reason { ToolCallBoundary, OutputComplete, EndOfText, BudgetExhausted };
    Reason reason = Reason::EndOfText;
    std::size_t position = 0;
};

enum class DriveStatus {
    Complete,
    UnknownTool,
    BudgetExhausted,
    GeneratorError,
    Malformed,
    HopLimitExceeded,
};

[[nodiscard]] std::string_view to_string(DriveStatus status) noexcept;

struct DriveOptions {
    std::string input_label = std::string(protocol::kDefaultInputLabel);
    /// Maximum characters generated per leg.
    std::size_t budget = 2048;
    std::size_t max_hops = 1;
    gen::SamplingSpec sampling;
};

struct DriveResult {
    protocol::ToolAugmentedSequence sequence;
    DriveStatus status = DriveStatus::Complete;
    /// A tool raised an error; "ERROR: <message>" was spliced as its result.
    bool tool_error = false;
    std::string error;
    /// The tool call that could not be dispatched (UnknownTool, HopLimitExceeded).
    std::optional<protocol::Segment> failed_call;
    std::vector<StopEvent> events;

    [[nodiscard]] bool complete() const noexcept {
        return status == DriveStatus::Complete && sequence.complete();
    }
    [[nodiscard]] std::string text() const { return protocol::render_sequence(sequence); }
};

/// Runs the generator from the task input, pausing at every "|result" delimiter
/// to invoke the named tool and splice its output before resuming. Generator
/// text past the delimiter is discarded; result bodies only ever come from the
/// registry. Failures are reported in the result, never thrown.
[[nodiscard]] DriveResult drive_generation(gen::Generator& generator, const tools::ToolRegistry& registry,
                                           std::string_view task_input, const DriveOptions& options = {});

}  // namespace talm
