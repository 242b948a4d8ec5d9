// SPDX-License-Identifier: Apache-2.0
#include "talm/driver.hpp"

#include "talm/error.hpp"

namespace talm {

namespace {

std::string_view strip_leading_space(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\n' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    return s;
}

}  // namespace

std::string_view to_string(DriveStatus status) noexcept {
    switch (status) {
        case DriveStatus::Complete: return "Complete";
        case DriveStatus::UnknownTool: return "UnknownTool";
        case DriveStatus::BudgetExhausted: return "BudgetExhausted";
        case DriveStatus::GeneratorError: return "GeneratorError";
        case DriveStatus::Malformed: return "Malformed";
        case DriveStatus::HopLimitExceeded: return "HopLimitExceeded";
    }
    return "Unknown";
}

DriveResult drive_generation(gen::Generator& generator, const tools::ToolRegistry& registry,
                             std::string_view task_input, const DriveOptions& options) {
    if (!protocol::is_valid_label(options.input_label) || options.input_label == protocol::kResultLabel ||
        options.input_label == protocol::kOutputLabel) {
        throw Error(ErrorCode::ConfigError, "invalid task input label '" + options.input_label + "'");
    }
    const std::vector<std::string> stops{std::string(protocol::kResultMarker)};

    DriveResult res;
    res.sequence.task_input = protocol::make_task_input(std::string(task_input), options.input_label);

    auto fail = [&](DriveStatus status, std::string message) {
        res.status = status;
        res.error = std::move(message);
        return res;
    };

    while (true) {
        const auto prefix = protocol::render_prefix(res.sequence);
        gen::GenerateRequest request{prefix, stops, options.budget, options.sampling};

        gen::GenerateResponse response;
        try {
            response = generator.generate(request);
        } catch (const std::exception& e) {
            return fail(DriveStatus::GeneratorError, e.what());
        }
        // Enforce the stop contract even if the generator overran it.
        auto leg = gen::apply_stop_rules(response.text, stops, options.budget);
        if (leg.stop.kind == gen::StopKind::EndOfText && response.stop.kind == gen::StopKind::MaxChars) {
            leg.stop.kind = gen::StopKind::MaxChars;
        }
        const std::size_t end_offset = prefix.size() + leg.text.size();

        if (leg.stop.kind == gen::StopKind::Marker) {
            res.events.push_back({StopEvent::Reason::ToolCallBoundary, end_offset});
            std::string_view call = leg.text;
            call.remove_suffix(protocol::kResultMarker.size());
            if (!call.empty() && call.back() == ' ') call.remove_suffix(1);
            call = strip_leading_space(call);
            if (call.empty()) return fail(DriveStatus::Malformed, "|result without a preceding tool call");

            std::vector<protocol::RawSegment> pieces;
            try {
                pieces = protocol::lex_segments(call);
            } catch (const Error& e) {
                return fail(DriveStatus::Malformed, e.what());
            }
            if (pieces.size() != 1 || pieces[0].label == protocol::kOutputLabel ||
                pieces[0].label == protocol::kResultLabel) {
                return fail(DriveStatus::Malformed, "expected exactly one tool call before |result");
            }
            auto segment = protocol::make_tool_call(std::move(pieces[0].label), std::move(pieces[0].body));
            if (res.sequence.hops.size() >= options.max_hops) {
                res.failed_call = segment;
                return fail(DriveStatus::HopLimitExceeded,
                            "more than " + std::to_string(options.max_hops) + " tool hop(s)");
            }
            if (!registry.contains(segment.label)) {
                res.failed_call = segment;
                return fail(DriveStatus::UnknownTool, "no tool registered for '|" + segment.label + "'");
            }
            std::string result;
            try {
                result = registry.invoke(segment.label, segment.body);
            } catch (const std::exception& e) {
                res.tool_error = true;
                res.error = e.what();
                result = std::string("ERROR: ") + e.what();
            }
            res.sequence.hops.push_back({std::move(segment), protocol::make_tool_result(std::move(result))});
            continue;
        }

        const bool exhausted = leg.stop.kind == gen::StopKind::MaxChars;
        const auto body = strip_leading_space(leg.text);
        const auto no_output = exhausted ? DriveStatus::BudgetExhausted : DriveStatus::Malformed;
        if (body.empty()) {
            res.events.push_back({exhausted ? StopEvent::Reason::BudgetExhausted : StopEvent::Reason::EndOfText,
                                  end_offset});
            return fail(no_output, "generation ended without |output");
        }
        std::vector<protocol::RawSegment> pieces;
        try {
            pieces = protocol::lex_segments(body);
        } catch (const Error& e) {
            res.events.push_back({exhausted ? StopEvent::Reason::BudgetExhausted : StopEvent::Reason::EndOfText,
                                  end_offset});
            return fail(no_output, e.what());
        }
        if (!exhausted && pieces.size() == 1 && pieces[0].label == protocol::kOutputLabel) {
            res.sequence.task_output = protocol::make_task_output(std::move(pieces[0].body));
            res.events.push_back({StopEvent::Reason::OutputComplete, end_offset});
            res.status = DriveStatus::Complete;
            return res;
        }
        res.events.push_back({exhausted ? StopEvent::Reason::BudgetExhausted : StopEvent::Reason::EndOfText,
                              end_offset});
        return fail(no_output, exhausted ? "budget exhausted before the output ended"
                                         : "expected a single |output segment");
    }
}

}  // namespace talm
