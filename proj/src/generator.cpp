// SPDX-License-Identifier: Apache-2.0
#include "talm/generator.hpp"

#include "talm/error.hpp"
#include "talm/text.hpp"

namespace talm::gen {

std::string_view to_string(SamplingMode mode) noexcept {
    switch (mode) {
        case SamplingMode::Random: return "random";
        case SamplingMode::Beam: return "beam";
        case SamplingMode::Greedy: return "greedy";
    }
    return "random";
}

SamplingMode sampling_mode_from_string(std::string_view s) {
    if (s == "random") return SamplingMode::Random;
    if (s == "greedy") return SamplingMode::Greedy;
    if (s == "beam") return SamplingMode::Beam;
    throw Error(ErrorCode::ConfigError, "unknown sampling mode '" + std::string(s) + "'");
}

void SamplingSpec::validate() const {
    if (mode == SamplingMode::Random && !(temperature > 0.0)) {
        throw Error(ErrorCode::ConfigError, "temperature must be > 0 for random sampling");
    }
    if (top_k < 1) throw Error(ErrorCode::ConfigError, "top_k must be >= 1");
    if (beam_width < 1) throw Error(ErrorCode::ConfigError, "beam_width must be >= 1");
}

std::string_view to_string(StopKind kind) noexcept {
    switch (kind) {
        case StopKind::Marker: return "marker";
        case StopKind::MaxChars: return "max_chars";
        case StopKind::EndOfText: return "end_of_text";
    }
    return "end_of_text";
}

StopKind stop_kind_from_string(std::string_view s) {
    if (s == "marker") return StopKind::Marker;
    if (s == "max_chars") return StopKind::MaxChars;
    if (s == "end_of_text") return StopKind::EndOfText;
    throw Error(ErrorCode::GeneratorError, "unknown stop_reason '" + std::string(s) + "'");
}

std::string_view to_string(GeneratorKind kind) noexcept {
    switch (kind) {
        case GeneratorKind::Scripted: return "scripted";
        case GeneratorKind::Trainable: return "trainable";
        case GeneratorKind::External: return "external";
    }
    return "external";
}

UpdateReport Generator::update(const ToolUseSet&) {
    throw Error(ErrorCode::CapabilityUnsupported,
                std::string(to_string(kind())) + " generator does not support update");
}

GenerateResponse apply_stop_rules(std::string_view continuation, const std::vector<std::string>& stop_markers,
                                  std::size_t max_chars) {
    if (max_chars == 0) return {"", {StopKind::MaxChars, ""}};

    std::size_t best_end = std::string_view::npos;
    std::string best_marker;
    for (const auto& marker : stop_markers) {
        if (marker.empty()) continue;
        const auto at = continuation.find(marker);
        if (at == std::string_view::npos) continue;
        const auto end = at + marker.size();
        if (end < best_end || (end == best_end && marker.size() > best_marker.size())) {
            best_end = end;
            best_marker = marker;
        }
    }
    const auto limited = utf8_prefix(continuation, max_chars);
    if (best_end != std::string_view::npos && best_end <= limited.size()) {
        return {std::string(continuation.substr(0, best_end)), {StopKind::Marker, best_marker}};
    }
    if (limited.size() < continuation.size()) return {std::string(limited), {StopKind::MaxChars, ""}};
    return {std::string(continuation), {StopKind::EndOfText, ""}};
}

bool honors_stop_contract(const GenerateResponse& response, const std::vector<std::string>& stop_markers,
                          std::size_t max_chars) {
    if (utf8_length(response.text) > max_chars) return false;
    std::string_view body = response.text;
    if (response.stop.kind == StopKind::Marker) {
        const auto& m = response.stop.marker;
        if (m.empty() || body.size() < m.size() || body.substr(body.size() - m.size()) != m) return false;
        // The marker is legitimate only if it was requested.
        bool requested = false;
        for (const auto& s : stop_markers) requested = requested || s == m;
        if (!requested) return false;
        body.remove_suffix(1);  // an earlier marker must not end before the final one
    }
    for (const auto& marker : stop_markers) {
        if (!marker.empty() && body.find(marker) != std::string_view::npos) return false;
    }
    return true;
}

}  // namespace talm::gen
