// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "talm/records.hpp"

namespace talm::gen {

enum class SamplingMode { Random, Beam, Greedy };

[[nodiscard]] std::string_view to_string(SamplingMode mode) noexcept;
/// Accepts "random", "greedy", "beam". Throws Error(ConfigError).
[[nodiscard]] SamplingMode sampling_mode_from_string(std::string_view s);

struct SamplingSpec {
    SamplingMode mode = SamplingMode::Random;
    double temperature = 1.0;
    std::size_t top_k = 40;
    std::size_t beam_width = 4;
    std::uint64_t seed = 0;

    /// Throws Error(ConfigError) on temperature <= 0 (Random), top_k < 1 or beam_width < 1.
    void validate() const;

    [[nodiscard]] static SamplingSpec greedy() { return {SamplingMode::Greedy, 1.0, 40, 4, 0}; }
    [[nodiscard]] static SamplingSpec beam(std::size_t width) {
        return {SamplingMode::Beam, 1.0, 40, width, 0};
    }
};

enum class StopKind { Marker, MaxChars, EndOfText };

struct StopReason {
    StopKind kind = StopKind::EndOfText;
    std::string marker;  // set for Marker

    friend bool operator==(const StopReason&, const StopReason&) = default;
};

/// Wire names: "marker", "max_chars", "end_of_text".
[[nodiscard]] std::string_view to_string(StopKind kind) noexcept;
[[nodiscard]] StopKind stop_kind_from_string(std::string_view s);

struct GenerateRequest {
    std::string prefix;
    std::vector<std::string> stop_markers;
    std::size_t max_chars = 2048;
    SamplingSpec sampling;
};

struct GenerateResponse {
    std::string text;
    StopReason stop;

    friend bool operator==(const GenerateResponse&, const GenerateResponse&) = default;
};

enum class GeneratorKind { Scripted, Trainable, External };

[[nodiscard]] std::string_view to_string(GeneratorKind kind) noexcept;

struct Capabilities {
    bool supports_update = false;
    bool supports_beam = false;
    std::size_t concurrent_requests = 1;
};

struct UpdateReport {
    std::size_t examples_seen = 0;
    std::uint64_t version = 0;
};

/// The pluggable policy: text continuation under sampling controls, optionally
/// updatable from a tool-use set. generate() may be called concurrently up to
/// capabilities().concurrent_requests; update() must not overlap any generate().
class Generator {
public:
    virtual ~Generator() = default;

    [[nodiscard]] virtual GeneratorKind kind() const = 0;
    [[nodiscard]] virtual Capabilities capabilities() const = 0;
    /// Throws Error(GeneratorError | CapabilityUnsupported).
    [[nodiscard]] virtual GenerateResponse generate(const GenerateRequest& request) = 0;
    /// Throws Error(CapabilityUnsupported | EmptyDataset).
    virtual UpdateReport update(const ToolUseSet& dataset);
    /// One-line description for run manifests.
    [[nodiscard]] virtual std::string describe() const { return std::string(to_string(kind())); }
};

/// Cuts a raw continuation according to the request: the text ends right after
/// the earliest stop marker, or is limited to max_chars code points.
[[nodiscard]] GenerateResponse apply_stop_rules(std::string_view continuation,
                                                const std::vector<std::string>& stop_markers,
                                                std::size_t max_chars);

/// Checks a response against the stop contract: no marker occurs except as the
/// final characters when stop is Marker, and the length fits max_chars.
[[nodiscard]] bool honors_stop_contract(const GenerateResponse& response,
                                        const std::vector<std::string>& stop_markers,
                                        std::size_t max_chars);

}  // namespace talm::gen
