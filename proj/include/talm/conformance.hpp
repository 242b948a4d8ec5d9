// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "talm/generator.hpp"

namespace talm::gen {

enum class CheckStatus { Pass, Fail, Skipped };

[[nodiscard]] std::string_view to_string(CheckStatus status) noexcept;

struct CheckResult {
    std::string name;
    CheckStatus status = CheckStatus::Pass;
    std::string detail;
};

struct ConformanceReport {
    std::vector<CheckResult> checks;

    [[nodiscard]] bool passed() const noexcept;
    [[nodiscard]] std::size_t count(CheckStatus status) const noexcept;
    [[nodiscard]] const CheckResult* find(std::string_view name) const noexcept;
    /// One "<status> <name>: <detail>" line per check.
    [[nodiscard]] std::string summary() const;
};

struct ConformanceOptions {
    /// Prefixes the probes continue; each must be canonical prefix text.
    std::vector<std::string> probe_prefixes{
        "|question What is the sum of 12 and 30? ",
        "|question What is the sum of 12 and 30? |formula Add(12, 30) |result 42 ",
        "|question Each box holds 6 apples. How many apples are in 7 boxes? ",
    };
    /// Used by the update check; the default is a two-record arithmetic set.
    ToolUseSet update_dataset;
};

/// Black-box protocol checks: handshake sanity, max_chars=0, stop-marker
/// honoring, max_chars limits, greedy and seeded-random determinism, update
/// versioning and beam support. Capability-gated checks pass when the
/// generator correctly refuses with CapabilityUnsupported. The update check
/// trains the generator, so run the suite on a disposable instance.
[[nodiscard]] ConformanceReport conformance_check(Generator& generator, const ConformanceOptions& options = {});

}  // namespace talm::gen
