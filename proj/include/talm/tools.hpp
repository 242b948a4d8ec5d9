// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "talm/bm25.hpp"

namespace talm::tools {

struct ToolDescriptor {
    std::string label;
    bool deterministic = true;
    bool concurrency_safe = true;
    std::size_t max_result_chars = 1000;
};

/// A text-to-text tool. Implementations throw Error(ToolFailure | Timeout) on failure.
class Tool {
public:
    virtual ~Tool() = default;
    [[nodiscard]] virtual const ToolDescriptor& descriptor() const = 0;
    [[nodiscard]] virtual std::string call(std::string_view input) const = 0;
    /// One-line description for run manifests.
    [[nodiscard]] virtual std::string describe() const { return descriptor().label; }
};

/// Evaluates MathQA-style formulas and renders the value with format_value().
class FormulaTool final : public Tool {
public:
    explicit FormulaTool(std::string label = "formula");
    [[nodiscard]] const ToolDescriptor& descriptor() const override { return desc_; }
    [[nodiscard]] std::string call(std::string_view input) const override;

private:
    ToolDescriptor desc_;
};

/// BM25 retrieval: concatenated text of the top-k documents.
class SearchTool final : public Tool {
public:
    SearchTool(std::shared_ptr<const bm25::Index> index, std::size_t k = 1, std::string label = "search",
               std::size_t max_result_chars = 1000);
    [[nodiscard]] const ToolDescriptor& descriptor() const override { return desc_; }
    [[nodiscard]] std::string call(std::string_view input) const override;
    [[nodiscard]] std::string describe() const override;

private:
    std::shared_ptr<const bm25::Index> index_;
    std::size_t k_;
    ToolDescriptor desc_;
};

/// Label -> tool map. Immutable once shared; invoke() is safe to call concurrently
/// for tools that declare concurrency_safe.
class ToolRegistry {
public:
    /// Throws Error(ConfigError) on an invalid or duplicate label.
    void add(std::shared_ptr<const Tool> tool);

    [[nodiscard]] bool contains(std::string_view label) const;
    [[nodiscard]] const Tool* find(std::string_view label) const;
    [[nodiscard]] std::vector<std::string> labels() const;
    [[nodiscard]] std::vector<std::string> describe() const;
    [[nodiscard]] bool empty() const noexcept { return tools_.empty(); }

    /// Output truncated to the tool's max_result_chars.
    /// Throws Error(UnknownTool) or whatever the tool raises.
    [[nodiscard]] std::string invoke(std::string_view label, std::string_view input) const;

    /// Number of tool invocations attempted through this registry.
    [[nodiscard]] std::size_t call_count() const noexcept { return calls_.load(); }

private:
    std::map<std::string, std::shared_ptr<const Tool>, std::less<>> tools_;
    mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace talm::tools
