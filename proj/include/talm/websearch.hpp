// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>

#include "talm/tools.hpp"

namespace talm::tools {

struct WebSearchConfig {
    /// e.g. "http://localhost:8080/search"; the query is sent as ?<query_param>=...
    std::string endpoint;
    std::string query_param = "q";
    /// Sent as "<api_key_header>: <api_key>" when non-empty. Read from the
    /// environment by callers, never stored in manifests.
    std::string api_key;
    std::string api_key_header = "X-API-Key";
    /// JSON pointer to the snippet text in the response body.
    std::string snippet_pointer = "/results/0/snippet";
    std::chrono::milliseconds timeout{10000};
    std::size_t max_concurrent = 4;
    std::string label = "websearch";
    std::size_t max_result_chars = 1000;
};

/// External search-engine tool. Non-deterministic; at most max_concurrent
/// requests in flight; a request exceeding the timeout raises Error(Timeout).
class WebSearchTool final : public Tool {
public:
    explicit WebSearchTool(WebSearchConfig config);
    ~WebSearchTool() override;

    [[nodiscard]] const ToolDescriptor& descriptor() const override { return desc_; }
    [[nodiscard]] std::string call(std::string_view input) const override;
    [[nodiscard]] std::string describe() const override;

private:
    WebSearchConfig config_;
    ToolDescriptor desc_;
    std::string base_;  // scheme://host:port
    std::string path_;
    mutable std::counting_semaphore<1024> slots_;
};

}  // namespace talm::tools
