// SPDX-License-Identifier: Apache-2.0
#include "talm/websearch.hpp"

#include <httplib.h>

#include <json.hpp>

#include "talm/error.hpp"

namespace talm::tools {

namespace {

std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const auto scheme = endpoint.find("://");
    if (scheme == std::string::npos) {
        throw Error(ErrorCode::ConfigError, "web search endpoint must include a scheme: " + endpoint);
    }
    const auto slash = endpoint.find('/', scheme + 3);
    if (slash == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, slash), endpoint.substr(slash)};
}

struct SlotGuard {
    std::counting_semaphore<1024>& sem;
    explicit SlotGuard(std::counting_semaphore<1024>& s) : sem(s) { sem.acquire(); }
    ~SlotGuard() { sem.release(); }
};

}  // namespace

WebSearchTool::WebSearchTool(WebSearchConfig config)
    : config_(std::move(config)),
      desc_{config_.label, false, true, config_.max_result_chars},
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(config_.max_concurrent, 1, 1024))) {
    std::tie(base_, path_) = split_endpoint(config_.endpoint);
    if (config_.timeout.count() <= 0) throw Error(ErrorCode::ConfigError, "web search timeout must be > 0");
}

WebSearchTool::~WebSearchTool() = default;

std::string WebSearchTool::call(std::string_view input) const {
    SlotGuard guard(slots_);

    httplib::Client client(base_);
    const auto sec = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - sec);
    client.set_connection_timeout(sec.count(), usec.count());
    client.set_read_timeout(sec.count(), usec.count());
    client.set_write_timeout(sec.count(), usec.count());

    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace(config_.api_key_header, config_.api_key);
    httplib::Params params{{config_.query_param, std::string(input)}};

    auto res = client.Get(path_, params, headers);
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
            throw Error(ErrorCode::Timeout, "web search timed out: " + httplib::to_string(err));
        }
        throw Error(ErrorCode::ToolFailure, "web search request failed: " + httplib::to_string(err));
    }
    if (res->status != 200) {
        throw Error(ErrorCode::ToolFailure, "web search returned HTTP " + std::to_string(res->status));
    }
    try {
        const auto body = nlohmann::json::parse(res->body);
        const auto& snippet = body.at(nlohmann::json::json_pointer(config_.snippet_pointer));
        return snippet.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ToolFailure, std::string("unexpected web search response: ") + e.what());
    }
}

std::string WebSearchTool::describe() const { return desc_.label + " (web " + config_.endpoint + ")"; }

}  // namespace talm::tools
