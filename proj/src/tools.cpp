// SPDX-License-Identifier: Apache-2.0
#include "talm/tools.hpp"

#include "talm/error.hpp"
#include "talm/formula.hpp"
#include "talm/protocol.hpp"
#include "talm/text.hpp"

namespace talm::tools {

FormulaTool::FormulaTool(std::string label) : desc_{std::move(label), true, true, 1000} {}

std::string FormulaTool::call(std::string_view input) const {
    try {
        return format_value(formula::eval_formula(formula::parse_formula(input)));
    } catch (const Error& e) {
        throw Error(ErrorCode::ToolFailure, std::string(to_string(e.code())) + ": " + e.what());
    }
}

SearchTool::SearchTool(std::shared_ptr<const bm25::Index> index, std::size_t k, std::string label,
                       std::size_t max_result_chars)
    : index_(std::move(index)), k_(k), desc_{std::move(label), true, true, max_result_chars} {
    if (!index_) throw Error(ErrorCode::ConfigError, "search tool needs an index");
    if (k_ == 0) throw Error(ErrorCode::ConfigError, "search tool k must be at least 1");
}

std::string SearchTool::call(std::string_view input) const {
    std::vector<bm25::Hit> hits;
    try {
        hits = index_->search(input, k_);
    } catch (const Error& e) {
        throw Error(ErrorCode::ToolFailure, e.what());
    }
    if (hits.empty()) throw Error(ErrorCode::ToolFailure, "no matching document");
    std::string out;
    for (const auto& hit : hits) {
        if (!out.empty()) out.push_back(' ');
        out += index_->find(hit.doc_id)->text;
    }
    return out;
}

std::string SearchTool::describe() const {
    return desc_.label + " (bm25 k1=" + format_roundtrip(index_->params().k1) +
           " b=" + format_roundtrip(index_->params().b) + " docs=" + std::to_string(index_->doc_count()) +
           " top_k=" + std::to_string(k_) + ")";
}

void ToolRegistry::add(std::shared_ptr<const Tool> tool) {
    if (!tool) throw Error(ErrorCode::ConfigError, "null tool");
    const auto& desc = tool->descriptor();
    if (!protocol::is_valid_label(desc.label) || desc.label == protocol::kResultLabel ||
        desc.label == protocol::kOutputLabel) {
        throw Error(ErrorCode::ConfigError, "invalid tool label '" + desc.label + "'");
    }
    if (desc.max_result_chars == 0) throw Error(ErrorCode::ConfigError, "max_result_chars must be > 0");
    if (!tools_.emplace(desc.label, std::move(tool)).second) {
        throw Error(ErrorCode::ConfigError, "tool '" + desc.label + "' registered twice");
    }
}

bool ToolRegistry::contains(std::string_view label) const { return tools_.find(label) != tools_.end(); }

const Tool* ToolRegistry::find(std::string_view label) const {
    auto it = tools_.find(label);
    return it == tools_.end() ? nullptr : it->second.get();
}

std::vector<std::string> ToolRegistry::labels() const {
    std::vector<std::string> out;
    for (const auto& [label, _] : tools_) out.push_back(label);
    return out;
}

std::vector<std::string> ToolRegistry::describe() const {
    std::vector<std::string> out;
    for (const auto& [_, tool] : tools_) out.push_back(tool->describe());
    return out;
}

std::string ToolRegistry::invoke(std::string_view label, std::string_view input) const {
    const Tool* tool = find(label);
    if (!tool) throw Error(ErrorCode::UnknownTool, "no tool registered for '|" + std::string(label) + "'");
    calls_.fetch_add(1);
    auto out = tool->call(input);
    const auto limit = tool->descriptor().max_result_chars;
    if (utf8_length(out) > limit) out = std::string(utf8_prefix(out, limit));
    return out;
}

}  // namespace talm::tools
