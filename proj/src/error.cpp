// SPDX-License-Identifier: Apache-2.0
#include "talm/error.hpp"

namespace talm {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::MalformedDelimiter: return "MalformedDelimiter";
        case ErrorCode::DanglingToolCall: return "DanglingToolCall";
        case ErrorCode::HopLimitExceeded: return "HopLimitExceeded";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::UnknownTool: return "UnknownTool";
        case ErrorCode::ToolFailure: return "ToolFailure";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::DuplicateDocId: return "DuplicateDocId";
        case ErrorCode::EmptyQuery: return "EmptyQuery";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::UnknownOperator: return "UnknownOperator";
        case ErrorCode::ArityError: return "ArityError";
        case ErrorCode::MathError: return "MathError";
        case ErrorCode::GeneratorError: return "GeneratorError";
        case ErrorCode::CapabilityUnsupported: return "CapabilityUnsupported";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::PersistenceError: return "PersistenceError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::MissingContext: return "MissingContext";
    }
    return "Unknown";
}

}  // namespace talm
