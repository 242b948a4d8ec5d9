// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace talm {

enum class ErrorCode {
    // protocol
    EmptyInput,
    MalformedDelimiter,
    DanglingToolCall,
    HopLimitExceeded,
    InvariantViolation,
    // tools
    UnknownTool,
    ToolFailure,
    Timeout,
    EmptyCorpus,
    DuplicateDocId,
    EmptyQuery,
    SyntaxError,
    UnknownOperator,
    ArityError,
    MathError,
    // generator
    GeneratorError,
    CapabilityUnsupported,
    EmptyDataset,
    // pipeline / io
    ConfigError,
    PersistenceError,
    IoError,
    SchemaError,
    MissingContext,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every typed failure raised by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Formula parse failures carry the byte offset of the offending input.
class FormulaSyntaxError : public Error {
public:
    FormulaSyntaxError(std::size_t position, const std::string& message)
        : Error(ErrorCode::SyntaxError,
                "syntax error at " + std::to_string(position) + ": " + message),
          position_(position) {}

    [[nodiscard]] std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class ArityError : public Error {
public:
    ArityError(std::string op, std::size_t got, std::size_t want)
        : Error(ErrorCode::ArityError, op + " expects " + std::to_string(want) +
                                           " argument(s), got " + std::to_string(got)),
          op_(std::move(op)), got_(got), want_(want) {}

    [[nodiscard]] const std::string& op() const noexcept { return op_; }
    [[nodiscard]] std::size_t got() const noexcept { return got_; }
    [[nodiscard]] std::size_t want() const noexcept { return want_; }

private:
    std::string op_;
    std::size_t got_;
    std::size_t want_;
};

/// JSONL schema violation; line numbers are 1-based.
class SchemaError : public Error {
public:
    SchemaError(std::size_t line, std::string field, const std::string& message)
        : Error(ErrorCode::SchemaError, "line " + std::to_string(line) + ": field '" + field +
                                            "': " + message),
          line_(line), field_(std::move(field)) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

}  // namespace talm
