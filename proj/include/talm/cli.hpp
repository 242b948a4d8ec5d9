// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "talm/error.hpp"
#include "talm/generator.hpp"
#include "talm/records.hpp"
#include "talm/tools.hpp"

namespace talm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDomain = 3;
inline constexpr int kExitIo = 4;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kWebSearchKeyEnv = "TALM_WEBSEARCH_API_KEY";

[[nodiscard]] int exit_code_for(ErrorCode code) noexcept;

/// "scripted:PATH", "oracle" (gold tool calls from the task file), "trainable",
/// "external:cmd=COMMAND" or "external:tcp=HOST:PORT". `tasks` feeds "oracle".
[[nodiscard]] std::unique_ptr<gen::Generator> make_generator(const std::string& spec,
                                                             const std::vector<TaskExample>& tasks = {});

/// Comma-separated tools, each "name[:key=value;key=value]":
/// "formula", "search:index=PATH;k=N", "websearch:endpoint=URL". "none" or an
/// empty string gives an empty registry.
[[nodiscard]] std::unique_ptr<tools::ToolRegistry> make_registry(const std::string& spec);

/// Runs one command line (without the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace talm::cli
