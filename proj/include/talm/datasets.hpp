// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSONL persistence for task sets, tool-use sets and corpora, plus the
// synthetic arithmetic benchmark.
//
//   TaskSet:    {"id","input","target","context"?,"formula"?}
//   ToolUseSet: {"id","input","tool_label","tool_input","tool_output","output","round","provenance"}
//   Corpus:     {"doc_id","text"}
//
// Writers emit fields in exactly this order, one compact object per line.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "talm/bm25.hpp"
#include "talm/formula.hpp"
#include "talm/records.hpp"

namespace talm::data {

enum class TaskKind { QA, Math, Synthetic };

[[nodiscard]] std::string_view to_string(TaskKind kind) noexcept;
/// "qa", "math", "synthetic". Throws Error(ConfigError).
[[nodiscard]] TaskKind task_kind_from_string(std::string_view s);

/// A formula that failed to parse under the solver grammar. Such records are
/// kept and flagged rather than rejected.
struct FormulaIssue {
    std::size_t line = 0;
    std::string id;
    std::string message;
};

struct TaskSetFile {
    TaskKind kind = TaskKind::Synthetic;
    std::vector<TaskExample> records;
    std::vector<FormulaIssue> formula_issues;
};

// Task sets. Throws IoError or SchemaError(line, field); line numbers are
// 1-based and blank lines are skipped but counted.
[[nodiscard]] TaskSetFile parse_task_set(std::istream& in, TaskKind kind);
[[nodiscard]] TaskSetFile load_task_set(const std::filesystem::path& path, TaskKind kind);
[[nodiscard]] std::string task_to_json_line(const TaskExample& task);
void write_task_set(std::ostream& out, const std::vector<TaskExample>& tasks);
void save_task_set(const std::filesystem::path& path, const std::vector<TaskExample>& tasks);

// Tool-use sets. Every record must render as a complete single-hop sequence.
[[nodiscard]] ToolUseSet parse_tool_use_set(std::istream& in);
[[nodiscard]] ToolUseSet load_tool_use_set(const std::filesystem::path& path);
[[nodiscard]] std::string record_to_json_line(const ToolUseRecord& record);
void write_tool_use_set(std::ostream& out, const ToolUseSet& records);
void save_tool_use_set(const std::filesystem::path& path, const ToolUseSet& records);

// Corpora.
[[nodiscard]] std::vector<bm25::Document> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<bm25::Document>& docs);

/// One document per distinct context, in order of first appearance; doc_id is
/// "ctx-" followed by the hex content hash. Throws Error(MissingContext) naming
/// the records without a context.
[[nodiscard]] std::vector<bm25::Document> build_corpus_from_contexts(const TaskSetFile& tasks);

/// Writes `content` to a sibling temporary file and renames it into place.
/// Throws Error(IoError).
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
[[nodiscard]] std::string read_file(const std::filesystem::path& path);
/// Hex FNV-1a 64 of the file's bytes.
[[nodiscard]] std::string file_digest(const std::filesystem::path& path);

struct SyntheticSpec {
    std::size_t example_count = 500;
    std::int64_t operand_min = 2;
    std::int64_t operand_max = 999;
    std::vector<formula::Op> ops{formula::Op::Add, formula::Op::Subtract, formula::Op::Multiply,
                                 formula::Op::Divide};
    std::uint64_t seed = 7;
    std::size_t bootstrap_count = 20;
    std::string id_prefix = "syn";
    std::string tool_label = "formula";

    /// Throws Error(ConfigError).
    void validate() const;
};

struct SyntheticSet {
    TaskSetFile tasks;
    ToolUseSet bootstrap;
};

/// Word problems drawn from fixed templates with known gold formulas. Targets
/// are the formula value rounded to two decimals; the bootstrap holds the first
/// bootstrap_count examples as complete tool-use records.
[[nodiscard]] SyntheticSet generate_synthetic(const SyntheticSpec& spec);

/// Operands 10^4..10^6, for probing generalization beyond the training range.
[[nodiscard]] SyntheticSpec large_number_spec(std::uint64_t seed, std::size_t count);

}  // namespace talm::data
