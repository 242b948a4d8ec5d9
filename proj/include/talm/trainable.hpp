// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>

#include "talm/generator.hpp"

namespace talm::gen {

struct TrainableOptions {
    std::size_t ngram_order = 4;
    /// Numbers in the task input considered as formula operands.
    std::size_t max_slots = 4;
};

/// Desk-scale stand-in for a fine-tuned LM. It keeps the two halves of the
/// training objective separately: a tool-call policy (x -> t) and an answer
/// policy ((x, t, r) -> y).
///
/// Inputs seen during update are answered from an exact-match table (most
/// frequent continuation, ties to the lexicographically smaller text). Unseen
/// inputs are handled by abstracting every training record into a program
/// (tool input with the task's numbers replaced by slots, or an output as a
/// transformation of the tool result) and scoring each applicable program by a
/// character n-gram model of the inputs it was learned from. These scores are
/// the logits that Random, Greedy and Beam decoding operate on.
class TrainableGenerator final : public Generator {
public:
    explicit TrainableGenerator(TrainableOptions options = {});
    ~TrainableGenerator() override;

    [[nodiscard]] GeneratorKind kind() const override { return GeneratorKind::Trainable; }
    [[nodiscard]] Capabilities capabilities() const override { return {true, true, 64}; }
    [[nodiscard]] GenerateResponse generate(const GenerateRequest& request) override;
    UpdateReport update(const ToolUseSet& dataset) override;
    [[nodiscard]] std::string describe() const override;

    [[nodiscard]] std::uint64_t version() const noexcept { return version_.load(); }

    struct Model;

private:
    [[nodiscard]] std::shared_ptr<const Model> snapshot() const;

    TrainableOptions options_;
    mutable std::mutex mutex_;
    std::shared_ptr<const Model> model_;
    std::atomic<std::uint64_t> version_{0};
};

}  // namespace talm::gen
