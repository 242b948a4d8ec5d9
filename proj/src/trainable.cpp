// SPDX-License-Identifier: Apache-2.0
#include "talm/trainable.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

#include "talm/error.hpp"
#include "talm/ngram.hpp"
#include "talm/protocol.hpp"
#include "talm/sampling.hpp"
#include "talm/text.hpp"

namespace talm::gen {

namespace {

constexpr char kSlot = '\x01';
constexpr int kMaxRoundDecimals = 6;
constexpr std::size_t kMaxResultChars = 256;
constexpr std::size_t kCacheLimit = 200000;

std::string normalize_input(std::string_view x) {
    const auto numbers = scan_numbers(x);
    std::string out;
    out.reserve(x.size());
    std::size_t pos = 0;
    for (const auto& n : numbers) {
        out += to_lower_ascii(x.substr(pos, n.offset - pos));
        out.push_back('#');
        pos = n.offset + n.text.size();
    }
    out += to_lower_ascii(x.substr(pos));
    return out;
}

std::string normalize_result(std::string_view r) {
    std::string out = to_lower_ascii(r.substr(0, kMaxResultChars));
    for (auto& c : out) {
        if (c >= '0' && c <= '9') c = '0';
    }
    return out;
}

std::vector<NumberToken> input_slots(std::string_view x, std::size_t max_slots) {
    auto numbers = scan_numbers(x);
    if (numbers.size() > max_slots) numbers.resize(max_slots);
    return numbers;
}

// ---- tool-call programs -------------------------------------------------

enum class CallKind { CopyInput, Slots, Literal };

struct CallProgram {
    std::string label;
    CallKind kind = CallKind::Literal;
    std::string tmpl;
    std::size_t needed = 0;

    [[nodiscard]] std::string key() const {
        return label + '\x1f' + static_cast<char>('0' + static_cast<int>(kind)) + tmpl;
    }
};

std::string slot(std::size_t i) { return kSlot + std::to_string(i) + kSlot; }

CallProgram abstract_call(std::string_view x, const std::string& label, std::string_view t,
                          std::size_t max_slots) {
    if (t == x) return {label, CallKind::CopyInput, "", 0};
    const auto xs = input_slots(x, max_slots);
    std::vector<double> xv;
    for (const auto& n : xs) xv.push_back(parse_number(n.text).value_or(std::nan("")));

    CallProgram p{label, CallKind::Slots, "", 0};
    bool replaced = false;
    std::size_t pos = 0;
    for (const auto& n : scan_numbers(t)) {
        p.tmpl += t.substr(pos, n.offset - pos);
        pos = n.offset + n.text.size();
        const auto value = parse_number(n.text);
        std::size_t match = xs.size();
        for (std::size_t i = 0; value && i < xs.size(); ++i) {
            if (xv[i] == *value) {
                match = i;
                break;
            }
        }
        if (match < xs.size()) {
            p.tmpl += slot(match);
            p.needed = std::max(p.needed, match + 1);
            replaced = true;
        } else {
            p.tmpl += n.text;
        }
    }
    p.tmpl += t.substr(pos);
    if (!replaced) return {label, CallKind::Literal, std::string(t), 0};
    return p;
}

std::optional<std::string> instantiate(const CallProgram& p, std::string_view x,
                                       const std::vector<NumberToken>& xs) {
    switch (p.kind) {
        case CallKind::CopyInput: return std::string(x);
        case CallKind::Literal: return p.tmpl;
        case CallKind::Slots: break;
    }
    if (xs.size() < p.needed) return std::nullopt;
    std::string out;
    for (std::size_t i = 0; i < p.tmpl.size(); ++i) {
        if (p.tmpl[i] != kSlot) {
            out.push_back(p.tmpl[i]);
            continue;
        }
        const auto close = p.tmpl.find(kSlot, i + 1);
        out += xs[std::stoul(p.tmpl.substr(i + 1, close - i - 1))].text;
        i = close;
    }
    return out;
}

// "Name(<slot i>, <slot j>)" -> "Name"
std::optional<std::string> binary_function_name(const CallProgram& p) {
    if (p.kind != CallKind::Slots) return std::nullopt;
    const auto open = p.tmpl.find('(');
    if (open == std::string::npos || open == 0) return std::nullopt;
    const std::string name = p.tmpl.substr(0, open);
    for (char c : name) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return std::nullopt;
    }
    std::string rest = p.tmpl.substr(open);
    // Expect "(\1a\1, \1b\1)".
    if (rest.size() < 2 || rest.back() != ')') return std::nullopt;
    std::size_t i = 1;
    auto read_slot = [&]() -> bool {
        if (i >= rest.size() || rest[i] != kSlot) return false;
        const auto close = rest.find(kSlot, i + 1);
        if (close == std::string::npos) return false;
        i = close + 1;
        return true;
    };
    if (!read_slot()) return std::nullopt;
    if (rest.compare(i, 2, ", ") != 0) return std::nullopt;
    i += 2;
    if (!read_slot()) return std::nullopt;
    if (i + 1 != rest.size()) return std::nullopt;
    return name;
}

// ---- output programs ----------------------------------------------------

enum class OutputKind { Copy, Round, Literal };

struct OutputProgram {
    OutputKind kind = OutputKind::Copy;
    int decimals = 0;
    std::string literal;

    [[nodiscard]] std::string key() const {
        switch (kind) {
            case OutputKind::Copy: return "copy";
            case OutputKind::Round: return "round" + std::to_string(decimals);
            case OutputKind::Literal: return "literal\x1f" + literal;
        }
        return {};
    }
};

OutputProgram abstract_output(std::string_view r, std::string_view y) {
    if (y == r) return {OutputKind::Copy, 0, ""};
    if (const auto v = parse_number(r)) {
        for (int k = 0; k <= kMaxRoundDecimals; ++k) {
            if (format_fixed_trimmed(*v, k) == y) return {OutputKind::Round, k, ""};
        }
    }
    return {OutputKind::Literal, 0, std::string(y)};
}

std::optional<std::string> apply_output(const OutputProgram& p, std::string_view r) {
    switch (p.kind) {
        case OutputKind::Copy: return std::string(r);
        case OutputKind::Literal: return p.literal;
        case OutputKind::Round:
            if (const auto v = parse_number(r)) return format_fixed_trimmed(*v, p.decimals);
            return std::nullopt;
    }
    return std::nullopt;
}

std::string call_text(std::string_view label, std::string_view t) {
    return "|" + std::string(label) + " " + protocol::escape_body(t) + " " + std::string(protocol::kResultMarker);
}

std::string output_text(std::string_view y) {
    return std::string(protocol::kOutputMarker) + " " + protocol::escape_body(y);
}

std::string output_key(std::string_view x, std::string_view label, std::string_view t, std::string_view r) {
    std::string k;
    k.reserve(x.size() + label.size() + t.size() + r.size() + 3);
    k.append(x).push_back('\x1f');
    k.append(label).push_back('\x1f');
    k.append(t).push_back('\x1f');
    k.append(r);
    return k;
}

template <typename Program>
struct Learned {
    Program program;
    std::size_t count = 0;
    CharNgramModel model;
};

void add_candidate(std::map<std::string, double>& out, std::string text, double score) {
    auto [it, inserted] = out.emplace(std::move(text), score);
    if (!inserted) it->second = std::max(it->second, score);
}

std::vector<Candidate> to_candidates(const std::map<std::string, double>& scored) {
    std::vector<Candidate> out;
    out.reserve(scored.size());
    for (const auto& [text, score] : scored) out.push_back({text, score});
    return out;
}

}  // namespace

struct TrainableGenerator::Model {
    TrainableOptions options;
    std::size_t vocab = 2;
    std::size_t records = 0;

    std::unordered_map<std::string, std::map<std::string, std::size_t>> call_memo;
    std::unordered_map<std::string, std::map<std::string, std::size_t>> output_memo;

    std::vector<Learned<CallProgram>> call_programs;
    std::set<std::string> call_program_keys;
    std::map<std::string, std::set<std::string>> binary_functions;  // label -> names

    std::vector<Learned<OutputProgram>> output_programs;
    std::set<std::string> output_program_keys;

    struct Scored {
        std::vector<Candidate> generalized;
        std::vector<Candidate> memorized;
    };
    mutable std::mutex cache_mutex;
    mutable std::unordered_map<std::string, std::shared_ptr<const Scored>> cache;

    [[nodiscard]] double prior(std::size_t count, std::size_t programs) const {
        return std::log((static_cast<double>(count) + 1.0) / (static_cast<double>(records + programs)));
    }

    [[nodiscard]] Scored score_call(std::string_view x) const {
        Scored out;
        if (auto it = call_memo.find(std::string(x)); it != call_memo.end()) {
            for (const auto& [text, count] : it->second) {
                out.memorized.push_back({text, std::log(static_cast<double>(count))});
            }
        }
        const auto xn = normalize_input(x);
        const double len = static_cast<double>(xn.size() + 1);
        const auto xs = input_slots(x, options.max_slots);
        const double uniform = -len * std::log(static_cast<double>(vocab));
        const std::size_t programs = call_programs.size() + 1;

        std::map<std::string, double> scored;
        for (const auto& learned : call_programs) {
            auto t = instantiate(learned.program, x, xs);
            if (!t) continue;
            const double s = (prior(learned.count, programs) + learned.model.log_likelihood(xn, vocab)) / len;
            add_candidate(scored, call_text(learned.program.label, *t), s);
        }
        // Unobserved binary applications of functions seen in training.
        const double unseen = (prior(0, programs) + uniform) / len;
        for (const auto& [label, names] : binary_functions) {
            for (const auto& name : names) {
                for (std::size_t i = 0; i < xs.size(); ++i) {
                    for (std::size_t j = 0; j < xs.size(); ++j) {
                        if (i == j) continue;
                        CallProgram p{label, CallKind::Slots, name + "(" + slot(i) + ", " + slot(j) + ")",
                                      std::max(i, j) + 1};
                        if (call_program_keys.count(p.key())) continue;
                        add_candidate(scored, call_text(label, *instantiate(p, x, xs)), unseen);
                    }
                }
            }
        }
        out.generalized = to_candidates(scored);
        return out;
    }

    [[nodiscard]] Scored score_output(std::string_view x, const protocol::Hop& hop) const {
        Scored out;
        const auto& r = hop.result.body;
        if (auto it = output_memo.find(output_key(x, hop.call.label, hop.call.body, r)); it != output_memo.end()) {
            for (const auto& [text, count] : it->second) {
                out.memorized.push_back({text, std::log(static_cast<double>(count))});
            }
        }
        const auto rn = normalize_result(r);
        const double len = static_cast<double>(rn.size() + 1);
        const double uniform = -len * std::log(static_cast<double>(vocab));
        const std::size_t programs = output_programs.size() + 1;

        std::map<std::string, double> scored;
        for (const auto& learned : output_programs) {
            auto y = apply_output(learned.program, r);
            if (!y) continue;
            const double s = (prior(learned.count, programs) + learned.model.log_likelihood(rn, vocab)) / len;
            add_candidate(scored, output_text(*y), s);
        }
        const double unseen = (prior(0, programs) + uniform) / len;
        std::vector<OutputProgram> generic{{OutputKind::Copy, 0, ""}};
        for (int k = 0; k <= kMaxRoundDecimals; ++k) generic.push_back({OutputKind::Round, k, ""});
        for (const auto& p : generic) {
            if (output_program_keys.count(p.key())) continue;
            if (auto y = apply_output(p, r)) add_candidate(scored, output_text(*y), unseen);
        }
        out.generalized = to_candidates(scored);
        return out;
    }

    [[nodiscard]] std::shared_ptr<const Scored> cached(const std::string& prefix,
                                                       const protocol::ToolAugmentedSequence& seq) const {
        {
            std::lock_guard lock(cache_mutex);
            if (auto it = cache.find(prefix); it != cache.end()) return it->second;
        }
        auto scored = std::make_shared<const Scored>(seq.hops.empty() ? score_call(seq.task_input.body)
                                                                      : score_output(seq.task_input.body,
                                                                                     seq.hops.back()));
        std::lock_guard lock(cache_mutex);
        if (cache.size() >= kCacheLimit) cache.clear();
        cache.emplace(prefix, scored);
        return scored;
    }
};

TrainableGenerator::TrainableGenerator(TrainableOptions options) : options_(options) {
    if (options_.max_slots == 0) throw Error(ErrorCode::ConfigError, "max_slots must be >= 1");
    CharNgramModel probe(options_.ngram_order);  // validates the order
    (void)probe;
}

TrainableGenerator::~TrainableGenerator() = default;

std::shared_ptr<const TrainableGenerator::Model> TrainableGenerator::snapshot() const {
    std::lock_guard lock(mutex_);
    return model_;
}

std::string TrainableGenerator::describe() const {
    return "trainable(ngram_order=" + std::to_string(options_.ngram_order) +
           ", max_slots=" + std::to_string(options_.max_slots) + ")";
}

UpdateReport TrainableGenerator::update(const ToolUseSet& dataset) {
    if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "update needs at least one tool-use record");

    auto model = std::make_shared<Model>();
    model->options = options_;
    model->records = dataset.size();

    std::set<unsigned char> alphabet;
    std::map<std::string, std::size_t> call_index;
    std::map<std::string, std::size_t> output_index;
    for (const auto& rec : dataset) {
        ++model->call_memo[rec.input][call_text(rec.tool_label, rec.tool_input)];
        ++model->output_memo[output_key(rec.input, rec.tool_label, rec.tool_input, rec.tool_output)]
                            [output_text(rec.output)];

        const auto xn = normalize_input(rec.input);
        const auto rn = normalize_result(rec.tool_output);
        alphabet.insert(xn.begin(), xn.end());
        alphabet.insert(rn.begin(), rn.end());

        auto cp = abstract_call(rec.input, rec.tool_label, rec.tool_input, options_.max_slots);
        auto [cit, cnew] = call_index.emplace(cp.key(), model->call_programs.size());
        if (cnew) {
            if (auto name = binary_function_name(cp)) model->binary_functions[cp.label].insert(*name);
            model->call_program_keys.insert(cp.key());
            model->call_programs.push_back({std::move(cp), 0, CharNgramModel(options_.ngram_order)});
        }
        auto& learned_call = model->call_programs[cit->second];
        ++learned_call.count;
        learned_call.model.add(xn);

        auto op = abstract_output(rec.tool_output, rec.output);
        auto [oit, onew] = output_index.emplace(op.key(), model->output_programs.size());
        if (onew) {
            model->output_program_keys.insert(op.key());
            model->output_programs.push_back({std::move(op), 0, CharNgramModel(options_.ngram_order)});
        }
        auto& learned_output = model->output_programs[oit->second];
        ++learned_output.count;
        learned_output.model.add(rn);
    }
    // +2: end-of-text symbol and unseen characters.
    model->vocab = alphabet.size() + 2;

    std::lock_guard lock(mutex_);
    model_ = std::move(model);
    return {dataset.size(), ++version_};
}

GenerateResponse TrainableGenerator::generate(const GenerateRequest& request) {
    request.sampling.validate();
    const auto model = snapshot();

    std::string_view prefix = request.prefix;
    if (!prefix.empty() && prefix.back() == ' ') prefix.remove_suffix(1);
    protocol::ToolAugmentedSequence seq;
    try {
        seq = protocol::parse_sequence(prefix, std::numeric_limits<std::size_t>::max());
    } catch (const Error& e) {
        throw Error(ErrorCode::GeneratorError, std::string("unparseable prefix: ") + e.what());
    }

    std::string continuation;
    if (model && !seq.complete()) {
        const auto scored = model->cached(std::string(prefix), seq);
        const auto& memo = scored->memorized;
        Rng rng(mix_seed(request.sampling.seed, fnv1a64(request.prefix)));

        if (!memo.empty() && request.sampling.mode != SamplingMode::Random) {
            continuation = memo[pick(memo, request.sampling, rng)].text;
        } else {
            std::vector<Candidate> candidates = scored->generalized;
            double floor = 0.0;
            for (const auto& c : candidates) floor = std::min(floor, c.score);
            // Seen inputs: memorized continuations get a frequency bonus on top.
            for (const auto& m : memo) {
                const double bonus = std::log1p(std::exp(m.score));
                auto it = std::find_if(candidates.begin(), candidates.end(),
                                       [&](const Candidate& c) { return c.text == m.text; });
                if (it != candidates.end()) {
                    it->score += bonus;
                } else {
                    candidates.push_back({m.text, floor + bonus});
                }
            }
            if (!candidates.empty()) continuation = candidates[pick(candidates, request.sampling, rng)].text;
        }
    }
    return apply_stop_rules(continuation, request.stop_markers, request.max_chars);
}

}  // namespace talm::gen
