// SPDX-License-Identifier: Apache-2.0
#include "talm/conformance.hpp"

#include <functional>
#include <sstream>

#include "talm/error.hpp"
#include "talm/text.hpp"

namespace talm::gen {

namespace {

ToolUseSet default_update_dataset() {
    ToolUseSet d;
    d.push_back({"c1", "What is the sum of 12 and 30?", "formula", "Add(12, 30)", "42", "42", 0, Provenance::Bootstrap});
    d.push_back({"c2", "Each box holds 6 apples. How many apples are in 7 boxes?", "formula", "Multiply(6, 7)", "42",
                 "42", 0, Provenance::Bootstrap});
    return d;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (const char c : s.substr(0, 80)) out += c == '\n' ? std::string("\\n") : std::string(1, c);
    if (s.size() > 80) out += "...";
    return out + "\"";
}

std::string describe(const GenerateResponse& r) {
    return quote(r.text) + " (" + std::string(to_string(r.stop.kind)) +
           (r.stop.marker.empty() ? "" : " " + quote(r.stop.marker)) + ")";
}

// A failing expectation inside a check.
struct CheckFailure {
    std::string detail;
};

void expect(bool ok, const std::string& detail) {
    if (!ok) throw CheckFailure{detail};
}

class Suite {
public:
    Suite(Generator& gen, const ConformanceOptions& options) : gen_(gen), options_(options) {}

    void run(const std::string& name, const std::function<std::string()>& body) {
        CheckResult result{name, CheckStatus::Pass, {}};
        try {
            result.detail = body();
        } catch (const CheckFailure& f) {
            result.status = CheckStatus::Fail;
            result.detail = f.detail;
        } catch (const Error& e) {
            result.status = CheckStatus::Fail;
            result.detail = std::string("unexpected ") + std::string(to_string(e.code())) + ": " + e.what();
        } catch (const std::exception& e) {
            result.status = CheckStatus::Fail;
            result.detail = std::string("unexpected exception: ") + e.what();
        }
        report_.checks.push_back(std::move(result));
    }

    void skip(const std::string& name, const std::string& why) {
        report_.checks.push_back({name, CheckStatus::Skipped, why});
    }

    GenerateResponse call(const std::string& prefix, std::vector<std::string> stops, std::size_t max_chars,
                          SamplingSpec sampling) {
        return gen_.generate({prefix, std::move(stops), max_chars, sampling});
    }

    void check_contract(const GenerateResponse& r, const std::vector<std::string>& stops, std::size_t max_chars) {
        expect(honors_stop_contract(r, stops, max_chars),
               "response " + describe(r) + " breaks the stop contract for max_chars=" + std::to_string(max_chars));
        if (r.stop.kind == StopKind::Marker) {
            bool requested = false;
            for (const auto& s : stops) requested |= s == r.stop.marker;
            expect(requested && r.text.ends_with(r.stop.marker), "marker stop " + describe(r) + " is not a requested stop");
        }
    }

    ConformanceReport finish() { return std::move(report_); }

    Generator& gen_;
    const ConformanceOptions& options_;

private:
    ConformanceReport report_;
};

}  // namespace

std::string_view to_string(CheckStatus status) noexcept {
    switch (status) {
        case CheckStatus::Pass: return "PASS";
        case CheckStatus::Fail: return "FAIL";
        case CheckStatus::Skipped: return "SKIP";
    }
    return "?";
}

bool ConformanceReport::passed() const noexcept { return count(CheckStatus::Fail) == 0; }

std::size_t ConformanceReport::count(CheckStatus status) const noexcept {
    std::size_t n = 0;
    for (const auto& c : checks) n += c.status == status;
    return n;
}

const CheckResult* ConformanceReport::find(std::string_view name) const noexcept {
    for (const auto& c : checks) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

std::string ConformanceReport::summary() const {
    std::ostringstream out;
    for (const auto& c : checks) {
        out << to_string(c.status) << ' ' << c.name;
        if (!c.detail.empty()) out << ": " << c.detail;
        out << '\n';
    }
    out << count(CheckStatus::Pass) << " passed, " << count(CheckStatus::Fail) << " failed, "
        << count(CheckStatus::Skipped) << " skipped\n";
    return out.str();
}

ConformanceReport conformance_check(Generator& generator, const ConformanceOptions& options) {
    Suite suite(generator, options);
    const auto caps = generator.capabilities();
    const auto& probes = options.probe_prefixes;
    const auto greedy = SamplingSpec::greedy();
    SamplingSpec seeded;
    seeded.seed = 42;

    suite.run("capabilities", [&] {
        expect(caps.concurrent_requests >= 1, "concurrent_requests must be at least 1");
        expect(generator.kind() != GeneratorKind::Scripted || !caps.supports_update,
               "scripted generators must not claim update support");
        return "update=" + std::string(caps.supports_update ? "yes" : "no") +
               " beam=" + std::string(caps.supports_beam ? "yes" : "no") +
               " concurrent=" + std::to_string(caps.concurrent_requests);
    });

    // Give trainable generators something to say before the behavioral probes.
    const ToolUseSet dataset = options.update_dataset.empty() ? default_update_dataset() : options.update_dataset;
    std::string warmup_note;
    if (caps.supports_update) {
        try {
            (void)generator.update(dataset);
        } catch (const Error& e) {
            warmup_note = std::string("warm-up update failed: ") + e.what();
        }
    }

    suite.run("max_chars_zero", [&] {
        for (const auto& p : probes) {
            for (const auto& mode : {greedy, seeded}) {
                const auto r = suite.call(p, {"|result"}, 0, mode);
                expect(r.text.empty() && r.stop.kind == StopKind::MaxChars,
                       "max_chars=0 must give empty text with max_chars stop, got " + describe(r));
            }
        }
        return std::string();
    });

    suite.run("stop_markers", [&] {
        const std::vector<std::vector<std::string>> stop_sets{
            {"|result"}, {"|"}, {" "}, {"e"}, {"|output", "|result"}, {}};
        std::size_t probes_run = 0;
        for (const auto& p : probes) {
            for (const auto& stops : stop_sets) {
                for (const auto& mode : {greedy, seeded}) {
                    const auto r = suite.call(p, stops, 2048, mode);
                    suite.check_contract(r, stops, 2048);
                    ++probes_run;
                }
            }
        }
        return std::to_string(probes_run) + " probes";
    });

    suite.run("max_chars_limit", [&] {
        for (const auto& p : probes) {
            for (const std::size_t limit : {1u, 5u, 17u}) {
                const auto r = suite.call(p, {"|result"}, limit, greedy);
                suite.check_contract(r, {"|result"}, limit);
                const auto full = suite.call(p, {"|result"}, 2048, greedy);
                if (utf8_length(full.text) > limit) {
                    expect(r.stop.kind == StopKind::MaxChars,
                           "cut text must report max_chars, got " + describe(r));
                }
            }
        }
        return std::string();
    });

    suite.run("greedy_determinism", [&] {
        for (const auto& p : probes) {
            const auto a = suite.call(p, {"|result"}, 2048, greedy);
            const auto b = suite.call(p, {"|result"}, 2048, greedy);
            expect(a == b, "greedy responses differ: " + describe(a) + " vs " + describe(b));
        }
        return std::string();
    });

    suite.run("seed_determinism", [&] {
        for (const auto& p : probes) {
            const auto a = suite.call(p, {"|result"}, 2048, seeded);
            const auto b = suite.call(p, {"|result"}, 2048, seeded);
            expect(a == b, "seeded random responses differ: " + describe(a) + " vs " + describe(b));
        }
        return std::string();
    });

    suite.run("update_versioning", [&] {
        if (!caps.supports_update) {
            try {
                (void)generator.update(dataset);
            } catch (const Error& e) {
                expect(e.code() == ErrorCode::CapabilityUnsupported,
                       "update without support must raise CapabilityUnsupported, got " +
                           std::string(to_string(e.code())));
                return std::string("refused with CapabilityUnsupported");
            }
            throw CheckFailure{"update succeeded although supports_update is false"};
        }
        expect(warmup_note.empty(), warmup_note);
        const auto v1 = generator.update(dataset);
        const auto before = suite.call(probes.front(), {"|result"}, 2048, greedy);
        const auto v2 = generator.update(dataset);
        const auto after = suite.call(probes.front(), {"|result"}, 2048, greedy);
        expect(v2.version > v1.version, "version did not increase: " + std::to_string(v1.version) + " then " +
                                            std::to_string(v2.version));
        expect(v1.examples_seen == dataset.size(), "examples_seen does not match the dataset size");
        expect(before == after, "repeating an update changed greedy behavior");
        try {
            (void)generator.update({});
            throw CheckFailure{"update on an empty dataset must fail"};
        } catch (const Error& e) {
            expect(e.code() == ErrorCode::EmptyDataset || e.code() == ErrorCode::GeneratorError,
                   "empty update raised " + std::string(to_string(e.code())));
        }
        return "versions " + std::to_string(v1.version) + " -> " + std::to_string(v2.version);
    });

    suite.run("beam", [&] {
        const auto beam = SamplingSpec::beam(4);
        if (!caps.supports_beam) {
            try {
                (void)suite.call(probes.front(), {"|result"}, 2048, beam);
            } catch (const Error& e) {
                expect(e.code() == ErrorCode::CapabilityUnsupported,
                       "beam without support must raise CapabilityUnsupported, got " +
                           std::string(to_string(e.code())));
                return std::string("refused with CapabilityUnsupported");
            }
            throw CheckFailure{"beam request served although supports_beam is false"};
        }
        for (const auto& p : probes) {
            const auto a = suite.call(p, {"|result"}, 2048, beam);
            const auto b = suite.call(p, {"|result"}, 2048, beam);
            suite.check_contract(a, {"|result"}, 2048);
            expect(a == b, "beam responses differ: " + describe(a) + " vs " + describe(b));
        }
        return std::string();
    });

    return suite.finish();
}

}  // namespace talm::gen
