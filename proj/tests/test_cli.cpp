// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "talm/cli.hpp"
#include "talm/datasets.hpp"
#include "talm/manifest.hpp"
#include "test_util.hpp"

using namespace talm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome talm_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

const std::string kBrewing =
    "The boiling process is where chemical reactions take place...including sterilization of the wort, "
    "and hops are added at different times during the boil.";

// Every regular file under dir, relative path -> bytes, manifests excluded.
std::map<std::string, std::string> outputs(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        files[fs::relative(e.path(), dir).string()] = data::read_file(e.path());
    }
    return files;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(talm_run({}).code == 2);
    CHECK(talm_run({"frobnicate"}).code == 2);
    CHECK(talm_run({"solve"}).code == 2);
    CHECK(talm_run({"search", "--index", "x"}).code == 2);
    const auto v = talm_run({"--version"});
    CHECK(v.code == 0);
    CHECK(v.out.find(cli::kVersion) != std::string::npos);
    CHECK(talm_run({"selfplay", "--help"}).code == 0);
}

TEST_CASE("solve") {
    const auto r = talm_run({"solve", "Divide(Add(85, Add(88, 95)), 3)"});
    CHECK(r.code == 0);
    CHECK(r.out == "89.3333333333\n");
    CHECK(talm_run({"solve", "Add(0, 0)"}).out == "0\n");
    const auto syntax = talm_run({"solve", "Add(1, 2"});
    CHECK(syntax.code == 3);
    CHECK(syntax.err.find("SyntaxError") != std::string::npos);
    CHECK(talm_run({"solve", "Divide(1, 0)"}).code == 3);

    test::TempDir dir;
    CHECK(talm_run({"solve", "Add(1, 2)", "--manifest", (dir / "m.json").string()}).code == 0);
    const auto m = read_manifest(dir / "m.json");
    CHECK(m.command == "solve");
    CHECK(m.config.at("result") == "3");
}

TEST_CASE("index and search") {
    test::TempDir dir;
    data::save_corpus(dir / "corpus.jsonl",
                      {{"brew", kBrewing}, {"paris", "Paris is the capital of France."}, {"hops", "Hops are flowers."}});
    const auto idx = (dir / "index.bin").string();
    CHECK(talm_run({"index", "--corpus", (dir / "corpus.jsonl").string(), "--out", idx}).code == 0);
    CHECK(fs::exists(idx + ".manifest.json"));
    const auto hit = talm_run({"search", "--index", idx, "--query", "brewing process", "--k", "1"});
    CHECK(hit.code == 0);
    CHECK(hit.out.starts_with("1\tbrew\t"));
    CHECK(talm_run({"search", "--index", idx, "--query", "zebra"}).out == "no matching documents\n");

    SUBCASE("errors") {
        const auto missing = talm_run({"index", "--corpus", (dir / "nope.jsonl").string(), "--out", idx});
        CHECK(missing.code == 2);
        CHECK(missing.err.find("IoError") != std::string::npos);
        CHECK(talm_run({"index", "--out", idx}).code == 2);
        CHECK(talm_run({"index", "--corpus", "a", "--tasks", "b", "--out", idx}).code == 2);
        test::spit(dir / "junk.bin", "not an index");
        CHECK(talm_run({"search", "--index", (dir / "junk.bin").string(), "--query", "x"}).code == 4);
        test::spit(dir / "bad.jsonl", "{\"doc_id\":1}\n");
        CHECK(talm_run({"index", "--corpus", (dir / "bad.jsonl").string(), "--out", idx}).code == 4);
    }
    SUBCASE("index built from QA contexts") {
        data::save_task_set(dir / "qa.jsonl", {{"q1", "what is brewing?", "boiling", kBrewing, std::nullopt}});
        const auto qidx = (dir / "qa.bin").string();
        CHECK(talm_run({"index", "--tasks", (dir / "qa.jsonl").string(), "--out", qidx}).code == 0);
        CHECK(talm_run({"search", "--index", qidx, "--query", "brewing process"}).out.find("ctx-") !=
              std::string::npos);
    }
}

TEST_CASE("check-validity") {
    test::TempDir dir;
    test::spit(dir / "mathqa.jsonl", test::validity_jsonl(test::validity_corpus()));
    const auto r = talm_run({"check-validity", "--mathqa", (dir / "mathqa.jsonl").string(), "--out", dir.path().string()});
    CHECK(r.code == 0);
    CHECK(r.out.starts_with("70.0% valid (140 of 200 records)\n"));
    CHECK(r.out.find("syntax_error: 10") != std::string::npos);
    CHECK(fs::exists(dir / "validity.json"));

    test::spit(dir / "fig.jsonl", R"j({"formula":"Divide(Add(85, Add(88, 95)), 3)","answer":"89.33"})j" "\n");
    CHECK(talm_run({"check-validity", "--mathqa", (dir / "fig.jsonl").string()}).out.starts_with(
        "100.0% valid (1 of 1 records)"));

    test::spit(dir / "empty.jsonl", "");
    const auto empty = talm_run({"check-validity", "--mathqa", (dir / "empty.jsonl").string()});
    CHECK(empty.code == 0);
    CHECK(empty.out.find("(0 of 0 records)") != std::string::npos);

    test::spit(dir / "broken.jsonl", "{\"answer\":\"1\"}\n");
    CHECK(talm_run({"check-validity", "--mathqa", (dir / "broken.jsonl").string()}).code == 4);
    CHECK(talm_run({"check-validity", "--mathqa", (dir / "none.jsonl").string()}).code == 2);
}

TEST_CASE("config errors exit 2") {
    test::TempDir dir;
    CHECK(talm_run({"synth", "--out", dir.path().string(), "--count", "60", "--bootstrap", "10"}).code == 0);
    const auto tasks = (dir / "tasks.jsonl").string();
    const auto boot = (dir / "bootstrap.jsonl").string();
    const auto out = (dir / "run").string();
    CHECK(talm_run({"selfplay", "--tasks", tasks, "--bootstrap", boot, "--rounds", "0", "--out", out}).code == 2);
    CHECK(talm_run({"selfplay", "--tasks", tasks, "--bootstrap", boot, "--temperature", "0", "--out", out}).code == 2);
    CHECK(talm_run({"selfplay", "--tasks", tasks, "--bootstrap", boot, "--generator", "gpt", "--out", out}).code == 2);
    CHECK(talm_run({"selfplay", "--tasks", tasks, "--bootstrap", boot, "--tools", "abacus", "--out", out}).code == 2);
    CHECK(talm_run({"selfplay", "--tasks", tasks, "--bootstrap", boot, "--threshold", "fuzzy", "--out", out}).code == 2);
    CHECK(talm_run({"selfplay", "--tasks", (dir / "x.jsonl").string(), "--bootstrap", boot, "--out", out}).code == 2);
    CHECK(talm_run({"synth", "--out", out, "--ops", "add,root"}).code == 2);
    CHECK(talm_run({"conformance", "--generator", "oracle"}).code == 2);
}

TEST_CASE("conformance command") {
    const auto r = talm_run({"conformance", "--generator", "trainable"});
    CHECK(r.code == 0);
    CHECK(r.out.find("PASS stop_markers") != std::string::npos);
    CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("eval command") {
    test::TempDir dir;
    REQUIRE(talm_run({"synth", "--out", dir.path().string(), "--count", "30", "--bootstrap", "10"}).code == 0);
    const auto tasks = (dir / "tasks.jsonl").string();
    const auto oracle = talm_run({"eval", "--tasks", tasks, "--generator", "oracle", "--out", (dir / "o").string()});
    CHECK(oracle.code == 0);
    CHECK(oracle.out.starts_with("accuracy 100% (30/30, greedy (beam unsupported))"));
    CHECK(data::read_file(dir / "o" / "curve.csv") == "round,accuracy,n,acceptance_rate\n0,1,30,0\n");

    const auto base = talm_run(
        {"eval", "--tasks", tasks, "--generator", "oracle", "--baseline", "--out", (dir / "b").string()});
    CHECK(base.out.starts_with("accuracy 0% (0/30"));
    CHECK(base.out.find("unknown_tool: 30") != std::string::npos);

    const auto trained = talm_run({"eval", "--tasks", tasks, "--train", (dir / "bootstrap.jsonl").string(), "--out",
                                   (dir / "t").string(), "--round", "0"});
    CHECK(trained.code == 0);
    CHECK(trained.out.find("beam:4") != std::string::npos);
}

TEST_CASE("qa tasks are scored by normalized exact match unless a threshold is given") {
    test::TempDir dir;
    test::spit(dir / "qa.jsonl",
               R"j({"id":"q1","input":"what gives beer its bitterness?","target":"Hops","context":")j" + kBrewing +
                   "\"}\n");
    test::spit(dir / "script.jsonl", R"j({"input":"*","call":"|search hops |result","output":"|output the hops."})j"
                                     "\n");
    const auto idx = (dir / "qa.idx").string();
    REQUIRE(talm_run({"index", "--tasks", (dir / "qa.jsonl").string(), "--out", idx}).code == 0);
    const std::vector<std::string> common{"eval", "--tasks", (dir / "qa.jsonl").string(), "--task-kind", "qa",
                                          "--generator", "scripted:" + (dir / "script.jsonl").string(),
                                          "--tools", "search:index=" + idx};
    auto args = common;
    args.insert(args.end(), {"--out", (dir / "auto").string()});
    CHECK(talm_run(args).out.starts_with("accuracy 100% (1/1"));
    args = common;
    args.insert(args.end(), {"--threshold", "numeric", "--out", (dir / "numeric").string()});
    CHECK(talm_run(args).out.starts_with("accuracy 0% (0/1"));
}

TEST_CASE("selfplay, resume and rerun reproduce byte-identical outputs") {
    test::TempDir dir;
    const auto data_dir = dir / "data";
    REQUIRE(talm_run({"synth", "--out", data_dir.string(), "--count", "60", "--bootstrap", "10", "--eval-count", "40",
                      "--seed", "3"})
                .code == 0);
    const std::vector<std::string> base{"selfplay",
                                        "--tasks",
                                        (data_dir / "tasks.jsonl").string(),
                                        "--bootstrap",
                                        (data_dir / "bootstrap.jsonl").string(),
                                        "--eval-tasks",
                                        (data_dir / "eval_tasks.jsonl").string(),
                                        "--rounds",
                                        "2",
                                        "--samples",
                                        "8",
                                        "--seed",
                                        "11"};
    auto with_out = [&](const fs::path& out, std::vector<std::string> extra = {}) {
        auto args = extra;
        args.insert(args.end(), base.begin(), base.end());
        args.push_back("--out");
        args.push_back(out.string());
        return args;
    };

    const auto first = talm_run(with_out(dir / "a"));
    REQUIRE(first.code == 0);
    CHECK(first.out.find("round 2:") != std::string::npos);
    const auto original = outputs(dir / "a");
    CHECK(original.count("tool_use_set.jsonl"));
    CHECK(original.count("curve.csv"));
    CHECK(original.count("rounds/round_002/report.json"));

    SUBCASE("rerun from the manifest") {
        const auto again = talm_run({"rerun", "--manifest", (dir / "a" / "manifest.json").string(), "--out",
                                     (dir / "b").string()});
        CHECK(again.code == 0);
        CHECK(again.err.empty());
        CHECK(outputs(dir / "b") == original);
    }
    SUBCASE("thread count does not change results") {
        REQUIRE(talm_run(with_out(dir / "c", {"--jobs", "4"})).code == 0);
        CHECK(outputs(dir / "c") == original);
    }
    SUBCASE("running again in the same directory resumes") {
        const auto resumed = talm_run(with_out(dir / "a"));
        CHECK(resumed.code == 0);
        CHECK(resumed.out.find("resumed after round 2") != std::string::npos);
        CHECK(outputs(dir / "a") == original);
        auto other = with_out(dir / "a");
        other[other.size() - 3] = "12";  // a different seed
        CHECK(talm_run(other).code == 2);
    }
    SUBCASE("changed inputs are reported") {
        auto tasks = data::read_file(data_dir / "eval_tasks.jsonl");
        test::spit(data_dir / "eval_tasks.jsonl", tasks + "\n");
        const auto again = talm_run({"rerun", "--manifest", (dir / "a" / "manifest.json").string(), "--out",
                                     (dir / "d").string()});
        CHECK(again.err.find("changed since the recorded run") != std::string::npos);
    }
}

TEST_CASE("rerun of other commands") {
    test::TempDir dir;
    REQUIRE(talm_run({"synth", "--out", (dir / "s1").string(), "--count", "25", "--eval-count", "5", "--ood-count",
                      "5"})
                .code == 0);
    CHECK(talm_run({"rerun", "--manifest", (dir / "s1" / "manifest.json").string(), "--out", (dir / "s2").string()})
              .code == 0);
    CHECK(outputs(dir / "s1") == outputs(dir / "s2"));

    const auto tasks = (dir / "s1" / "tasks.jsonl").string();
    REQUIRE(talm_run({"eval", "--tasks", tasks, "--train", (dir / "s1" / "bootstrap.jsonl").string(), "--out",
                      (dir / "e1").string()})
                .code == 0);
    CHECK(talm_run({"rerun", "--manifest", (dir / "e1" / "manifest.json").string(), "--out", (dir / "e2").string()})
              .code == 0);
    CHECK(outputs(dir / "e1") == outputs(dir / "e2"));

    SUBCASE("manifests that cannot be rerun") {
        auto m = read_manifest(dir / "e1" / "manifest.json");
        m.argv = {"rerun", "--manifest", "x"};
        write_manifest(dir / "loop.json", m);
        CHECK(talm_run({"rerun", "--manifest", (dir / "loop.json").string()}).code == 2);
        fs::remove(tasks);
        CHECK(talm_run({"rerun", "--manifest", (dir / "e1" / "manifest.json").string(), "--out",
                        (dir / "e3").string()})
                  .code == 2);
    }
}
