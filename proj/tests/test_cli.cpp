#include "bimsgc/evaluation.hpp"
#include "bimsgc/graph.hpp"
#include "cli.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace bimsgc;
using namespace bimsgc::testing;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "bimsgc");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// dataset + config shared by the end-to-end cases
struct Workspace {
    TempDir dir{"cli"};
    fs::path config;
    Workspace() {
        Graph g = generate_sbm(300, 3, 0.08, 0.01, 20, 5);
        g = split_planetoid(g, 10, 60, 120, 5);
        save_dataset(g, dir.path / "ds");
        config = dir.path / "cfg.json";
        std::ofstream(config) << R"({"dataset": "ds", "scales": [0.025, 0.05, 0.075, 0.1], "e1": 60, "e2": 60,
            "e_down": 20, "probe_epochs": 20, "lr": 0.01, "eval": {"trials": 2, "epochs": 60, "hidden": 16}})";
    }
    std::string path(const std::string& sub) const { return (dir.path / sub).string(); }
};

Workspace& ws() {
    static Workspace w;
    return w;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"condense", "--strategy", "other"}).code, 2);
    EXPECT_EQ(run({"evaluate", "--mode", "best"}).code, 2);
}

TEST(Cli, InvalidConfigNamesField) {
    TempDir dir("cli");
    std::ofstream(dir.path / "bad.json") << R"({"theta": 1.5})";
    Result r = run({"condense", "--config", (dir.path / "bad.json").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("theta"), std::string::npos) << r.err;
}

TEST(Cli, MissingDatasetIsIoError) {
    TempDir dir("cli");
    Result r = run({"condense", "--dataset", (dir.path / "absent").string(), "--out", dir.path.string()});
    EXPECT_EQ(r.code, 4) << r.err;
    EXPECT_EQ(run({"condense", "--out", dir.path.string()}).code, 2);
}

TEST(Cli, MissingFamilyIsIoError) {
    Result r = run({"evaluate", "--config", ws().config.string(), "--family", ws().path("nothing")});
    EXPECT_EQ(r.code, 4) << r.err;
}

TEST(Cli, DivergenceIsNumericError) {
    Result r = run({"condense", "--config", ws().config.string(), "--out", ws().path("diverge"), "--seed", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ofstream(ws().path("huge.json")) << R"({"dataset": "ds", "scales": [0.05, 0.1], "lr": 1e200, "e1": 50})";
    r = run({"condense", "--config", ws().path("huge.json"), "--out", ws().path("diverge")});
    EXPECT_EQ(r.code, 3) << r.err;
}

TEST(Cli, ThreadCapValidated) {
    ::setenv("BIMSGC_THREADS", "many", 1);
    Result r = run({"gradcheck"});
    ::unsetenv("BIMSGC_THREADS");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("BIMSGC_THREADS"), std::string::npos);
    ::setenv("BIMSGC_THREADS", "1", 1);
    r = run({"gradcheck"});
    ::unsetenv("BIMSGC_THREADS");
    EXPECT_EQ(r.code, 0);
}

TEST(Cli, GradcheckPassesAndNamesFault) {
    Result ok = run({"gradcheck", "--seed", "0"});
    EXPECT_EQ(ok.code, 0) << ok.err;
    EXPECT_NE(ok.out.find("gradcheck passed"), std::string::npos);
    Result bad = run({"gradcheck", "--inject-fault", "L_scib"});
    EXPECT_EQ(bad.code, 3);
    EXPECT_NE(bad.err.find("L_scib"), std::string::npos) << bad.err;
    EXPECT_EQ(run({"gradcheck", "--inject-fault", "nope"}).code, 2);
}

TEST(Cli, CondenseEvaluateMiReport) {
    const std::string out = ws().path("run_a");
    Result c = run({"condense", "--config", ws().config.string(), "--out", out});
    ASSERT_EQ(c.code, 0) << c.err;
    for (const char* f : {"manifest.json", "config.json", "timings.csv", "traces.csv", "selection.csv", "synth_meta.json",
                          "eigenbasis.csv", "edges_weighted.csv", "optimizer.bin"})
        EXPECT_TRUE(fs::exists(fs::path(out) / f)) << f;
    const std::string timings = slurp(fs::path(out) / "timings.csv");
    for (const char* phase : {"spectral", "select_meso", "meso", "down", "up"})
        EXPECT_NE(timings.find(std::string("\n") + phase + ","), std::string::npos) << phase;

    Result e = run({"evaluate", "--config", ws().config.string(), "--family", out, "--out", out});
    ASSERT_EQ(e.code, 0) << e.err;
    EvalReport rep = report_from_csv(slurp(fs::path(out) / "report.csv"));
    EXPECT_EQ(rep.cells.size(), 4u);
    EXPECT_EQ(rep.strategy, "bimsgc");
    EXPECT_EQ(rep.dataset, "ds");
    EXPECT_NE(e.out.find("| phase | seconds |"), std::string::npos);

    Result m = run({"mi", "--config", ws().config.string(), "--family", out, "--out", out, "--scales", "0.05,0.1"});
    ASSERT_EQ(m.code, 0) << m.err;
    const std::string mi = slurp(fs::path(out) / "mi.csv");
    EXPECT_EQ(std::count(mi.begin(), mi.end(), '\n'), 3);
    EXPECT_NE(mi.find("self_mi"), std::string::npos);

    Result r = run({"report", (fs::path(out) / "report.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("| scale (%) | gcn |"), std::string::npos);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    for (const char* tag : {"rep_1", "rep_2"}) {
        ASSERT_EQ(run({"condense", "--config", ws().config.string(), "--out", ws().path(tag), "--seed", "4"}).code, 0);
        ASSERT_EQ(run({"evaluate", "--config", ws().config.string(), "--family", ws().path(tag), "--out", ws().path(tag),
                       "--seed", "4", "--archs", "gcn,sgc", "--mode", "ranked"})
                      .code,
                  0);
    }
    for (const char* f : {"report.csv", "selection.csv", "traces.csv", "synth_meta.json", "eigenbasis.csv",
                          "optimizer.bin", "config.json"})
        EXPECT_EQ(slurp(fs::path(ws().path("rep_1")) / f), slurp(fs::path(ws().path("rep_2")) / f)) << f;
}

TEST(Cli, RecondenseWritesOneDirectoryPerScale) {
    const std::string out = ws().path("recon");
    Result c = run({"condense", "--config", ws().config.string(), "--out", out, "--strategy", "recondense"});
    ASSERT_EQ(c.code, 0) << c.err;
    int dirs = 0;
    for (const auto& e : fs::directory_iterator(out)) dirs += e.is_directory();
    EXPECT_EQ(dirs, 4);
    EXPECT_TRUE(fs::exists(fs::path(out) / "scale_0.025" / "synth_meta.json"));
    Result e = run({"evaluate", "--config", ws().config.string(), "--family", out, "--out", out, "--trials", "1"});
    ASSERT_EQ(e.code, 0) << e.err;
    EvalReport rep = report_from_csv(slurp(fs::path(out) / "report.csv"));
    EXPECT_EQ(rep.strategy, "recondense");
    EXPECT_NE(e.out.find("n/a"), std::string::npos);
}

TEST(Cli, TransferBaselines) {
    for (const char* s : {"large_to_small", "small_to_large"}) {
        const std::string out = ws().path(s);
        ASSERT_EQ(run({"condense", "--config", ws().config.string(), "--out", out, "--strategy", s}).code, 0) << s;
        ASSERT_EQ(run({"evaluate", "--config", ws().config.string(), "--family", out, "--out", out}).code, 0) << s;
        EXPECT_EQ(report_from_csv(slurp(fs::path(out) / "report.csv")).strategy, s);
    }
}

TEST(Cli, SelectMesoAndWholeGraph) {
    Result s = run({"select-meso", "--config", ws().config.string(), "--out", ws().path("sel")});
    ASSERT_EQ(s.code, 0) << s.err;
    const std::string csv = slurp(fs::path(ws().path("sel")) / "selection.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);  // header + three default candidates
    Result w = run({"evaluate", "--config", ws().config.string(), "--whole", "--out", ws().path("whole"), "--trials", "1"});
    ASSERT_EQ(w.code, 0) << w.err;
    EXPECT_TRUE(fs::exists(fs::path(ws().path("whole")) / "whole.csv"));
}
