#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "shapelab/cli.hpp"

using namespace shapelab;
namespace fs = std::filesystem;

namespace {

int call(std::vector<std::string> args)
{
    args.insert(args.begin(), "shapelab");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("shapelab_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const char* small_run = R"({
  "box": {"origin": [0, 0], "extent": [1, 1]},
  "nx": 32,
  "coefficients": {"kind": "identity"},
  "k": 1,
  "Lambda": 200,
  "eps": {"eps0": 1e-2, "eps_min": 1e-3},
  "optimizer": {"polish_rounds": 10},
  "diagnostics": {"points": 4}
})";

} // namespace

TEST(Cli, OracleDisk) { EXPECT_EQ(call({"oracle", "--case", "disk", "--lambda", "500"}), 0); }

TEST(Cli, UsageErrorsExitTwo)
{
    EXPECT_EQ(call({"optimize", "--confg", "x.json", "--out", "o"}), 2);
    EXPECT_EQ(call({}), 2);
    EXPECT_EQ(call({"oracle", "--case", "disk"}), 2);
    EXPECT_EQ(call({"oracle", "--case", "triangle"}), 2);
}

TEST(Cli, SchemaErrorExitsTwo)
{
    const auto dir = scratch("schema");
    write_text(dir / "bad.json", R"({"box": {"extent": [1, 1]}, "nx": 16, "Lambda": -1})");
    EXPECT_EQ(call({"eigen", "--config", (dir / "bad.json").string(), "--out", (dir / "out").string()}), 2);
    write_text(dir / "broken.json", "{ not json");
    EXPECT_EQ(call({"eigen", "--config", (dir / "broken.json").string(), "--out", (dir / "out").string()}), 2);
}

TEST(Cli, EigenOnSquare)
{
    const auto dir = scratch("eigen");
    write_text(dir / "sq.json", R"({"box": {"extent": [1, 1]}, "nx": 32, "coefficients": {"kind": "identity"}, "k": 3, "Lambda": 0})");
    ASSERT_EQ(call({"eigen", "--config", (dir / "sq.json").string(), "--out", (dir / "out").string()}), 0);
    const auto rep = nlohmann::json::parse(read_text(dir / "out" / "report.json"));
    const auto l = rep["basis"]["lambdas"].get<std::vector<double>>();
    ASSERT_EQ(l.size(), 3u);
    EXPECT_NEAR(l[0] / (2 * std::numbers::pi * std::numbers::pi), 1.0, 1e-2);
    EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "out" / "fields" / "u.ssf"));
    const auto man = nlohmann::json::parse(read_text(dir / "out" / "manifest.json"));
    EXPECT_EQ(man["files"].size(), 3u); // config, field, report
}

TEST(Cli, OptimizeDiagnoseAuditDeterministic)
{
    const auto dir = scratch("pipeline");
    write_text(dir / "c.json", small_run);
    const std::string cfg = (dir / "c.json").string();
    ASSERT_EQ(call({"optimize", "--config", cfg, "--out", (dir / "a").string()}), 0);
    ASSERT_EQ(call({"optimize", "--config", cfg, "--out", (dir / "b").string()}), 0);
    EXPECT_EQ(read_text(dir / "a" / "report.json"), read_text(dir / "b" / "report.json"));
    EXPECT_EQ(read_text(dir / "a" / "fields" / "phi.ssf"), read_text(dir / "b" / "fields" / "phi.ssf"));

    for (const char* d : {"a", "b"}) {
        ASSERT_EQ(call({"diagnose", "--run", (dir / d).string()}), 0);
        ASSERT_EQ(call({"audit", "--run", (dir / d).string(), "--trials", "12", "--seed", "3"}), 0);
    }
    EXPECT_EQ(read_text(dir / "a" / "diagnostics.json"), read_text(dir / "b" / "diagnostics.json"));
    EXPECT_EQ(read_text(dir / "a" / "audit.json"), read_text(dir / "b" / "audit.json"));

    const auto diag = nlohmann::json::parse(read_text(dir / "a" / "diagnostics.json"));
    EXPECT_EQ(diag["points"].size(), 4u);
    const auto man = nlohmann::json::parse(read_text(dir / "a" / "manifest.json"));
    bool listed = false;
    for (const auto& e : man["files"]) listed |= e["path"] == "diagnostics.json";
    EXPECT_TRUE(listed);

    // Single-thread and default worker counts agree.
    ASSERT_EQ(call({"--threads", "1", "diagnose", "--run", (dir / "a").string(), "--out", (dir / "t1").string()}), 0);
    EXPECT_EQ(read_text(dir / "t1" / "diagnostics.json"), read_text(dir / "a" / "diagnostics.json"));
    EXPECT_EQ(call({"diagnose", "--run", (dir / "a").string(), "--point", "0.5,0.7", "--out",
                    (dir / "p").string()}),
              0);
    EXPECT_EQ(nlohmann::json::parse(read_text(dir / "p" / "diagnostics.json"))["points"].size(), 1u);
}

TEST(Cli, DiagnoseRejectsEigenRun)
{
    const auto dir = scratch("noopt");
    write_text(dir / "sq.json", R"({"box": {"extent": [1, 1]}, "nx": 16, "coefficients": {"kind": "identity"}, "k": 1, "Lambda": 0})");
    ASSERT_EQ(call({"eigen", "--config", (dir / "sq.json").string(), "--out", (dir / "out").string()}), 0);
    EXPECT_EQ(call({"diagnose", "--run", (dir / "out").string()}), 1);
}

TEST(Cli, RenderWritesPgm)
{
    const auto dir = scratch("render");
    const Grid g({0, 0}, {1, 1}, 8, 4);
    Field f(g, 1);
    for (int j = 0; j <= 4; ++j) {
        for (int i = 0; i <= 8; ++i) f.at(0, i, j) = i + j;
    }
    write_field(f, dir / "f.ssf");
    ASSERT_EQ(call({"render", "--field", (dir / "f.ssf").string(), "--out", (dir / "img" / "f.pgm").string()}), 0);
    const std::string pgm = read_text(dir / "img" / "f.pgm");
    EXPECT_EQ(pgm.substr(0, 11), "P5 9 5 255\n");
    EXPECT_EQ(pgm.size(), 11u + 45u);
    EXPECT_TRUE(fs::exists(dir / "img" / "f.pgm.manifest.json"));
    EXPECT_EQ(call({"render", "--field", (dir / "f.ssf").string(), "--out", (dir / "x.pgm").string(), "--component",
                    "1"}),
              1);
}
