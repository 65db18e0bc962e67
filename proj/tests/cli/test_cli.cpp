// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "config.hpp"
#include "doctest.h"
#include "flowinv/errors.hpp"
#include "flowinv/report.hpp"
#include "oracles.hpp"

using namespace flowinv;
using flowinv::testing::read_file;
using flowinv::testing::TempDir;
using flowinv::testing::write_file;

namespace {

namespace fs = std::filesystem;

const fs::path kConfigs = FLOWINV_CONFIG_DIR;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "flowinv");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

// Keeps FLOWINV_SEED out of the way of tests that do not set it.
struct SeedEnvGuard {
  SeedEnvGuard() { unsetenv(cli::kSeedEnv); }
  ~SeedEnvGuard() { unsetenv(cli::kSeedEnv); }
};

// A two-moons MLP config that trains in well under a second.
std::string small_mlp_config(const std::string& extra = "") {
  return R"({
    "field": {"kind": "mlp", "training": {"steps": 150, "batch": 64}},
    "grid": {"steps": 12},
    "source": {"kind": "two_moons", "points": 16})" +
         extra + "}";
}

const char* kAttentionField =
    R"("field": {"kind": "attention"}, "grid": {"steps": 10}, "source": {"kind": "gaussian", "shape": [2, 6, 6]})";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("no arguments prints usage and exits 1") {
    const Outcome r = invoke({});
    CHECK(r.code == cli::kExitConfig);
    CHECK(contains(r.err, "usage: flowinv"));
  }

  TEST_CASE("help exits 0") {
    CHECK(invoke({"--help"}).code == cli::kExitOk);
    const Outcome r = invoke({"compare", "--help"});
    CHECK(r.code == cli::kExitOk);
    CHECK(contains(r.out, "--seed"));
  }

  TEST_CASE("unknown subcommand and unknown flag") {
    const Outcome sub = invoke({"transmogrify"});
    CHECK(sub.code == cli::kExitConfig);
    CHECK(contains(sub.err, "unknown subcommand 'transmogrify'"));
    const Outcome flag = invoke({"invert", "--frobnicate"});
    CHECK(flag.code == cli::kExitConfig);
    CHECK(contains(flag.err, "--frobnicate"));
  }

  TEST_CASE("schema violations name the key") {
    SeedEnvGuard guard;
    TempDir dir("cli-schema");
    const std::vector<std::pair<std::string, std::string>> cases{
        {R"({"sead": 1})", "unknown key 'sead'"},
        {R"({"field": {"kind": "mlp", "training": {"epochs": 3}}})", "unknown key 'field.training.epochs'"},
        {R"({"field": {"kind": "mlp", "std": 0.5}})", "unknown key 'field.std'"},
        {R"({"grid": {"steps": -4}})", "'grid.steps' must be a non-negative integer"},
        {R"({"grid": {"steps": 0}})", "at least one step"},
        {R"({"guidance": {"cfg_inv": "one"}})", "'guidance.cfg_inv' must be a number"},
        {R"({"edit": {"algorithm": "mvg"}})", "'edit.eta' is required"},
        {R"({"edit": {"algorithm": "mvg", "eta": 1.5}})", "'edit.eta' must lie in [0, 1]"},
        {R"({"edit": {"alignment": "exact"}})", "unknown alignment mode"},
        {R"({"inversion": {"method": "rk4"}})", "'inversion.method' = \"rk4\" is not one of"},
        {R"({"field": {"kind": "analytic"}, "conditions": {"source": 0}})", "takes no conditions"},
        {R"([1, 2])", "config root must be an object"},
        {R"({"seed": )", "not valid JSON"},
    };
    for (const auto& [text, message] : cases) {
      CAPTURE(text);
      write_file(dir / "c.json", text);
      const Outcome r = invoke({"invert", "--config", (dir / "c.json").string(), "--out", (dir / "o").string()});
      CHECK(r.code == cli::kExitConfig);
      CHECK(contains(r.err, message));
      CHECK(r.out.empty());
    }
  }

  TEST_CASE("missing inputs are configuration errors with distinct messages") {
    SeedEnvGuard guard;
    TempDir dir("cli-missing");
    const std::string out = (dir / "o").string();

    const Outcome config = invoke({"invert", "--config", (dir / "absent.json").string(), "--out", out});
    CHECK(config.code == cli::kExitConfig);
    CHECK(contains(config.err, "config file not found"));

    write_file(dir / "ckpt.json", R"({"field": {"kind": "mlp", "checkpoint": "absent.ckpt"}})");
    const Outcome ckpt = invoke({"compare", "--config", (dir / "ckpt.json").string(), "--out", out});
    CHECK(ckpt.code == cli::kExitConfig);
    CHECK(contains(ckpt.err, "checkpoint not found"));

    write_file(dir / "mask.json", std::string("{") + kAttentionField +
                                      R"(, "edit": {"mask": {"kind": "file", "path": "absent.pgm"}}})");
    const Outcome mask = invoke({"edit", "--config", (dir / "mask.json").string(), "--out", out});
    CHECK(mask.code == cli::kExitConfig);
    CHECK(contains(mask.err, "mask file not found"));

    const Outcome report = invoke({"report", "--input", (dir / "nothing").string(), "--out", out});
    CHECK(report.code == cli::kExitConfig);
    CHECK(contains(report.err, "missing input file"));
  }

  TEST_CASE("runtime failures exit 2") {
    SeedEnvGuard guard;
    TempDir dir("cli-runtime");
    write_file(dir / "occupied", "a file where the output directory should go");
    const Outcome r = invoke({"invert", "--out", (dir / "occupied").string()});
    CHECK(r.code == cli::kExitRuntime);
    CHECK(contains(r.err, "cannot create output directory"));
  }

  TEST_CASE("seed resolution: flag over environment over config") {
    SeedEnvGuard guard;
    TempDir dir("cli-seed");
    write_file(dir / "c.json", std::string("{\"seed\": 11, ") + kAttentionField + "}");
    const std::string cfg = (dir / "c.json").string();
    const std::string out = (dir / "o").string();

    CHECK(contains(invoke({"invert", "--config", cfg, "--out", out}).out, "seed: 11 (from config)"));
    setenv(cli::kSeedEnv, "23", 1);
    CHECK(contains(invoke({"invert", "--config", cfg, "--out", out}).out, "seed: 23 (from FLOWINV_SEED)"));
    CHECK(contains(invoke({"invert", "--config", cfg, "--out", out, "--seed", "5"}).out, "seed: 5 (from --seed)"));
    setenv(cli::kSeedEnv, "-3", 1);
    const Outcome bad = invoke({"invert", "--config", cfg, "--out", out});
    CHECK(bad.code == cli::kExitConfig);
    CHECK(contains(bad.err, "FLOWINV_SEED must be a non-negative integer"));
  }

  TEST_CASE("every run prints and stores the resolved config") {
    SeedEnvGuard guard;
    TempDir dir("cli-resolved");
    write_file(dir / "c.json", std::string("{") + kAttentionField + "}");
    const Outcome r = invoke({"invert", "--config", (dir / "c.json").string(), "--out", dir.path().string(), "--steps", "7"});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(contains(r.out, "resolved config:"));
    const nlohmann::json stored = nlohmann::json::parse(read_file(dir / "config.resolved.json"));
    CHECK(stored["grid"]["steps"] == 7);
    CHECK(stored["guidance"]["cfg_inv"] == 1.0);
    CHECK(stored["edit"]["t_inj"] == 3);
    CHECK(stored["edit"]["mask"]["kind"] == "none");
    // The stored form parses back to the same configuration.
    CHECK(cli::to_json(cli::parse_config(stored, dir.path())) == stored);
  }

  TEST_CASE("invert dumps the trajectory and the trace") {
    SeedEnvGuard guard;
    TempDir dir("cli-invert");
    const Outcome r = invoke({"invert", "--config", (kConfigs / "invert.json").string(), "--out", dir.path().string(),
                              "--steps", "5"});
    REQUIRE(r.code == cli::kExitOk);
    std::istringstream traj(read_file(dir / "inverse_trajectory.csv"));
    std::string line;
    std::getline(traj, line);
    CHECK(line.rfind("step,sigma,z0,", 0) == 0);
    std::size_t rows = 0;
    while (std::getline(traj, line)) ++rows;
    CHECK(rows == 6);

    std::istringstream trace(read_file(dir / "trace.csv"));
    std::getline(trace, line);
    CHECK(line.rfind("step,sigma,quantity,z0", 0) == 0);
    std::size_t trace_rows = 0;
    while (std::getline(trace, line)) ++trace_rows;
    CHECK(trace_rows == 5 * 4);
  }

  TEST_CASE("reconstruct rejects aligned strategies without a trace") {
    SeedEnvGuard guard;
    TempDir dir("cli-midpoint");
    write_file(dir / "c.json", std::string("{") + kAttentionField +
                                   R"(, "inversion": {"method": "midpoint"},
                                      "reconstruction": {"strategies": ["DirectAligned"]}})");
    const Outcome r = invoke({"reconstruct", "--config", (dir / "c.json").string(), "--out", (dir / "o").string()});
    CHECK(r.code == cli::kExitConfig);
    CHECK(contains(r.err, "needs a residual trace"));
  }

  TEST_CASE("identical config and seed give byte-identical outputs") {
    SeedEnvGuard guard;
    TempDir dir("cli-repeat");
    write_file(dir / "c.json", std::string("{") + kAttentionField + "}");
    for (const char* out : {"a", "b"}) {
      REQUIRE(invoke({"reconstruct", "--config", (dir / "c.json").string(), "--out", (dir / out).string()}).code ==
              cli::kExitOk);
    }
    for (const char* file : {"report.csv", "steps.csv", "chart.svg"}) {
      CAPTURE(file);
      CHECK(read_file(dir / "a" / file) == read_file(dir / "b" / file));
    }
    REQUIRE(invoke({"reconstruct", "--config", (dir / "c.json").string(), "--out", (dir / "c").string(), "--seed",
                    "1"})
                .code == cli::kExitOk);
    CHECK(read_file(dir / "a" / "steps.csv") != read_file(dir / "c" / "steps.csv"));
  }

  TEST_CASE("compare with the shipped default config") {
    SeedEnvGuard guard;
    TempDir dir("cli-compare");
    const Outcome r = invoke({"compare", "--config", (kConfigs / "compare.json").string(), "--out", dir.path().string()});
    REQUIRE(r.code == cli::kExitOk);
    const MetricReport report = read_report_csv(dir / "report.csv");
    REQUIRE(report.rows().size() == 6);
    const std::vector<std::string> expected{"Vanilla", "StepwiseCorrection", "FixedPoint(k=2)",
                                            "DNA",     "DirectAligned",      "DirectAlignedCached"};
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(report.rows()[i].method == expected[i]);
    CHECK(report.row("DirectAlignedCached").max_step_mse == 0.0);
    CHECK(report.row("DirectAligned").avg_step_mse < report.row("FixedPoint(k=2)").avg_step_mse);
    CHECK(report.row("FixedPoint(k=2)").avg_step_mse < report.row("StepwiseCorrection").avg_step_mse);
    CHECK(report.row("StepwiseCorrection").avg_step_mse < report.row("Vanilla").avg_step_mse);
    CHECK(report.row("FixedPoint(k=2)").eval_count == 30 * 2 + 30);
    CHECK(report.row("DirectAlignedCached").eval_count == 30);
    CHECK(fs::exists(dir / "chart.svg"));
    CHECK(read_step_csv(dir / "steps.csv").size() == 6);
  }

  TEST_CASE("compare from a trained checkpoint leaves it untouched and matches in-process training") {
    SeedEnvGuard guard;
    TempDir dir("cli-checkpoint");
    write_file(dir / "train.json", small_mlp_config());
    REQUIRE(invoke({"train", "--config", (dir / "train.json").string(), "--out", (dir / "t").string()}).code ==
            cli::kExitOk);
    const std::string before = read_file(dir / "t" / "mlp.ckpt");

    write_file(dir / "from_ckpt.json", R"({
      "field": {"kind": "mlp", "checkpoint": "t/mlp.ckpt", "training": {"steps": 150, "batch": 64}},
      "grid": {"steps": 12},
      "source": {"kind": "two_moons", "points": 16}})");
    REQUIRE(invoke({"compare", "--config", (dir / "from_ckpt.json").string(), "--out", (dir / "a").string()}).code ==
            cli::kExitOk);
    CHECK(read_file(dir / "t" / "mlp.ckpt") == before);

    REQUIRE(invoke({"compare", "--config", (dir / "train.json").string(), "--out", (dir / "b").string()}).code ==
            cli::kExitOk);
    CHECK(read_file(dir / "a" / "report.csv") == read_file(dir / "b" / "report.csv"));
    CHECK(read_file(dir / "a" / "chart.svg") == read_file(dir / "b" / "chart.svg"));
  }

  TEST_CASE("report re-renders saved outputs byte for byte") {
    SeedEnvGuard guard;
    TempDir dir("cli-report");
    write_file(dir / "c.json", std::string("{") + kAttentionField + "}");
    REQUIRE(invoke({"reconstruct", "--config", (dir / "c.json").string(), "--out", (dir / "run").string()}).code ==
            cli::kExitOk);
    const Outcome r = invoke({"report", "--input", (dir / "run").string(), "--out", (dir / "again").string()});
    REQUIRE(r.code == cli::kExitOk);
    for (const char* file : {"report.csv", "steps.csv", "chart.svg"}) {
      CAPTURE(file);
      CHECK(read_file(dir / "run" / file) == read_file(dir / "again" / file));
    }
  }

  TEST_CASE("edit with equal conditions and a full mask passes the identity check") {
    SeedEnvGuard guard;
    TempDir dir("cli-identity");
    const Outcome r = invoke({"edit", "--config", (kConfigs / "edit_identity.json").string(), "--out",
                              dir.path().string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(contains(r.out, "identity-edit check: PASS"));
    const nlohmann::json doc = nlohmann::json::parse(read_file(dir / "edit.json"));
    CHECK(doc["edited"] == doc["reconstruction"]);
  }

  TEST_CASE("an all-zeros mask is an identity edit for any target") {
    SeedEnvGuard guard;
    TempDir dir("cli-zeros");
    for (const char* algorithm : {"direct", "virtual"}) {
      CAPTURE(algorithm);
      write_file(dir / "c.json", std::string("{") + kAttentionField +
                                     R"(, "conditions": {"source": 0, "target": 2},
                                        "edit": {"algorithm": ")" +
                                     algorithm + R"(", "mask": {"kind": "zeros"}}})");
      const Outcome r = invoke({"edit", "--config", (dir / "c.json").string(), "--out", (dir / "o").string()});
      CHECK(r.code == cli::kExitOk);
      CHECK(contains(r.out, "identity-edit check: PASS"));
    }
  }

  TEST_CASE("an editing run without an identity expectation prints no check") {
    SeedEnvGuard guard;
    TempDir dir("cli-local");
    const Outcome r = invoke({"edit", "--config", (kConfigs / "edit_local.json").string(), "--out",
                              dir.path().string(), "--steps", "8"});
    CHECK(r.code == cli::kExitOk);
    CHECK_FALSE(contains(r.out, "identity-edit check"));
    const nlohmann::json doc = nlohmann::json::parse(read_file(dir / "edit.json"));
    CHECK(doc["reconstruction"].is_null());
    CHECK(doc["eval_count"] == 8 + 8 * 2);
  }

  TEST_CASE("mvg editing needs eta and runs with it") {
    SeedEnvGuard guard;
    TempDir dir("cli-mvg");
    write_file(dir / "c.json",
               small_mlp_config(R"(, "conditions": {"source": 0, "target": 1}, "edit": {"algorithm": "mvg", "eta": 0.5})"));
    const Outcome r = invoke({"edit", "--config", (dir / "c.json").string(), "--out", (dir / "o").string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(contains(r.out, "mvg edit: " + std::to_string(12 + 12 * 2 + 12 * 2) + " evaluations"));
  }
}
