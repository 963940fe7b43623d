#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "phail/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using phail::harness::read_file;

namespace {

class Harness : public ::testing::Test {
 protected:
  void SetUp() override {
    auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("phail_harness_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const json& j) {
    auto p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  // Runs the CLI; returns its exit status.
  int cli(const std::string& args, const std::string& env = "PHAIL_WORKERS=2") {
    std::string cmd = env + " " + PHAIL_CLI_PATH + " " + args + " >" + (dir_ / "stdout").string() + " 2>" +
                      (dir_ / "stderr").string();
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  json manifest(const std::string& out) { return json::parse(read_file(dir_ / out / "manifest.json")); }

  std::size_t lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string s; std::getline(in, s);) ++n;
    return n;
  }

  fs::path dir_;
};

json rain_config(double lambda, std::uint64_t seed = 11) {
  return {{"kind", "rain"},
          {"dimension", 2},
          {"seed", seed},
          {"params", {{"lambda", lambda}, {"window", {{"lo", {0, 0}}, {"hi", {8, 8}}}}, {"t1", 4}}}};
}

std::set<std::string> id_time_pairs(const std::string& csv) {
  std::set<std::string> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    auto f = phail::split_csv(line);
    out.insert(f[0] + "@" + f[1]);
  }
  return out;
}

}  // namespace

TEST_F(Harness, ZeroIntensityRainWritesEmptyArrivalsAndManifest) {
  auto cfg = write_config("c.json", rain_config(0.0));
  ASSERT_EQ(cli("run " + cfg.string() + " -o " + (dir_ / "out").string()), 0);
  EXPECT_EQ(lines(dir_ / "out" / "arrivals.csv"), 1u);  // header only
  auto m = manifest("out");
  EXPECT_EQ(m["status"], "ok");
  ASSERT_EQ(m["outputs"].size(), 1u);
  EXPECT_EQ(m["outputs"][0]["path"], "arrivals.csv");
  EXPECT_EQ(m["seeds"].size(), 1u);
  EXPECT_EQ(cli("show-manifest " + (dir_ / "out").string() + " --verify"), 0);
}

TEST_F(Harness, RerunsReproduceChecksums) {
  json c = rain_config(0.4);
  c["replications"] = 3;
  auto cfg = write_config("c.json", c);
  ASSERT_EQ(cli("run " + cfg.string() + " -o " + (dir_ / "a").string(), "PHAIL_WORKERS=1"), 0);
  ASSERT_EQ(cli("run " + cfg.string() + " -o " + (dir_ / "b").string(), "PHAIL_WORKERS=3"), 0);
  auto a = manifest("a")["outputs"], b = manifest("b")["outputs"];
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);
  for (auto& o : a) {
    auto p = o["path"].get<std::string>();
    EXPECT_EQ(read_file(dir_ / "a" / p), read_file(dir_ / "b" / p));
  }
}

TEST_F(Harness, JsonFormatMirrorsCsvRows) {
  json c = rain_config(0.4);
  auto csv_cfg = write_config("csv.json", c);
  c["format"] = "json";
  auto json_cfg = write_config("json.json", c);
  ASSERT_EQ(cli("run " + csv_cfg.string() + " -o " + (dir_ / "c").string()), 0);
  ASSERT_EQ(cli("run " + json_cfg.string() + " -o " + (dir_ / "j").string()), 0);
  auto rows = json::parse(read_file(dir_ / "j" / "arrivals.json"));
  EXPECT_EQ(rows.size() + 1, lines(dir_ / "c" / "arrivals.csv"));
  EXPECT_EQ(cli("show-manifest " + (dir_ / "j").string() + " --verify"), 0);
}

TEST_F(Harness, StabilityScanWritesRowPerLambdaAndReplication) {
  json c = {{"kind", "stability"},
            {"dimension", 1},
            {"seed", 5},
            {"replications", 20},
            {"params",
             {{"task", "scan"}, {"lambdas", {0.05, 0.1, 0.15, 0.2, 0.25}}, {"schedule", {4, 8, 16}}}}};
  auto cfg = write_config("c.json", c);
  ASSERT_EQ(cli("run " + cfg.string() + " -o " + (dir_ / "out").string()), 0);
  EXPECT_EQ(lines(dir_ / "out" / "sweep.csv"), 1u + 100u);
  EXPECT_EQ(manifest("out")["summary"]["verdicts"].size(), 5u);
}

TEST_F(Harness, SingleCellSweepMatchesRun) {
  json c = rain_config(0.3);
  c["replications"] = 2;
  auto run_cfg = write_config("run.json", c);
  c["sweep"] = {{"grid", {{"lambda", {0.3}}}}};
  auto sweep_cfg = write_config("sweep.json", c);
  ASSERT_EQ(cli("run " + run_cfg.string() + " -o " + (dir_ / "r").string()), 0);
  ASSERT_EQ(cli("sweep " + sweep_cfg.string() + " -o " + (dir_ / "s").string()), 0);
  for (std::string f : {"arrivals_r0.csv", "arrivals_r1.csv"})
    EXPECT_EQ(read_file(dir_ / "r" / f), read_file(dir_ / "s" / "cells" / "cell_0" / f)) << f;
  EXPECT_EQ(lines(dir_ / "s" / "sweep.csv"), 2u);
}

TEST_F(Harness, GridSweepBookkeeping) {
  json c = rain_config(0.3);
  c["replications"] = 4;
  c["sweep"] = {{"grid", {{"lambda", {0.1, 0.2, 0.3}}, {"t1", {1, 2, 3}}}}};
  auto cfg = write_config("c.json", c);
  ASSERT_EQ(cli("sweep " + cfg.string() + " -o " + (dir_ / "out").string()), 0);
  EXPECT_EQ(lines(dir_ / "out" / "sweep.csv"), 1u + 9u);
  auto m = manifest("out");
  ASSERT_EQ(m["cells"].size(), 9u);
  std::set<std::uint64_t> seeds;
  for (auto& cell : m["cells"])
    for (auto& s : cell["seeds"]) EXPECT_TRUE(seeds.insert(s["seed"].get<std::uint64_t>()).second);
  EXPECT_EQ(seeds.size(), 36u);
  // last key varies fastest
  EXPECT_EQ(m["cells"][1]["params"]["t1"], 2);
  EXPECT_EQ(m["cells"][3]["params"]["lambda"], 0.2);
  auto head = phail::split_csv(read_file(dir_ / "out" / "sweep.csv").substr(0, read_file(dir_ / "out" / "sweep.csv").find('\n')));
  for (std::string col : {"arrivals_mean", "arrivals_se", "arrivals_ci_lo", "arrivals_ci_hi"})
    EXPECT_NE(std::find(head.begin(), head.end(), col), head.end()) << col;
  EXPECT_EQ(cli("show-manifest " + (dir_ / "out").string() + " --verify"), 0);
}

TEST_F(Harness, CoupledSweepNestsArrivalsAcrossLambda) {
  json c = rain_config(0.3);
  c["sweep"] = {{"grid", {{"lambda", {0.1, 0.2, 0.4}}}}, {"coupled", true}};
  auto cfg = write_config("c.json", c);
  ASSERT_EQ(cli("sweep " + cfg.string() + " -o " + (dir_ / "out").string()), 0);
  std::vector<std::set<std::string>> sets;
  for (int i = 0; i < 3; ++i)
    sets.push_back(id_time_pairs(read_file(dir_ / "out" / "cells" / ("cell_" + std::to_string(i)) / "arrivals.csv")));
  for (int i = 0; i + 1 < 3; ++i) {
    EXPECT_LT(sets[i].size(), sets[i + 1].size());
    for (auto& a : sets[i]) EXPECT_TRUE(sets[i + 1].count(a)) << "cell " << i << " arrival " << a;
  }
}

TEST_F(Harness, UnknownKeyIsConfigError) {
  json c = rain_config(0.3);
  c["params"]["lamda"] = 0.2;
  auto cfg = write_config("c.json", c);
  EXPECT_EQ(cli("validate-config " + cfg.string()), 2);
  EXPECT_EQ(cli("run " + cfg.string() + " -o " + (dir_ / "out").string()), 2);
  auto err = json::parse(read_file(dir_ / "stderr"));
  EXPECT_EQ(err["error"], "config");
  EXPECT_NE(err["message"].get<std::string>().find("lamda"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "out" / "manifest.json"));
}

TEST_F(Harness, SweepCellsAreValidatedBeforeRunning) {
  json c = rain_config(0.3);
  c["sweep"] = {{"grid", {{"lambda", {0.1, -1.0}}}}};
  auto cfg = write_config("c.json", c);
  EXPECT_EQ(cli("sweep " + cfg.string() + " -o " + (dir_ / "out").string()), 2);
  EXPECT_FALSE(fs::exists(dir_ / "out" / "cells"));
}

TEST_F(Harness, CapacityErrorFlagsPartialOutput) {
  json c = {{"kind", "branching"},
            {"dimension", 2},
            {"seed", 1},
            {"params", {{"generations", 30}, {"cap", 50}, {"progeny", {{"type", "ball"}, {"radius_pmf", {0, 1}}}}}}};
  auto cfg = write_config("c.json", c);
  EXPECT_EQ(cli("run " + cfg.string() + " -o " + (dir_ / "out").string()), 3);
  auto err = json::parse(read_file(dir_ / "out" / "error.json"));
  EXPECT_EQ(err["error"], "capacity");
  EXPECT_EQ(err["exit_code"], 3);
  auto m = manifest("out");
  EXPECT_EQ(m["status"], "partial");
  EXPECT_EQ(m["outputs"][0]["partial"], true);
  EXPECT_GT(lines(dir_ / "out" / "generations.csv"), 1u);
}

TEST_F(Harness, SweepContinuesPastFailedCell) {
  json c = {{"kind", "branching"},
            {"dimension", 1},
            {"seed", 1},
            {"params", {{"generations", 40}, {"cap", 60}, {"progeny", {{"type", "ball"}, {"radius_pmf", {1, 0}}}}}},
            {"sweep", {{"grid", {{"progeny.radius_pmf", {json::array({1, 0}), json::array({0, 1}), json::array({1, 0})}}}}}}};
  auto cfg = write_config("c.json", c);
  EXPECT_EQ(cli("sweep " + cfg.string() + " -o " + (dir_ / "out").string()), 3);
  std::istringstream in(read_file(dir_ / "out" / "sweep.csv"));
  std::vector<std::string> status;
  std::string line;
  std::getline(in, line);
  auto head = phail::split_csv(line);
  auto col = std::find(head.begin(), head.end(), "status") - head.begin();
  while (std::getline(in, line)) status.push_back(phail::split_csv(line)[col]);
  EXPECT_EQ(status, (std::vector<std::string>{"ok", "capacity_error", "ok"}));
  EXPECT_NE(read_file(dir_ / "out" / "sweep.csv").find("[0;1]"), std::string::npos);
}

TEST_F(Harness, UsageErrors) {
  EXPECT_EQ(cli(""), 1);
  EXPECT_EQ(cli("frobnicate"), 1);
  EXPECT_EQ(cli("run " + (dir_ / "missing.json").string()), 1);
  auto cfg = write_config("c.json", rain_config(0.1));
  EXPECT_EQ(cli("run " + cfg.string(), "PHAIL_WORKERS=zero"), 2);
  json s = rain_config(0.1);
  s["sweep"] = {{"grid", {{"lambda", {0.1}}}}};
  EXPECT_EQ(cli("run " + write_config("s.json", s).string()), 2);
}

TEST_F(Harness, ChecksumVerificationDetectsTampering) {
  auto cfg = write_config("c.json", rain_config(0.3));
  ASSERT_EQ(cli("run " + cfg.string() + " -o " + (dir_ / "out").string()), 0);
  std::ofstream(dir_ / "out" / "arrivals.csv", std::ios::app) << "x\n";
  EXPECT_EQ(cli("show-manifest " + (dir_ / "out").string() + " --verify"), 1);
}

TEST(HarnessLib, SeedsAreDistinctAcrossLabels) {
  phail::config::ExperimentConfig c;
  c.seed = 42;
  std::set<std::uint64_t> seen;
  for (std::string kind : {"rain", "continuous", "chain", "clumps", "branching", "stability", "grid"}) {
    c.kind = kind;
    for (std::size_t cell = 0; cell < 20; ++cell) {
      auto cs = phail::harness::cell_seed(c, cell);
      EXPECT_TRUE(seen.insert(cs).second);
      for (std::size_t r = 0; r < 50; ++r) EXPECT_TRUE(seen.insert(phail::harness::rep_seed(cs, r)).second);
    }
  }
}

TEST(HarnessLib, SeedLedgerRejectsCollisions) {
  std::vector<phail::harness::SeedEntry> s{{"rep", 0, 0, 9}, {"rep", 1, 0, 9}};
  EXPECT_THROW(phail::harness::seeds_json(s), phail::UsageError);
}

TEST(HarnessLib, ParallelForRethrowsLowestFailingIndex) {
  std::vector<int> hit(64, 0);
  try {
    phail::harness::parallel_for(64, 4, [&](std::size_t i) {
      hit[i] = 1;
      if (i == 17 || i == 40) throw std::runtime_error(std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "17");
  }
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 64);
}

TEST(HarnessLib, CsvToJsonKeepsTextAndNumbers) {
  auto j = phail::harness::csv_to_json("a,b,c\n1.5,cube,\n");
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["a"], 1.5);
  EXPECT_EQ(j[0]["b"], "cube");
  EXPECT_TRUE(j[0]["c"].is_null());
}
