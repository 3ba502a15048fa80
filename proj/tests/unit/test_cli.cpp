#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "mcbound/error.hpp"

namespace mcbound::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_config(const std::string& sub, json doc, std::optional<std::uint64_t> seed = std::nullopt,
                   std::string out_dir = {}) {
  RunConfig cfg;
  cfg.subcommand = sub;
  cfg.document = std::move(doc);
  cfg.seed = seed;
  cfg.out_dir = std::move(out_dir);
  std::ostringstream out, err;
  const int code = execute(cfg, out, err);
  return {code, out.str(), err.str()};
}

Outcome run_argv(std::vector<std::string> args) {
  args.insert(args.begin(), "mcbound");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

json worked_chain() {
  return {{"kernel", {{0.5, 0.3, 0.2}, {0.2, 0.5, 0.3}, {0.1, 0.3, 0.6}}},
          {"pairs", {{0, 1}, {1, 0}, {1, 2}, {2, 1}}},
          {"xi", 0},
          {"xi_prime", 2}};
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("mcbound_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::remove_all(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(ParseBound, MinimalRequest) {
  const auto r = parse_bound({{"epsilon", 0.5}, {"lambda", 0.5}, {"b", 1}, {"B", 2}, {"v0", 1}, {"n", 10}});
  EXPECT_DOUBLE_EQ(r.input.B, 2.0);
  EXPECT_EQ(r.n_last, 10u);
  EXPECT_EQ(r.n_first, 1u);
}

TEST(ParseBound, LambdaOutOfRangeNamesConstraint) {
  try {
    parse_bound({{"epsilon", 0.5}, {"lambda", 1.2}, {"b", 1}, {"B", 2}, {"v0", 1}, {"n", 10}});
    FAIL() << "accepted lambda = 1.2";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("lambda must lie in (0,1)"), std::string::npos) << e.what();
  }
}

TEST(ParseBound, RejectsUnknownAndMissingKeys) {
  EXPECT_THROW(parse_bound({{"epsilon", 0.5}, {"lambda", 0.5}, {"b", 1}, {"B", 2}, {"v0", 1}, {"n", 10}, {"gamma", 1}}),
               InvalidInput);
  EXPECT_THROW(parse_bound({{"epsilon", 0.5}, {"lambda", 0.5}, {"b", 1}, {"B", 2}, {"n", 10}}), InvalidInput);
  EXPECT_THROW(parse_bound({{"epsilon", "half"}, {"lambda", 0.5}, {"b", 1}, {"B", 2}, {"v0", 1}, {"n", 10}}),
               InvalidInput);
}

TEST(ParseBoundInhom, RejectsMismatchedLengths) {
  EXPECT_THROW(parse_bound_inhom({{"eps", {0.5, 0.5}}, {"lambda", {0.5}}, {"b", {1, 1}}, {"B", {1, 1}}, {"v0", 1}}),
               InvalidInput);
  EXPECT_NO_THROW(parse_bound_inhom({{"eps", {0.5, 0.5}}, {"lambda", {0.5, 0.8}}, {"b", {1, 2}}, {"B", {1, 1}}, {"v0", 1}}));
}

TEST(ParseCouple, ChecksMeasuresAndJoint) {
  auto doc = worked_chain();
  EXPECT_NO_THROW(parse_couple(doc));
  doc["xi"] = json::array({0.5, 0.6, 0.0});
  EXPECT_THROW(parse_couple(doc), InvalidInput);
  doc = worked_chain();
  doc["xi"] = 5;
  EXPECT_THROW(parse_couple(doc), InvalidInput);
  doc = worked_chain();
  doc["joint"] = "antithetic";
  EXPECT_THROW(parse_couple(doc), InvalidInput);
  doc = worked_chain();
  doc["kernel"][0][0] = 0.6;
  EXPECT_THROW(parse_couple(doc), InvalidInput);
}

TEST(ParseAnneal, Defaults) {
  const auto r = parse_anneal(json::object());
  EXPECT_EQ(r.objective.name, "doublewell");
  EXPECT_DOUBLE_EQ(r.beta, 0.75);
  EXPECT_EQ(r.config.checkpoints, (std::vector<std::size_t>{100, 1000, 10000}));
  EXPECT_THROW(parse_anneal({{"beta", 0.4}}), InvalidInput);
  EXPECT_THROW(parse_anneal({{"checkpoints", {100, 50}}}), InvalidInput);
}

TEST(ParseRate, RangeChecks) {
  EXPECT_NO_THROW(parse_rate({{"epsilon", 0.5}, {"lambda", 0.5}, {"M", 1.5}}));
  EXPECT_THROW(parse_rate({{"epsilon", 0.5}, {"lambda", 0.5}, {"M", 0.1}}), InvalidInput);
}

TEST(Execute, BoundReproducesWorkedValues) {
  const auto r = run_config("bound", {{"epsilon", 0.5}, {"lambda", 0.5}, {"b", 0}, {"B", 1}, {"v0", 1}, {"n", 3}});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 5u);
  EXPECT_EQ(ls[0].rfind("# config_hash=", 0), 0u);
  EXPECT_NE(ls[0].find("seed=none"), std::string::npos);
  EXPECT_EQ(ls[1], "n,j_star_tv,tv_bound,j_star_f,f_bound");
  EXPECT_EQ(ls[4], "3,4,0.25,4,0.25");
}

TEST(Execute, BadInputGivesJsonErrorAndExitTwo) {
  const auto r = run_config("bound", {{"epsilon", 0.5}, {"lambda", 1.2}, {"b", 1}, {"B", 2}, {"v0", 1}, {"n", 10}});
  EXPECT_EQ(r.code, kExitBadInput);
  const auto e = json::parse(r.err);
  EXPECT_EQ(e.at("error"), "invalid_input");
  EXPECT_NE(e.at("message").get<std::string>().find("lambda must lie in (0,1)"), std::string::npos);
}

TEST(Execute, StochasticSubcommandNeedsSeed) {
  const auto r = run_config("couple", worked_chain());
  EXPECT_EQ(r.code, kExitBadInput);
  EXPECT_NE(r.err.find("seed is required"), std::string::npos);
}

TEST(Execute, CoupleIsByteIdenticalForEqualSeeds) {
  auto doc = worked_chain();
  doc["replicas"] = 2000;
  doc["horizon"] = 10;
  const auto a = run_config("couple", doc, 17);
  const auto b = run_config("couple", doc, 17);
  const auto c = run_config("couple", doc, 18);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  EXPECT_EQ(lines(a.out)[1], "n,p_uncoupled,se,tv_upper,tv_upper_se,exact_tv");
}

TEST(Execute, IdentityPasses) {
  auto doc = worked_chain();
  doc["n"] = 3;
  const auto r = run_config("identity", doc);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(json::parse(r.out).at("passed").get<bool>());
}

TEST(Execute, RateReportsBranch) {
  const auto r = run_config("rate", {{"epsilon", 0.5}, {"lambda", 0.5}, {"M", 1.5}});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j.at("rate").get<double>(), -0.34657359027997265, 1e-15);
}

TEST(Execute, OutDirHoldsOnlyFinalFiles) {
  TempDir dir;
  auto doc = worked_chain();
  doc["replicas"] = 500;
  const auto r = run_config("couple", doc, 3, dir.path().string());
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir.path())) names.push_back(e.path().filename().string());
  EXPECT_EQ(names, std::vector<std::string>{"couple.csv"});
}

TEST(Execute, PiShiftTable) {
  const auto r = run_config("pi-shift", {{"objective", "quadratic"}, {"gammas", {1, 4}}});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 3u);
  EXPECT_EQ(ls[2].rfind("1,4,1.38629436111989", 0), 0u) << ls[2];
}

TEST(Execute, SelftestRunsWithoutSeed) {
  const auto r = run_config("selftest", {{"suites", {2, 3}}});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_TRUE(j.at("passed").get<bool>());
  EXPECT_EQ(j.at("suites").size(), 2u);
}

TEST(Execute, UnknownSubcommand) { EXPECT_EQ(run_config("frobnicate", json::object()).code, kExitBadInput); }

TEST(Run, ParsesFlagsAndConfigFile) {
  TempDir dir;
  fs::create_directories(dir.path());
  const fs::path cfg = dir.path() / "bound.json";
  std::ofstream(cfg) << R"({"epsilon":0.5,"lambda":0.5,"b":1,"B":2,"v0":1,"n":10})";
  const auto r = run_argv({"bound", "--config", cfg.string(), "--horizon", "4", "--clamp"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(lines(r.out).size(), 6u);
}

TEST(Run, MissingConfigFileIsRejected) {
  EXPECT_EQ(run_argv({"bound", "--config", "/nonexistent/mcbound.json"}).code, kExitBadInput);
}

TEST(Run, RequiresSubcommand) { EXPECT_EQ(run_argv({}).code, kExitBadInput); }

TEST(Run, ConfigHashDependsOnSeed) {
  RunConfig a;
  a.subcommand = "couple";
  a.document = worked_chain();
  RunConfig b = a;
  b.seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

}  // namespace
}  // namespace mcbound::cli
