#include "fedsim/config.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

namespace fedsim {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path Example(const std::string& name) {
  return fs::path(FEDSIM_EXAMPLES_DIR) / name;
}

json Base() { return json::parse(ReadFile(Example("three_clients.json"))); }

ConfigError::Kind KindOf(const std::string& text) {
  try {
    Prepare(ParseRunConfig(text));
  } catch (const ConfigError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "config was accepted";
  return ConfigError::Kind::kParse;
}

std::string MessageOf(const std::string& text) {
  try {
    Prepare(ParseRunConfig(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "config was accepted";
  return {};
}

TEST(ParseRunConfigTest, ReadsExample) {
  const auto c = ParseRunConfig(ReadFile(Example("three_clients.json")));
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.rounds, 10);
  EXPECT_EQ(c.model.kind, ModelKind::kLogisticRegression);
  EXPECT_EQ(c.model.input_dim, 4u);
  EXPECT_EQ(c.partition.mode, PartitionMode::kExplicitCounts);
  EXPECT_EQ(*c.partition.counts, (std::vector<std::size_t>{1400, 2400, 1416}));
  EXPECT_EQ(c.epoch_times, (std::vector<double>{23.1, 40.1, 24.0}));
  EXPECT_EQ(*c.centralized_epoch_time, 138.6);
  EXPECT_EQ(c.roc_rounds, (std::vector<int>{1, 10}));
  EXPECT_EQ(c.policy, PolicyConfig{});
  EXPECT_TRUE(c.HasFormat(ReportFormat::kCsv));
  EXPECT_TRUE(c.HasFormat(ReportFormat::kJson));
}

TEST(ParseRunConfigTest, JsonRoundTrip) {
  for (const char* name : {"three_clients.json", "ten_clients.json",
                           "intermittent.json", "delayed.json",
                           "client_count_sweep.json", "policy_sweep.json"}) {
    const auto c = ParseRunConfig(ReadFile(Example(name)));
    const auto echo = ToJson(c);
    EXPECT_EQ(ToJson(ParseRunConfig(echo.dump())), echo) << name;
  }
}

TEST(ParseRunConfigTest, ScalarEpochTimeFansOut) {
  auto j = Base();
  j["epoch_times"] = 7.5;
  const auto c = ParseRunConfig(j.dump());
  EXPECT_EQ(c.epoch_times, (std::vector<double>{7.5, 7.5, 7.5}));
  EXPECT_EQ(ToJson(c)["epoch_times"], 7.5);
}

TEST(ParseRunConfigTest, UnknownKeyNamesKeyAndLine) {
  const std::string text =
      "{\n  \"seed\": 1,\n  \"rounds\": 3,\n  \"learning_rat\": 0.1\n}\n";
  try {
    ParseRunConfig(text);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ConfigError::Kind::kParse);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("learning_rat"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
  }
}

TEST(ParseRunConfigTest, NestedUnknownKey) {
  auto j = Base();
  j["model"]["depth"] = 3;
  const std::string msg = MessageOf(j.dump(2));
  EXPECT_NE(msg.find("model.depth"), std::string::npos) << msg;
}

TEST(ParseRunConfigTest, SyntaxErrorIsParseError) {
  EXPECT_EQ(KindOf("{\"seed\": 1,,}"), ConfigError::Kind::kParse);
}

TEST(ParseRunConfigTest, WrongTypeIsParseError) {
  auto j = Base();
  j["rounds"] = "ten";
  EXPECT_EQ(KindOf(j.dump()), ConfigError::Kind::kParse);
}

TEST(ParseRunConfigTest, ZeroRoundsNamesNr) {
  auto j = Base();
  j["rounds"] = 0;
  j.erase("roc_rounds");
  EXPECT_EQ(KindOf(j.dump()), ConfigError::Kind::kValidation);
  EXPECT_NE(MessageOf(j.dump()).find("N_r"), std::string::npos);
}

TEST(ParseRunConfigTest, CountsMustMatchClientCount) {
  auto j = Base();
  j["partition"]["counts"] = {1400, 2400};
  EXPECT_EQ(KindOf(j.dump()), ConfigError::Kind::kValidation);
}

TEST(ParseRunConfigTest, EpochTimesMustMatchClientCount) {
  auto j = Base();
  j["epoch_times"] = {1.0, 2.0};
  EXPECT_EQ(KindOf(j.dump()), ConfigError::Kind::kValidation);
}

TEST(ParseRunConfigTest, EventFieldsAreChecked) {
  auto j = Base();
  j["events"] = json::array({{{"round", 2}, {"kind", "leave"}, {"client", 1},
                              {"resume_round", 4}}});
  EXPECT_EQ(KindOf(j.dump()), ConfigError::Kind::kParse);
  j["events"] = json::array({{{"round", 2}, {"kind", "vanish"}, {"client", 1}}});
  EXPECT_EQ(KindOf(j.dump()), ConfigError::Kind::kParse);
  j["events"] = json::array({{{"round", 11}, {"kind", "leave"}, {"client", 1}}});
  EXPECT_EQ(KindOf(j.dump()), ConfigError::Kind::kValidation);
  j["events"] = json::array(
      {{{"round", 4}, {"kind", "delay"}, {"client", 1}, {"resume_round", 4}}});
  EXPECT_EQ(KindOf(j.dump()), ConfigError::Kind::kValidation);
}

TEST(PrepareTest, OverlappingDelaysNameBothEvents) {
  auto j = Base();
  j["events"] = json::array(
      {{{"round", 2}, {"kind", "delay"}, {"client", 1}, {"resume_round", 6}},
       {{"round", 4}, {"kind", "delay"}, {"client", 1}, {"resume_round", 8}}});
  EXPECT_EQ(KindOf(j.dump()), ConfigError::Kind::kValidation);
  const std::string msg = MessageOf(j.dump());
  EXPECT_NE(msg.find("event #0"), std::string::npos) << msg;
  EXPECT_NE(msg.find("event #1"), std::string::npos) << msg;
}

TEST(PrepareTest, JoinMayNotReuseAnId) {
  auto j = json::parse(ReadFile(Example("intermittent.json")));
  j["events"][1]["client"] = 2;
  EXPECT_EQ(KindOf(j.dump()), ConfigError::Kind::kValidation);
}

TEST(PrepareTest, JoinNeedsReserveSamples) {
  auto j = Base();  // every master sample is already assigned
  j["events"] = json::array({{{"round", 5}, {"kind", "join"}, {"client", 4},
                              {"count", 16}, {"epoch_time", 1.0}}});
  EXPECT_EQ(KindOf(j.dump()), ConfigError::Kind::kValidation);
}

TEST(PrepareTest, InfeasiblePartitionIsValidationError) {
  auto j = Base();
  j["partition"]["positive_fractions"] = {1.0, 1.0, 1.0};
  EXPECT_EQ(KindOf(j.dump()), ConfigError::Kind::kValidation);
}

TEST(PrepareTest, UnbalancedThreeClientSetup) {
  const auto p = Prepare(ParseRunConfig(ReadFile(Example("three_clients.json"))));
  ASSERT_EQ(p.shards.size(), 3u);
  EXPECT_EQ(p.master.size(), 5216u);
  EXPECT_EQ(p.plan.global_test.size(), 624u);
  EXPECT_EQ(p.shards[0].n_train(), 1050u);
  EXPECT_EQ(p.shards[1].n_train(), 1800u);
  EXPECT_EQ(p.shards[2].n_train(), 1062u);
  EXPECT_NEAR(p.static_sim_time, 401.0, 1e-9);
  EXPECT_NEAR(*p.centralized_time, 1386.0, 1e-9);
}

TEST(PrepareTest, JoinerDrawnFromReserve) {
  const auto p = Prepare(ParseRunConfig(ReadFile(Example("intermittent.json"))));
  const auto& join = p.plan.events[1];
  ASSERT_TRUE(join.joiner.has_value());
  EXPECT_EQ(join.joiner->shard.n_train(), 16u);
  EXPECT_EQ(join.joiner->shard.train.CountLabel(1), 8u);
  for (const auto& s : p.shards) {
    for (std::size_t i = 0; i < s.train.size(); ++i) {
      for (std::size_t k = 0; k < 16; ++k) {
        ASSERT_NE(s.train.Id(i), join.joiner->shard.train.Id(k));
      }
    }
  }
}

TEST(PrepareTest, Deterministic) {
  const auto c = ParseRunConfig(ReadFile(Example("intermittent.json")));
  const auto a = Prepare(c);
  const auto b = Prepare(c);
  EXPECT_EQ(a.master, b.master);
  EXPECT_EQ(a.shards[1].train, b.shards[1].train);
}

// ---------------------------------------------------------------------------
// Command line

int RunCli(const std::string& args) {
  const std::string cmd =
      std::string(FEDSIM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fedsim_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  fs::path dir_;
};

TEST_F(CliTest, ValidateExamples) {
  for (const char* name : {"three_clients.json", "ten_clients.json",
                           "intermittent.json", "delayed.json"}) {
    EXPECT_EQ(RunCli("validate --config " + Example(name).string()), 0) << name;
  }
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(RunCli("validate --config " + Write("bad.json", "{\"seed\": ")), 2);
  EXPECT_EQ(RunCli("validate --config " + (dir_ / "missing.json").string()), 2);

  auto zero = Base();
  zero["rounds"] = 0;
  zero.erase("roc_rounds");
  EXPECT_EQ(RunCli("validate --config " + Write("zero.json", zero.dump())), 3);

  auto starve = Base();
  starve["partition"] = {{"mode", "random-uniform"}, {"client_count", 1}};
  starve["epoch_times"] = 1.0;
  starve["policy"] = {{"delay", "exclude-until-current"}};
  starve["events"] = json::array(
      {{{"round", 2}, {"kind", "delay"}, {"client", 1}, {"resume_round", 4}}});
  EXPECT_EQ(RunCli("run --config " + Write("starve.json", starve.dump()) +
                   " --out " + (dir_ / "out").string()),
            4);
}

TEST_F(CliTest, RunWritesFilesWithOverrides) {
  const fs::path out = dir_ / "run";
  ASSERT_EQ(RunCli("run --config " + Example("three_clients.json").string() +
                   " --seed 9 --format json --out " + out.string()),
            0);
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  EXPECT_TRUE(fs::exists(out / "events.log"));
  EXPECT_FALSE(fs::exists(out / "rounds.csv"));
  EXPECT_EQ(json::parse(ReadFile(out / "summary.json"))["seed"], 9);
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
  const fs::path out = dir_ / "env";
  const std::string cmd = "FEDSIM_OUT=" + out.string() + " " + FEDSIM_CLI_PATH +
                          " run --config " + Example("three_clients.json").string() +
                          " >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(out / "rounds.csv"));
}

TEST_F(CliTest, SweepNeedsValues) {
  EXPECT_EQ(RunCli("sweep --config " + Example("three_clients.json").string() +
                   " --variable N_r --out " + (dir_ / "s").string()),
            3);
  EXPECT_EQ(RunCli("sweep --config " + Example("three_clients.json").string() +
                   " --variable colour --values 1 --out " + (dir_ / "s").string()),
            3);
}

}  // namespace
}  // namespace fedsim
