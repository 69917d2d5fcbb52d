#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "arkl/cli.hpp"
#include "arkl/serialize.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("arkl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream out(path(name), std::ios::binary);
    out << text;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static int run(std::vector<std::string> args) {
    args.insert(args.begin(), "arkl");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return arkl::cli_main(static_cast<int>(argv.size()), argv.data());
  }

  fs::path dir_;
};

const char* kSmallFano = R"({"H": [1, 2, 4], "n": [50, 100, 200], "trials": 5,
                             "instance": {"name": "fano", "m": 8, "G": 1.0}})";

}  // namespace

TEST_F(CliTest, EstimationWritesCsvAndSidecars) {
  write("fano8.json", kSmallFano);
  ASSERT_EQ(run({"estimation", "--config", path("fano8.json"), "--seed", "7", "--out", path("r.csv")}), 0);
  const auto csv = read("r.csv");
  EXPECT_EQ(csv.rfind("H,n,trial,seed,metric,value\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 3 * 5);
  const auto slopes = nlohmann::json::parse(read("r.slopes.json"));
  ASSERT_TRUE(slopes.is_array());
  EXPECT_EQ(slopes.size(), 6u);
  EXPECT_TRUE(slopes[0].contains("window"));
  EXPECT_TRUE(nlohmann::json::parse(read("r.summary.json")).contains("cells"));
}

TEST_F(CliTest, SameSeedGivesByteIdenticalCsv) {
  write("c.json", kSmallFano);
  ASSERT_EQ(run({"estimation", "--config", path("c.json"), "--seed", "7", "--out", path("a.csv")}), 0);
  ASSERT_EQ(run({"estimation", "--config", path("c.json"), "--seed", "7", "--out", path("b.csv")}), 0);
  ASSERT_EQ(run({"estimation", "--config", path("c.json"), "--seed", "8", "--out", path("c.csv")}), 0);
  EXPECT_EQ(read("a.csv"), read("b.csv"));
  EXPECT_NE(read("a.csv"), read("c.csv"));
}

TEST_F(CliTest, InvalidConfigExitsTwo) {
  write("bad.json", "{\"H\": [1, 2");
  EXPECT_EQ(run({"estimation", "--config", path("bad.json")}), 2);
  write("unknown.json", R"({"horizons": [1]})");
  EXPECT_EQ(run({"estimation", "--config", path("unknown.json")}), 2);
  EXPECT_EQ(run({"estimation", "--config", path("missing.json")}), 2);
  EXPECT_EQ(run({"no-such-command"}), 2);
  EXPECT_EQ(run({"estimation", "--seed", "abc"}), 2);
}

TEST_F(CliTest, CapExceededExitsThree) {
  arkl::Rng rng(1);
  const auto p = oracle::random_tabular(4, 3, rng);
  const auto q = oracle::random_tabular(4, 3, rng);
  nlohmann::json doc{{"p", arkl::to_json(p)}, {"q", arkl::to_json(q)}, {"method", "exact"}};
  write("div.json", doc.dump());
  EXPECT_EQ(run({"divergence", "--config", path("div.json"), "--cap", "10", "--out", path("d.csv")}), 3);
}

TEST_F(CliTest, DivergenceOutput) {
  arkl::Rng rng(2);
  const auto p = oracle::random_tabular(2, 2, rng);
  const auto q = oracle::random_tabular(2, 2, rng);
  nlohmann::json doc{{"p", arkl::to_json(p)}, {"q", arkl::to_json(q)}};
  write("div.json", doc.dump());
  ASSERT_EQ(run({"divergence", "--config", path("div.json"), "--out", path("d.csv")}), 0);
  const auto csv = read("d.csv");
  EXPECT_EQ(csv.rfind("divergence,value,method,mc_samples,mc_stderr\n", 0), 0u);
  EXPECT_NE(csv.find("\njoint_kl,"), std::string::npos);
  EXPECT_NE(csv.find("\nsquared_hellinger,"), std::string::npos);
  EXPECT_NE(csv.find("\ntotal_variation,"), std::string::npos);
}

TEST_F(CliTest, InstanceManifest) {
  write("inst.json", R"({"instance": {"name": "bernoulli", "n": 100, "H": 2, "sign": -1}, "seed": 5})");
  ASSERT_EQ(run({"instance", "--config", path("inst.json"), "--out", path("m.json")}), 0);
  const auto j = nlohmann::json::parse(read("m.json"));
  EXPECT_EQ(j.at("construction"), "bernoulli_misspecified");
  EXPECT_EQ(j.at("seed"), 5);
  write("bad_inst.json", R"({"instance": {"name": "bernoulli", "m": 3}})");
  EXPECT_EQ(run({"instance", "--config", path("bad_inst.json")}), 2);
}

TEST_F(CliTest, FreedmanReport) {
  write("f.json", R"({"delta": 0.05, "trials": 2000, "process": "bernoulli"})");
  ASSERT_EQ(run({"freedman", "--config", path("f.json"), "--out", path("f_out.json")}), 0);
  const auto j = nlohmann::json::parse(read("f_out.json"));
  EXPECT_TRUE(j.at("forward_pass").get<bool>());
  EXPECT_TRUE(j.at("reverse_pass").get<bool>());
}

TEST_F(CliTest, HelpExitsZero) { EXPECT_EQ(run({"--help"}), 0); }
