#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("GRIDLIGHT_CLI");
    if (!p) throw std::runtime_error("GRIDLIGHT_CLI not set");
    return p;
}

int run(const std::string& args, const std::string& log = "/dev/null") {
    const std::string cmd = cli_path() + " " + args + " > " + log + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / "gridlight_cli_test";
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write_config(nlohmann::json extra = nlohmann::json::object()) {
        nlohmann::json cfg = {
            {"network", {{"rows", 2}, {"cols", 2}}},
            {"flow", {{"rate_vps", 0.4}}},
            {"advantage", {{"mode", "sociallight"}, {"gamma", 0.9}}},
            {"nn", {{"actor_hidden", {12}}, {"critic_hidden", {12}}}},
            {"train",
             {{"workers", 1},
              {"deterministic", true},
              {"episodes", 2},
              {"episode_len_steps", 16},
              {"rollout_steps", 8},
              {"eval_every", 2},
              {"reward_scale", 0.05},
              {"train_seeds", {11}},
              {"eval_seeds", {91, 92}}}},
        };
        cfg.merge_patch(extra);
        const std::string p = path("config.json");
        std::ofstream out(p);
        out << cfg.dump(2) << "\n";
        return p;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GenFlowsWritesParsableFileAndPrintsTripCount) {
    const std::string log = path("out.log");
    ASSERT_EQ(run("gen-flows --rows 2 --cols 2 --rate 0.5 --horizon 300 --seed 3 --out " + path("f.json"), log), 0);
    EXPECT_NE(read_file(log).find("trips"), std::string::npos);
    nlohmann::json j = nlohmann::json::parse(read_file(path("f.json")));
    EXPECT_TRUE(j.contains("trips"));
    EXPECT_GT(j["trips"].size(), 0u);
}

TEST_F(CliTest, GenFlowsSameSeedIsByteIdentical) {
    ASSERT_EQ(run("gen-flows --rows 2 --cols 2 --rate 0.5 --horizon 300 --seed 3 --out " + path("a.json")), 0);
    ASSERT_EQ(run("gen-flows --rows 2 --cols 2 --rate 0.5 --horizon 300 --seed 3 --out " + path("b.json")), 0);
    EXPECT_EQ(read_file(path("a.json")), read_file(path("b.json")));
}

TEST_F(CliTest, GenFlowsRejectsNonPositiveRate) {
    EXPECT_EQ(run("gen-flows --rate 0 --out " + path("x.json")), 2);
    EXPECT_EQ(run("gen-flows --rate -1 --out " + path("x.json")), 2);
}

TEST_F(CliTest, TrainZeroEpisodesWritesCheckpointAndEmptyLog) {
    const std::string cfg = write_config({{"train", {{"episodes", 0}}}});
    ASSERT_EQ(run("train --config " + cfg + " --out-dir " + path("run0")), 0);
    EXPECT_TRUE(fs::exists(path("run0/checkpoint_final.json")));
    EXPECT_TRUE(fs::exists(path("run0/config.json")));
    EXPECT_EQ(read_file(path("run0/train_log.ndjson")), "");
}

TEST_F(CliTest, TrainConfigErrorsListEveryProblemAndNameTheMissingKey) {
    nlohmann::json bad = {{"train", {{"workers", 0}, {"rollout_steps", 0}}}};  // and no advantage.mode
    const std::string p = path("bad.json");
    std::ofstream out(p);
    out << bad.dump() << "\n";
    out.close();
    const std::string log = path("bad.log");
    EXPECT_EQ(run("train --config " + p + " --out-dir " + path("runx"), log), 2);
    const std::string text = read_file(log);
    EXPECT_NE(text.find("advantage.mode"), std::string::npos);
    EXPECT_NE(text.find("train.workers"), std::string::npos);
    EXPECT_NE(text.find("train.rollout_steps"), std::string::npos);
}

TEST_F(CliTest, EvalControllerWritesCsvSummaryAndResolvedConfig) {
    const std::string cfg = write_config();
    const std::string log = path("eval.log");
    ASSERT_EQ(run("eval --config " + cfg + " --controller fixed_time --out " + path("ev"), log), 0);
    const std::string csv = read_file(path("ev.csv"));
    EXPECT_NE(csv.find("episode,seed,avg_queue,avg_speed,avg_int_delay,avg_cum_delay,avg_trip_time,entered,exited"),
              std::string::npos);
    // two scenario rows beyond the header
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);

    nlohmann::json summary = nlohmann::json::parse(read_file(path("ev.summary.json")));
    for (const char* key : {"avg_queue", "avg_speed", "avg_int_delay", "avg_cum_delay", "mean_return"}) {
        ASSERT_TRUE(summary.contains(key)) << key;
        EXPECT_TRUE(summary[key].contains("mean"));
        EXPECT_TRUE(summary[key].contains("std"));
    }

    // summary means equal the column means of the CSV
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // header
    double queue_sum = 0.0;
    int rows = 0;
    while (std::getline(lines, line)) {
        std::stringstream ss(line);
        std::string cell;
        for (int k = 0; k <= 2; ++k) std::getline(ss, cell, ',');
        queue_sum += std::stod(cell);
        ++rows;
    }
    ASSERT_EQ(rows, 2);
    EXPECT_NEAR(summary["avg_queue"]["mean"].get<double>(), queue_sum / rows, 1e-9);

    EXPECT_TRUE(fs::exists(path("ev.config.json")));
}

TEST_F(CliTest, EvalChecksTheCheckpointConfigHash) {
    const std::string cfg = write_config();
    ASSERT_EQ(run("train --config " + cfg + " --out-dir " + path("run1")), 0);
    ASSERT_EQ(run("eval --config " + cfg + " --checkpoint " + path("run1/checkpoint_final.json") + " --out " +
                  path("pol")),
              0);

    // a different phase table must be refused
    const std::string cfg2 = write_config(
        {{"network", {{"phase_table", {{1, 7, 2, 5, 8, 11}, {4, 10, 2, 5, 8, 11}}}}}});
    fs::rename(path("config.json"), path("config5.json"));
    EXPECT_EQ(run("eval --config " + path("config5.json") + " --checkpoint " + path("run1/checkpoint_final.json") +
                  " --out " + path("pol2")),
              3);
}

TEST_F(CliTest, EvalScenarioOverrideAndDeterminism) {
    const std::string cfg = write_config();
    ASSERT_EQ(run("eval --config " + cfg + " --controller max_pressure --scenarios 5,6,7 --out " + path("e1")), 0);
    ASSERT_EQ(run("eval --config " + cfg + " --controller max_pressure --scenarios 5,6,7 --out " + path("e2")), 0);
    EXPECT_EQ(read_file(path("e1.csv")), read_file(path("e2.csv")));
    const std::string csv = read_file(path("e1.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);  // header + 3 scenarios
}

TEST_F(CliTest, CompareClassicalOnlyEmitsTableWithoutCurves) {
    const std::string cfg = write_config();
    ASSERT_EQ(run("compare --config " + cfg + " --methods fixed_time,max_pressure --out " + path("cmp")), 0);
    const std::string table = read_file(path("cmp/comparison.csv"));
    EXPECT_NE(table.find("method,queue_length,speed_mps,intersection_delay_s,cumulative_delay_s,trip_time_s"),
              std::string::npos);
    EXPECT_NE(table.find("fixed_time,"), std::string::npos);
    EXPECT_NE(table.find("max_pressure,"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("cmp/curve_mean_return.csv")));
}

TEST_F(CliTest, CompareLearnedMethodsShareOneEpisodeAxis) {
    const std::string cfg = write_config();
    ASSERT_EQ(run("compare --config " + cfg + " --methods sociallight,a3c_local --out " + path("cmp2")), 0);
    for (const char* name : {"curve_mean_return.csv", "curve_avg_speed.csv", "curve_avg_int_delay.csv"}) {
        const std::string curve = read_file(path(std::string("cmp2/") + name));
        EXPECT_NE(curve.find("episode,a3c_local,sociallight"), std::string::npos) << name;
        EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 3) << name;  // header + 2 episodes
    }
    EXPECT_TRUE(fs::exists(path("cmp2/comparison.csv")));
}

TEST_F(CliTest, CompareRejectsUnknownMethod) {
    const std::string cfg = write_config();
    EXPECT_EQ(run("compare --config " + cfg + " --methods sociallight,warpdrive --out " + path("cmp3")), 2);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
    EXPECT_EQ(run(""), 2);                      // no subcommand
    EXPECT_EQ(run("train"), 2);                 // missing required flags
    EXPECT_EQ(run("eval --config nope.json --controller greedy --out x"), 2);  // unreadable config
}
