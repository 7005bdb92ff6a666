#include <gtest/gtest.h>

#include <algorithm>

#include "gridlight/config.hpp"

using namespace gridlight;

namespace {

nlohmann::json minimal_config() { return {{"advantage", {{"mode", "sociallight"}}}}; }

bool mentions(const ConfigError& e, const std::string& needle) {
    return std::any_of(e.issues().begin(), e.issues().end(),
                       [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST(Config, MinimalConfigFillsDefaults) {
    ExperimentConfig cfg = config_from_json(minimal_config());
    EXPECT_EQ(cfg.network.rows, 3);
    EXPECT_EQ(cfg.network.cols, 3);
    EXPECT_EQ(cfg.train.episode_len_steps, 720);
    EXPECT_EQ(cfg.train.delta_t_s, 5.0);
    EXPECT_EQ(cfg.train.yellow_s, 2.0);
    EXPECT_EQ(cfg.train.rollout_steps, 40);
    EXPECT_EQ(cfg.advantage.gamma, 0.99);
    EXPECT_EQ(cfg.advantage.gae_delta, 0.95);
    EXPECT_EQ(cfg.advantage.td_lambda, 0.95);
    EXPECT_EQ(cfg.train.optimizer.lr, 1e-4);
    EXPECT_EQ(cfg.train.optimizer.decay, 0.99);
    EXPECT_EQ(cfg.train.optimizer.epsilon, 1e-5);
    EXPECT_EQ(cfg.train.optimizer.clip_norm, 40.0);
    EXPECT_EQ(cfg.nn.actor_hidden, (std::vector<int>{128, 128}));
    EXPECT_EQ(cfg.nn.critic_hidden, (std::vector<int>{256, 256}));
    EXPECT_EQ(cfg.horizon_s(), 3600.0);
}

TEST(Config, MissingModeNamesTheKey) {
    try {
        config_from_json(nlohmann::json::object());
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_TRUE(mentions(e, "advantage.mode"));
    }
}

TEST(Config, AllProblemsReportedTogether) {
    nlohmann::json j = {
        {"network", {{"rows", 0}}},
        {"flow", {{"rate_vps", -1.0}}},
        {"advantage", {{"mode", "definitely_not_a_mode"}, {"gamma", 2.0}}},
        {"train", {{"workers", 0}, {"eval_seeds", {101}}}},  // collides with default train seed 101
    };
    try {
        config_from_json(j);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_GE(e.issues().size(), 5u);
        EXPECT_TRUE(mentions(e, "network.rows"));
        EXPECT_TRUE(mentions(e, "rate_vps"));
        EXPECT_TRUE(mentions(e, "advantage.mode"));
        EXPECT_TRUE(mentions(e, "gamma"));
        EXPECT_TRUE(mentions(e, "workers"));
        EXPECT_TRUE(mentions(e, "eval_seeds"));
    }
}

TEST(Config, SeedOverlapIsRejected) {
    nlohmann::json j = minimal_config();
    j["train"] = {{"train_seeds", {1, 2, 3}}, {"eval_seeds", {3, 4}}};
    EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Config, YellowMustBeShorterThanDecisionInterval) {
    nlohmann::json j = minimal_config();
    j["train"] = {{"delta_t_s", 2.0}, {"yellow_s", 2.0}};
    EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Config, ResolvedJsonRoundTrips) {
    nlohmann::json j = minimal_config();
    j["train"] = {{"episodes", 7}, {"reward_scale", 0.25}, {"train_seeds", {5, 6}}, {"eval_seeds", {7}}};
    j["observation"] = {{"schema", "sumo"}, {"wait_norm_s", 45.0}};
    ExperimentConfig cfg = config_from_json(j);
    ExperimentConfig back = config_from_json(config_to_json(cfg));
    EXPECT_EQ(config_to_json(cfg).dump(), config_to_json(back).dump());
    EXPECT_EQ(back.observation.kind, ObsSchema::Sumo);
    EXPECT_EQ(back.train.reward_scale, 0.25);
}

TEST(Config, CompatHashTracksModelSurfaceOnly) {
    ExperimentConfig base = config_from_json(minimal_config());
    const std::string h0 = config_compat_hash(base);
    EXPECT_EQ(h0.size(), 16u);

    ExperimentConfig same = base;
    same.train.episodes = 999;  // training length does not affect compatibility
    same.train.optimizer.lr = 0.5;
    EXPECT_EQ(config_compat_hash(same), h0);

    ExperimentConfig other_grid = base;
    other_grid.network.rows = 4;
    EXPECT_NE(config_compat_hash(other_grid), h0);

    ExperimentConfig other_phases = base;
    other_phases.network.phase_table.pop_back();
    EXPECT_NE(config_compat_hash(other_phases), h0);

    ExperimentConfig other_schema = base;
    other_schema.observation.kind = ObsSchema::Sumo;
    EXPECT_NE(config_compat_hash(other_schema), h0);

    ExperimentConfig other_mode = base;
    other_mode.advantage.mode = AdvantageMode::A3cLocal;
    EXPECT_NE(config_compat_hash(other_mode), h0);
}

TEST(Config, CustomPhaseTableParses) {
    nlohmann::json j = minimal_config();
    j["network"] = {{"rows", 2},
                    {"cols", 2},
                    {"phase_table", {{1, 7, 2, 5, 8, 11}, {4, 10, 2, 5, 8, 11}}}};
    ExperimentConfig cfg = config_from_json(j);
    ASSERT_EQ(cfg.network.phase_table.size(), 2u);
    EXPECT_EQ(cfg.network.phase_table[1].movements, (std::vector<int>{4, 10, 2, 5, 8, 11}));
}
