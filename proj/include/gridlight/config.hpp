#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridlight/advantage.hpp"
#include "gridlight/common.hpp"
#include "gridlight/mdp.hpp"
#include "gridlight/netmodel.hpp"
#include "gridlight/simcore.hpp"
#include "gridlight/tinynn.hpp"

namespace gridlight {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string message, std::vector<std::string> issues)
        : std::runtime_error(std::move(message)), issues_(std::move(issues)) {}
    const std::vector<std::string>& issues() const { return issues_; }

private:
    std::vector<std::string> issues_;
};

struct NetworkConfig {
    int rows = 3;
    int cols = 3;
    GridLinkConfig links;
    std::vector<Phase> phase_table = default_phase_table();
};

struct FlowConfig {
    double rate_vps = 0.5;
    RateSchedule schedule;  // optional; overrides rate_vps when non-empty
};

struct NnConfig {
    std::vector<int> actor_hidden = {128, 128};
    std::vector<int> critic_hidden = {256, 256};
    Activation activation = Activation::Relu;
    std::uint64_t init_seed = 0;
};

struct TrainSection {
    int workers = 8;
    long episodes = 1000;
    int episode_len_steps = 720;
    double delta_t_s = 5.0;
    double yellow_s = 2.0;
    int saturation_flow = 1;
    int rollout_steps = 40;
    double reward_scale = 1.0;
    bool deterministic = false;
    long eval_every = 50;
    double entropy_coef_final = 0.001;
    long entropy_anneal_episodes = 0;  // 0: anneal across the episode budget
    std::vector<std::uint64_t> train_seeds = {101, 102, 103, 104};
    std::vector<std::uint64_t> eval_seeds = {9001, 9002, 9003, 9004, 9005};
    OptimizerHyper optimizer;
};

struct ControllerConfig {
    std::string type = "fixed_time";  // fixed_time | greedy | max_pressure | policy
    // empty: resolved to an even 30 s cycle over the first (up to 4) phases
    std::vector<std::pair<int, double>> plan;
};

struct ExperimentConfig {
    NetworkConfig network;
    FlowConfig flow;
    ObservationSchema observation;
    AdvantageConfig advantage;
    NnConfig nn;
    TrainSection train;
    ControllerConfig controller;

    double horizon_s() const { return train.episode_len_steps * train.delta_t_s; }
    RateSchedule effective_schedule() const {
        return flow.schedule.empty() ? RateSchedule{{0.0, flow.rate_vps}} : flow.schedule;
    }
};

namespace cfgdetail {

class Reader {
public:
    Reader(const nlohmann::json& j, std::vector<std::string>& issues) : j_(j), issues_(issues) {}

    template <typename T>
    void get(const nlohmann::json& obj, const char* section, const char* key, T& out) {
        auto it = obj.find(key);
        if (it == obj.end()) return;
        try {
            out = it->get<T>();
        } catch (const std::exception& e) {
            issue(std::string(section) + "." + key + ": " + e.what());
        }
    }

    const nlohmann::json* section(const char* name) {
        auto it = j_.find(name);
        if (it == j_.end()) return nullptr;
        if (!it->is_object()) {
            issue(std::string(name) + ": expected an object");
            return nullptr;
        }
        return &*it;
    }

    void issue(std::string msg) { issues_.push_back(std::move(msg)); }

private:
    const nlohmann::json& j_;
    std::vector<std::string>& issues_;
};

}  // namespace cfgdetail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    std::vector<std::string> issues;
    cfgdetail::Reader r(j, issues);
    ExperimentConfig cfg;

    if (const auto* net = r.section("network")) {
        r.get(*net, "network", "rows", cfg.network.rows);
        r.get(*net, "network", "cols", cfg.network.cols);
        if (auto it = net->find("links"); it != net->end()) {
            auto read_template = [&](const char* key, LinkTemplate& t) {
                if (auto jt = it->find(key); jt != it->end()) {
                    r.get(*jt, "network.links", "lanes", t.lanes);
                    r.get(*jt, "network.links", "length_m", t.length_m);
                    r.get(*jt, "network.links", "speed_limit_mps", t.speed_mps);
                }
            };
            read_template("horizontal", cfg.network.links.horizontal);
            read_template("vertical", cfg.network.links.vertical);
        }
        if (auto it = net->find("phase_table"); it != net->end()) {
            try {
                std::vector<Phase> table;
                int pid = 0;
                for (const auto& movements : *it) {
                    Phase p;
                    p.id = pid++;
                    p.movements = movements.get<std::vector<int>>();
                    table.push_back(std::move(p));
                }
                if (table.empty()) {
                    r.issue("network.phase_table: must not be empty");
                } else {
                    cfg.network.phase_table = std::move(table);
                }
            } catch (const std::exception& e) {
                r.issue(std::string("network.phase_table: ") + e.what());
            }
        }
    }

    if (const auto* flow = r.section("flow")) {
        r.get(*flow, "flow", "rate_vps", cfg.flow.rate_vps);
        if (auto it = flow->find("schedule"); it != flow->end()) {
            try {
                for (const auto& pair : *it) {
                    cfg.flow.schedule.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
                }
            } catch (const std::exception& e) {
                r.issue(std::string("flow.schedule: ") + e.what());
            }
        }
    }

    if (const auto* obs = r.section("observation")) {
        std::string schema = to_string(cfg.observation.kind);
        r.get(*obs, "observation", "schema", schema);
        try {
            cfg.observation.kind = obs_schema_from_string(schema);
        } catch (const std::exception& e) {
            r.issue(std::string("observation.schema: ") + e.what());
        }
        r.get(*obs, "observation", "wait_norm_s", cfg.observation.wait_norm_s);
        r.get(*obs, "observation", "include_pressure", cfg.observation.include_pressure);
    }

    const auto* adv = r.section("advantage");
    if (!adv || !adv->contains("mode")) {
        r.issue("advantage.mode: missing required key (sociallight|raw_coma|a3c_local|a3c_neighborhood)");
    }
    if (adv) {
        if (adv->contains("mode")) {
            try {
                cfg.advantage.mode = advantage_mode_from_string(adv->at("mode").get<std::string>());
            } catch (const std::exception& e) {
                r.issue(std::string("advantage.mode: ") + e.what());
            }
        }
        r.get(*adv, "advantage", "gamma", cfg.advantage.gamma);
        r.get(*adv, "advantage", "delta", cfg.advantage.gae_delta);
        r.get(*adv, "advantage", "lambda", cfg.advantage.td_lambda);
        r.get(*adv, "advantage", "entropy_coef", cfg.advantage.entropy_coef);
    }

    if (const auto* nn = r.section("nn")) {
        r.get(*nn, "nn", "actor_hidden", cfg.nn.actor_hidden);
        r.get(*nn, "nn", "critic_hidden", cfg.nn.critic_hidden);
        r.get(*nn, "nn", "init_seed", cfg.nn.init_seed);
        std::string act = to_string(cfg.nn.activation);
        r.get(*nn, "nn", "activation", act);
        try {
            cfg.nn.activation = activation_from_string(act);
        } catch (const std::exception& e) {
            r.issue(std::string("nn.activation: ") + e.what());
        }
    }

    if (const auto* tr = r.section("train")) {
        r.get(*tr, "train", "workers", cfg.train.workers);
        r.get(*tr, "train", "episodes", cfg.train.episodes);
        r.get(*tr, "train", "episode_len_steps", cfg.train.episode_len_steps);
        r.get(*tr, "train", "delta_t_s", cfg.train.delta_t_s);
        r.get(*tr, "train", "yellow_s", cfg.train.yellow_s);
        r.get(*tr, "train", "saturation_flow", cfg.train.saturation_flow);
        r.get(*tr, "train", "rollout_steps", cfg.train.rollout_steps);
        r.get(*tr, "train", "reward_scale", cfg.train.reward_scale);
        r.get(*tr, "train", "deterministic", cfg.train.deterministic);
        r.get(*tr, "train", "eval_every", cfg.train.eval_every);
        r.get(*tr, "train", "entropy_coef_final", cfg.train.entropy_coef_final);
        r.get(*tr, "train", "entropy_anneal_episodes", cfg.train.entropy_anneal_episodes);
        r.get(*tr, "train", "train_seeds", cfg.train.train_seeds);
        r.get(*tr, "train", "eval_seeds", cfg.train.eval_seeds);
        if (auto it = tr->find("optimizer"); it != tr->end()) {
            r.get(*it, "train.optimizer", "lr", cfg.train.optimizer.lr);
            r.get(*it, "train.optimizer", "decay", cfg.train.optimizer.decay);
            r.get(*it, "train.optimizer", "epsilon", cfg.train.optimizer.epsilon);
            r.get(*it, "train.optimizer", "clip_norm", cfg.train.optimizer.clip_norm);
        }
    }

    if (const auto* ctrl = r.section("controller")) {
        r.get(*ctrl, "controller", "type", cfg.controller.type);
        if (auto it = ctrl->find("plan"); it != ctrl->end()) {
            try {
                cfg.controller.plan.clear();
                for (const auto& entry : *it) {
                    cfg.controller.plan.emplace_back(entry.at(0).get<int>(), entry.at(1).get<double>());
                }
                if (cfg.controller.plan.empty()) r.issue("controller.plan: must not be empty");
            } catch (const std::exception& e) {
                r.issue(std::string("controller.plan: ") + e.what());
            }
        }
    }

    // semantic validation, all findings reported together
    if (cfg.network.rows < 1 || cfg.network.cols < 1) issues.push_back("network.rows/cols: must be >= 1");
    if (cfg.flow.rate_vps <= 0.0 && cfg.flow.schedule.empty()) issues.push_back("flow.rate_vps: must be > 0");
    for (const auto& p : cfg.flow.schedule) {
        if (p.rate_vps <= 0.0) issues.push_back("flow.schedule: rates must be > 0");
    }
    try {
        cfg.advantage.validate();
    } catch (const std::exception& e) {
        issues.push_back(e.what());
    }
    if (cfg.train.workers < 1) issues.push_back("train.workers: must be >= 1");
    if (cfg.train.episodes < 0) issues.push_back("train.episodes: must be >= 0");
    if (cfg.train.episode_len_steps < 1) issues.push_back("train.episode_len_steps: must be >= 1");
    const double dt = cfg.train.delta_t_s;
    if (dt < 1.0 || std::abs(dt - std::lround(dt)) > 1e-9) {
        issues.push_back("train.delta_t_s: must be a positive whole number of seconds");
    }
    if (cfg.train.yellow_s < 0.0) issues.push_back("train.yellow_s: must be >= 0");
    if (cfg.train.yellow_s >= dt) issues.push_back("train.yellow_s: must be shorter than train.delta_t_s");
    if (cfg.train.saturation_flow < 1) issues.push_back("train.saturation_flow: must be >= 1");
    if (cfg.train.rollout_steps < 1) issues.push_back("train.rollout_steps: must be >= 1");
    if (cfg.train.reward_scale <= 0.0) issues.push_back("train.reward_scale: must be > 0");
    if (cfg.train.eval_every < 1) issues.push_back("train.eval_every: must be >= 1");
    if (cfg.train.train_seeds.empty()) issues.push_back("train.train_seeds: must not be empty");
    if (cfg.train.eval_seeds.empty()) issues.push_back("train.eval_seeds: must not be empty");
    std::set<std::uint64_t> train_set(cfg.train.train_seeds.begin(), cfg.train.train_seeds.end());
    for (std::uint64_t s : cfg.train.eval_seeds) {
        if (train_set.count(s)) {
            issues.push_back("train.eval_seeds: seed " + std::to_string(s) + " also appears in train_seeds");
        }
    }
    for (int h : cfg.nn.actor_hidden) {
        if (h < 1) issues.push_back("nn.actor_hidden: widths must be >= 1");
    }
    for (int h : cfg.nn.critic_hidden) {
        if (h < 1) issues.push_back("nn.critic_hidden: widths must be >= 1");
    }
    if (cfg.controller.type != "fixed_time" && cfg.controller.type != "greedy" &&
        cfg.controller.type != "max_pressure" && cfg.controller.type != "policy") {
        issues.push_back("controller.type: unknown controller '" + cfg.controller.type + "'");
    }
    if (cfg.controller.plan.empty()) {
        const int cycle_phases = std::min<int>(4, static_cast<int>(cfg.network.phase_table.size()));
        for (int p = 0; p < cycle_phases; ++p) cfg.controller.plan.emplace_back(p, 30.0);
    }
    for (const auto& [phase, dur] : cfg.controller.plan) {
        if (dur <= 0.0) issues.push_back("controller.plan: durations must be > 0");
        if (phase < 0 || phase >= static_cast<int>(cfg.network.phase_table.size())) {
            issues.push_back("controller.plan: phase " + std::to_string(phase) + " outside the phase table");
        }
    }

    if (!issues.empty()) {
        std::ostringstream os;
        os << "config has " << issues.size() << " problem(s):";
        for (const auto& s : issues) os << "\n  - " << s;
        throw ConfigError(os.str(), issues);
    }
    return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json phase_table = nlohmann::json::array();
    for (const auto& p : cfg.network.phase_table) phase_table.push_back(p.movements);
    nlohmann::json schedule = nlohmann::json::array();
    for (const auto& p : cfg.flow.schedule) schedule.push_back({p.t_start_s, p.rate_vps});
    nlohmann::json plan = nlohmann::json::array();
    for (const auto& [phase, dur] : cfg.controller.plan) plan.push_back({phase, dur});
    return {
        {"controller", {{"type", cfg.controller.type}, {"plan", std::move(plan)}}},
        {"network",
         {{"rows", cfg.network.rows},
          {"cols", cfg.network.cols},
          {"links",
           {{"horizontal",
             {{"lanes", cfg.network.links.horizontal.lanes},
              {"length_m", cfg.network.links.horizontal.length_m},
              {"speed_limit_mps", cfg.network.links.horizontal.speed_mps}}},
            {"vertical",
             {{"lanes", cfg.network.links.vertical.lanes},
              {"length_m", cfg.network.links.vertical.length_m},
              {"speed_limit_mps", cfg.network.links.vertical.speed_mps}}}}},
          {"phase_table", phase_table}}},
        {"flow", {{"rate_vps", cfg.flow.rate_vps}, {"schedule", schedule}}},
        {"observation",
         {{"schema", to_string(cfg.observation.kind)},
          {"wait_norm_s", cfg.observation.wait_norm_s},
          {"include_pressure", cfg.observation.include_pressure}}},
        {"advantage",
         {{"mode", to_string(cfg.advantage.mode)},
          {"gamma", cfg.advantage.gamma},
          {"delta", cfg.advantage.gae_delta},
          {"lambda", cfg.advantage.td_lambda},
          {"entropy_coef", cfg.advantage.entropy_coef}}},
        {"nn",
         {{"actor_hidden", cfg.nn.actor_hidden},
          {"critic_hidden", cfg.nn.critic_hidden},
          {"activation", to_string(cfg.nn.activation)},
          {"init_seed", cfg.nn.init_seed}}},
        {"train",
         {{"workers", cfg.train.workers},
          {"episodes", cfg.train.episodes},
          {"episode_len_steps", cfg.train.episode_len_steps},
          {"delta_t_s", cfg.train.delta_t_s},
          {"yellow_s", cfg.train.yellow_s},
          {"saturation_flow", cfg.train.saturation_flow},
          {"rollout_steps", cfg.train.rollout_steps},
          {"reward_scale", cfg.train.reward_scale},
          {"deterministic", cfg.train.deterministic},
          {"eval_every", cfg.train.eval_every},
          {"entropy_coef_final", cfg.train.entropy_coef_final},
          {"entropy_anneal_episodes", cfg.train.entropy_anneal_episodes},
          {"train_seeds", cfg.train.train_seeds},
          {"eval_seeds", cfg.train.eval_seeds},
          {"optimizer",
           {{"lr", cfg.train.optimizer.lr},
            {"decay", cfg.train.optimizer.decay},
            {"epsilon", cfg.train.optimizer.epsilon},
            {"clip_norm", cfg.train.optimizer.clip_norm}}}}},
    };
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path, {"cannot open config file " + path});
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what(), {e.what()});
    }
    return config_from_json(j);
}

// Identifies the model-compatibility surface: anything that changes network
// I/O widths or the meaning of checkpointed parameters.
inline std::string config_compat_hash(const ExperimentConfig& cfg) {
    nlohmann::json full = config_to_json(cfg);
    nlohmann::json compat = {
        {"network", full.at("network")},
        {"observation", full.at("observation")},
        {"nn", {{"actor_hidden", cfg.nn.actor_hidden}, {"critic_hidden", cfg.nn.critic_hidden},
                {"activation", to_string(cfg.nn.activation)}}},
        {"mode", to_string(cfg.advantage.mode)},
    };
    return to_hex(fnv1a64(compat.dump()));
}

}  // namespace gridlight
