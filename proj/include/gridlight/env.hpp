#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "gridlight/config.hpp"
#include "gridlight/flows.hpp"
#include "gridlight/mdp.hpp"
#include "gridlight/netmodel.hpp"
#include "gridlight/simcore.hpp"

namespace gridlight {

struct EnvStepResult {
    std::vector<Observation> observations;
    std::vector<double> local_rewards;
    std::vector<double> neighborhood_rewards;
    StepMetrics metrics;
    bool done = false;
};

// Simulator-agnostic environment surface: alternate backends plug in here.
class EnvInterface {
public:
    virtual ~EnvInterface() = default;

    virtual std::vector<Observation> reset(std::uint64_t scenario_seed) = 0;
    virtual EnvStepResult step(const std::vector<int>& joint_action) = 0;

    virtual const TrafficNetwork& network() const = 0;
    virtual const ObservationSchema& schema() const = 0;
    virtual int agent_count() const = 0;
    virtual int action_count() const = 0;
    virtual int decision_steps() const = 0;
    virtual double clock_s() const = 0;
    virtual EpisodeMetrics episode_metrics() const = 0;
    virtual std::vector<double> pressures(NodeId agent) const = 0;
};

// Internal queue-based backend. Each instance owns its simulator state; one
// instance per rollout worker, nothing shared but the immutable network.
class QueueSimEnv final : public EnvInterface {
public:
    QueueSimEnv(const TrafficNetwork& net, const ExperimentConfig& cfg)
        : net_(&net),
          sim_(net, SimParams{cfg.train.yellow_s, cfg.train.saturation_flow}),
          schema_(cfg.observation),
          delta_t_s_(cfg.train.delta_t_s),
          episode_len_steps_(cfg.train.episode_len_steps),
          horizon_s_(cfg.horizon_s()),
          schedule_(cfg.effective_schedule()) {}

    std::vector<Observation> reset(std::uint64_t scenario_seed) override {
        auto it = flow_cache_.find(scenario_seed);
        if (it == flow_cache_.end()) {
            it = flow_cache_.emplace(scenario_seed, generate_flows(*net_, schedule_, horizon_s_, scenario_seed)).first;
        }
        state_ = sim_.reset(it->second, scenario_seed);
        t_ = 0;
        return observe_all();
    }

    EnvStepResult step(const std::vector<int>& joint_action) override {
        EnvStepResult out;
        out.metrics = sim_.step(state_, joint_action, delta_t_s_);
        ++t_;
        out.observations = observe_all();
        out.local_rewards.reserve(static_cast<std::size_t>(agent_count()));
        for (int i = 0; i < agent_count(); ++i) out.local_rewards.push_back(local_reward(sim_, state_, i));
        out.neighborhood_rewards.reserve(static_cast<std::size_t>(agent_count()));
        for (int i = 0; i < agent_count(); ++i) {
            out.neighborhood_rewards.push_back(neighborhood_reward(out.local_rewards, *net_, i));
        }
        out.done = t_ >= episode_len_steps_;
        return out;
    }

    const TrafficNetwork& network() const override { return *net_; }
    const ObservationSchema& schema() const override { return schema_; }
    int agent_count() const override { return net_->intersection_count(); }
    int action_count() const override { return net_->phase_count(); }
    int decision_steps() const override { return episode_len_steps_; }
    double clock_s() const override { return state_.clock_s; }
    EpisodeMetrics episode_metrics() const override { return sim_.episode_metrics(state_); }
    std::vector<double> pressures(NodeId agent) const override { return sim_.pressure_of(state_, agent); }

    const SimState& state() const { return state_; }
    const Simulator& simulator() const { return sim_; }

private:
    std::vector<Observation> observe_all() const {
        std::vector<Observation> obs;
        obs.reserve(static_cast<std::size_t>(agent_count()));
        for (int i = 0; i < agent_count(); ++i) obs.push_back(observe(sim_, state_, i, schema_));
        return obs;
    }

    const TrafficNetwork* net_;
    Simulator sim_;
    ObservationSchema schema_;
    double delta_t_s_;
    int episode_len_steps_;
    double horizon_s_;
    RateSchedule schedule_;
    std::map<std::uint64_t, FlowSpec> flow_cache_;
    SimState state_;
    int t_ = 0;
};

}  // namespace gridlight
