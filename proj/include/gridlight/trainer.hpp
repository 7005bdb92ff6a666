#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridlight/advantage.hpp"
#include "gridlight/config.hpp"
#include "gridlight/controllers.hpp"
#include "gridlight/env.hpp"
#include "gridlight/tinynn.hpp"

namespace gridlight {

inline bool uses_q_critic(AdvantageMode mode) {
    return mode == AdvantageMode::SocialLight || mode == AdvantageMode::RawComa;
}

struct NetworkShapes {
    MlpSpec actor;
    MlpSpec critic;
};

inline NetworkShapes make_network_shapes(const ExperimentConfig& cfg, const TrafficNetwork& net) {
    const int z_width = augmented_width(net, cfg.observation);
    const int actions = net.phase_count();
    NetworkShapes shapes;
    shapes.actor = {z_width, cfg.nn.actor_hidden, cfg.nn.activation, actions, OutputHead::Softmax};
    if (uses_q_critic(cfg.advantage.mode)) {
        shapes.critic = {z_width + 4 * actions, cfg.nn.critic_hidden, cfg.nn.activation, actions, OutputHead::Linear};
    } else {
        shapes.critic = {z_width, cfg.nn.critic_hidden, cfg.nn.activation, 1, OutputHead::Linear};
    }
    return shapes;
}

inline std::unique_ptr<ParameterStore> make_parameter_store(const ExperimentConfig& cfg, const TrafficNetwork& net) {
    NetworkShapes shapes = make_network_shapes(cfg, net);
    MlpParams actor = init_mlp(shapes.actor, derive_seed(cfg.nn.init_seed, 0xAC7));
    MlpParams critic = init_mlp(shapes.critic, derive_seed(cfg.nn.init_seed, 0xC71));
    return std::make_unique<ParameterStore>(std::move(actor), std::move(critic), cfg.train.optimizer);
}

// ---- checkpointing ---------------------------------------------------------

struct Checkpoint {
    std::string config_hash;
    long episode = 0;
    MlpParams actor;
    MlpParams critic;
    RmsPropState opt_actor;
    RmsPropState opt_critic;
    OptimizerHyper hyper;
    std::uint64_t version = 0;
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
    return {{"format", "gridlight-checkpoint"},
            {"format_version", 1},
            {"config_hash", ck.config_hash},
            {"episode", ck.episode},
            {"store_version", ck.version},
            {"actor", mlp_params_to_json(ck.actor)},
            {"critic", mlp_params_to_json(ck.critic)},
            {"optimizer",
             {{"lr", ck.hyper.lr},
              {"decay", ck.hyper.decay},
              {"epsilon", ck.hyper.epsilon},
              {"clip_norm", ck.hyper.clip_norm},
              {"actor_cache", layers_to_json(ck.opt_actor.cache)},
              {"critic_cache", layers_to_json(ck.opt_critic.cache)}}}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "gridlight-checkpoint") {
        throw std::runtime_error("checkpoint: unrecognized format marker");
    }
    Checkpoint ck;
    ck.config_hash = j.at("config_hash").get<std::string>();
    ck.episode = j.at("episode").get<long>();
    ck.version = j.at("store_version").get<std::uint64_t>();
    ck.actor = mlp_params_from_json(j.at("actor"));
    ck.critic = mlp_params_from_json(j.at("critic"));
    const auto& opt = j.at("optimizer");
    ck.hyper.lr = opt.at("lr").get<double>();
    ck.hyper.decay = opt.at("decay").get<double>();
    ck.hyper.epsilon = opt.at("epsilon").get<double>();
    ck.hyper.clip_norm = opt.at("clip_norm").get<double>();
    ck.opt_actor.cache = layers_from_json(opt.at("actor_cache"));
    ck.opt_critic.cache = layers_from_json(opt.at("critic_cache"));
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << checkpoint_to_json(ck).dump(1) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    return checkpoint_from_json(nlohmann::json::parse(in));
}

// ---- rollouts --------------------------------------------------------------

struct RolloutResult {
    std::vector<RolloutBuffer> buffers;  // one per agent, equal lengths
    bool episode_done = false;
    double local_reward_sum = 0.0;  // summed over agents and steps, unscaled
};

// Collects up to `max_steps` decision steps from the worker's environment.
// `obs_all` carries the current per-agent observations across calls.
inline RolloutResult run_rollout(EnvInterface& env, std::vector<Observation>& obs_all, const ParamSnapshot& snap,
                                 const ExperimentConfig& cfg, int max_steps, Rng& rng) {
    const TrafficNetwork& net = env.network();
    const int n_agents = env.agent_count();
    const int n_actions = env.action_count();
    const bool q_critic = uses_q_critic(cfg.advantage.mode);

    RolloutResult out;
    out.buffers.assign(static_cast<std::size_t>(n_agents), RolloutBuffer{});

    auto neighbor_actions_of = [&](NodeId i, const std::vector<int>& actions) {
        std::array<int, 4> na{-1, -1, -1, -1};
        const NeighborSlots slots = neighbors_of(net, i);
        for (int side = 0; side < 4; ++side) {
            if (slots.valid[static_cast<std::size_t>(side)]) {
                na[static_cast<std::size_t>(side)] =
                    actions[static_cast<std::size_t>(slots.ids[static_cast<std::size_t>(side)])];
            }
        }
        return na;
    };

    for (int t = 0; t < max_steps; ++t) {
        std::vector<std::vector<double>> z(static_cast<std::size_t>(n_agents));
        std::vector<std::vector<double>> pis(static_cast<std::size_t>(n_agents));
        std::vector<int> actions(static_cast<std::size_t>(n_agents));
        for (int i = 0; i < n_agents; ++i) {
            z[static_cast<std::size_t>(i)] = augment(obs_all, net, i, cfg.observation).flat();
            pis[static_cast<std::size_t>(i)] = actor_forward(snap.actor, z[static_cast<std::size_t>(i)]);
            actions[static_cast<std::size_t>(i)] = rng.categorical(pis[static_cast<std::size_t>(i)]);
        }

        EnvStepResult step = env.step(actions);
        for (int i = 0; i < n_agents; ++i) {
            TransitionRecord rec;
            rec.t = t;
            rec.z_aug = std::move(z[static_cast<std::size_t>(i)]);
            rec.action = actions[static_cast<std::size_t>(i)];
            rec.neighbor_actions = neighbor_actions_of(i, actions);
            rec.policy_dist = std::move(pis[static_cast<std::size_t>(i)]);
            rec.critic_vec = q_critic ? critic_forward(snap.critic, rec.z_aug,
                                                       encode_neighbor_actions(rec.neighbor_actions, n_actions))
                                      : critic_forward(snap.critic, rec.z_aug, {});
            rec.local_reward = step.local_rewards[static_cast<std::size_t>(i)];
            rec.neighborhood_reward = step.neighborhood_rewards[static_cast<std::size_t>(i)];
            out.local_reward_sum += rec.local_reward;
            out.buffers[static_cast<std::size_t>(i)].steps.push_back(std::move(rec));
        }
        obs_all = std::move(step.observations);
        if (step.done) {
            out.episode_done = true;
            break;
        }
    }

    if (!out.episode_done) {
        // truncated: record the boundary state with freshly sampled actions so
        // the future-state counterfactual baseline conditions on concrete
        // neighbor actions
        std::vector<std::vector<double>> z(static_cast<std::size_t>(n_agents));
        std::vector<std::vector<double>> pis(static_cast<std::size_t>(n_agents));
        std::vector<int> actions(static_cast<std::size_t>(n_agents));
        for (int i = 0; i < n_agents; ++i) {
            z[static_cast<std::size_t>(i)] = augment(obs_all, net, i, cfg.observation).flat();
            pis[static_cast<std::size_t>(i)] = actor_forward(snap.actor, z[static_cast<std::size_t>(i)]);
            actions[static_cast<std::size_t>(i)] = rng.categorical(pis[static_cast<std::size_t>(i)]);
        }
        for (int i = 0; i < n_agents; ++i) {
            BootstrapRecord boot;
            boot.z_aug = std::move(z[static_cast<std::size_t>(i)]);
            boot.neighbor_actions = neighbor_actions_of(i, actions);
            boot.policy_dist = std::move(pis[static_cast<std::size_t>(i)]);
            boot.critic_vec = q_critic ? critic_forward(snap.critic, boot.z_aug,
                                                        encode_neighbor_actions(boot.neighbor_actions, n_actions))
                                       : critic_forward(snap.critic, boot.z_aug, {});
            out.buffers[static_cast<std::size_t>(i)].bootstrap = std::move(boot);
            out.buffers[static_cast<std::size_t>(i)].truncated = true;
        }
    }
    return out;
}

// ---- gradients -------------------------------------------------------------

struct GradientPair {
    GradientSet actor;
    GradientSet critic;
    double policy_loss_value = 0.0;
    double critic_loss_value = 0.0;
};

// Sums gradients over agents (parameter sharing); the actor sum is normalized
// by agents*steps, the critic by agents (its loss already averages over steps).
inline GradientPair compute_gradients(const std::vector<RolloutBuffer>& buffers, const ParamSnapshot& snap,
                                      const ExperimentConfig& cfg, double entropy_coef) {
    if (buffers.empty() || buffers[0].steps.empty()) {
        throw std::invalid_argument("compute_gradients: empty rollout buffer");
    }
    const AdvantageMode mode = cfg.advantage.mode;
    const bool q_critic = uses_q_critic(mode);
    const int n_agents = static_cast<int>(buffers.size());
    const int t_len = buffers[0].length();
    const int n_actions = snap.actor.spec.output_width;

    GradientPair out;
    out.actor = zeros_like(snap.actor);
    out.critic = zeros_like(snap.critic);

    for (int agent = 0; agent < n_agents; ++agent) {
        const RolloutBuffer& raw = buffers[static_cast<std::size_t>(agent)];
        if (raw.length() != t_len) throw std::invalid_argument("compute_gradients: ragged rollout lengths");

        // reward scaling keeps value magnitudes in a trainable range; the
        // buffer itself keeps raw rewards for logging
        RolloutBuffer buf = raw;
        for (auto& s : buf.steps) {
            s.local_reward *= cfg.train.reward_scale;
            s.neighborhood_reward *= cfg.train.reward_scale;
        }

        AdvantageResult adv;
        try {
            adv = variant_advantages(mode, buf, cfg.advantage);
        } catch (const std::exception& e) {
            throw std::runtime_error("compute_gradients: agent " + std::to_string(agent) + ": " + e.what());
        }

        std::vector<std::vector<double>> pis, qs;
        std::vector<int> actions;
        for (const auto& s : buf.steps) {
            pis.push_back(s.policy_dist);
            qs.push_back(s.critic_vec);
            actions.push_back(s.action);
        }

        PolicyLossResult pl = policy_loss(pis, actions, adv.advantages, entropy_coef);
        CriticLossResult cl = critic_loss(qs, actions, adv.targets);
        out.policy_loss_value += pl.loss;
        out.critic_loss_value += cl.loss;

        for (int t = 0; t < t_len; ++t) {
            const TransitionRecord& rec = buf.steps[static_cast<std::size_t>(t)];
            ForwardCache cache;
            mlp_forward(snap.actor, rec.z_aug, &cache);
            mlp_backward(snap.actor, cache, pl.logit_seeds[static_cast<std::size_t>(t)], out.actor);

            std::vector<double> critic_input = rec.z_aug;
            if (q_critic) {
                const auto onehot = encode_neighbor_actions(rec.neighbor_actions, n_actions);
                critic_input.insert(critic_input.end(), onehot.begin(), onehot.end());
            }
            ForwardCache ccache;
            mlp_forward(snap.critic, critic_input, &ccache);
            mlp_backward(snap.critic, ccache, cl.seeds[static_cast<std::size_t>(t)], out.critic);
        }
    }

    scale_gradients(out.actor, 1.0 / (static_cast<double>(n_agents) * static_cast<double>(t_len)));
    scale_gradients(out.critic, 1.0 / static_cast<double>(n_agents));
    out.policy_loss_value /= static_cast<double>(n_agents) * static_cast<double>(t_len);
    out.critic_loss_value /= static_cast<double>(n_agents);
    return out;
}

// ---- evaluation ------------------------------------------------------------

enum class ControllerKind { FixedTime, Greedy, MaxPressure, Policy };

inline ControllerKind controller_kind_from_string(const std::string& s) {
    if (s == "fixed_time") return ControllerKind::FixedTime;
    if (s == "greedy") return ControllerKind::Greedy;
    if (s == "max_pressure") return ControllerKind::MaxPressure;
    if (s == "policy") return ControllerKind::Policy;
    throw std::invalid_argument("unknown controller '" + s + "' (expected fixed_time|greedy|max_pressure|policy)");
}

struct EvalRow {
    std::uint64_t seed = 0;
    double mean_return = 0.0;
    EpisodeMetrics metrics;
};

struct EvalTable {
    std::vector<EvalRow> rows;
    double mean_return = 0.0;
    double std_return = 0.0;
    EpisodeMetrics mean;
    EpisodeMetrics stddev;
};

namespace detail {

inline void aggregate(EvalTable& table) {
    const std::size_t n = table.rows.size();
    if (n == 0) return;
    auto mean_std = [&](auto getter) -> std::pair<double, double> {
        double mean = 0.0;
        std::size_t count = 0;
        for (const auto& r : table.rows) {
            auto v = getter(r);
            if (v) {
                mean += *v;
                ++count;
            }
        }
        if (count == 0) return {0.0, 0.0};
        mean /= static_cast<double>(count);
        double var = 0.0;
        for (const auto& r : table.rows) {
            auto v = getter(r);
            if (v) var += (*v - mean) * (*v - mean);
        }
        return {mean, std::sqrt(var / static_cast<double>(count))};
    };
    auto always = [](double v) { return std::optional<double>(v); };

    std::tie(table.mean_return, table.std_return) =
        mean_std([&](const EvalRow& r) { return always(r.mean_return); });
    std::tie(table.mean.avg_queue_length, table.stddev.avg_queue_length) =
        mean_std([&](const EvalRow& r) { return always(r.metrics.avg_queue_length); });
    std::tie(table.mean.avg_speed_mps, table.stddev.avg_speed_mps) =
        mean_std([&](const EvalRow& r) { return always(r.metrics.avg_speed_mps); });
    std::tie(table.mean.avg_intersection_delay_s, table.stddev.avg_intersection_delay_s) =
        mean_std([&](const EvalRow& r) { return always(r.metrics.avg_intersection_delay_s); });
    std::tie(table.mean.avg_cumulative_delay_s, table.stddev.avg_cumulative_delay_s) =
        mean_std([&](const EvalRow& r) { return always(r.metrics.avg_cumulative_delay_s); });
    bool any_trip = false;
    for (const auto& r : table.rows) any_trip = any_trip || r.metrics.avg_trip_time_s.has_value();
    if (any_trip) {
        auto [m, s] = mean_std([&](const EvalRow& r) { return r.metrics.avg_trip_time_s; });
        table.mean.avg_trip_time_s = m;
        table.stddev.avg_trip_time_s = s;
    }
    for (const auto& r : table.rows) {
        table.mean.entered += r.metrics.entered;
        table.mean.exited += r.metrics.exited;
    }
    table.mean.entered /= static_cast<long>(n);
    table.mean.exited /= static_cast<long>(n);
}

}  // namespace detail

// Plays one episode per scenario seed under the given action rule and tabulates
// the episode metrics with mean/std aggregates.
inline EvalTable run_evaluation(const ExperimentConfig& cfg, const TrafficNetwork& net,
                                const std::function<std::vector<int>(EnvInterface&, const std::vector<Observation>&)>& act,
                                const std::vector<std::uint64_t>& seeds) {
    EvalTable table;
    QueueSimEnv env(net, cfg);
    for (std::uint64_t seed : seeds) {
        std::vector<Observation> obs = env.reset(seed);
        double return_sum = 0.0;
        bool done = false;
        while (!done) {
            EnvStepResult step = env.step(act(env, obs));
            for (double r : step.local_rewards) return_sum += r;
            obs = std::move(step.observations);
            done = step.done;
        }
        EvalRow row;
        row.seed = seed;
        row.mean_return = return_sum / env.agent_count();
        row.metrics = env.episode_metrics();
        table.rows.push_back(std::move(row));
    }
    detail::aggregate(table);
    return table;
}

inline EvalTable evaluate_policy(const ExperimentConfig& cfg, const TrafficNetwork& net, const MlpParams& actor,
                                 const std::vector<std::uint64_t>& seeds) {
    Rng unused(0);
    auto act = [&](EnvInterface& env, const std::vector<Observation>& obs) {
        std::vector<int> actions;
        actions.reserve(static_cast<std::size_t>(env.agent_count()));
        for (int i = 0; i < env.agent_count(); ++i) {
            actions.push_back(
                policy_action(actor, augment(obs, env.network(), i, env.schema()).flat(), ActionSelect::Argmax, unused));
        }
        return actions;
    };
    return run_evaluation(cfg, net, act, seeds);
}

inline EvalTable evaluate_controller(const ExperimentConfig& cfg, const TrafficNetwork& net, ControllerKind kind,
                                     const std::vector<std::uint64_t>& seeds,
                                     const FixedTimePlan& plan = default_fixed_time_plan()) {
    auto act = [&, kind](EnvInterface& env, const std::vector<Observation>& obs) {
        std::vector<int> actions;
        actions.reserve(static_cast<std::size_t>(env.agent_count()));
        for (int i = 0; i < env.agent_count(); ++i) {
            switch (kind) {
                case ControllerKind::FixedTime:
                    actions.push_back(fixed_time_action(env.clock_s(), plan));
                    break;
                case ControllerKind::Greedy:
                    actions.push_back(greedy_action(obs[static_cast<std::size_t>(i)],
                                                    env.network().intersections[static_cast<std::size_t>(i)]));
                    break;
                case ControllerKind::MaxPressure:
                    actions.push_back(max_pressure_action(env.pressures(i)));
                    break;
                case ControllerKind::Policy:
                    throw std::invalid_argument("evaluate_controller: use evaluate_policy for learned policies");
            }
        }
        return actions;
    };
    return run_evaluation(cfg, net, act, seeds);
}

// ---- training orchestration --------------------------------------------------

struct TrainOutcome {
    std::string log_path;
    std::string final_checkpoint_path;
    long episodes_completed = 0;
};

class Trainer {
public:
    explicit Trainer(const ExperimentConfig& cfg)
        : cfg_(cfg), net_(build_grid_network(cfg.network.rows, cfg.network.cols, cfg.network.links,
                                             cfg.network.phase_table)) {
        auto violations = validate_network(net_);
        if (!violations.empty()) {
            throw std::runtime_error("trainer: network invalid: " + violations.front().rule + " (" +
                                     violations.front().detail + ")");
        }
        if (cfg_.train.deterministic && cfg_.train.workers != 1) {
            throw std::runtime_error("trainer: deterministic mode requires exactly 1 worker");
        }
    }

    const TrafficNetwork& network() const { return net_; }

    TrainOutcome train(const std::string& out_dir, const std::string& resume_checkpoint = "") {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        const std::string log_path = (fs::path(out_dir) / "train_log.ndjson").string();
        const std::string config_path = (fs::path(out_dir) / "config.json").string();
        const std::string hash = config_compat_hash(cfg_);

        {
            std::ofstream cfg_out(config_path);
            cfg_out << config_to_json(cfg_).dump(2) << "\n";
        }

        auto store = make_parameter_store(cfg_, net_);
        long start_episode = 0;
        if (!resume_checkpoint.empty()) {
            Checkpoint ck = load_checkpoint(resume_checkpoint);
            if (ck.config_hash != hash) {
                throw std::runtime_error("trainer: checkpoint config hash " + ck.config_hash +
                                         " does not match this config (" + hash + ")");
            }
            store->restore({ck.actor, ck.critic, ck.opt_actor, ck.opt_critic, ck.version});
            start_episode = ck.episode;
        }

        std::ofstream log(log_path);
        if (!log) throw std::runtime_error("trainer: cannot open log " + log_path);

        const auto t0 = std::chrono::steady_clock::now();
        auto wall_s = [&]() -> double {
            if (cfg_.train.deterministic) return 0.0;
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        };

        std::mutex log_mutex;
        auto write_record = [&](const nlohmann::json& j) {
            log << j.dump() << "\n";
            log.flush();
        };

        auto eval_and_checkpoint = [&](long episode_count) {
            EvalTable table = evaluate_policy(cfg_, net_, store->snapshot().actor, cfg_.train.eval_seeds);
            nlohmann::json j = {{"type", "eval"},
                                {"episode", episode_count},
                                {"wall_s", wall_s()},
                                {"mean_return", table.mean_return},
                                {"return_std", table.std_return}};
            append_metrics(j, table.mean, table.stddev);
            write_record(j);

            Checkpoint ck = snapshot_checkpoint(*store, hash, episode_count);
            std::ostringstream name;
            name << "checkpoint_ep" << std::setw(6) << std::setfill('0') << episode_count << ".json";
            save_checkpoint(ck, (fs::path(out_dir) / name.str()).string());
        };

        if (cfg_.train.episodes > start_episode) {
            std::lock_guard<std::mutex> lock(log_mutex);
            eval_and_checkpoint(start_episode);
        }

        std::atomic<long> next_episode{start_episode};
        std::atomic<bool> abort{false};
        std::exception_ptr first_error;
        std::mutex error_mutex;

        auto worker_fn = [&](int worker_id) {
            try {
                QueueSimEnv env(net_, cfg_);
                while (!abort.load()) {
                    const long e = next_episode.fetch_add(1);
                    if (e >= cfg_.train.episodes) break;
                    run_episode(env, *store, e, worker_id, wall_s, log_mutex, write_record, eval_and_checkpoint);
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::make_exception_ptr(
                        std::runtime_error("worker " + std::to_string(worker_id) + ": " + e.what()));
                }
                abort.store(true);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                abort.store(true);
            }
        };

        if (cfg_.train.workers == 1) {
            worker_fn(0);
        } else {
            std::vector<std::thread> threads;
            for (int w = 0; w < cfg_.train.workers; ++w) threads.emplace_back(worker_fn, w);
            for (auto& t : threads) t.join();
        }
        if (first_error) std::rethrow_exception(first_error);

        const std::string final_path = (fs::path(out_dir) / "checkpoint_final.json").string();
        save_checkpoint(snapshot_checkpoint(*store, hash, cfg_.train.episodes), final_path);

        TrainOutcome outcome;
        outcome.log_path = log_path;
        outcome.final_checkpoint_path = final_path;
        outcome.episodes_completed = std::max(0L, cfg_.train.episodes - start_episode);
        return outcome;
    }

    static Checkpoint snapshot_checkpoint(const ParameterStore& store, const std::string& hash, long episode) {
        ParameterStore::Internals in = store.internals();
        Checkpoint ck;
        ck.config_hash = hash;
        ck.episode = episode;
        ck.actor = std::move(in.actor);
        ck.critic = std::move(in.critic);
        ck.opt_actor = std::move(in.opt_actor);
        ck.opt_critic = std::move(in.opt_critic);
        ck.hyper = store.hyper();
        ck.version = in.version;
        return ck;
    }

    static void append_metrics(nlohmann::json& j, const EpisodeMetrics& m, const EpisodeMetrics* stddev = nullptr) {
        j["avg_queue"] = m.avg_queue_length;
        j["avg_speed"] = m.avg_speed_mps;
        j["avg_int_delay"] = m.avg_intersection_delay_s;
        j["avg_cum_delay"] = m.avg_cumulative_delay_s;
        if (m.avg_trip_time_s) {
            j["avg_trip_time"] = *m.avg_trip_time_s;
        } else {
            j["avg_trip_time"] = nullptr;
        }
        j["entered"] = m.entered;
        j["exited"] = m.exited;
        if (stddev) {
            j["avg_queue_std"] = stddev->avg_queue_length;
            j["avg_speed_std"] = stddev->avg_speed_mps;
            j["avg_int_delay_std"] = stddev->avg_intersection_delay_s;
            j["avg_cum_delay_std"] = stddev->avg_cumulative_delay_s;
            if (stddev->avg_trip_time_s) j["avg_trip_time_std"] = *stddev->avg_trip_time_s;
        }
    }

    static void append_metrics(nlohmann::json& j, const EpisodeMetrics& m, const EpisodeMetrics& stddev) {
        append_metrics(j, m, &stddev);
    }

    double entropy_coef_at(long episode) const {
        const long window =
            cfg_.train.entropy_anneal_episodes > 0 ? cfg_.train.entropy_anneal_episodes : cfg_.train.episodes;
        const long total = std::max(1L, window - 1);
        const double frac = std::min(1.0, static_cast<double>(episode) / static_cast<double>(total));
        return cfg_.advantage.entropy_coef + frac * (cfg_.train.entropy_coef_final - cfg_.advantage.entropy_coef);
    }

private:
    template <typename WallFn, typename WriteFn, typename EvalFn>
    void run_episode(QueueSimEnv& env, ParameterStore& store, long episode, int worker_id, WallFn&& wall_s,
                     std::mutex& log_mutex, WriteFn&& write_record, EvalFn&& eval_and_checkpoint) {
        const std::uint64_t flow_seed =
            cfg_.train.train_seeds[static_cast<std::size_t>(episode % static_cast<long>(cfg_.train.train_seeds.size()))];
        Rng rng(derive_seed(cfg_.nn.init_seed, 0x524C ^ static_cast<std::uint64_t>(episode)));
        const double entropy_coef = entropy_coef_at(episode);

        std::vector<Observation> obs = env.reset(flow_seed);
        double return_sum = 0.0;
        bool done = false;
        while (!done) {
            ParamSnapshot snap = store.snapshot();
            RolloutResult rollout = run_rollout(env, obs, snap, cfg_, cfg_.train.rollout_steps, rng);
            GradientPair grads = compute_gradients(rollout.buffers, snap, cfg_, entropy_coef);
            store.apply(grads.actor, grads.critic);
            return_sum += rollout.local_reward_sum;
            done = rollout.episode_done;
        }

        EpisodeMetrics metrics = env.episode_metrics();
        nlohmann::json j = {{"type", "train"},
                            {"episode", episode},
                            {"worker", worker_id},
                            {"flow_seed", flow_seed},
                            {"wall_s", wall_s()},
                            {"mean_return", return_sum / env.agent_count()}};
        append_metrics(j, metrics);

        std::lock_guard<std::mutex> lock(log_mutex);
        write_record(j);
        if ((episode + 1) % cfg_.train.eval_every == 0 || episode + 1 == cfg_.train.episodes) {
            eval_and_checkpoint(episode + 1);
        }
    }

    ExperimentConfig cfg_;
    TrafficNetwork net_;
};

}  // namespace gridlight
