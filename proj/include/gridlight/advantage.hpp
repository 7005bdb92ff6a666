#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridlight/mdp.hpp"

namespace gridlight {

enum class AdvantageMode { SocialLight, RawComa, A3cLocal, A3cNeighborhood };

inline std::string to_string(AdvantageMode m) {
    switch (m) {
        case AdvantageMode::SocialLight: return "sociallight";
        case AdvantageMode::RawComa: return "raw_coma";
        case AdvantageMode::A3cLocal: return "a3c_local";
        case AdvantageMode::A3cNeighborhood: return "a3c_neighborhood";
    }
    return "?";
}

inline AdvantageMode advantage_mode_from_string(const std::string& s) {
    if (s == "sociallight") return AdvantageMode::SocialLight;
    if (s == "raw_coma") return AdvantageMode::RawComa;
    if (s == "a3c_local") return AdvantageMode::A3cLocal;
    if (s == "a3c_neighborhood") return AdvantageMode::A3cNeighborhood;
    throw std::invalid_argument("unknown advantage mode '" + s +
                                "' (expected sociallight|raw_coma|a3c_local|a3c_neighborhood)");
}

struct AdvantageConfig {
    double gamma = 0.99;      // discount
    double gae_delta = 0.95;  // geometric weight on multi-step advantages
    double td_lambda = 0.95;  // geometric weight on n-step critic targets
    AdvantageMode mode = AdvantageMode::SocialLight;
    double entropy_coef = 0.01;

    void validate() const {
        if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("advantage.gamma must be in (0,1]");
        if (!(gae_delta >= 0.0 && gae_delta <= 1.0)) throw std::invalid_argument("advantage.delta must be in [0,1]");
        if (!(td_lambda >= 0.0 && td_lambda <= 1.0)) throw std::invalid_argument("advantage.lambda must be in [0,1]");
        if (entropy_coef < 0.0) throw std::invalid_argument("advantage.entropy_coef must be >= 0");
    }
};

struct AdvantageResult {
    std::vector<double> advantages;  // per-step generalized advantages
    std::vector<double> targets;     // per-step critic regression targets
    std::vector<double> baselines;   // diagnostic per-step baseline values
};

namespace detail {

inline void check_distribution(const std::vector<double>& pi) {
    double sum = 0.0;
    for (double p : pi) {
        if (p < 0.0) throw std::invalid_argument("policy vector has a negative entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("policy vector does not sum to 1");
}

}  // namespace detail

// Expected critic value under the policy with neighbor actions held fixed.
inline double counterfactual_baseline(const std::vector<double>& q_vec, const std::vector<double>& pi_vec) {
    if (q_vec.size() != pi_vec.size()) throw std::invalid_argument("counterfactual_baseline: length mismatch");
    detail::check_distribution(pi_vec);
    double acc = 0.0;
    for (std::size_t i = 0; i < q_vec.size(); ++i) acc += pi_vec[i] * q_vec[i];
    return acc;
}

inline double coma_advantage(const std::vector<double>& q_vec, const std::vector<double>& pi_vec, int action) {
    if (action < 0 || action >= static_cast<int>(q_vec.size())) {
        throw std::out_of_range("coma_advantage: action index out of range");
    }
    return q_vec[static_cast<std::size_t>(action)] - counterfactual_baseline(q_vec, pi_vec);
}

// One-step advantage whose bootstrap is the counterfactual baseline at the
// future state rather than a joint-action expectation.
inline double td1_cf_advantage(double reward_nbhd, const std::vector<double>& q_t, const std::vector<double>& pi_t,
                               const std::vector<double>& q_next, const std::vector<double>& pi_next, double gamma,
                               bool terminal) {
    const double head = counterfactual_baseline(q_t, pi_t);
    const double future = terminal ? 0.0 : counterfactual_baseline(q_next, pi_next);
    return (reward_nbhd + gamma * future) - head;
}

inline double nstep_cf_advantage(const std::vector<double>& rewards, const std::vector<double>& q_t,
                                 const std::vector<double>& pi_t, const std::vector<double>& q_tail,
                                 const std::vector<double>& pi_tail, double gamma, int n) {
    if (n < 1) throw std::invalid_argument("nstep_cf_advantage: n must be >= 1");
    if (static_cast<int>(rewards.size()) < n) throw std::invalid_argument("nstep_cf_advantage: horizon overflow");
    const double head = counterfactual_baseline(q_t, pi_t);
    const double tail = counterfactual_baseline(q_tail, pi_tail);
    double acc = 0.0;
    double disc = 1.0;
    for (int l = 0; l < n; ++l) {
        acc += disc * rewards[static_cast<std::size_t>(l)];
        disc *= gamma;
    }
    return (acc + disc * tail) - head;
}

// Generalized advantages via the backward recursion A_t = d_t + gamma*delta*A_{t+1},
// where d_t = r_t + gamma*B_{t+1} - B_t. `baselines` holds B_0..B_T; B_T is the
// bootstrap baseline for truncated rollouts and 0 for terminal ones.
inline std::vector<double> gae_from_baselines(const std::vector<double>& rewards, const std::vector<double>& baselines,
                                              double gamma, double delta) {
    const std::size_t t_len = rewards.size();
    if (baselines.size() != t_len + 1) throw std::invalid_argument("gae_from_baselines: need T+1 baselines");
    std::vector<double> adv(t_len, 0.0);
    double carry = 0.0;
    for (std::size_t t = t_len; t-- > 0;) {
        const double d = (rewards[t] + gamma * baselines[t + 1]) - baselines[t];
        carry = d + gamma * delta * carry;
        adv[t] = carry;
    }
    return adv;
}

inline std::vector<double> gae_cf_advantages(
    const std::vector<double>& rewards, const std::vector<std::vector<double>>& q_vecs,
    const std::vector<std::vector<double>>& pi_vecs,
    const std::optional<std::pair<std::vector<double>, std::vector<double>>>& bootstrap_q_pi, double gamma,
    double delta) {
    const std::size_t t_len = rewards.size();
    if (t_len == 0) throw std::invalid_argument("gae_cf_advantages: empty rollout");
    if (q_vecs.size() != t_len || pi_vecs.size() != t_len) {
        throw std::invalid_argument("gae_cf_advantages: length mismatch");
    }
    std::vector<double> baselines(t_len + 1, 0.0);
    for (std::size_t t = 0; t < t_len; ++t) baselines[t] = counterfactual_baseline(q_vecs[t], pi_vecs[t]);
    baselines[t_len] =
        bootstrap_q_pi ? counterfactual_baseline(bootstrap_q_pi->first, bootstrap_q_pi->second) : 0.0;
    return gae_from_baselines(rewards, baselines, gamma, delta);
}

// TD(lambda) targets over modified n-step returns, computed backward via
// G_t = r_t + gamma*((1-lambda)*B_{t+1} + lambda*G_{t+1}); the final available
// n-step return absorbs the remaining lambda mass.
inline std::vector<double> critic_targets_td_lambda(const std::vector<double>& rewards,
                                                    const std::vector<double>& baselines, double gamma,
                                                    double lambda) {
    const std::size_t t_len = rewards.size();
    if (baselines.size() != t_len + 1) throw std::invalid_argument("critic_targets_td_lambda: need T+1 baselines");
    std::vector<double> targets(t_len, 0.0);
    if (t_len == 0) return targets;
    targets[t_len - 1] = rewards[t_len - 1] + gamma * baselines[t_len];
    for (std::size_t t = t_len - 1; t-- > 0;) {
        targets[t] = rewards[t] + gamma * ((1.0 - lambda) * baselines[t + 1] + lambda * targets[t + 1]);
    }
    return targets;
}

inline std::vector<double> critic_targets_td1(const std::vector<double>& rewards, const std::vector<double>& baselines,
                                              double gamma) {
    return critic_targets_td_lambda(rewards, baselines, gamma, 0.0);
}

struct CriticLossResult {
    double loss = 0.0;
    std::vector<std::vector<double>> seeds;  // dLoss/dQ_t, zero off the taken action
};

// (1/T) * sum_t (Q_t[a_t] - G_t)^2 with targets treated as constants. Length-1
// critic vectors are value heads; the single entry is always "taken".
inline CriticLossResult critic_loss(const std::vector<std::vector<double>>& q_vecs, const std::vector<int>& actions,
                                    const std::vector<double>& targets) {
    const std::size_t t_len = q_vecs.size();
    if (actions.size() != t_len || targets.size() != t_len) throw std::invalid_argument("critic_loss: length mismatch");
    CriticLossResult out;
    out.seeds.reserve(t_len);
    const double inv_t = t_len > 0 ? 1.0 / static_cast<double>(t_len) : 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
        const int idx = q_vecs[t].size() == 1 ? 0 : actions[t];
        if (idx < 0 || idx >= static_cast<int>(q_vecs[t].size())) {
            throw std::out_of_range("critic_loss: action index out of range");
        }
        const double err = q_vecs[t][static_cast<std::size_t>(idx)] - targets[t];
        out.loss += inv_t * err * err;
        std::vector<double> seed(q_vecs[t].size(), 0.0);
        seed[static_cast<std::size_t>(idx)] = 2.0 * err * inv_t;
        out.seeds.push_back(std::move(seed));
    }
    return out;
}

struct PolicyLossResult {
    double loss = 0.0;
    std::vector<std::vector<double>> logit_seeds;  // dLoss/dlogits per step
};

// -sum_t log pi_t(a_t) * A_t - entropy_coef * sum_t H(pi_t); advantages are
// constants. Seeds use the softmax identity d(-log pi(a))/dz = pi - onehot(a).
inline PolicyLossResult policy_loss(const std::vector<std::vector<double>>& pi_vecs, const std::vector<int>& actions,
                                    const std::vector<double>& advantages, double entropy_coef) {
    const std::size_t t_len = pi_vecs.size();
    if (actions.size() != t_len || advantages.size() != t_len) {
        throw std::invalid_argument("policy_loss: length mismatch");
    }
    PolicyLossResult out;
    out.logit_seeds.reserve(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        const auto& pi = pi_vecs[t];
        const int a = actions[t];
        if (a < 0 || a >= static_cast<int>(pi.size())) throw std::out_of_range("policy_loss: action out of range");
        const double pa = pi[static_cast<std::size_t>(a)];
        if (pa <= 0.0) throw std::runtime_error("policy_loss: taken action has zero probability");
        double entropy = 0.0;
        for (double p : pi) {
            if (p > 0.0) entropy -= p * std::log(p);
        }
        out.loss += -std::log(pa) * advantages[t] - entropy_coef * entropy;
        std::vector<double> seed(pi.size(), 0.0);
        for (std::size_t k = 0; k < pi.size(); ++k) {
            const double pk = pi[k];
            seed[k] = advantages[t] * (pk - (static_cast<int>(k) == a ? 1.0 : 0.0));
            if (pk > 0.0) seed[k] += entropy_coef * pk * (std::log(pk) + entropy);
        }
        out.logit_seeds.push_back(std::move(seed));
    }
    return out;
}

// Per-mode rewards: a3c_local trains on each agent's own reward, the other
// modes on the shared neighborhood reward.
inline std::vector<double> rollout_rewards(const RolloutBuffer& buffer, AdvantageMode mode) {
    std::vector<double> rewards;
    rewards.reserve(buffer.steps.size());
    for (const auto& s : buffer.steps) {
        rewards.push_back(mode == AdvantageMode::A3cLocal ? s.local_reward : s.neighborhood_reward);
    }
    return rewards;
}

inline AdvantageResult variant_advantages(AdvantageMode mode, const RolloutBuffer& buffer,
                                          const AdvantageConfig& cfg) {
    cfg.validate();
    const std::size_t t_len = buffer.steps.size();
    if (t_len == 0) throw std::invalid_argument("variant_advantages: empty rollout");
    if (buffer.truncated && !buffer.bootstrap) {
        throw std::invalid_argument("variant_advantages: truncated rollout is missing its bootstrap record");
    }

    const bool q_critic = mode == AdvantageMode::SocialLight || mode == AdvantageMode::RawComa;
    std::vector<double> baselines(t_len + 1, 0.0);
    for (std::size_t t = 0; t < t_len; ++t) {
        const auto& s = buffer.steps[t];
        if (q_critic) {
            baselines[t] = counterfactual_baseline(s.critic_vec, s.policy_dist);
        } else {
            if (s.critic_vec.size() != 1) {
                throw std::invalid_argument("variant_advantages: a3c modes need a scalar value head");
            }
            baselines[t] = s.critic_vec[0];
        }
    }
    if (buffer.bootstrap) {
        const auto& b = *buffer.bootstrap;
        baselines[t_len] = q_critic ? counterfactual_baseline(b.critic_vec, b.policy_dist) : b.critic_vec.at(0);
    }

    const std::vector<double> rewards = rollout_rewards(buffer, mode);

    AdvantageResult out;
    if (mode == AdvantageMode::RawComa) {
        out.advantages.reserve(t_len);
        for (std::size_t t = 0; t < t_len; ++t) {
            const auto& s = buffer.steps[t];
            out.advantages.push_back(s.critic_vec[static_cast<std::size_t>(s.action)] - baselines[t]);
        }
        out.targets = critic_targets_td1(rewards, baselines, cfg.gamma);
    } else {
        out.advantages = gae_from_baselines(rewards, baselines, cfg.gamma, cfg.gae_delta);
        out.targets = critic_targets_td_lambda(rewards, baselines, cfg.gamma, cfg.td_lambda);
    }
    baselines.pop_back();
    out.baselines = std::move(baselines);

    for (const auto& v : {out.advantages, out.targets}) {
        for (double x : v) {
            if (!std::isfinite(x)) throw std::runtime_error("variant_advantages: non-finite result");
        }
    }
    return out;
}

}  // namespace gridlight
