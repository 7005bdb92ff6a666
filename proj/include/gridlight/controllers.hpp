#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gridlight/common.hpp"
#include "gridlight/mdp.hpp"
#include "gridlight/netmodel.hpp"
#include "gridlight/tinynn.hpp"

namespace gridlight {

struct FixedTimePlan {
    std::vector<std::pair<int, double>> entries;  // (phase id, duration seconds)

    double cycle_s() const {
        double c = 0.0;
        for (const auto& e : entries) c += e.second;
        return c;
    }
};

// NS-straight, NS-left, EW-straight, EW-left at an even split.
inline FixedTimePlan default_fixed_time_plan(double phase_s = 30.0) {
    return {{{0, phase_s}, {1, phase_s}, {2, phase_s}, {3, phase_s}}};
}

inline int fixed_time_action(double clock_s, const FixedTimePlan& plan) {
    if (plan.entries.empty()) throw std::invalid_argument("fixed_time_action: empty plan");
    for (const auto& e : plan.entries) {
        if (e.second <= 0.0) throw std::invalid_argument("fixed_time_action: plan durations must be positive");
    }
    double pos = std::fmod(clock_s, plan.cycle_s());
    if (pos < 0.0) pos += plan.cycle_s();
    for (const auto& e : plan.entries) {
        if (pos < e.second) return e.first;
        pos -= e.second;
    }
    return plan.entries.back().first;
}

// Phase whose movements cover the largest total incoming queue; incoming
// queue entries line up with movement indices, ties go to the lowest id.
inline int greedy_action(const Observation& obs, const IntersectionSpec& spec) {
    int best = 0;
    double best_sum = -1.0;
    for (const auto& phase : spec.phase_table) {
        double sum = 0.0;
        for (int m : phase.movements) sum += obs.incoming_queues.at(static_cast<std::size_t>(m));
        if (sum > best_sum) {
            best_sum = sum;
            best = phase.id;
        }
    }
    return best;
}

inline int max_pressure_action(const std::vector<double>& pressures) {
    if (pressures.empty()) throw std::invalid_argument("max_pressure_action: empty pressure vector");
    int best = 0;
    for (int p = 1; p < static_cast<int>(pressures.size()); ++p) {
        if (pressures[static_cast<std::size_t>(p)] > pressures[static_cast<std::size_t>(best)]) best = p;
    }
    return best;
}

enum class ActionSelect { Sample, Argmax };

inline int policy_action(const MlpParams& actor, const std::vector<double>& z_aug, ActionSelect mode, Rng& rng) {
    const std::vector<double> pi = actor_forward(actor, z_aug);
    if (mode == ActionSelect::Sample) return rng.categorical(pi);
    int best = 0;
    for (int a = 1; a < static_cast<int>(pi.size()); ++a) {
        if (pi[static_cast<std::size_t>(a)] > pi[static_cast<std::size_t>(best)]) best = a;
    }
    return best;
}

}  // namespace gridlight
