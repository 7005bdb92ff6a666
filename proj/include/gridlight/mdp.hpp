#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridlight/netmodel.hpp"
#include "gridlight/simcore.hpp"

namespace gridlight {

enum class ObsSchema { CityFlow, Sumo };

struct ObservationSchema {
    ObsSchema kind = ObsSchema::CityFlow;
    double wait_norm_s = 60.0;
    bool include_pressure = false;

    bool operator==(const ObservationSchema&) const = default;
};

inline std::string to_string(ObsSchema s) { return s == ObsSchema::CityFlow ? "cityflow" : "sumo"; }

inline ObsSchema obs_schema_from_string(const std::string& s) {
    if (s == "cityflow") return ObsSchema::CityFlow;
    if (s == "sumo") return ObsSchema::Sumo;
    throw std::invalid_argument("unknown observation schema '" + s + "' (expected cityflow|sumo)");
}

struct Observation {
    std::vector<double> phase_onehot;
    std::vector<double> incoming_queues;
    std::vector<double> outgoing_queues;  // sumo schema only
    std::vector<double> head_waits;       // sumo schema only, normalized and clipped
    std::vector<double> pressure;         // optional per-phase pressures

    std::vector<double> flat() const {
        std::vector<double> out;
        out.reserve(phase_onehot.size() + incoming_queues.size() + outgoing_queues.size() + head_waits.size() +
                    pressure.size());
        out.insert(out.end(), phase_onehot.begin(), phase_onehot.end());
        out.insert(out.end(), incoming_queues.begin(), incoming_queues.end());
        out.insert(out.end(), outgoing_queues.begin(), outgoing_queues.end());
        out.insert(out.end(), head_waits.begin(), head_waits.end());
        out.insert(out.end(), pressure.begin(), pressure.end());
        return out;
    }
};

inline int observation_width(const TrafficNetwork& net, const ObservationSchema& schema) {
    const int phases = net.phase_count();
    const int lanes = kMovementsPerIntersection;
    int w = phases + lanes;
    if (schema.kind == ObsSchema::Sumo) w += 2 * lanes;
    if (schema.include_pressure) w += phases;
    return w;
}

inline Observation zero_observation(const TrafficNetwork& net, const ObservationSchema& schema) {
    Observation o;
    o.phase_onehot.assign(static_cast<std::size_t>(net.phase_count()), 0.0);
    o.incoming_queues.assign(kMovementsPerIntersection, 0.0);
    if (schema.kind == ObsSchema::Sumo) {
        o.outgoing_queues.assign(kMovementsPerIntersection, 0.0);
        o.head_waits.assign(kMovementsPerIntersection, 0.0);
    }
    if (schema.include_pressure) o.pressure.assign(static_cast<std::size_t>(net.phase_count()), 0.0);
    return o;
}

inline Observation observe(const Simulator& sim, const SimState& state, NodeId i, const ObservationSchema& schema) {
    const TrafficNetwork& net = sim.net();
    if (i < 0 || i >= net.intersection_count()) throw std::out_of_range("observe: unknown intersection");
    const auto& spec = net.intersections[static_cast<std::size_t>(i)];

    Observation o;
    o.phase_onehot.assign(spec.phase_table.size(), 0.0);
    o.phase_onehot[static_cast<std::size_t>(state.agent_phase[static_cast<std::size_t>(i)])] = 1.0;
    o.incoming_queues.reserve(spec.incoming_lanes.size());
    for (LaneId lane : spec.incoming_lanes) {
        o.incoming_queues.push_back(static_cast<double>(sim.lane_queue_length(state, lane)));
    }
    if (schema.kind == ObsSchema::Sumo) {
        o.outgoing_queues.reserve(spec.outgoing_lanes.size());
        for (LaneId lane : spec.outgoing_lanes) {
            o.outgoing_queues.push_back(static_cast<double>(sim.lane_queue_length(state, lane)));
        }
        o.head_waits.reserve(spec.incoming_lanes.size());
        for (LaneId lane : spec.incoming_lanes) {
            const double w = state.lane_queues[static_cast<std::size_t>(lane)].head_wait_s / schema.wait_norm_s;
            o.head_waits.push_back(std::min(1.0, w));
        }
    }
    if (schema.include_pressure) o.pressure = sim.pressure_of(state, i);
    return o;
}

struct AugmentedObservation {
    Observation self;
    std::array<Observation, 4> neighbor_slots;  // compass order N,E,S,W
    std::array<bool, 4> validity{false, false, false, false};

    std::vector<double> flat() const {
        std::vector<double> out = self.flat();
        for (const auto& slot : neighbor_slots) {
            auto f = slot.flat();
            out.insert(out.end(), f.begin(), f.end());
        }
        return out;
    }
};

inline int augmented_width(const TrafficNetwork& net, const ObservationSchema& schema) {
    return (1 + kCompassCount) * observation_width(net, schema);
}

inline AugmentedObservation augment(const std::vector<Observation>& obs_all, const TrafficNetwork& net, NodeId i,
                                    const ObservationSchema& schema) {
    if (static_cast<int>(obs_all.size()) != net.intersection_count()) {
        throw std::invalid_argument("augment: need one observation per agent");
    }
    AugmentedObservation aug;
    aug.self = obs_all[static_cast<std::size_t>(i)];
    const NeighborSlots slots = neighbors_of(net, i);
    for (int side = 0; side < kCompassCount; ++side) {
        if (slots.valid[static_cast<std::size_t>(side)]) {
            aug.neighbor_slots[static_cast<std::size_t>(side)] =
                obs_all[static_cast<std::size_t>(slots.ids[static_cast<std::size_t>(side)])];
            aug.validity[static_cast<std::size_t>(side)] = true;
        } else {
            aug.neighbor_slots[static_cast<std::size_t>(side)] = zero_observation(net, schema);
        }
    }
    return aug;
}

// r_i = -(total incoming queue length), sampled at decision boundaries
inline double local_reward(const Simulator& sim, const SimState& state, NodeId i) {
    const auto& spec = sim.net().intersections.at(static_cast<std::size_t>(i));
    double total = 0.0;
    for (LaneId lane : spec.incoming_lanes) total += sim.lane_queue_length(state, lane);
    return -total;
}

inline double neighborhood_reward(const std::vector<double>& local_rewards, const TrafficNetwork& net, NodeId i) {
    if (static_cast<int>(local_rewards.size()) != net.intersection_count()) {
        throw std::invalid_argument("neighborhood_reward: need one local reward per agent");
    }
    double total = local_rewards[static_cast<std::size_t>(i)];
    const NeighborSlots slots = neighbors_of(net, i);
    for (int side = 0; side < kCompassCount; ++side) {
        if (slots.valid[static_cast<std::size_t>(side)]) {
            total += local_rewards[static_cast<std::size_t>(slots.ids[static_cast<std::size_t>(side)])];
        }
    }
    return total;
}

// one-hot rows in compass order; padded or invalid slots stay all-zero
inline std::vector<double> encode_neighbor_actions(const std::array<int, 4>& neighbor_actions, int action_count) {
    std::vector<double> out(static_cast<std::size_t>(4 * action_count), 0.0);
    for (int slot = 0; slot < 4; ++slot) {
        const int a = neighbor_actions[static_cast<std::size_t>(slot)];
        if (a >= 0 && a < action_count) out[static_cast<std::size_t>(slot * action_count + a)] = 1.0;
    }
    return out;
}

struct TransitionRecord {
    int t = 0;
    std::vector<double> z_aug;                // flattened augmented observation
    int action = -1;
    std::array<int, 4> neighbor_actions{-1, -1, -1, -1};
    std::vector<double> policy_dist;
    std::vector<double> critic_vec;           // |A| entries for Q critics, 1 for value critics
    double local_reward = 0.0;
    double neighborhood_reward = 0.0;
};

struct BootstrapRecord {
    std::vector<double> z_aug;
    std::array<int, 4> neighbor_actions{-1, -1, -1, -1};
    std::vector<double> policy_dist;
    std::vector<double> critic_vec;
};

// Per-agent rollout segment; the bootstrap record exists iff the segment was
// truncated mid-episode rather than ending at the horizon.
struct RolloutBuffer {
    std::vector<TransitionRecord> steps;
    std::optional<BootstrapRecord> bootstrap;
    bool truncated = false;

    int length() const { return static_cast<int>(steps.size()); }
};

}  // namespace gridlight
