#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridlight/common.hpp"
#include "gridlight/flows.hpp"
#include "gridlight/netmodel.hpp"

namespace gridlight {

struct SimParams {
    double yellow_s = 2.0;        // applied on phase change only
    int saturation_flow = 1;      // vehicles per active movement per green second
    double vehicle_space_m = 7.5; // storage footprint for downstream capacity

    bool operator==(const SimParams&) const = default;
};

enum class VehicleMode { Pending, Driving, Queued, Finished };

struct VehicleState {
    int id = -1;
    std::vector<LinkId> route;
    int route_index = 0;
    double link_position_m = 0.0;
    VehicleMode mode = VehicleMode::Pending;
    double depart_time_s = 0.0;
    double entry_time_s = -1.0;
    std::optional<double> exit_time_s;
    double queue_wait_accum_s = 0.0;
    double total_delay_accum_s = 0.0;
    double current_visit_wait_s = 0.0;  // waiting at the current stop line

    LinkId current_link() const { return route.at(static_cast<std::size_t>(route_index)); }
    bool has_next_link() const { return route_index + 1 < static_cast<int>(route.size()); }
};

struct LaneQueue {
    LaneId lane = -1;
    std::deque<int> vehicle_ids;  // FIFO
    double head_wait_s = 0.0;

    int length() const { return static_cast<int>(vehicle_ids.size()); }
};

// Per-window traffic measurements. avg_cumulative_delay and avg_trip_time are
// episode-to-date values; the other averages cover just the window.
struct StepMetrics {
    double avg_queue_length = 0.0;
    double avg_speed_mps = 0.0;
    double avg_intersection_delay_s = 0.0;
    double avg_cumulative_delay_s = 0.0;
    std::optional<double> avg_trip_time_s;
    long entered = 0;
    long exited = 0;
};

struct EpisodeMetrics {
    double avg_queue_length = 0.0;
    double avg_speed_mps = 0.0;
    double avg_intersection_delay_s = 0.0;
    double avg_cumulative_delay_s = 0.0;
    std::optional<double> avg_trip_time_s;
    long entered = 0;
    long exited = 0;
};

struct SimState {
    double clock_s = 0.0;
    std::vector<VehicleState> vehicles;      // one per trip, trip order
    std::vector<LaneQueue> lane_queues;      // indexed by lane id
    std::vector<int> agent_phase;            // current phase per intersection
    std::vector<int> pending_phase;          // phase to activate once yellow ends
    std::vector<double> yellow_remaining_s;
    std::uint64_t rng_seed = 0;

    std::vector<int> active;                 // ids of in-network vehicles
    std::vector<long> link_occupancy;        // vehicles per link (driving + queued)
    int next_departure = 0;

    // accumulators feeding the episode metrics
    long micro_steps = 0;
    double queue_len_sum = 0.0;   // summed over incoming lanes, per micro-step
    double speed_sum = 0.0;
    long vehicle_seconds = 0;
    double visit_wait_sum = 0.0;  // completed stop-line visits
    long visit_count = 0;
    double delay_sum = 0.0;
    long entered_total = 0;
    long exited_total = 0;

    long in_network_count() const { return static_cast<long>(active.size()); }
    bool conserves_vehicles() const { return entered_total == in_network_count() + exited_total; }
};

class SimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Simulator {
public:
    explicit Simulator(const TrafficNetwork& net, SimParams params = {}) : net_(&net), params_(params) {
        incoming_lane_count_ = 0;
        for (const auto& spec : net.intersections) {
            incoming_lane_count_ += static_cast<int>(spec.incoming_lanes.size());
        }
        link_capacity_.reserve(net.links.size());
        for (const auto& l : net.links) {
            link_capacity_.push_back(net.is_sink_link(l.id)
                                         ? std::numeric_limits<long>::max()
                                         : static_cast<long>(l.lanes * l.length_m / params_.vehicle_space_m));
        }
    }

    const TrafficNetwork& net() const { return *net_; }
    const SimParams& params() const { return params_; }

    SimState reset(const FlowSpec& flows, std::uint64_t seed) const {
        SimState s;
        s.rng_seed = seed;
        s.lane_queues.resize(static_cast<std::size_t>(net_->lane_count()));
        for (int l = 0; l < net_->lane_count(); ++l) s.lane_queues[static_cast<std::size_t>(l)].lane = l;
        const int v = net_->intersection_count();
        s.agent_phase.assign(static_cast<std::size_t>(v), 0);
        s.pending_phase.assign(static_cast<std::size_t>(v), 0);
        s.yellow_remaining_s.assign(static_cast<std::size_t>(v), 0.0);
        s.link_occupancy.assign(net_->links.size(), 0);

        Router router(*net_);
        s.vehicles.reserve(flows.trips.size());
        for (const auto& trip : flows.trips) {
            if (!net_->is_boundary(trip.origin) || !net_->is_boundary(trip.destination)) {
                throw SimError("reset: trip " + std::to_string(trip.id) + " references unknown boundary node");
            }
            VehicleState veh;
            veh.id = static_cast<int>(s.vehicles.size());
            veh.depart_time_s = trip.depart_time_s;
            veh.route = router.route(trip.origin, trip.destination);
            if (veh.route.empty()) {
                throw SimError("reset: trip " + std::to_string(trip.id) + " has unreachable destination");
            }
            s.vehicles.push_back(std::move(veh));
        }
        return s;
    }

    StepMetrics step(SimState& s, const std::vector<int>& joint_action, double delta_t_s) const {
        if (delta_t_s <= 0.0) throw std::invalid_argument("step: delta_t must be positive");
        const long n_micro = std::lround(delta_t_s);
        if (n_micro < 1 || std::abs(delta_t_s - static_cast<double>(n_micro)) > 1e-9) {
            throw std::invalid_argument("step: delta_t must be a whole number of 1s micro-steps");
        }
        const int v = net_->intersection_count();
        if (static_cast<int>(joint_action.size()) != v) {
            throw std::invalid_argument("step: joint action size mismatch");
        }
        for (int i = 0; i < v; ++i) {
            const int a = joint_action[static_cast<std::size_t>(i)];
            const auto& table = net_->intersections[static_cast<std::size_t>(i)].phase_table;
            if (a < 0 || a >= static_cast<int>(table.size())) {
                throw std::invalid_argument("step: invalid phase id " + std::to_string(a) + " for intersection " +
                                            std::to_string(i));
            }
            // Retarget only when the command differs from the effective target
            // (the pending phase while yellow runs, the live phase otherwise);
            // any retarget costs a fresh yellow interval.
            const bool in_yellow = s.yellow_remaining_s[static_cast<std::size_t>(i)] > 0.0;
            const int effective = in_yellow ? s.pending_phase[static_cast<std::size_t>(i)]
                                            : s.agent_phase[static_cast<std::size_t>(i)];
            if (a != effective) {
                s.pending_phase[static_cast<std::size_t>(i)] = a;
                s.yellow_remaining_s[static_cast<std::size_t>(i)] = params_.yellow_s;
                if (params_.yellow_s <= 0.0) s.agent_phase[static_cast<std::size_t>(i)] = a;
            } else if (!in_yellow) {
                s.pending_phase[static_cast<std::size_t>(i)] = a;
            }
        }

        const Snapshot before = snapshot(s);
        for (long k = 0; k < n_micro; ++k) micro_step(s);
        return window_metrics(s, before);
    }

    int lane_queue_length(const SimState& s, LaneId lane) const {
        if (lane < 0 || lane >= static_cast<int>(s.lane_queues.size())) {
            throw std::out_of_range("lane_queue_length: unknown lane " + std::to_string(lane));
        }
        return s.lane_queues[static_cast<std::size_t>(lane)].length();
    }

    // pressure(p) = sum over movements of (incoming queue - outgoing queue)
    std::vector<double> pressure_of(const SimState& s, NodeId i) const {
        if (i < 0 || i >= net_->intersection_count()) throw std::out_of_range("pressure_of: unknown intersection");
        const auto& spec = net_->intersections[static_cast<std::size_t>(i)];
        std::vector<double> pressures;
        pressures.reserve(spec.phase_table.size());
        for (const auto& phase : spec.phase_table) {
            double p = 0.0;
            for (int m : phase.movements) {
                const Movement& mv = spec.movements[static_cast<std::size_t>(m)];
                p += lane_queue_length(s, mv.in_lane) - lane_queue_length(s, mv.out_lane);
            }
            pressures.push_back(p);
        }
        return pressures;
    }

    EpisodeMetrics episode_metrics(const SimState& s) const {
        EpisodeMetrics m;
        if (s.micro_steps > 0 && incoming_lane_count_ > 0) {
            m.avg_queue_length = s.queue_len_sum / (static_cast<double>(s.micro_steps) * incoming_lane_count_);
        }
        if (s.vehicle_seconds > 0) m.avg_speed_mps = s.speed_sum / static_cast<double>(s.vehicle_seconds);

        double visit_sum = s.visit_wait_sum;
        long visits = s.visit_count;
        for (const auto& lq : s.lane_queues) {
            for (int id : lq.vehicle_ids) {
                visit_sum += s.vehicles[static_cast<std::size_t>(id)].current_visit_wait_s;
                ++visits;
            }
        }
        if (visits > 0) m.avg_intersection_delay_s = visit_sum / static_cast<double>(visits);

        if (s.entered_total > 0) m.avg_cumulative_delay_s = s.delay_sum / static_cast<double>(s.entered_total);

        if (s.exited_total > 0) {
            double trip_sum = 0.0;
            for (const auto& veh : s.vehicles) {
                if (veh.exit_time_s) trip_sum += *veh.exit_time_s - veh.entry_time_s;
            }
            m.avg_trip_time_s = trip_sum / static_cast<double>(s.exited_total);
        }
        m.entered = s.entered_total;
        m.exited = s.exited_total;
        return m;
    }

    int incoming_lane_count() const { return incoming_lane_count_; }

private:
    struct Snapshot {
        long micro_steps, vehicle_seconds, visit_count, entered, exited;
        double queue_len_sum, speed_sum, visit_wait_sum;
    };

    Snapshot snapshot(const SimState& s) const {
        return {s.micro_steps, s.vehicle_seconds, s.visit_count, s.entered_total, s.exited_total,
                s.queue_len_sum, s.speed_sum, s.visit_wait_sum};
    }

    StepMetrics window_metrics(const SimState& s, const Snapshot& b) const {
        StepMetrics m;
        const long micro = s.micro_steps - b.micro_steps;
        if (micro > 0 && incoming_lane_count_ > 0) {
            m.avg_queue_length = (s.queue_len_sum - b.queue_len_sum) / (static_cast<double>(micro) * incoming_lane_count_);
        }
        const long vs = s.vehicle_seconds - b.vehicle_seconds;
        if (vs > 0) m.avg_speed_mps = (s.speed_sum - b.speed_sum) / static_cast<double>(vs);
        const long visits = s.visit_count - b.visit_count;
        if (visits > 0) m.avg_intersection_delay_s = (s.visit_wait_sum - b.visit_wait_sum) / static_cast<double>(visits);
        EpisodeMetrics ep = episode_metrics(s);
        m.avg_cumulative_delay_s = ep.avg_cumulative_delay_s;
        m.avg_trip_time_s = ep.avg_trip_time_s;
        m.entered = s.entered_total - b.entered;
        m.exited = s.exited_total - b.exited;
        return m;
    }

    void micro_step(SimState& s) const {
        inject_departures(s);
        advance_driving(s);
        discharge_queues(s);
        accumulate(s);
        s.clock_s += 1.0;
        s.micro_steps += 1;
    }

    void inject_departures(SimState& s) const {
        const int n = static_cast<int>(s.vehicles.size());
        while (s.next_departure < n &&
               s.vehicles[static_cast<std::size_t>(s.next_departure)].depart_time_s <= s.clock_s) {
            VehicleState& veh = s.vehicles[static_cast<std::size_t>(s.next_departure)];
            veh.mode = VehicleMode::Driving;
            veh.route_index = 0;
            veh.link_position_m = 0.0;
            veh.entry_time_s = s.clock_s;
            s.link_occupancy[static_cast<std::size_t>(veh.current_link())] += 1;
            s.active.push_back(veh.id);
            s.entered_total += 1;
            s.next_departure += 1;
        }
    }

    void advance_driving(SimState& s) const {
        for (std::size_t idx = 0; idx < s.active.size();) {
            VehicleState& veh = s.vehicles[static_cast<std::size_t>(s.active[idx])];
            if (veh.mode != VehicleMode::Driving) {
                ++idx;
                continue;
            }
            const RoadLink& link = net_->link(veh.current_link());
            veh.link_position_m = std::min(link.length_m, veh.link_position_m + link.speed_mps);
            if (veh.link_position_m < link.length_m) {
                ++idx;
                continue;
            }
            if (net_->is_sink_link(link.id)) {
                veh.mode = VehicleMode::Finished;
                veh.exit_time_s = s.clock_s + 1.0;
                s.link_occupancy[static_cast<std::size_t>(link.id)] -= 1;
                s.exited_total += 1;
                s.active[idx] = s.active.back();
                s.active.pop_back();
                continue;  // re-examine the swapped-in id at this slot
            }
            // join the stop-line queue for the turn this route takes next
            assert(veh.has_next_link());
            const LinkId next = veh.route[static_cast<std::size_t>(veh.route_index) + 1];
            const int turn = turn_between(link, net_->link(next));
            veh.mode = VehicleMode::Queued;
            veh.current_visit_wait_s = 0.0;
            s.lane_queues[static_cast<std::size_t>(lane_of(link.id, turn))].vehicle_ids.push_back(veh.id);
            ++idx;
        }
    }

    int turn_between(const RoadLink& from, const RoadLink& to) const {
        for (int turn = 0; turn < kTurnCount; ++turn) {
            if (exit_side(from.heading, turn) == to.heading) return turn;
        }
        throw SimError("route requires a forbidden turn between links " + std::to_string(from.id) + " and " +
                       std::to_string(to.id));
    }

    void discharge_queues(SimState& s) const {
        const int v = net_->intersection_count();
        for (int i = 0; i < v; ++i) {
            auto& yellow = s.yellow_remaining_s[static_cast<std::size_t>(i)];
            if (yellow > 0.0) {
                yellow -= 1.0;
                if (yellow <= 1e-12) {
                    yellow = 0.0;
                    s.agent_phase[static_cast<std::size_t>(i)] = s.pending_phase[static_cast<std::size_t>(i)];
                }
                continue;  // no discharge while the signal is in transition
            }
            const auto& spec = net_->intersections[static_cast<std::size_t>(i)];
            const Phase& phase = spec.phase_table[static_cast<std::size_t>(s.agent_phase[static_cast<std::size_t>(i)])];
            for (int m : phase.movements) {
                const Movement& mv = spec.movements[static_cast<std::size_t>(m)];
                LaneQueue& lq = s.lane_queues[static_cast<std::size_t>(mv.in_lane)];
                for (int served = 0; served < params_.saturation_flow && !lq.vehicle_ids.empty(); ++served) {
                    VehicleState& veh = s.vehicles[static_cast<std::size_t>(lq.vehicle_ids.front())];
                    const LinkId next = veh.route[static_cast<std::size_t>(veh.route_index) + 1];
                    if (s.link_occupancy[static_cast<std::size_t>(next)] >=
                        link_capacity_[static_cast<std::size_t>(next)]) {
                        break;  // downstream full: head blocks the lane
                    }
                    lq.vehicle_ids.pop_front();
                    s.visit_wait_sum += veh.current_visit_wait_s;
                    s.visit_count += 1;
                    veh.current_visit_wait_s = 0.0;
                    s.link_occupancy[static_cast<std::size_t>(veh.current_link())] -= 1;
                    veh.route_index += 1;
                    veh.link_position_m = 0.0;
                    veh.mode = VehicleMode::Driving;
                    s.link_occupancy[static_cast<std::size_t>(next)] += 1;
                }
            }
        }
    }

    void accumulate(SimState& s) const {
        for (const auto& spec : net_->intersections) {
            for (LaneId lane : spec.incoming_lanes) {
                LaneQueue& lq = s.lane_queues[static_cast<std::size_t>(lane)];
                s.queue_len_sum += lq.length();
                for (int id : lq.vehicle_ids) {
                    VehicleState& veh = s.vehicles[static_cast<std::size_t>(id)];
                    veh.queue_wait_accum_s += 1.0;
                    veh.total_delay_accum_s += 1.0;
                    veh.current_visit_wait_s += 1.0;
                    s.delay_sum += 1.0;
                }
                lq.head_wait_s = lq.vehicle_ids.empty()
                                     ? 0.0
                                     : s.vehicles[static_cast<std::size_t>(lq.vehicle_ids.front())].current_visit_wait_s;
            }
        }
        for (int id : s.active) {
            const VehicleState& veh = s.vehicles[static_cast<std::size_t>(id)];
            if (veh.mode == VehicleMode::Driving) s.speed_sum += net_->link(veh.current_link()).speed_mps;
            s.vehicle_seconds += 1;
        }
    }

    const TrafficNetwork* net_;
    SimParams params_;
    int incoming_lane_count_ = 0;
    std::vector<long> link_capacity_;

public:
    long link_capacity(LinkId l) const { return link_capacity_.at(static_cast<std::size_t>(l)); }
};

}  // namespace gridlight
