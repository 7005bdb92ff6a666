#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridlight/common.hpp"
#include "gridlight/netmodel.hpp"

namespace gridlight {

struct TripRecord {
    int id = 0;
    NodeId origin = -1;       // boundary node
    NodeId destination = -1;  // boundary node
    double depart_time_s = 0.0;

    bool operator==(const TripRecord&) const = default;
};

struct FlowSpec {
    std::vector<TripRecord> trips;  // sorted by depart time
    double horizon_s = 0.0;

    bool operator==(const FlowSpec&) const = default;
};

struct RatePoint {
    double t_start_s = 0.0;
    double rate_vps = 0.0;
};
using RateSchedule = std::vector<RatePoint>;

class FlowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FlowParseError : public FlowError {
public:
    FlowParseError(const std::string& msg, int line, std::string field)
        : FlowError(msg), line_(line), field_(std::move(field)) {}
    int line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    int line_;
    std::string field_;
};

// Shortest routes over the link graph. Successor links are restricted to the
// left/straight/right movements, so U-turns never appear in a route. Costs are
// integer microseconds of free-flow travel time, which keeps equal-cost ties
// exact; ties resolve to the lexicographically smallest node-id sequence.
class Router {
public:
    explicit Router(const TrafficNetwork& net) : net_(&net) {
        costs_us_.reserve(net.links.size());
        for (const auto& l : net.links) {
            costs_us_.push_back(static_cast<std::int64_t>(std::llround(l.travel_time_s() * 1e6)));
        }
    }

    // Ordered list of link ids from the origin's source link to the
    // destination's sink link, both included. Empty if unreachable.
    std::vector<LinkId> route(NodeId origin, NodeId destination) const {
        if (!net_->is_boundary(origin)) throw std::invalid_argument("route: origin is not a boundary node");
        if (!net_->is_boundary(destination)) throw std::invalid_argument("route: destination is not a boundary node");
        const LinkId start = source_link(origin);
        const LinkId goal = sink_link(destination);
        const auto& dist = dist_table(goal);
        if (dist[static_cast<std::size_t>(start)] == kUnreachable) return {};

        std::vector<LinkId> path{start};
        LinkId cur = start;
        while (cur != goal) {
            LinkId best = -1;
            NodeId best_node = -1;
            for (LinkId next : successors(cur)) {
                if (dist[static_cast<std::size_t>(next)] == kUnreachable) continue;
                if (dist[static_cast<std::size_t>(cur)] !=
                    costs_us_[static_cast<std::size_t>(cur)] + dist[static_cast<std::size_t>(next)]) {
                    continue;
                }
                NodeId node = net_->link(next).to;
                if (best < 0 || node < best_node) {
                    best = next;
                    best_node = node;
                }
            }
            if (best < 0) throw std::runtime_error("route: reconstruction failed");
            path.push_back(best);
            cur = best;
        }
        return path;
    }

    bool reachable(NodeId origin, NodeId destination) const {
        const auto& dist = dist_table(sink_link(destination));
        return dist[static_cast<std::size_t>(source_link(origin))] != kUnreachable;
    }

    double route_time_s(const std::vector<LinkId>& path) const {
        double t = 0.0;
        for (LinkId l : path) t += net_->link(l).travel_time_s();
        return t;
    }

    LinkId source_link(NodeId boundary) const {
        const BoundaryNode& b = net_->boundary(boundary);
        return net_->in_link_by_heading[static_cast<std::size_t>(b.intersection)]
                                       [static_cast<std::size_t>(opposite(b.side))];
    }

    LinkId sink_link(NodeId boundary) const {
        const BoundaryNode& b = net_->boundary(boundary);
        return net_->out_link_by_side[static_cast<std::size_t>(b.intersection)][static_cast<std::size_t>(b.side)];
    }

    std::vector<LinkId> successors(LinkId l) const {
        const RoadLink& link = net_->link(l);
        if (net_->is_boundary(link.to)) return {};
        std::vector<LinkId> out;
        out.reserve(kTurnCount);
        for (int turn = 0; turn < kTurnCount; ++turn) {
            int side = exit_side(link.heading, turn);
            LinkId next = net_->out_link_by_side[static_cast<std::size_t>(link.to)][static_cast<std::size_t>(side)];
            if (next >= 0) out.push_back(next);
        }
        return out;
    }

private:
    static constexpr std::int64_t kUnreachable = std::numeric_limits<std::int64_t>::max();

    // dist[l] = microseconds of the cheapest path starting at l (inclusive)
    // and ending with the goal sink link (inclusive).
    const std::vector<std::int64_t>& dist_table(LinkId goal) const {
        auto it = cache_.find(goal);
        if (it != cache_.end()) return it->second;

        std::vector<std::int64_t> dist(net_->links.size(), kUnreachable);
        dist[static_cast<std::size_t>(goal)] = costs_us_[static_cast<std::size_t>(goal)];
        using Item = std::pair<std::int64_t, LinkId>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        heap.emplace(dist[static_cast<std::size_t>(goal)], goal);
        while (!heap.empty()) {
            auto [d, l] = heap.top();
            heap.pop();
            if (d != dist[static_cast<std::size_t>(l)]) continue;
            for (LinkId pred : predecessors(l)) {
                std::int64_t nd = costs_us_[static_cast<std::size_t>(pred)] + d;
                if (nd < dist[static_cast<std::size_t>(pred)]) {
                    dist[static_cast<std::size_t>(pred)] = nd;
                    heap.emplace(nd, pred);
                }
            }
        }
        return cache_.emplace(goal, std::move(dist)).first->second;
    }

    std::vector<LinkId> predecessors(LinkId l) const {
        const RoadLink& link = net_->link(l);
        if (net_->is_boundary(link.from)) return {};
        NodeId i = link.from;
        std::vector<LinkId> out;
        for (int heading = 0; heading < kCompassCount; ++heading) {
            if (heading == opposite(link.heading)) continue;  // would be a U-turn
            LinkId in = net_->in_link_by_heading[static_cast<std::size_t>(i)][static_cast<std::size_t>(heading)];
            if (in >= 0) out.push_back(in);
        }
        return out;
    }

    const TrafficNetwork* net_;
    std::vector<std::int64_t> costs_us_;
    mutable std::map<LinkId, std::vector<std::int64_t>> cache_;
};

inline std::vector<LinkId> route_of(const TrafficNetwork& net, const TripRecord& trip) {
    Router router(net);
    auto path = router.route(trip.origin, trip.destination);
    if (path.empty()) throw FlowError("route_of: destination unreachable from origin");
    return path;
}

inline FlowSpec generate_flows(const TrafficNetwork& net, const RateSchedule& schedule, double horizon_s,
                               std::uint64_t seed) {
    if (schedule.empty()) throw std::invalid_argument("generate_flows: empty rate schedule");
    for (const auto& p : schedule) {
        if (p.rate_vps <= 0.0) throw std::invalid_argument("generate_flows: rate must be positive");
    }
    const int nb = static_cast<int>(net.boundary_nodes.size());
    if (nb < 2) throw std::invalid_argument("generate_flows: network needs at least 2 boundary nodes");

    Router router(net);
    Rng rng(seed);
    FlowSpec spec;
    spec.horizon_s = horizon_s;

    const int first_boundary = net.intersection_count();
    double t = 0.0;
    std::size_t seg = 0;
    while (true) {
        while (seg + 1 < schedule.size() && t >= schedule[seg + 1].t_start_s) ++seg;
        const double rate = schedule[seg].rate_vps;
        double gap = rng.exponential(rate);
        // a rate change mid-gap rescales the remaining exponential mass
        while (seg + 1 < schedule.size() && t + gap > schedule[seg + 1].t_start_s) {
            const double consumed = schedule[seg + 1].t_start_s - t;
            t = schedule[seg + 1].t_start_s;
            gap = (gap - consumed) * schedule[seg].rate_vps / schedule[seg + 1].rate_vps;
            ++seg;
        }
        t += gap;
        if (t >= horizon_s) break;

        TripRecord trip;
        trip.id = static_cast<int>(spec.trips.size());
        trip.depart_time_s = t;
        while (true) {
            trip.origin = first_boundary + rng.uniform_int(nb);
            trip.destination = first_boundary + rng.uniform_int(nb);
            if (trip.destination == trip.origin) continue;
            if (router.reachable(trip.origin, trip.destination)) break;
        }
        spec.trips.push_back(trip);
    }
    return spec;
}

inline FlowSpec generate_flows(const TrafficNetwork& net, double rate_vps, double horizon_s, std::uint64_t seed) {
    return generate_flows(net, RateSchedule{{0.0, rate_vps}}, horizon_s, seed);
}

inline nlohmann::json flows_to_json(const FlowSpec& spec) {
    nlohmann::json trips = nlohmann::json::array();
    for (const auto& t : spec.trips) {
        trips.push_back({{"id", t.id},
                         {"origin", t.origin},
                         {"destination", t.destination},
                         {"depart_time_s", t.depart_time_s}});
    }
    return nlohmann::json{{"horizon_s", spec.horizon_s}, {"trips", std::move(trips)}};
}

inline void save_flows(const FlowSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FlowError("save_flows: cannot open " + path);
    out << flows_to_json(spec).dump(2) << "\n";
}

inline FlowSpec flows_from_json(const nlohmann::json& j) {
    auto require = [&](const nlohmann::json& obj, const char* field, int index) -> const nlohmann::json& {
        auto it = obj.find(field);
        if (it == obj.end()) {
            throw FlowParseError("flow file: trip " + std::to_string(index) + " missing field '" + field + "'", -1,
                                 field);
        }
        return *it;
    };
    if (!j.is_object() || !j.contains("trips")) {
        throw FlowParseError("flow file: top-level object with 'trips' expected", -1, "trips");
    }
    FlowSpec spec;
    spec.horizon_s = j.value("horizon_s", 0.0);
    int index = 0;
    for (const auto& t : j.at("trips")) {
        TripRecord r;
        r.id = require(t, "id", index).get<int>();
        r.origin = require(t, "origin", index).get<NodeId>();
        r.destination = require(t, "destination", index).get<NodeId>();
        r.depart_time_s = require(t, "depart_time_s", index).get<double>();
        if (r.origin == r.destination) {
            throw FlowParseError("flow file: trip " + std::to_string(index) + " has origin == destination", -1,
                                 "destination");
        }
        if (r.depart_time_s < 0.0) {
            throw FlowParseError("flow file: trip " + std::to_string(index) + " has negative depart_time_s", -1,
                                 "depart_time_s");
        }
        spec.trips.push_back(r);
        ++index;
    }
    for (std::size_t i = 1; i < spec.trips.size(); ++i) {
        if (spec.trips[i].depart_time_s < spec.trips[i - 1].depart_time_s) {
            throw FlowParseError("flow file: trips not sorted by depart_time_s at index " + std::to_string(i), -1,
                                 "depart_time_s");
        }
    }
    if (spec.horizon_s > 0.0) {
        for (const auto& t : spec.trips) {
            if (t.depart_time_s > spec.horizon_s) {
                throw FlowParseError("flow file: depart_time_s beyond horizon_s for trip " + std::to_string(t.id), -1,
                                     "depart_time_s");
            }
        }
    }
    return spec;
}

inline FlowSpec load_flows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FlowError("load_flows: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        // recover the line number from the byte offset for the error message
        std::ifstream again(path);
        std::string text((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>());
        int line = 1;
        for (std::size_t k = 0; k < text.size() && k < e.byte; ++k) {
            if (text[k] == '\n') ++line;
        }
        throw FlowParseError("load_flows: " + path + ":" + std::to_string(line) + ": " + e.what(), line, "");
    }
    return flows_from_json(j);
}

}  // namespace gridlight
