#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridlight/common.hpp"

namespace gridlight {

// Compass directions double as travel headings: a vehicle with heading North
// enters an intersection from its south side and leaves through the north side
// when going straight. Grid rows grow southward, columns grow eastward.
enum Compass : int { CompassN = 0, CompassE = 1, CompassS = 2, CompassW = 3 };

enum Turn : int { TurnLeft = 0, TurnStraight = 1, TurnRight = 2 };

constexpr int kCompassCount = 4;
constexpr int kTurnCount = 3;
constexpr int kMovementsPerIntersection = kCompassCount * kTurnCount;

inline int opposite(int side) { return (side + 2) % kCompassCount; }

// Exit side of a movement given the travel heading and the turn taken.
inline int exit_side(int heading, int turn) {
    switch (turn) {
        case TurnStraight: return heading;
        case TurnLeft: return (heading + 3) % kCompassCount;
        case TurnRight: return (heading + 1) % kCompassCount;
        default: throw std::invalid_argument("exit_side: bad turn");
    }
}

inline const char* compass_name(int side) {
    static const char* names[4] = {"N", "E", "S", "W"};
    return names[side];
}

inline const char* turn_name(int turn) {
    static const char* names[3] = {"left", "straight", "right"};
    return names[turn];
}

// Each directed link carries kTurnCount functional lanes; the lane a vehicle
// occupies is set by the turn it will take at the link's downstream end.
inline LaneId lane_of(LinkId link, int turn) { return link * kTurnCount + turn; }
inline LinkId link_of_lane(LaneId lane) { return lane / kTurnCount; }
inline int turn_of_lane(LaneId lane) { return lane % kTurnCount; }

struct Movement {
    LaneId in_lane = -1;
    LaneId out_lane = -1;
    int kind = TurnStraight;

    bool operator==(const Movement&) const = default;
};

struct Phase {
    int id = 0;
    std::vector<int> movements;  // movement indices, ascending

    bool operator==(const Phase&) const = default;
};

struct RoadLink {
    LinkId id = -1;
    NodeId from = -1;  // intersection or boundary node
    NodeId to = -1;
    int lanes = 1;
    double length_m = 200.0;
    double speed_mps = 13.89;
    int heading = CompassN;  // travel direction of the link

    bool operator==(const RoadLink&) const = default;

    double travel_time_s() const { return length_m / speed_mps; }
};

struct IntersectionSpec {
    NodeId id = -1;
    // heading-major (N,E,S,W) x (left,straight,right)
    std::vector<LaneId> incoming_lanes;
    // compass-major exit side x (left,straight,right)
    std::vector<LaneId> outgoing_lanes;
    std::vector<Movement> movements;  // indexed by heading*3+turn
    std::vector<Phase> phase_table;
};

struct BoundaryNode {
    NodeId id = -1;
    NodeId intersection = -1;
    int side = CompassN;  // which open compass side of the intersection
};

struct LinkTemplate {
    int lanes = 1;
    double length_m = 200.0;
    double speed_mps = 200.0 / 14.4;  // 50 km/h

    bool operator==(const LinkTemplate&) const = default;
};

// Streets run east-west, avenues north-south.
struct GridLinkConfig {
    LinkTemplate horizontal{2, 200.0, 72.0 / 3.6};
    LinkTemplate vertical{1, 200.0, 40.0 / 3.6};

    bool operator==(const GridLinkConfig&) const = default;
};

struct NeighborSlots {
    std::array<NodeId, 4> ids{-1, -1, -1, -1};  // compass order N,E,S,W
    std::array<bool, 4> valid{false, false, false, false};

    int count() const {
        int n = 0;
        for (bool v : valid) n += v ? 1 : 0;
        return n;
    }
};

struct TrafficNetwork {
    int rows = 0;
    int cols = 0;
    std::vector<IntersectionSpec> intersections;
    std::vector<RoadLink> links;
    std::vector<BoundaryNode> boundary_nodes;
    std::vector<NeighborSlots> adjacency;  // per intersection

    // per intersection: link into it with the given travel heading
    std::vector<std::array<LinkId, 4>> in_link_by_heading;
    // per intersection: link leaving through the given compass side
    std::vector<std::array<LinkId, 4>> out_link_by_side;

    int intersection_count() const { return static_cast<int>(intersections.size()); }
    int node_count() const { return intersection_count() + static_cast<int>(boundary_nodes.size()); }
    int lane_count() const { return static_cast<int>(links.size()) * kTurnCount; }
    int phase_count() const { return intersections.empty() ? 0 : static_cast<int>(intersections[0].phase_table.size()); }

    bool is_boundary(NodeId n) const { return n >= intersection_count() && n < node_count(); }

    const BoundaryNode& boundary(NodeId n) const {
        return boundary_nodes.at(static_cast<std::size_t>(n - intersection_count()));
    }

    const RoadLink& link(LinkId l) const { return links.at(static_cast<std::size_t>(l)); }

    bool is_source_link(LinkId l) const { return is_boundary(link(l).from); }
    bool is_sink_link(LinkId l) const { return is_boundary(link(l).to); }

    NodeId node_at(int r, int c) const { return r * cols + c; }
};

inline bool same_topology(const TrafficNetwork& a, const TrafficNetwork& b) {
    return a.rows == b.rows && a.cols == b.cols && a.links.size() == b.links.size();
}

inline bool operator==(const TrafficNetwork& a, const TrafficNetwork& b) {
    if (a.rows != b.rows || a.cols != b.cols) return false;
    if (a.links != b.links) return false;
    if (a.intersections.size() != b.intersections.size()) return false;
    for (std::size_t i = 0; i < a.intersections.size(); ++i) {
        if (a.intersections[i].phase_table != b.intersections[i].phase_table) return false;
    }
    return true;
}

// Movements conflict when their paths cross the intersection box. Right turns
// hug the corner and are treated as compatible with everything; movements from
// the same heading share an approach; opposing headings only cross when the
// turns differ (e.g. a through stream against an opposing left).
inline bool movements_conflict(int heading_a, int turn_a, int heading_b, int turn_b) {
    if (turn_a == TurnRight || turn_b == TurnRight) return false;
    if (heading_a == heading_b) return false;
    if (heading_a == opposite(heading_b)) return turn_a != turn_b;
    return true;  // perpendicular approaches
}

inline std::vector<Phase> default_phase_table() {
    std::vector<int> rights;  // right turns ride along in every phase
    for (int heading = 0; heading < kCompassCount; ++heading) rights.push_back(heading * kTurnCount + TurnRight);
    auto make = [&](int id, std::initializer_list<int> main) {
        Phase p;
        p.id = id;
        p.movements.assign(main);
        p.movements.insert(p.movements.end(), rights.begin(), rights.end());
        std::sort(p.movements.begin(), p.movements.end());
        return p;
    };
    const int ns = CompassN * kTurnCount, es = CompassE * kTurnCount;
    const int ss = CompassS * kTurnCount, ws = CompassW * kTurnCount;
    return {
        make(0, {ns + TurnStraight, ss + TurnStraight}),
        make(1, {ns + TurnLeft, ss + TurnLeft}),
        make(2, {es + TurnStraight, ws + TurnStraight}),
        make(3, {es + TurnLeft, ws + TurnLeft}),
        make(4, {ns + TurnLeft, ns + TurnStraight}),
        make(5, {ss + TurnLeft, ss + TurnStraight}),
        make(6, {es + TurnLeft, es + TurnStraight}),
        make(7, {ws + TurnLeft, ws + TurnStraight}),
    };
}

inline TrafficNetwork build_grid_network(int rows, int cols, const GridLinkConfig& link_config,
                                         const std::vector<Phase>& phase_table) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("build_grid_network: grid dimensions must be positive");
    if (phase_table.empty()) throw std::invalid_argument("build_grid_network: phase table must not be empty");

    TrafficNetwork net;
    net.rows = rows;
    net.cols = cols;
    const int v = rows * cols;
    net.intersections.resize(static_cast<std::size_t>(v));
    net.adjacency.resize(static_cast<std::size_t>(v));
    net.in_link_by_heading.assign(static_cast<std::size_t>(v), {-1, -1, -1, -1});
    net.out_link_by_side.assign(static_cast<std::size_t>(v), {-1, -1, -1, -1});

    auto neighbor_of = [&](int r, int c, int side) -> NodeId {
        switch (side) {
            case CompassN: return r > 0 ? net.node_at(r - 1, c) : -1;
            case CompassE: return c < cols - 1 ? net.node_at(r, c + 1) : -1;
            case CompassS: return r < rows - 1 ? net.node_at(r + 1, c) : -1;
            case CompassW: return c > 0 ? net.node_at(r, c - 1) : -1;
            default: return -1;
        }
    };
    auto template_for = [&](int side) -> const LinkTemplate& {
        return (side == CompassE || side == CompassW) ? link_config.horizontal : link_config.vertical;
    };

    // First pass: boundary nodes, enumerated intersection-major then compass.
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const NodeId i = net.node_at(r, c);
            for (int side = 0; side < kCompassCount; ++side) {
                NodeId j = neighbor_of(r, c, side);
                net.adjacency[static_cast<std::size_t>(i)].ids[static_cast<std::size_t>(side)] = j;
                net.adjacency[static_cast<std::size_t>(i)].valid[static_cast<std::size_t>(side)] = j >= 0;
                if (j < 0) {
                    BoundaryNode b;
                    b.id = v + static_cast<int>(net.boundary_nodes.size());
                    b.intersection = i;
                    b.side = side;
                    net.boundary_nodes.push_back(b);
                }
            }
        }
    }

    auto boundary_at = [&](NodeId i, int side) -> NodeId {
        for (const auto& b : net.boundary_nodes) {
            if (b.intersection == i && b.side == side) return b.id;
        }
        return -1;
    };

    auto add_link = [&](NodeId from, NodeId to, int heading, const LinkTemplate& t) -> LinkId {
        RoadLink l;
        l.id = static_cast<LinkId>(net.links.size());
        l.from = from;
        l.to = to;
        l.lanes = t.lanes;
        l.length_m = t.length_m;
        l.speed_mps = t.speed_mps;
        l.heading = heading;
        net.links.push_back(l);
        return l.id;
    };

    // Second pass: links in canonical order. Leaving through side d means
    // traveling with heading d; traffic entering from side d travels opposite(d).
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const NodeId i = net.node_at(r, c);
            for (int side = 0; side < kCompassCount; ++side) {
                const LinkTemplate& t = template_for(side);
                NodeId j = neighbor_of(r, c, side);
                if (j >= 0) {
                    LinkId out = add_link(i, j, side, t);
                    net.out_link_by_side[static_cast<std::size_t>(i)][static_cast<std::size_t>(side)] = out;
                    net.in_link_by_heading[static_cast<std::size_t>(j)][static_cast<std::size_t>(side)] = out;
                } else {
                    NodeId b = boundary_at(i, side);
                    LinkId sink = add_link(i, b, side, t);
                    net.out_link_by_side[static_cast<std::size_t>(i)][static_cast<std::size_t>(side)] = sink;
                    LinkId source = add_link(b, i, opposite(side), t);
                    net.in_link_by_heading[static_cast<std::size_t>(i)][static_cast<std::size_t>(opposite(side))] = source;
                }
            }
        }
    }

    // Third pass: per-intersection lanes, movements, phases.
    for (int i = 0; i < v; ++i) {
        IntersectionSpec& spec = net.intersections[static_cast<std::size_t>(i)];
        spec.id = i;
        for (int heading = 0; heading < kCompassCount; ++heading) {
            LinkId in = net.in_link_by_heading[static_cast<std::size_t>(i)][static_cast<std::size_t>(heading)];
            for (int turn = 0; turn < kTurnCount; ++turn) {
                LinkId out = net.out_link_by_side[static_cast<std::size_t>(i)][static_cast<std::size_t>(exit_side(heading, turn))];
                Movement m;
                m.in_lane = lane_of(in, turn);
                m.out_lane = lane_of(out, turn);
                m.kind = turn;
                spec.movements.push_back(m);
                spec.incoming_lanes.push_back(m.in_lane);
            }
        }
        for (int side = 0; side < kCompassCount; ++side) {
            LinkId out = net.out_link_by_side[static_cast<std::size_t>(i)][static_cast<std::size_t>(side)];
            for (int turn = 0; turn < kTurnCount; ++turn) {
                spec.outgoing_lanes.push_back(lane_of(out, turn));
            }
        }
        spec.phase_table = phase_table;
    }
    return net;
}

inline TrafficNetwork build_grid_network(int rows, int cols) {
    return build_grid_network(rows, cols, GridLinkConfig{}, default_phase_table());
}

inline NeighborSlots neighbors_of(const TrafficNetwork& net, NodeId i) {
    if (i < 0 || i >= net.intersection_count()) {
        throw std::out_of_range("neighbors_of: unknown intersection id " + std::to_string(i));
    }
    return net.adjacency[static_cast<std::size_t>(i)];
}

inline std::vector<Movement> movements_of_phase(const IntersectionSpec& spec, int phase_id) {
    if (phase_id < 0 || phase_id >= static_cast<int>(spec.phase_table.size())) {
        throw std::out_of_range("movements_of_phase: phase id " + std::to_string(phase_id) + " out of range");
    }
    std::vector<Movement> out;
    for (int m : spec.phase_table[static_cast<std::size_t>(phase_id)].movements) {
        out.push_back(spec.movements.at(static_cast<std::size_t>(m)));
    }
    return out;
}

struct Violation {
    std::string entity;
    std::string rule;
    std::string detail;
};

inline std::vector<Violation> validate_network(const TrafficNetwork& net) {
    std::vector<Violation> out;
    auto add = [&](std::string entity, std::string rule, std::string detail) {
        out.push_back({std::move(entity), std::move(rule), std::move(detail)});
    };

    if (net.rows < 1 || net.cols < 1) add("network", "positive_dimensions", "rows/cols must be >= 1");
    if (net.intersection_count() != net.rows * net.cols) {
        add("network", "grid_size", "intersection count != rows*cols");
    }

    for (const auto& l : net.links) {
        std::string ent = "link " + std::to_string(l.id);
        if (l.length_m <= 0) add(ent, "positive_length", "length_m must be > 0");
        if (l.speed_mps <= 0) add(ent, "positive_speed", "speed_limit_mps must be > 0");
        if (l.lanes < 1) add(ent, "lane_count", "lanes must be >= 1");
    }

    const int v = net.intersection_count();
    for (int i = 0; i < v; ++i) {
        const auto& slots = net.adjacency[static_cast<std::size_t>(i)];
        for (int side = 0; side < kCompassCount; ++side) {
            if (!slots.valid[static_cast<std::size_t>(side)]) continue;
            NodeId j = slots.ids[static_cast<std::size_t>(side)];
            if (j < 0 || j >= v) {
                add("intersection " + std::to_string(i), "neighbor_range", "neighbor id out of range");
                continue;
            }
            const auto& back = net.adjacency[static_cast<std::size_t>(j)].ids[static_cast<std::size_t>(opposite(side))];
            const bool back_valid = net.adjacency[static_cast<std::size_t>(j)].valid[static_cast<std::size_t>(opposite(side))];
            if (!back_valid || back != i) {
                add("intersection " + std::to_string(i), "adjacency_symmetry",
                    "E_ij set but E_ji missing toward " + std::to_string(j));
            }
        }
    }

    if (v > 0) {
        std::vector<char> seen(static_cast<std::size_t>(v), 0);
        std::deque<NodeId> queue{0};
        seen[0] = 1;
        int reached = 0;
        while (!queue.empty()) {
            NodeId i = queue.front();
            queue.pop_front();
            ++reached;
            const auto& slots = net.adjacency[static_cast<std::size_t>(i)];
            for (int side = 0; side < kCompassCount; ++side) {
                if (!slots.valid[static_cast<std::size_t>(side)]) continue;
                NodeId j = slots.ids[static_cast<std::size_t>(side)];
                if (j >= 0 && j < v && !seen[static_cast<std::size_t>(j)]) {
                    seen[static_cast<std::size_t>(j)] = 1;
                    queue.push_back(j);
                }
            }
        }
        if (reached != v) add("network", "connectivity", "adjacency graph is not connected");
    }

    for (const auto& spec : net.intersections) {
        std::string ent = "intersection " + std::to_string(spec.id);
        if (spec.incoming_lanes.empty() || spec.outgoing_lanes.empty()) {
            add(ent, "lane_lists", "incoming/outgoing lane lists must be non-empty");
        }
        std::vector<std::pair<LaneId, LaneId>> pairs;
        for (const auto& m : spec.movements) {
            if (std::find(spec.incoming_lanes.begin(), spec.incoming_lanes.end(), m.in_lane) == spec.incoming_lanes.end()) {
                add(ent, "movement_lane_resolution", "movement in_lane not in incoming lane set");
            }
            if (std::find(spec.outgoing_lanes.begin(), spec.outgoing_lanes.end(), m.out_lane) == spec.outgoing_lanes.end()) {
                add(ent, "movement_lane_resolution", "movement out_lane not in outgoing lane set");
            }
            pairs.emplace_back(m.in_lane, m.out_lane);
        }
        std::sort(pairs.begin(), pairs.end());
        if (std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end()) {
            add(ent, "movement_uniqueness", "(in_lane,out_lane) pair repeated");
        }

        if (spec.phase_table.empty()) {
            add(ent, "phase_table", "phase table empty");
            continue;
        }
        for (std::size_t p = 0; p < spec.phase_table.size(); ++p) {
            const Phase& phase = spec.phase_table[p];
            std::string pent = ent + " phase " + std::to_string(phase.id);
            if (phase.id != static_cast<int>(p)) add(pent, "phase_ids", "phase ids must be 0..|A|-1 in order");
            if (phase.movements.empty()) add(pent, "phase_nonempty", "phase has no movements");
            for (int m : phase.movements) {
                if (m < 0 || m >= static_cast<int>(spec.movements.size())) {
                    add(pent, "phase_movement_range", "movement index " + std::to_string(m) + " unknown");
                }
            }
            for (std::size_t a = 0; a < phase.movements.size(); ++a) {
                for (std::size_t b = a + 1; b < phase.movements.size(); ++b) {
                    int ma = phase.movements[a], mb = phase.movements[b];
                    if (ma < 0 || mb < 0 || ma >= kMovementsPerIntersection || mb >= kMovementsPerIntersection) continue;
                    if (movements_conflict(ma / kTurnCount, ma % kTurnCount, mb / kTurnCount, mb % kTurnCount)) {
                        std::ostringstream os;
                        os << compass_name(ma / kTurnCount) << "-" << turn_name(ma % kTurnCount) << " conflicts with "
                           << compass_name(mb / kTurnCount) << "-" << turn_name(mb % kTurnCount);
                        add(pent, "phase_conflict", os.str());
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace gridlight
