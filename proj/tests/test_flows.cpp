#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "gridlight/flows.hpp"
#include "gridlight/netmodel.hpp"

using namespace gridlight;

namespace {

NodeId boundary_node(const TrafficNetwork& net, NodeId intersection, int side) {
    for (const auto& b : net.boundary_nodes) {
        if (b.intersection == intersection && b.side == side) return b.id;
    }
    throw std::runtime_error("no boundary node there");
}

// Brute-force route oracle: depth-first over the link graph with cost pruning.
void dfs_min_cost(const TrafficNetwork& net, const Router& router, LinkId cur, LinkId goal, double cost,
                  double& best, int depth) {
    cost += net.link(cur).travel_time_s();
    if (cost >= best) return;
    if (cur == goal) {
        best = cost;
        return;
    }
    if (depth > 12) return;
    for (LinkId next : router.successors(cur)) {
        dfs_min_cost(net, router, next, goal, cost, best, depth + 1);
    }
}

double brute_force_route_time(const TrafficNetwork& net, NodeId origin, NodeId destination) {
    Router router(net);
    double best = std::numeric_limits<double>::infinity();
    dfs_min_cost(net, router, router.source_link(origin), router.sink_link(destination), 0.0, best, 0);
    return best;
}

}  // namespace

TEST(GenerateFlows, PoissonCountWithinFourSigma) {
    TrafficNetwork net = build_grid_network(3, 3);
    FlowSpec spec = generate_flows(net, 0.5, 3600.0, 1);
    const double mean = 0.5 * 3600.0;
    const double sigma = std::sqrt(mean);
    EXPECT_GT(static_cast<double>(spec.trips.size()), mean - 4.0 * sigma);
    EXPECT_LT(static_cast<double>(spec.trips.size()), mean + 4.0 * sigma);
    for (const auto& t : spec.trips) {
        EXPECT_LT(t.depart_time_s, spec.horizon_s);
        EXPECT_GE(t.depart_time_s, 0.0);
        EXPECT_NE(t.origin, t.destination);
        EXPECT_TRUE(net.is_boundary(t.origin));
        EXPECT_TRUE(net.is_boundary(t.destination));
    }
    for (std::size_t i = 1; i < spec.trips.size(); ++i) {
        EXPECT_LE(spec.trips[i - 1].depart_time_s, spec.trips[i].depart_time_s);
    }
}

TEST(GenerateFlows, DeterministicGivenSeed) {
    TrafficNetwork net = build_grid_network(3, 3);
    FlowSpec a = generate_flows(net, 0.4, 900.0, 7);
    FlowSpec b = generate_flows(net, 0.4, 900.0, 7);
    EXPECT_EQ(a, b);
    FlowSpec c = generate_flows(net, 0.4, 900.0, 8);
    EXPECT_NE(a, c);
}

TEST(GenerateFlows, VanishingRateGivesEmptyFlow) {
    TrafficNetwork net = build_grid_network(2, 2);
    FlowSpec spec = generate_flows(net, 1e-9, 10.0, 3);
    EXPECT_TRUE(spec.trips.empty());
}

TEST(GenerateFlows, RejectsBadArguments) {
    TrafficNetwork net = build_grid_network(2, 2);
    EXPECT_THROW(generate_flows(net, 0.0, 100.0, 1), std::invalid_argument);
    EXPECT_THROW(generate_flows(net, RateSchedule{}, 100.0, 1), std::invalid_argument);
}

TEST(GenerateFlows, PiecewiseScheduleShiftsLoad) {
    TrafficNetwork net = build_grid_network(2, 2);
    // quiet first half, 10x peak second half
    FlowSpec spec = generate_flows(net, RateSchedule{{0.0, 0.05}, {1800.0, 0.5}}, 3600.0, 11);
    long first = 0, second = 0;
    for (const auto& t : spec.trips) (t.depart_time_s < 1800.0 ? first : second)++;
    EXPECT_GT(second, 4 * first);
}

TEST(GenerateFlows, EveryTripIsRoutable) {
    TrafficNetwork net = build_grid_network(3, 2);
    FlowSpec spec = generate_flows(net, 0.2, 600.0, 5);
    ASSERT_FALSE(spec.trips.empty());
    for (const auto& t : spec.trips) {
        EXPECT_FALSE(route_of(net, t).empty());
    }
}

TEST(RouteOf, AdjacentBoundaryPairOnSameRowIsStraightLine) {
    TrafficNetwork net = build_grid_network(3, 3);
    TripRecord trip;
    trip.origin = boundary_node(net, 3, CompassW);       // west edge of middle row
    trip.destination = boundary_node(net, 5, CompassE);  // east edge of middle row
    auto path = route_of(net, trip);
    ASSERT_EQ(path.size(), 4u);  // source, 3->4, 4->5, sink
    EXPECT_EQ(net.link(path[0]).to, 3);
    EXPECT_EQ(net.link(path[1]).to, 4);
    EXPECT_EQ(net.link(path[2]).to, 5);
    EXPECT_EQ(net.link(path[3]).to, trip.destination);
    for (LinkId l : path) EXPECT_EQ(net.link(l).heading, CompassE);
}

TEST(RouteOf, CornerToCornerCostMatchesBruteForce) {
    TrafficNetwork net = build_grid_network(3, 3);
    Router router(net);
    TripRecord trip;
    trip.origin = boundary_node(net, 0, CompassN);
    trip.destination = boundary_node(net, 8, CompassE);
    auto path = route_of(net, trip);
    const double oracle = brute_force_route_time(net, trip.origin, trip.destination);
    EXPECT_NEAR(router.route_time_s(path), oracle, 1e-9);

    // Manhattan structure: 2 easts + 2 souths internally
    int east = 0, south = 0;
    for (std::size_t k = 1; k + 1 < path.size(); ++k) {
        if (net.link(path[k]).heading == CompassE) ++east;
        if (net.link(path[k]).heading == CompassS) ++south;
    }
    EXPECT_EQ(east, 2);
    EXPECT_EQ(south, 2);
}

TEST(RouteOf, EqualCostTieGoesToLexicographicallySmallerNodeSequence) {
    TrafficNetwork net = build_grid_network(2, 2);
    TripRecord trip;
    trip.origin = boundary_node(net, 0, CompassN);
    trip.destination = boundary_node(net, 3, CompassS);
    // two L-routes tie: via node 1 (E then S) and via node 2 (S then E)
    auto path = route_of(net, trip);
    ASSERT_EQ(path.size(), 4u);
    EXPECT_EQ(net.link(path[1]).to, 1);

    auto again = route_of(net, trip);
    EXPECT_EQ(path, again);
}

TEST(RouteOf, RoutesNeverRequireUTurns) {
    TrafficNetwork net = build_grid_network(3, 3);
    FlowSpec spec = generate_flows(net, 0.3, 400.0, 9);
    for (const auto& t : spec.trips) {
        auto path = route_of(net, t);
        for (std::size_t k = 0; k + 1 < path.size(); ++k) {
            EXPECT_NE(net.link(path[k + 1]).heading, opposite(net.link(path[k]).heading));
        }
    }
}

TEST(FlowIo, EmptyAndGeneratedSpecsRoundTrip) {
    TrafficNetwork net = build_grid_network(3, 3);
    const std::string path = ::testing::TempDir() + "gridlight_flows.json";

    FlowSpec empty;
    empty.horizon_s = 100.0;
    save_flows(empty, path);
    EXPECT_EQ(load_flows(path), empty);

    FlowSpec spec = generate_flows(net, 0.5, 3600.0, 1);
    save_flows(spec, path);
    EXPECT_EQ(load_flows(path), spec);
    std::remove(path.c_str());
}

TEST(FlowIo, MissingFieldNamesTheField) {
    const std::string path = ::testing::TempDir() + "gridlight_badflow.json";
    std::ofstream out(path);
    out << R"({"horizon_s": 10, "trips": [{"id": 0, "origin": 9, "destination": 10}]})";
    out.close();
    try {
        load_flows(path);
        FAIL() << "expected FlowParseError";
    } catch (const FlowParseError& e) {
        EXPECT_EQ(e.field(), "depart_time_s");
    }
    std::remove(path.c_str());
}

TEST(FlowIo, MalformedJsonReportsLine) {
    const std::string path = ::testing::TempDir() + "gridlight_malformed.json";
    std::ofstream out(path);
    out << "{\n  \"horizon_s\": 10,\n  \"trips\": [oops]\n}\n";
    out.close();
    try {
        load_flows(path);
        FAIL() << "expected FlowParseError";
    } catch (const FlowParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
    std::remove(path.c_str());
}
