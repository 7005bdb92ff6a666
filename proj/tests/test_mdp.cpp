#include <gtest/gtest.h>

#include "gridlight/flows.hpp"
#include "gridlight/mdp.hpp"
#include "gridlight/netmodel.hpp"
#include "gridlight/simcore.hpp"

using namespace gridlight;

namespace {

void push_fake(SimState& s, LaneId lane, int n) {
    for (int k = 0; k < n; ++k) s.lane_queues[static_cast<std::size_t>(lane)].vehicle_ids.push_back(900 + k);
}

std::vector<Observation> observe_all(const Simulator& sim, const SimState& s, const ObservationSchema& schema) {
    std::vector<Observation> out;
    for (int i = 0; i < sim.net().intersection_count(); ++i) out.push_back(observe(sim, s, i, schema));
    return out;
}

}  // namespace

TEST(Observe, FreshResetIsPhaseZeroAllQueuesEmpty) {
    TrafficNetwork net = build_grid_network(3, 3);
    Simulator sim(net);
    SimState s = sim.reset(FlowSpec{}, 1);
    ObservationSchema schema;
    Observation o = observe(sim, s, 4, schema);
    ASSERT_EQ(o.phase_onehot.size(), 8u);
    EXPECT_EQ(o.phase_onehot[0], 1.0);
    for (std::size_t k = 1; k < o.phase_onehot.size(); ++k) EXPECT_EQ(o.phase_onehot[k], 0.0);
    for (double q : o.incoming_queues) EXPECT_EQ(q, 0.0);
    EXPECT_EQ(static_cast<int>(o.flat().size()), observation_width(net, schema));
}

TEST(Observe, QueueEntriesCrossCheckAgainstLaneQueueLength) {
    TrafficNetwork net = build_grid_network(3, 3);
    Simulator sim(net);
    SimState s = sim.reset(FlowSpec{}, 1);
    const auto& spec = net.intersections[4];
    push_fake(s, spec.incoming_lanes[0], 2);
    push_fake(s, spec.incoming_lanes[2], 1);
    push_fake(s, spec.incoming_lanes[7], 5);

    ObservationSchema schema;
    Observation o = observe(sim, s, 4, schema);
    for (std::size_t k = 0; k < spec.incoming_lanes.size(); ++k) {
        EXPECT_EQ(o.incoming_queues[k], sim.lane_queue_length(s, spec.incoming_lanes[k]));
    }
}

TEST(Observe, DeterministicOnIdenticalState) {
    TrafficNetwork net = build_grid_network(2, 2);
    Simulator sim(net);
    SimState s = sim.reset(FlowSpec{}, 1);
    ObservationSchema schema;
    schema.kind = ObsSchema::Sumo;
    EXPECT_EQ(observe(sim, s, 3, schema).flat(), observe(sim, s, 3, schema).flat());
}

TEST(Observe, SumoSchemaAddsOutgoingQueuesAndNormalizedHeadWaits) {
    TrafficNetwork net = build_grid_network(1, 1);
    Simulator sim(net);
    SimState s = sim.reset(FlowSpec{}, 1);
    ObservationSchema schema;
    schema.kind = ObsSchema::Sumo;
    schema.wait_norm_s = 60.0;
    EXPECT_EQ(observation_width(net, schema), 8 + 12 + 12 + 12);

    const auto& spec = net.intersections[0];
    const LaneId lane = spec.incoming_lanes[CompassS * 3 + TurnStraight];
    push_fake(s, lane, 1);
    s.lane_queues[static_cast<std::size_t>(lane)].head_wait_s = 30.0;
    Observation o = observe(sim, s, 0, schema);
    EXPECT_DOUBLE_EQ(o.head_waits[CompassS * 3 + TurnStraight], 0.5);

    s.lane_queues[static_cast<std::size_t>(lane)].head_wait_s = 600.0;  // clipped to 1
    o = observe(sim, s, 0, schema);
    EXPECT_DOUBLE_EQ(o.head_waits[CompassS * 3 + TurnStraight], 1.0);
}

TEST(Observe, OptionalPressureFeatureMatchesSimulator) {
    TrafficNetwork net = build_grid_network(2, 2);
    Simulator sim(net);
    SimState s = sim.reset(FlowSpec{}, 1);
    push_fake(s, net.intersections[1].incoming_lanes[4], 3);
    ObservationSchema schema;
    schema.include_pressure = true;
    Observation o = observe(sim, s, 1, schema);
    EXPECT_EQ(o.pressure, sim.pressure_of(s, 1));
    EXPECT_EQ(static_cast<int>(o.flat().size()), observation_width(net, schema));
}

TEST(Augment, IsolatedAgentGetsAllSlotsPadded) {
    TrafficNetwork net = build_grid_network(1, 1);
    Simulator sim(net);
    SimState s = sim.reset(FlowSpec{}, 1);
    ObservationSchema schema;
    auto aug = augment(observe_all(sim, s, schema), net, 0, schema);
    for (int slot = 0; slot < 4; ++slot) {
        EXPECT_FALSE(aug.validity[static_cast<std::size_t>(slot)]);
        for (double v : aug.neighbor_slots[static_cast<std::size_t>(slot)].flat()) EXPECT_EQ(v, 0.0);
    }
    EXPECT_EQ(static_cast<int>(aug.flat().size()), augmented_width(net, schema));
}

TEST(Augment, CenterSlotsFollowCompassOrder) {
    TrafficNetwork net = build_grid_network(3, 3);
    Simulator sim(net);
    SimState s = sim.reset(FlowSpec{}, 1);
    // stamp each neighbor of the center with a distinct queue count
    const NeighborSlots slots = neighbors_of(net, 4);
    for (int side = 0; side < 4; ++side) {
        const NodeId j = slots.ids[static_cast<std::size_t>(side)];
        push_fake(s, net.intersections[static_cast<std::size_t>(j)].incoming_lanes[0], side + 1);
    }
    ObservationSchema schema;
    auto aug = augment(observe_all(sim, s, schema), net, 4, schema);
    for (int side = 0; side < 4; ++side) {
        EXPECT_TRUE(aug.validity[static_cast<std::size_t>(side)]);
        EXPECT_EQ(aug.neighbor_slots[static_cast<std::size_t>(side)].incoming_queues[0], side + 1.0);
    }
}

TEST(Augment, UnrelatedAgentsDoNotLeakIn) {
    TrafficNetwork net = build_grid_network(3, 3);
    Simulator sim(net);
    SimState s = sim.reset(FlowSpec{}, 1);
    ObservationSchema schema;
    auto obs = observe_all(sim, s, schema);
    auto before = augment(obs, net, 0, schema).flat();
    // node 8 is not adjacent to node 0; scribble on its observation
    obs[8].incoming_queues.assign(12, 42.0);
    auto after = augment(obs, net, 0, schema).flat();
    EXPECT_EQ(before, after);
}

TEST(LocalReward, NegativeTotalIncomingQueue) {
    TrafficNetwork net = build_grid_network(3, 3);
    Simulator sim(net);
    SimState s = sim.reset(FlowSpec{}, 1);
    EXPECT_EQ(local_reward(sim, s, 4), 0.0);

    const auto& spec = net.intersections[4];
    push_fake(s, spec.incoming_lanes[0], 3);
    push_fake(s, spec.incoming_lanes[3], 1);
    push_fake(s, spec.incoming_lanes[9], 2);
    EXPECT_EQ(local_reward(sim, s, 4), -6.0);
    EXPECT_LE(local_reward(sim, s, 4), 0.0);
}

TEST(NeighborhoodReward, SumsSelfAndValidNeighbors) {
    TrafficNetwork net = build_grid_network(3, 3);
    // node 1 is a border node with 3 neighbors (E, S, W)
    std::vector<double> locals(9, 0.0);
    locals[1] = -4.0;
    locals[2] = -2.0;  // east
    locals[4] = -3.0;  // south
    locals[0] = -1.0;  // west
    EXPECT_EQ(neighborhood_reward(locals, net, 1), -10.0);

    TrafficNetwork single = build_grid_network(1, 1);
    EXPECT_EQ(neighborhood_reward({-7.0}, single, 0), -7.0);
}

TEST(NeighborhoodReward, DegreeWeightedIdentityHoldsNumerically) {
    TrafficNetwork net = build_grid_network(3, 3);
    Rng rng(17);
    std::vector<double> locals;
    for (int i = 0; i < 9; ++i) locals.push_back(-rng.uniform(0.0, 10.0));
    double lhs = 0.0, rhs = 0.0;
    for (int i = 0; i < 9; ++i) {
        lhs += neighborhood_reward(locals, net, i);
        rhs += (1.0 + neighbors_of(net, i).count()) * locals[static_cast<std::size_t>(i)];
    }
    EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(NeighborActions, PaddedSlotsEncodeAsZeroRows) {
    auto enc = encode_neighbor_actions({2, -1, 0, -1}, 4);
    ASSERT_EQ(enc.size(), 16u);
    EXPECT_EQ(enc[2], 1.0);   // slot 0 action 2
    EXPECT_EQ(enc[8], 1.0);   // slot 2 action 0
    double total = 0.0;
    for (double v : enc) total += v;
    EXPECT_EQ(total, 2.0);

    // any negative marker encodes the same all-zero row
    EXPECT_EQ(encode_neighbor_actions({2, -1, 0, -1}, 4), encode_neighbor_actions({2, -7, 0, -2}, 4));
}

TEST(ObservationWidth, ConstantAcrossAgents) {
    TrafficNetwork net = build_grid_network(3, 2);
    Simulator sim(net);
    SimState s = sim.reset(FlowSpec{}, 1);
    for (ObsSchema kind : {ObsSchema::CityFlow, ObsSchema::Sumo}) {
        ObservationSchema schema;
        schema.kind = kind;
        for (int i = 0; i < net.intersection_count(); ++i) {
            EXPECT_EQ(static_cast<int>(observe(sim, s, i, schema).flat().size()), observation_width(net, schema));
            EXPECT_EQ(static_cast<int>(augment(observe_all(sim, s, schema), net, i, schema).flat().size()),
                      augmented_width(net, schema));
        }
    }
}
