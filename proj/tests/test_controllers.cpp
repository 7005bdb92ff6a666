#include <gtest/gtest.h>

#include <cmath>

#include "gridlight/controllers.hpp"
#include "gridlight/flows.hpp"
#include "gridlight/netmodel.hpp"
#include "gridlight/simcore.hpp"

using namespace gridlight;

TEST(FixedTime, ClockMapsIntoPlanBuckets) {
    FixedTimePlan plan = default_fixed_time_plan(30.0);
    EXPECT_EQ(fixed_time_action(0.0, plan), 0);
    EXPECT_EQ(fixed_time_action(29.9, plan), 0);
    EXPECT_EQ(fixed_time_action(30.0, plan), 1);
    EXPECT_EQ(fixed_time_action(95.0, plan), 3);
    // periodicity
    for (double clock : {0.0, 17.0, 95.0, 119.0}) {
        EXPECT_EQ(fixed_time_action(clock, plan), fixed_time_action(clock + plan.cycle_s(), plan));
        EXPECT_EQ(fixed_time_action(clock, plan), fixed_time_action(clock + 7 * plan.cycle_s(), plan));
    }
}

TEST(FixedTime, RejectsDegeneratePlans) {
    EXPECT_THROW(fixed_time_action(0.0, FixedTimePlan{}), std::invalid_argument);
    FixedTimePlan bad{{{0, 10.0}, {1, 0.0}}};
    EXPECT_THROW(fixed_time_action(0.0, bad), std::invalid_argument);
}

TEST(Greedy, AllZeroQueuesTieToPhaseZero) {
    TrafficNetwork net = build_grid_network(1, 1);
    Observation obs;
    obs.incoming_queues.assign(12, 0.0);
    EXPECT_EQ(greedy_action(obs, net.intersections[0]), 0);
}

TEST(Greedy, PicksThePhaseCoveringTheLoadedLanes) {
    TrafficNetwork net = build_grid_network(1, 1);
    Observation obs;
    obs.incoming_queues.assign(12, 0.0);
    // stack the N/S straight lanes: movement ids 1 and 7
    obs.incoming_queues[CompassN * 3 + TurnStraight] = 4.0;
    obs.incoming_queues[CompassS * 3 + TurnStraight] = 3.0;
    EXPECT_EQ(greedy_action(obs, net.intersections[0]), 0);

    // shift the load to the eastbound approach: straight+left on heading E is phase 6
    obs.incoming_queues.assign(12, 0.0);
    obs.incoming_queues[CompassE * 3 + TurnStraight] = 5.0;
    obs.incoming_queues[CompassE * 3 + TurnLeft] = 5.0;
    EXPECT_EQ(greedy_action(obs, net.intersections[0]), 6);
}

TEST(Greedy, ArgmaxFlipsWhenALosingPhaseOvertakes) {
    TrafficNetwork net = build_grid_network(1, 1);
    Observation obs;
    obs.incoming_queues.assign(12, 0.0);
    obs.incoming_queues[CompassN * 3 + TurnStraight] = 3.0;
    obs.incoming_queues[CompassS * 3 + TurnStraight] = 3.0;
    ASSERT_EQ(greedy_action(obs, net.intersections[0]), 0);
    // grow the E/W straights one vehicle at a time until they overtake
    int flips = 0;
    for (int k = 1; k <= 8; ++k) {
        obs.incoming_queues[CompassE * 3 + TurnStraight] = k;
        if (greedy_action(obs, net.intersections[0]) == 2) {
            flips = k;
            break;
        }
    }
    EXPECT_EQ(flips, 7);  // 7 > 3+3 breaks the tie rule's hold on phase 0
}

TEST(MaxPressure, ArgmaxWithTieAndShiftInvariance) {
    EXPECT_EQ(max_pressure_action({2.0, -1.0, 0.0, 1.0}), 0);
    EXPECT_EQ(max_pressure_action({1.0, 1.0, 1.0}), 0);
    EXPECT_EQ(max_pressure_action({-3.0, 5.0, 5.0}), 1);

    std::vector<double> p = {0.4, -2.0, 3.5, 3.5, 1.0};
    const int base = max_pressure_action(p);
    for (double& v : p) v += 17.25;
    EXPECT_EQ(max_pressure_action(p), base);
    EXPECT_THROW(max_pressure_action({}), std::invalid_argument);
}

TEST(PolicyAction, OneHotPolicyAgreesAcrossModes) {
    // weights that force an effectively deterministic policy
    MlpSpec spec{3, {}, Activation::Relu, 3, OutputHead::Softmax};
    MlpParams p = init_mlp(spec, 0);
    for (auto& l : p.layers) std::fill(l.w.begin(), l.w.end(), 0.0);
    p.layers.back().b = {-50.0, 50.0, -50.0};
    Rng rng(1);
    for (int k = 0; k < 10; ++k) {
        EXPECT_EQ(policy_action(p, {0.0, 0.0, 0.0}, ActionSelect::Sample, rng), 1);
        EXPECT_EQ(policy_action(p, {0.0, 0.0, 0.0}, ActionSelect::Argmax, rng), 1);
    }
}

TEST(PolicyAction, SeededSamplingIsReproducible) {
    MlpParams p = init_mlp(MlpSpec{4, {6}, Activation::Tanh, 4, OutputHead::Softmax}, 77);
    std::vector<double> z = {0.2, -0.4, 1.0, 0.0};
    std::vector<int> first, second;
    {
        Rng rng(42);
        for (int k = 0; k < 50; ++k) first.push_back(policy_action(p, z, ActionSelect::Sample, rng));
    }
    {
        Rng rng(42);
        for (int k = 0; k < 50; ++k) second.push_back(policy_action(p, z, ActionSelect::Sample, rng));
    }
    EXPECT_EQ(first, second);
}

TEST(PolicyAction, SampleFrequenciesMatchThePolicyWithinThreeSigma) {
    // uniform policy over 4 actions via zero weights
    MlpSpec spec{2, {}, Activation::Relu, 4, OutputHead::Softmax};
    MlpParams p = init_mlp(spec, 0);
    for (auto& l : p.layers) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    Rng rng(7);
    const int n = 100000;
    std::vector<int> counts(4, 0);
    for (int k = 0; k < n; ++k) counts[static_cast<std::size_t>(policy_action(p, {0.0, 0.0}, ActionSelect::Sample, rng))]++;
    const double mean = n * 0.25;
    const double sigma = std::sqrt(n * 0.25 * 0.75);
    for (int a = 0; a < 4; ++a) {
        EXPECT_NEAR(counts[static_cast<std::size_t>(a)], mean, 3.0 * sigma) << "action " << a;
    }
}

TEST(Controllers, MaxPressureServesTheHeavySideInTheSimulator) {
    TrafficNetwork net = build_grid_network(1, 1);
    Simulator sim(net);
    SimState s = sim.reset(FlowSpec{}, 0);
    // load the westbound straight lane with fake queued ids
    const auto& spec = net.intersections[0];
    const Movement& w_straight = spec.movements[CompassW * 3 + TurnStraight];
    for (int k = 0; k < 5; ++k) s.lane_queues[static_cast<std::size_t>(w_straight.in_lane)].vehicle_ids.push_back(k);
    const int phase = max_pressure_action(sim.pressure_of(s, 0));
    EXPECT_EQ(phase, 2);  // E/W straight phase relieves it
}
