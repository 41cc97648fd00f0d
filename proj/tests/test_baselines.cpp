#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "miab/baselines.hpp"
#include "miab/scenario.hpp"

using namespace miab;

namespace {

NetworkState flat_state(int n_miab, int n_ue, ScenarioConfig c = {}) {
    c.n_miab = n_miab;
    c.n_ue = n_ue;
    auto s = init_scenario(c, 1);
    s.channel.shadowing_db.setZero();
    s.channel.fading.setOnes();
    return s;
}

double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<std::size_t>& a) {
    double c = 0.0;
    for (std::size_t r = 0; r < a.size(); ++r) c += cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a[r]));
    return c;
}

bool is_permutation_of_n(std::vector<std::size_t> a) {
    std::sort(a.begin(), a.end());
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] != k) return false;
    return true;
}

}  // namespace

TEST(KMeans, SinglePointCluster) {
    Rng rng(1);
    const std::vector<Vec2> pts(6, Vec2(12.5, -3.0));
    const auto r = kmeans(pts, 1, rng);
    EXPECT_NEAR((r.centroids[0] - Vec2(12.5, -3.0)).norm(), 0.0, 1e-12);
    EXPECT_EQ(r.inertia, 0.0);
    EXPECT_THROW(kmeans(pts, 0, rng), ContractViolation);
    EXPECT_THROW(kmeans(pts, 7, rng), ContractViolation);
}

TEST(KMeans, SeparatedBlobsGiveIdentityAssignment) {
    Rng rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Vec2> ues;
    for (int k = 0; k < 20; ++k) ues.emplace_back(-60 + n(rng), n(rng));
    for (int k = 0; k < 20; ++k) ues.emplace_back(60 + n(rng), n(rng));
    const std::vector<Vec2> relays{{-50, 0}, {50, 0}};
    const auto plan = kmeans_positioning(ues, relays, 2, false, 5.0, rng);
    EXPECT_NE(plan.assignment[0], plan.assignment[1]);
    EXPECT_LT(plan.target_positions[0].x(), -55);
    EXPECT_GT(plan.target_positions[1].x(), 55);
    EXPECT_EQ(plan.next_positions[0], plan.target_positions[0]);
}

TEST(KMeans, RespectStepLimitsMotion) {
    Rng rng(3);
    std::vector<Vec2> ues;
    for (int k = 0; k < 30; ++k) ues.push_back(uniform_in_disc(rng, 100.0));
    const std::vector<Vec2> relays{{0, 0}, {10, 10}, {-20, 5}};
    const auto plan = kmeans_positioning(ues, relays, 3, true, 5.0, rng);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_LE((plan.next_positions[k] - relays[k]).norm(), 5.0 + 1e-12);
    const auto empty = kmeans_positioning({}, relays, 3, true, 5.0, rng);
    EXPECT_EQ(empty.target_positions, relays);
}

TEST(KMeans, FewerUsersThanRelaysKeepsSpareRelays) {
    Rng rng(4);
    const std::vector<Vec2> ues{{30, 30}};
    const std::vector<Vec2> relays{{0, 0}, {25, 25}, {-20, 5}};
    const auto plan = kmeans_positioning(ues, relays, 3, false, 5.0, rng);
    EXPECT_EQ(plan.target_positions[1], Vec2(30, 30));
    EXPECT_EQ(plan.target_positions[0], relays[0]);
    EXPECT_EQ(plan.target_positions[2], relays[2]);
}

TEST(Assignment, ExhaustiveAndHungarianAgree) {
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int n = 1; n <= 7; ++n)
        for (int rep = 0; rep < 20; ++rep) {
            Eigen::MatrixXd cost(n, n);
            for (Eigen::Index k = 0; k < cost.size(); ++k) cost.data()[k] = u(rng);
            const auto a = assign_exhaustive(cost), b = assign_hungarian(cost);
            EXPECT_TRUE(is_permutation_of_n(a));
            EXPECT_TRUE(is_permutation_of_n(b));
            EXPECT_NEAR(assignment_cost(cost, a), assignment_cost(cost, b), 1e-9);
        }
}

TEST(Assignment, ThreeRelayPlanIsExhaustiveMinimum) {
    Rng rng(6);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<Vec2> ues, relays;
        for (int k = 0; k < 25; ++k) ues.push_back(uniform_in_disc(rng, 100.0));
        for (int k = 0; k < 3; ++k) relays.push_back(uniform_in_disc(rng, 100.0));
        const auto plan = kmeans_positioning(ues, relays, 3, false, 5.0, rng);
        std::vector<std::size_t> perm{0, 1, 2};
        double best = 1e300;
        do {
            double c = 0.0;
            for (std::size_t k = 0; k < 3; ++k) c += (relays[k] - plan.centroids[perm[k]]).norm();
            best = std::min(best, c);
        } while (std::next_permutation(perm.begin(), perm.end()));
        double got = 0.0;
        for (std::size_t k = 0; k < 3; ++k) got += (relays[k] - plan.centroids[plan.assignment[k]]).norm();
        EXPECT_NEAR(got, best, 1e-9);
    }
}

TEST(MaxSnr, PicksStrongestStation) {
    auto s = flat_state(1, 1);
    s.miabs[0].position = {40, 0};
    s.ues[0].position = {35, 0};
    const auto x = max_snr_association(s);
    EXPECT_EQ(x(1, 0), 1);
    EXPECT_EQ(x.served(), 1u);
}

TEST(MaxSnr, FallsBackToSecondChoiceAndMatchesBruteForce) {
    ScenarioConfig c;
    c.beams_miab_L_i = 1;
    c.beams_donor_access_L0 = 1;
    auto s = flat_state(1, 2, c);
    s.miabs[0].position = {40, 0};
    s.ues[0].position = {42, 0};
    s.ues[1].position = {30, 0};
    const RadioContext ctx(s);
    const auto x = max_snr_association(s, ctx);
    EXPECT_EQ(x.served(), 2u);
    EXPECT_EQ(x(1, 0), 1);
    EXPECT_EQ(x(0, 1), 1);
    double best = -1.0;
    AssociationMatrix arg;
    for (int a = -1; a < 2; ++a)
        for (int b = -1; b < 2; ++b) {
            if (a >= 0 && a == b) continue;
            AssociationMatrix y(2, 2);
            double v = 0.0;
            if (a >= 0) {
                y(static_cast<std::size_t>(a), 0) = 1;
                v += ctx.access_snr(static_cast<std::size_t>(a), 0);
            }
            if (b >= 0) {
                y(static_cast<std::size_t>(b), 1) = 1;
                v += ctx.access_snr(static_cast<std::size_t>(b), 1);
            }
            if (v > best) {
                best = v;
                arg = y;
            }
        }
    EXPECT_EQ(arg, x);
}

TEST(MaxSnr, NoStationInRange) {
    ScenarioConfig c;
    c.coverage_donor = 10;
    c.coverage_node = 10;
    auto s = flat_state(1, 2, c);
    s.miabs[0].position = {-80, 0};
    s.ues[0].position = {60, 0};
    s.ues[1].position = {0, 70};
    EXPECT_EQ(max_snr_association(s).served(), 0u);
}

TEST(MaxSnr, RandomSnapshotsSatisfyBeamConstraints) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        ScenarioConfig c;
        c.n_ue = 60;
        auto s = init_scenario(c, seed);
        const auto x = max_snr_association(s);
        BackhaulAllocation b(s.n_stations(), s.n_ues());
        EXPECT_TRUE(check_constraints(s, x, b).empty());
        for (std::size_t j = 0; j < s.n_ues(); ++j)
            if (x.station_of(j) >= 0) {
                EXPECT_TRUE(s.in_coverage(static_cast<std::size_t>(x.station_of(j)), j));
            }
    }
}

TEST(Benchmarks, EqualWhenDemandFits) {
    ScenarioConfig c;
    c.service_rates = {1e6};
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto a = init_scenario(c, seed), b = a;
        Rng ra(seed), rb(seed);
        const auto ra_res = run_benchmark(a, BenchVariant::BenchA, ra);
        const auto rb_res = run_benchmark(b, BenchVariant::BenchB, rb);
        EXPECT_NEAR(ra_res.report.sum_rate, rb_res.report.sum_rate, 1e-6);
    }
}

TEST(Benchmarks, OptimalSplitBeatsMciOnConstructedPair) {
    ScenarioConfig c;
    c.service_rates = {1.5e9};
    auto s = flat_state(1, 2, c);
    s.miabs[0].position = {0, 60};
    s.ues[0].position = {0, 59};   // strong link, low demand
    s.ues[1].position = {20, 60};  // weak link, high demand
    s.ues[0].demand = 1e7;
    s.ues[1].demand = 1.5e9;
    s.config.coverage_donor = 1;
    s.config.tx_power_backhaul = 0.0;
    auto b = s;
    const auto ra = benchmark_allocation(s, BenchVariant::BenchA);
    const auto rb = benchmark_allocation(b, BenchVariant::BenchB);
    ASSERT_EQ(ra.x.load(1), 2u);
    EXPECT_GT(rb.report.sum_rate_miab, ra.report.sum_rate_miab);
}

TEST(Benchmarks, EmptyNetworkIsClean) {
    ScenarioConfig c;
    c.n_ue = 0;
    auto s = init_scenario(c, 3);
    Rng rng(1);
    const auto r = run_benchmark(s, BenchVariant::BenchB, rng);
    EXPECT_EQ(r.report.sum_rate, 0.0);
    EXPECT_TRUE(check_constraints(s).empty());
}

TEST(Benchmarks, BenchBNeverBelowBenchAPerSnapshot) {
    ScenarioConfig c;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        auto a = init_scenario(c, seed), b = a;
        Rng ra(seed), rb(seed);
        const auto prev = a.miab_positions();
        const auto x = run_benchmark(a, BenchVariant::BenchA, ra);
        const auto y = run_benchmark(b, BenchVariant::BenchB, rb);
        ASSERT_EQ(x.x, y.x);
        EXPECT_GE(y.report.sum_rate_miab, x.report.sum_rate_miab * (1 - 1e-12));
        EXPECT_TRUE(check_constraints(a, &prev).empty());
        EXPECT_TRUE(check_constraints(b, &prev).empty());
    }
}
