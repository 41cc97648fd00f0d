#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "miab/radio.hpp"
#include "miab/scenario.hpp"
#include "oracles.hpp"

using namespace miab;

namespace {

/// Deterministic channel: zero shadowing and unit fading.
NetworkState flat_state(int n_miab, int n_ue, ScenarioConfig c = {}) {
    c.n_miab = n_miab;
    c.n_ue = n_ue;
    auto s = init_scenario(c, 1);
    s.channel.shadowing_db.setZero();
    s.channel.fading.setOnes();
    return s;
}

/// Random association respecting beam budgets and coverage, plus Eq.-10 style activation.
void random_links(NetworkState& s, Rng& rng, double p_link = 0.8) {
    std::bernoulli_distribution take(p_link);
    s.x = AssociationMatrix(s.n_stations(), s.n_ues());
    std::uniform_int_distribution<std::size_t> st(0, s.n_stations() - 1);
    for (std::size_t j = 0; j < s.n_ues(); ++j) {
        if (!take(rng)) continue;
        const std::size_t i = st(rng);
        if (static_cast<int>(s.x.load(i)) < s.beam_budget(i)) s.x(i, j) = 1;
    }
    s.backhaul.z.assign(s.n_stations(), 0);
    for (std::size_t i = 1; i < s.n_stations(); ++i) s.backhaul.z[i] = s.x.load(i) > 0;
}

double rel_err(double a, double b) {
    const double scale = std::max(std::fabs(a), std::fabs(b));
    return scale == 0.0 ? 0.0 : std::fabs(a - b) / scale;
}

}  // namespace

TEST(PathLoss, TableValues) {
    EXPECT_NEAR(path_loss_db(LinkKind::RelayUser, 1000.0), 132.89, 1e-12);
    EXPECT_NEAR(path_loss_db(LinkKind::DonorRelay, 1000.0), 132.89, 1e-12);
    EXPECT_NEAR(path_loss_db(LinkKind::DonorUser, 1000.0), 154.1, 1e-12);
    EXPECT_NEAR(path_loss_db(LinkKind::RelayUser, 100.0), 107.89, 1e-12);
}

TEST(PathLoss, DomainAndMonotonicity) {
    EXPECT_THROW(path_loss_db(LinkKind::RelayUser, 0.0), DomainError);
    EXPECT_THROW(path_loss_db(LinkKind::DonorUser, -3.0), DomainError);
    double prev = path_loss_db(LinkKind::RelayUser, 1.0);
    for (double d = 2.0; d < 400.0; d += 1.0) {
        const double v = path_loss_db(LinkKind::RelayUser, d);
        EXPECT_GT(v, prev);
        prev = v;
    }
    EXPECT_EQ(path_loss_db(LinkKind::RelayUser, 0.2), path_loss_db(LinkKind::RelayUser, 1.0));
}

TEST(PathLoss, LinkKinds) {
    EXPECT_EQ(link_kind(0, 5, 4), LinkKind::DonorUser);
    EXPECT_EQ(link_kind(0, 2, 4), LinkKind::DonorRelay);
    EXPECT_EQ(link_kind(2, 5, 4), LinkKind::RelayUser);
    EXPECT_EQ(link_kind(2, 1, 4), LinkKind::RelayUser);
}

TEST(Fading, NakagamiThreeMoments) {
    Rng rng(2024);
    const int n = 1000000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n; ++k) {
        const double v = sample_fading(3.0, rng);
        ASSERT_GT(v, 0.0);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    EXPECT_NEAR(mean, 1.0, 0.005);
    EXPECT_NEAR(var / (1.0 / 3.0), 1.0, 0.02);
}

TEST(Fading, RayleighAndDegenerateLimits) {
    Rng rng(7);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n; ++k) {
        const double v = sample_fading(1.0, rng);
        sum += v;
        sq += v * v;
    }
    EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0, 0.03);
    for (int k = 0; k < 1000; ++k) EXPECT_NEAR(sample_fading(1e6, rng), 1.0, 0.01);
    EXPECT_THROW(sample_fading(0.4, rng), DomainError);
}

TEST(Antenna, FlatTopPattern) {
    BeamConfig b;
    b.boresight = 0.3;
    EXPECT_EQ(antenna_gain(b, 0.3), 20.0);
    EXPECT_EQ(antenna_gain(b, 0.3 + std::numbers::pi), -5.0);
    EXPECT_EQ(antenna_gain(b, 0.3 + 9.9 * std::numbers::pi / 180), 20.0);
    EXPECT_EQ(antenna_gain(b, 0.3 - 10.1 * std::numbers::pi / 180), -5.0);
    b.boresight = std::numbers::pi - 0.01;
    EXPECT_EQ(antenna_gain(b, -std::numbers::pi + 0.01), 20.0);
    EXPECT_EQ(kUeAntennaGainDbi, 0.0);
}

TEST(Shadowing, DeviationsMatchReceiverClass) {
    ScenarioConfig c;
    c.n_ue = 10;
    auto s = init_scenario(c, 1);
    Rng rng(31);
    double su = 0, su2 = 0, sr = 0, sr2 = 0;
    long nu = 0, nr = 0;
    for (int rep = 0; rep < 8000; ++rep) {
        draw_shadowing(s, rng);
        for (Eigen::Index u = 0; u < 4; ++u)
            for (Eigen::Index w = 0; w < s.channel.shadowing_db.cols(); ++w) {
                const double v = s.channel.shadowing_db(u, w);
                if (w >= 4) {
                    su += v;
                    su2 += v * v;
                    ++nu;
                } else {
                    sr += v;
                    sr2 += v * v;
                    ++nr;
                }
            }
    }
    const double std_u = std::sqrt(su2 / nu - (su / nu) * (su / nu));
    const double std_r = std::sqrt(sr2 / nr - (sr / nr) * (sr / nr));
    EXPECT_NEAR(std_u / 9.0, 1.0, 0.02);
    EXPECT_NEAR(std_r / 3.0, 1.0, 0.02);
}

TEST(Interference, EmptyNetworkIsZero) {
    auto s = flat_state(3, 4);
    const RadioContext ctx(s);
    AssociationMatrix x(4, 4);
    x(1, 0) = 1;
    std::vector<std::uint8_t> z{0, 1, 0, 0};
    EXPECT_EQ(ctx.access_interference(x, {0, 0, 0, 0}, 1, 0), 0.0);
    AssociationMatrix none(4, 4);
    EXPECT_EQ(ctx.backhaul_interference(none, z, 1), 0.0);
}

TEST(Interference, SingleInterCellTerm) {
    auto s = flat_state(1, 2);
    s.miabs[0].position = {30, 0};
    s.ues[0].position = {0, 40};
    s.ues[1].position = {30, -20};
    const RadioContext ctx(s);
    AssociationMatrix x(2, 2);
    x(0, 0) = 1;
    x(1, 1) = 1;
    // Relay beam toward UE1 points along -y; UE0 lies far off that boresight.
    const double d = std::hypot(30.0, 40.0) / 1000.0;
    const double gh = std::pow(10.0, -(132.89 + 25.0 * std::log10(d)) / 10.0);
    const double expected = 1.0 * std::pow(10.0, 0.3) * std::pow(10.0, -0.5) * gh * 1.0;
    const double got = ctx.access_interference(x, {0, 0}, 0, 0);
    EXPECT_LT(rel_err(got, expected), 1e-12);
}

TEST(Interference, SelfInterferenceTerm) {
    auto s = flat_state(1, 2);
    s.miabs[0].position = {40, 0};
    s.ues[0].position = {45, 5};
    s.ues[1].position = {35, -5};
    const RadioContext ctx(s);
    AssociationMatrix x(2, 2);
    x(1, 0) = x(1, 1) = 1;
    const double expected = (1.0 / 3.0) * 2.0 * std::pow(10.0, 3.3) * 1e-3 * 1e-10;
    EXPECT_LT(rel_err(ctx.backhaul_interference(x, {0, 1}, 1), expected), 1e-12);
}

TEST(Interference, MatchesBruteForceOracle) {
    ScenarioConfig c;
    Rng rng(77);
    double worst = 0.0;
    for (int snap = 0; snap < 100; ++snap) {
        auto s = init_scenario(c, 1000 + static_cast<std::uint64_t>(snap));
        random_links(s, rng);
        const RadioContext ctx(s);
        for (std::size_t i = 0; i < s.n_stations(); ++i)
            for (std::size_t j = 0; j < s.n_ues(); ++j) {
                const double a = ctx.access_interference(s.x, s.backhaul.z, i, j);
                const double b = oracle::access_interference(s, s.x, s.backhaul.z, i, j);
                worst = std::max(worst, rel_err(a, b));
            }
        for (std::size_t i = 1; i < s.n_stations(); ++i) {
            const double a = ctx.backhaul_interference(s.x, s.backhaul.z, i);
            const double b = oracle::backhaul_interference(s, s.x, s.backhaul.z, i);
            worst = std::max(worst, rel_err(a, b));
        }
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(Interference, PerTermBreakdownSumsToTotal) {
    ScenarioConfig c;
    auto s = init_scenario(c, 5);
    Rng rng(5);
    random_links(s, rng, 1.0);
    const RadioContext ctx(s);
    std::vector<InterferenceTerm> terms;
    const double total = ctx.backhaul_interference(s.x, s.backhaul.z, 2, &terms);
    double sum = 0.0;
    for (const auto& t : terms) {
        EXPECT_EQ(t.link, SinrLink::Backhaul);
        EXPECT_GE(t.watts, 0.0);
        sum += t.watts;
    }
    EXPECT_LT(rel_err(sum, total), 1e-12);
}

TEST(Sinr, AccessFormulaChain) {
    auto s = flat_state(1, 1);
    s.miabs[0].position = {0, 50};
    s.ues[0].position = {0, 0};
    const RadioContext ctx(s);
    AssociationMatrix x(2, 1);
    x(1, 0) = 1;
    const double signal_dbm = 33.0 + 20.0 - (132.89 + 25.0 * std::log10(0.05));
    const double noise_dbm = -174.0 + 10.0 * std::log10(1e8);
    const double expected = std::pow(10.0, (signal_dbm - noise_dbm) / 10.0);
    EXPECT_LT(rel_err(ctx.access_sinr(x, {0, 0}, 1, 0), expected), 1e-12);
}

TEST(Sinr, UnitSinrGivesBandwidthCapacity) {
    ScenarioConfig c;
    const double d = 20.0;
    const double noise_dbm = -174.0 + 10.0 * std::log10(1e8);
    c.tx_power_access = noise_dbm - 20.0 + 132.89 + 25.0 * std::log10(d / 1000.0);
    auto s = flat_state(1, 1, c);
    s.miabs[0].position = {d, 0};
    s.ues[0].position = {0, 0};
    const RadioContext ctx(s);
    AssociationMatrix x(2, 1);
    x(1, 0) = 1;
    EXPECT_NEAR(ctx.access_sinr(x, {0, 0}, 1, 0), 1.0, 1e-12);
    EXPECT_NEAR(ctx.access_capacity(x, {0, 0}, 1, 0) / 1e8, 1.0, 1e-12);
    AssociationMatrix empty(2, 1);
    EXPECT_EQ(ctx.access_capacity(empty, {0, 0}, 1, 0), 0.0);
}

TEST(Sinr, BackhaulSinrThreeGivesTwoBitsPerHz) {
    ScenarioConfig c;
    const double d = 60.0;
    const double noise_dbm = -174.0 + 10.0 * std::log10(3e8);
    c.tx_power_backhaul = noise_dbm + 10.0 * std::log10(3.0) - 40.0 + 132.89 + 25.0 * std::log10(d / 1000.0);
    auto s = flat_state(1, 1, c);
    s.miabs[0].position = {0, d};
    const RadioContext ctx(s);
    AssociationMatrix x(2, 1);
    EXPECT_NEAR(ctx.backhaul_sinr(x, {0, 1}, 1), 3.0, 1e-11);
    EXPECT_NEAR(ctx.backhaul_capacity(x, {0, 1}, 1) / 6e8, 1.0, 1e-12);
    EXPECT_EQ(ctx.backhaul_capacity(x, {0, 0}, 1), 0.0);
}

TEST(Sinr, DoublingInterferenceHalvesSinrWithoutNoise) {
    ScenarioConfig c;
    c.noise_psd_N0 = -400.0;
    auto s = flat_state(1, 2, c);
    s.miabs[0].position = {30, 0};
    s.ues[0].position = {0, 40};
    s.ues[1].position = {30, -20};
    AssociationMatrix x(2, 2);
    x(0, 0) = 1;
    x(1, 1) = 1;
    const double base = RadioContext(s).access_sinr(x, {0, 0}, 0, 0);
    s.channel.fading(1, static_cast<Eigen::Index>(s.ue_node(0))) = 2.0;
    const double doubled = RadioContext(s).access_sinr(x, {0, 0}, 0, 0);
    EXPECT_LT(rel_err(doubled, base / 2.0), 1e-9);
}

TEST(Sinr, AddingInterfererNeverIncreasesAnySinr) {
    ScenarioConfig c;
    Rng rng(404);
    for (int snap = 0; snap < 50; ++snap) {
        auto s = init_scenario(c, 500 + static_cast<std::uint64_t>(snap));
        random_links(s, rng, 0.5);
        const RadioContext ctx(s);
        for (std::size_t j = 0; j < s.n_ues(); ++j) {
            if (s.x.station_of(j) >= 0) continue;
            for (std::size_t i = 0; i < s.n_stations(); ++i) {
                if (static_cast<int>(s.x.load(i)) >= s.beam_budget(i)) continue;
                AssociationMatrix x2 = s.x;
                x2(i, j) = 1;
                auto z2 = s.backhaul.z;
                if (i != kDonor) z2[i] = 1;
                for (std::size_t a = 0; a < s.n_stations(); ++a)
                    for (std::size_t b = 0; b < s.n_ues(); ++b)
                        if (s.x(a, b)) {
                            ASSERT_LE(ctx.access_sinr(x2, z2, a, b), ctx.access_sinr(s.x, s.backhaul.z, a, b));
                        }
                for (std::size_t r = 1; r < s.n_stations(); ++r)
                    if (s.backhaul.z[r]) {
                        ASSERT_LE(ctx.backhaul_sinr(x2, z2, r), ctx.backhaul_sinr(s.x, s.backhaul.z, r));
                    }
                break;
            }
            break;
        }
    }
}

TEST(RadioContext, RejectsMismatchedDraws) {
    auto s = flat_state(2, 3);
    s.channel.fading.resize(3, 2);
    EXPECT_THROW(RadioContext{s}, ContractViolation);
}
