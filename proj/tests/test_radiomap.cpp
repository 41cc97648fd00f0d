#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "miab/radiomap.hpp"
#include "oracles.hpp"

using namespace miab;

namespace {

oracle::PlainAttention to_plain(const AttentionParams& a) {
    oracle::PlainAttention w;
    auto conv = [](const Eigen::MatrixXd& m) {
        std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
        return out;
    };
    for (int h = 0; h < a.heads; ++h) {
        const auto k = static_cast<std::size_t>(h);
        w.Wq.push_back(conv(a.Wq[k]));
        w.Wk.push_back(conv(a.Wk[k]));
        w.Wv.push_back(conv(a.Wv[k]));
    }
    w.Wphi = conv(a.Wphi);
    return w;
}

std::vector<Vec2> random_points(Rng& rng, std::size_t n) {
    std::vector<Vec2> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back(uniform_in_disc(rng, 1.0));
    return out;
}

double loss_of(const Vec2& self, const std::vector<Vec2>& nb, const AttentionParams& a, const Eigen::MatrixXd& C) {
    return (compute_radio_map(self, nb, a).phi.array() * C.array()).sum();
}

}  // namespace

TEST(RadioMap, MatchesDirectSummation) {
    Rng rng(3);
    const auto a = AttentionParams::random(5, 6, 3, rng);
    const auto plain = to_plain(a);
    for (std::size_t N : {0u, 1u, 2u, 7u, 20u}) {
        const Vec2 self = uniform_in_disc(rng, 1.0);
        const auto nb = random_points(rng, N);
        std::vector<std::pair<double, double>> pairs;
        for (const auto& v : nb) pairs.emplace_back(v.x(), v.y());
        const auto ref = oracle::radio_map(plain, self.x(), self.y(), pairs);
        const auto phi = compute_radio_map(self, nb, a).phi;
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 6; ++c) EXPECT_NEAR(phi(r, c), ref[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)], 1e-12);
    }
}

TEST(RadioMap, ShapeAndAttentionRowsForAllNeighbourCounts) {
    Rng rng(4);
    const auto a = AttentionParams::random(16, 16, 4, rng);
    for (std::size_t N = 0; N <= 40; ++N) {
        const Vec2 self = uniform_in_disc(rng, 1.0);
        const auto nb = random_points(rng, N);
        const auto map = compute_radio_map(self, nb, a);
        ASSERT_EQ(map.phi.rows(), 16);
        ASSERT_EQ(map.phi.cols(), 16);
        EXPECT_EQ(map.neighbor_count, N);
        EXPECT_TRUE(map.phi.allFinite());
        if (N == 0) {
            EXPECT_EQ(map.phi.squaredNorm(), 0.0);
        }
        const auto cache = attend(self, nb, a);
        if (N > 0) {
            for (const auto& row : cache.attention) EXPECT_NEAR(row.sum(), 1.0, 1e-12);
        }
    }
}

TEST(RadioMap, PermutationInvarianceIsExact) {
    Rng rng(5);
    const auto a = AttentionParams::random(8, 8, 2, rng);
    for (std::size_t N = 1; N <= 40; ++N) {
        const Vec2 self = uniform_in_disc(rng, 1.0);
        auto nb = random_points(rng, N);
        const auto ref = compute_radio_map(self, nb, a).phi;
        for (int rep = 0; rep < 3; ++rep) {
            std::shuffle(nb.begin(), nb.end(), rng);
            EXPECT_TRUE(compute_radio_map(self, nb, a).phi == ref) << N;
        }
    }
}

TEST(RadioMap, ZeroWeightsGiveZeroMap) {
    const auto a = AttentionParams::zeros(3, 4, 2);
    const std::vector<Vec2> nb{{0.1, 0.2}, {0.5, -0.3}};
    EXPECT_EQ(compute_radio_map({0.3, 0.3}, nb, a).phi.squaredNorm(), 0.0);
    EXPECT_THROW(AttentionParams::zeros(0, 4, 2), ContractViolation);
    auto bad = a;
    bad.Wq[0].resize(4, 3);
    EXPECT_THROW(compute_radio_map({0, 0}, nb, bad), ContractViolation);
}

TEST(RadioMap, GradientsMatchFiniteDifferences) {
    Rng rng(6);
    auto a = AttentionParams::random(3, 4, 2, rng);
    const Vec2 self = uniform_in_disc(rng, 1.0);
    const auto nb = random_points(rng, 5);
    Eigen::MatrixXd C = Eigen::MatrixXd::Random(3, 4);
    auto grads = AttentionParams::zeros(3, 4, 2);
    radio_map_gradients(C, attend(self, nb, a), a, grads);

    const double h = 1e-6;
    auto check = [&](Eigen::MatrixXd& w, const Eigen::MatrixXd& g) {
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            const double orig = w.data()[k];
            w.data()[k] = orig + h;
            const double up = loss_of(self, nb, a, C);
            w.data()[k] = orig - h;
            const double down = loss_of(self, nb, a, C);
            w.data()[k] = orig;
            const double fd = (up - down) / (2 * h);
            const double an = g.data()[k];
            EXPECT_LE(std::fabs(fd - an), 1e-4 * std::max(std::fabs(fd), std::fabs(an)) + 1e-9) << fd << " " << an;
        }
    };
    for (std::size_t k = 0; k < 2; ++k) {
        check(a.Wq[k], grads.Wq[k]);
        check(a.Wk[k], grads.Wk[k]);
        check(a.Wv[k], grads.Wv[k]);
    }
    check(a.Wphi, grads.Wphi);
}

TEST(RadioMap, GradientShapeIsChecked) {
    const auto a = AttentionParams::zeros(3, 4, 2);
    auto g = a;
    const auto c = attend({0, 0}, std::vector<Vec2>{{1, 1}}, a);
    EXPECT_THROW(radio_map_gradients(Eigen::MatrixXd::Zero(4, 3), c, a, g), ContractViolation);
}
