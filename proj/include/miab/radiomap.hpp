#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "miab/errors.hpp"
#include "miab/geometry.hpp"
#include "miab/random.hpp"

namespace miab {

/// Learnable weights of the multi-head attention radio map: per head h the
/// query, key and value projections (n x 2), and the p x N_head output mix.
struct AttentionParams {
    int p = 0;
    int n = 0;
    int heads = 0;
    std::vector<Eigen::MatrixXd> Wq, Wk, Wv;
    Eigen::MatrixXd Wphi;

    static AttentionParams zeros(int p, int n, int heads) {
        if (p < 1 || n < 1 || heads < 1) throw ContractViolation("AttentionParams: sizes must be >= 1");
        AttentionParams a;
        a.p = p;
        a.n = n;
        a.heads = heads;
        a.Wq.assign(static_cast<std::size_t>(heads), Eigen::MatrixXd::Zero(n, 2));
        a.Wk = a.Wq;
        a.Wv = a.Wq;
        a.Wphi = Eigen::MatrixXd::Zero(p, heads);
        return a;
    }

    static AttentionParams random(int p, int n, int heads, Rng& rng) {
        auto a = zeros(p, n, heads);
        std::normal_distribution<double> g(0.0, 1.0);
        const double s_in = 1.0 / std::sqrt(2.0);
        const double s_out = 1.0 / std::sqrt(static_cast<double>(heads));
        for (auto* set : {&a.Wq, &a.Wk, &a.Wv})
            for (auto& m : *set)
                for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = s_in * g(rng);
        for (Eigen::Index k = 0; k < a.Wphi.size(); ++k) a.Wphi.data()[k] = s_out * g(rng);
        return a;
    }

    void check_shapes() const {
        const auto h = static_cast<std::size_t>(heads);
        if (Wq.size() != h || Wk.size() != h || Wv.size() != h || Wphi.rows() != p || Wphi.cols() != heads)
            throw ContractViolation("AttentionParams: inconsistent head count");
        for (std::size_t k = 0; k < h; ++k)
            for (const auto* m : {&Wq[k], &Wk[k], &Wv[k]})
                if (m->rows() != n || m->cols() != 2) throw ContractViolation("AttentionParams: projection must be n x 2");
    }

    void set_zero() {
        for (auto* set : {&Wq, &Wk, &Wv})
            for (auto& m : *set) m.setZero();
        Wphi.setZero();
    }
};

/// Forward quantities kept for the backward pass. Keys and values are rank-2
/// projections of the relative positions, so they are never formed: the
/// scores are rel (Wk^T q) and the head outputs Wv (rel^T a).
struct AttentionCache {
    Vec2 self{0, 0};
    Eigen::MatrixXd rel;                  // N x 2, canonical neighbour order
    std::vector<Eigen::VectorXd> query;   // per head, n
    std::vector<Eigen::VectorXd> attention;  // per head, N (softmax row)
    Eigen::MatrixXd heads;                // N_head x n, row-concatenated head outputs

    std::size_t neighbor_count() const { return static_cast<std::size_t>(rel.rows()); }
};

struct RadioMap {
    Eigen::MatrixXd phi;  // p x n
    std::size_t neighbor_count = 0;
};

/// Attention pooling over neighbours. Neighbours are processed in a
/// canonical (lexicographic) order, which makes the result bitwise
/// independent of the order they are given in.
inline AttentionCache attend(const Vec2& self, std::span<const Vec2> neighbors, const AttentionParams& params) {
    params.check_shapes();
    std::vector<Vec2> sorted(neighbors.begin(), neighbors.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const Vec2& a, const Vec2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
    const auto N = static_cast<Eigen::Index>(sorted.size());
    const auto H = static_cast<std::size_t>(params.heads);
    AttentionCache c;
    c.self = self;
    c.rel.resize(N, 2);
    for (Eigen::Index e = 0; e < N; ++e) c.rel.row(e) = (self - sorted[static_cast<std::size_t>(e)]).transpose();
    c.heads = Eigen::MatrixXd::Zero(params.heads, params.n);
    c.query.resize(H);
    c.attention.resize(H);
    const double scale = 1.0 / std::sqrt(static_cast<double>(params.n));
    for (std::size_t h = 0; h < H; ++h) {
        c.query[h] = params.Wq[h] * self;
        if (N == 0) continue;
        const Eigen::Vector2d kq = params.Wk[h].transpose() * c.query[h];
        Eigen::VectorXd score = (c.rel * kq) * scale;
        const double mx = score.maxCoeff();
        Eigen::VectorXd a = (score.array() - mx).exp();
        a /= a.sum();
        c.attention[h] = a;
        const Eigen::Vector2d ra = c.rel.transpose() * a;
        c.heads.row(static_cast<Eigen::Index>(h)) = (params.Wv[h] * ra).transpose();
    }
    return c;
}

/// Local radio map phi = W_phi [head_1; ...; head_N_head] (p x n). An empty
/// neighbourhood yields the zero map.
inline RadioMap compute_radio_map(const Vec2& self, std::span<const Vec2> neighbors, const AttentionParams& params) {
    const auto c = attend(self, neighbors, params);
    return {params.Wphi * c.heads, c.neighbor_count()};
}

/// Accumulates into `grads` the query/key/value gradients for an upstream
/// gradient on the head stack (N_head x n).
inline void head_stack_backward(const Eigen::MatrixXd& d_heads, const AttentionCache& c, const AttentionParams& params,
                                AttentionParams& grads) {
    if (c.neighbor_count() == 0) return;
    const double scale = 1.0 / std::sqrt(static_cast<double>(params.n));
    for (std::size_t h = 0; h < static_cast<std::size_t>(params.heads); ++h) {
        const Eigen::VectorXd d_out = d_heads.row(static_cast<Eigen::Index>(h)).transpose();
        const Eigen::VectorXd& a = c.attention[h];
        const Eigen::Vector2d vd = params.Wv[h].transpose() * d_out;
        const Eigen::VectorXd d_a = c.rel * vd;
        grads.Wv[h].noalias() += d_out * (c.rel.transpose() * a).transpose();
        const Eigen::VectorXd d_score = (a.array() * (d_a.array() - a.dot(d_a))).matrix() * scale;
        const Eigen::Vector2d rd = c.rel.transpose() * d_score;
        grads.Wk[h].noalias() += c.query[h] * rd.transpose();
        const Eigen::VectorXd d_query = params.Wk[h] * rd;
        grads.Wq[h].noalias() += d_query * c.self.transpose();
    }
}

/// Reverse-mode gradients of the radio map for an upstream gradient on phi;
/// accumulates into `grads`.
inline void radio_map_gradients(const Eigen::MatrixXd& d_phi, const AttentionCache& c, const AttentionParams& params,
                                AttentionParams& grads) {
    if (d_phi.rows() != params.p || d_phi.cols() != params.n) throw ContractViolation("radio_map_gradients: upstream must be p x n");
    grads.Wphi.noalias() += d_phi * c.heads.transpose();
    const Eigen::MatrixXd d_heads = params.Wphi.transpose() * d_phi;
    head_stack_backward(d_heads, c, params, grads);
}

}  // namespace miab
