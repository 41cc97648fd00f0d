#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "miab/errors.hpp"
#include "miab/geometry.hpp"
#include "miab/nn.hpp"
#include "miab/radiomap.hpp"
#include "miab/random.hpp"

namespace miab {

struct PolicyShape {
    int obs_dim = 2;
    int n_actions = 5;
    int p = 128;      // encoder width and radio-map rows
    int n = 128;      // radio-map columns
    int heads = 8;

    bool operator==(const PolicyShape&) const = default;
};

/// Actor-critic network shared by both levels:
///   obs  -> Dense(p) ReLU --------------------.
///   map  -> attention -> phi (p x n) -> flatten -> Dense(p) ReLU -> concat (2p)
///   actor:  Dense(2p) ReLU -> Dense(|A|) -> softmax
///   critic: Dense(2p) ReLU -> Dense(1)
///
/// The radio map is phi = W_phi * Hs with Hs the N_head x n head stack, so the
/// map encoder acting on vec(phi) equals a fused matrix F acting on vec(Hs),
/// F_b = E_b W_phi per map column b. Forward and backward use F and never
/// materialise phi. Call refresh() after changing parameters directly.
class PolicyNet {
public:
    struct Input {
        Eigen::VectorXd obs;
        Vec2 self{0, 0};
        std::vector<Vec2> neighbors;
    };

    struct Forward {
        std::vector<AttentionCache> attention;
        Eigen::MatrixXd obs_in;      // obs_dim x B
        Eigen::MatrixXd heads_flat;  // (N_head n) x B
        Eigen::MatrixXd h_obs, h_map, joint, actor_hidden, critic_hidden;
        Eigen::MatrixXd logits, probs;  // |A| x B
        Eigen::VectorXd values;         // B

        Eigen::Index batch() const { return logits.cols(); }
    };

    PolicyNet() = default;

    explicit PolicyNet(const PolicyShape& shape)
        : shape_(shape),
          attn_(AttentionParams::zeros(shape.p, shape.n, shape.heads)),
          attn_grad_(attn_),
          obs_enc_(shape.obs_dim, shape.p),
          map_enc_(shape.p * shape.n, shape.p),
          actor_hidden_(2 * shape.p, 2 * shape.p),
          actor_out_(2 * shape.p, shape.n_actions),
          critic_hidden_(2 * shape.p, 2 * shape.p),
          critic_out_(2 * shape.p, 1) {
        if (shape.obs_dim < 1 || shape.n_actions < 1) throw ContractViolation("PolicyShape: empty observation or action space");
        refresh();
    }

    PolicyNet(const PolicyShape& shape, Rng& rng) : PolicyNet(shape) {
        attn_ = AttentionParams::random(shape.p, shape.n, shape.heads, rng);
        obs_enc_.init(rng);
        map_enc_.init(rng);
        actor_hidden_.init(rng);
        actor_out_.init(rng, 0.01);
        critic_hidden_.init(rng);
        critic_out_.init(rng);
        refresh();
    }

    const PolicyShape& shape() const noexcept { return shape_; }
    const AttentionParams& attention() const noexcept { return attn_; }
    AttentionParams& attention() noexcept { return attn_; }

    /// Recomputes the fused map-encoder weight from E and W_phi.
    void refresh() {
        const int p = shape_.p, n = shape_.n, h = shape_.heads;
        fused_.resize(p, static_cast<Eigen::Index>(h) * n);
        for (int b = 0; b < n; ++b)
            fused_.middleCols(static_cast<Eigen::Index>(b) * h, h).noalias() =
                map_enc_.W.middleCols(static_cast<Eigen::Index>(b) * p, p) * attn_.Wphi;
    }

    /// Every tensor with its gradient, in a fixed order.
    std::vector<ParamRef> params() {
        std::vector<ParamRef> out;
        for (int h = 0; h < shape_.heads; ++h) {
            const auto k = static_cast<std::size_t>(h);
            out.push_back({"attn.Wq." + std::to_string(h), &attn_.Wq[k], &attn_grad_.Wq[k]});
            out.push_back({"attn.Wk." + std::to_string(h), &attn_.Wk[k], &attn_grad_.Wk[k]});
            out.push_back({"attn.Wv." + std::to_string(h), &attn_.Wv[k], &attn_grad_.Wv[k]});
        }
        out.push_back({"attn.Wphi", &attn_.Wphi, &attn_grad_.Wphi});
        obs_enc_.push_params(out, "obs_enc");
        map_enc_.push_params(out, "map_enc");
        actor_hidden_.push_params(out, "actor.hidden");
        actor_out_.push_params(out, "actor.out");
        critic_hidden_.push_params(out, "critic.hidden");
        critic_out_.push_params(out, "critic.out");
        return out;
    }

    void zero_grad() { zero_grads(params()); }

    void set_zero() {
        for (auto& p : params()) p.value->setZero();
        refresh();
    }

    Forward forward(std::span<const Input> batch) const {
        const auto B = static_cast<Eigen::Index>(batch.size());
        const int hn = shape_.heads * shape_.n;
        Forward f;
        f.obs_in.resize(shape_.obs_dim, B);
        f.heads_flat.resize(hn, B);
        f.attention.reserve(batch.size());
        for (Eigen::Index s = 0; s < B; ++s) {
            const auto& in = batch[static_cast<std::size_t>(s)];
            if (in.obs.size() != shape_.obs_dim) throw ContractViolation("PolicyNet: observation size mismatch");
            f.obs_in.col(s) = in.obs;
            f.attention.push_back(attend(in.self, in.neighbors, attn_));
            f.heads_flat.col(s) = Eigen::Map<const Eigen::VectorXd>(f.attention.back().heads.data(), hn);
        }
        f.h_obs = relu(obs_enc_.forward(f.obs_in));
        Eigen::MatrixXd pre_map = fused_ * f.heads_flat;
        pre_map.colwise() += map_enc_.b.col(0);
        f.h_map = relu(pre_map);
        f.joint.resize(2 * shape_.p, B);
        f.joint.topRows(shape_.p) = f.h_obs;
        f.joint.bottomRows(shape_.p) = f.h_map;
        f.actor_hidden = relu(actor_hidden_.forward(f.joint));
        f.logits = actor_out_.forward(f.actor_hidden);
        f.critic_hidden = relu(critic_hidden_.forward(f.joint));
        f.values = critic_out_.forward(f.critic_hidden).row(0).transpose();
        if (!f.logits.allFinite() || !f.values.allFinite()) throw DivergenceError("PolicyNet: non-finite activations");
        f.probs = softmax_columns(f.logits);
        return f;
    }

    Forward forward(const Input& in) const { return forward(std::span<const Input>(&in, 1)); }

    /// Accumulates parameter gradients for upstream gradients on the logits
    /// (|A| x B) and values (B).
    void backward(const Forward& f, const Eigen::MatrixXd& d_logits, const Eigen::VectorXd& d_values) {
        const int p = shape_.p, n = shape_.n, h = shape_.heads;
        Eigen::MatrixXd d_joint = relu_backward(f.actor_hidden, actor_out_.backward(f.actor_hidden, d_logits));
        d_joint = actor_hidden_.backward(f.joint, d_joint);
        const Eigen::MatrixXd d_vrow = d_values.transpose();
        const Eigen::MatrixXd d_ch = relu_backward(f.critic_hidden, critic_out_.backward(f.critic_hidden, d_vrow));
        d_joint += critic_hidden_.backward(f.joint, d_ch);

        obs_enc_.backward(f.obs_in, relu_backward(f.h_obs, d_joint.topRows(p)));

        const Eigen::MatrixXd g = relu_backward(f.h_map, d_joint.bottomRows(p));  // p x B
        map_enc_.gb.col(0) += g.rowwise().sum();
        const Eigen::MatrixXd acc = g * f.heads_flat.transpose();                 // p x (h n)
        for (int b = 0; b < n; ++b) {
            const auto A_b = acc.middleCols(static_cast<Eigen::Index>(b) * h, h);
            map_enc_.gW.middleCols(static_cast<Eigen::Index>(b) * p, p).noalias() += A_b * attn_.Wphi.transpose();
            attn_grad_.Wphi.noalias() += map_enc_.W.middleCols(static_cast<Eigen::Index>(b) * p, p).transpose() * A_b;
        }
        const Eigen::MatrixXd d_heads_flat = fused_.transpose() * g;              // (h n) x B
        for (Eigen::Index s = 0; s < f.batch(); ++s) {
            const Eigen::Map<const Eigen::MatrixXd> d_heads(d_heads_flat.col(s).data(), h, n);
            head_stack_backward(d_heads, f.attention[static_cast<std::size_t>(s)], attn_, attn_grad_);
        }
    }

private:
    PolicyShape shape_;
    AttentionParams attn_, attn_grad_;
    Dense obs_enc_, map_enc_, actor_hidden_, actor_out_, critic_hidden_, critic_out_;
    Eigen::MatrixXd fused_;
};

inline int argmax_column(const Eigen::MatrixXd& probs, Eigen::Index col) {
    Eigen::Index best = 0;
    probs.col(col).maxCoeff(&best);
    return static_cast<int>(best);
}

inline int sample_column(const Eigen::MatrixXd& probs, Eigen::Index col, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double r = u(rng);
    const auto A = probs.rows();
    for (Eigen::Index a = 0; a < A; ++a) {
        r -= probs(a, col);
        if (r <= 0.0) return static_cast<int>(a);
    }
    return static_cast<int>(A - 1);
}

}  // namespace miab
