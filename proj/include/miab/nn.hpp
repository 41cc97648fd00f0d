#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "miab/errors.hpp"
#include "miab/random.hpp"

namespace miab {

/// Named parameter tensor and its gradient buffer (both column-major).
struct ParamRef {
    std::string name;
    Eigen::MatrixXd* value;
    Eigen::MatrixXd* grad;
};

struct Dense {
    Eigen::MatrixXd W, gW;  // out x in
    Eigen::MatrixXd b, gb;  // out x 1

    Dense() = default;
    Dense(int in, int out) : W(Eigen::MatrixXd::Zero(out, in)), gW(W), b(Eigen::MatrixXd::Zero(out, 1)), gb(b) {}

    /// Uniform(-s/sqrt(in), s/sqrt(in)) weights, zero bias.
    void init(Rng& rng, double scale = 1.0) {
        const double bound = scale / std::sqrt(static_cast<double>(W.cols()));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index k = 0; k < W.size(); ++k) W.data()[k] = u(rng);
        b.setZero();
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd y = W * x;
        y.colwise() += b.col(0);
        return y;
    }

    /// Accumulates parameter gradients; returns the input gradient.
    Eigen::MatrixXd backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy) {
        gW.noalias() += dy * x.transpose();
        gb.col(0) += dy.rowwise().sum();
        return W.transpose() * dy;
    }

    void push_params(std::vector<ParamRef>& out, const std::string& prefix) {
        out.push_back({prefix + ".W", &W, &gW});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

/// dL/dx of a ReLU given its output y and dL/dy.
inline Eigen::MatrixXd relu_backward(const Eigen::MatrixXd& y, const Eigen::MatrixXd& dy) {
    return (y.array() > 0.0).select(dy, 0.0);
}

/// Column-wise softmax.
inline Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        const double mx = logits.col(c).maxCoeff();
        p.col(c) = (logits.col(c).array() - mx).exp();
        p.col(c) /= p.col(c).sum();
    }
    return p;
}

inline double global_grad_norm(const std::vector<ParamRef>& params) {
    double s = 0.0;
    for (const auto& p : params) s += p.grad->squaredNorm();
    return std::sqrt(s);
}

inline void zero_grads(const std::vector<ParamRef>& params) {
    for (const auto& p : params) p.grad->setZero();
}

/// Adam with optional global gradient-norm clipping. Moment buffers follow
/// the order of the parameter list given at construction.
class Adam {
public:
    Adam() = default;
    Adam(const std::vector<ParamRef>& params, double lr, double eps = 1e-8, double beta1 = 0.9, double beta2 = 0.999)
        : lr_(lr), eps_(eps), beta1_(beta1), beta2_(beta2) {
        for (const auto& p : params) {
            m_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
            v_.push_back(m_.back());
        }
    }

    /// Returns the gradient norm before clipping.
    double step(const std::vector<ParamRef>& params, double max_grad_norm = 0.0) {
        if (params.size() != m_.size()) throw ContractViolation("Adam: parameter list changed");
        const double norm = global_grad_norm(params);
        if (!std::isfinite(norm)) throw DivergenceError("non-finite gradient norm");
        const double clip = (max_grad_norm > 0.0 && norm > max_grad_norm) ? max_grad_norm / norm : 1.0;
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        const double step_size = lr_ * std::sqrt(c2) / c1;
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto g = params[k].grad->array() * clip;
            m_[k].array() = beta1_ * m_[k].array() + (1.0 - beta1_) * g;
            v_[k].array() = beta2_ * v_[k].array() + (1.0 - beta2_) * g.square();
            params[k].value->array() -= step_size * m_[k].array() / (v_[k].array().sqrt() + eps_);
        }
        return norm;
    }

    long steps() const noexcept { return t_; }

private:
    double lr_ = 1e-3, eps_ = 1e-8, beta1_ = 0.9, beta2_ = 0.999;
    long t_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
};

}  // namespace miab
