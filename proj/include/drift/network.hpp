#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace drift {

/// Symmetric dense autoencoder. `encoder_dims` lists the encoder widths
/// including the input layer (e.g. {1376,1024,256,32}); the decoder mirrors
/// them. Hidden layers use ReLU, the bottleneck and output use identity.
struct NetworkParams {
    std::vector<int> encoder_dims;
    std::vector<Eigen::MatrixXd> weights;  // layer i: (out x in), encoder then decoder
    std::vector<Eigen::VectorXd> biases;

    int input_dim() const { return encoder_dims.front(); }
    int latent_dim() const { return encoder_dims.back(); }
    std::size_t encoder_layers() const { return encoder_dims.size() - 1; }
    std::size_t total_layers() const { return weights.size(); }

    /// Full layer width sequence: encoder dims then mirrored decoder dims.
    std::vector<int> stack_dims() const {
        std::vector<int> d = encoder_dims;
        for (std::size_t i = encoder_dims.size() - 1; i-- > 0;) d.push_back(encoder_dims[i]);
        return d;
    }

    /// Identity activation on the bottleneck layer and the output layer,
    /// ReLU everywhere else.
    bool layer_is_linear(std::size_t layer) const {
        return layer == encoder_layers() - 1 || layer == total_layers() - 1;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l)
            n += static_cast<std::size_t>(weights[l].size()) +
                 static_cast<std::size_t>(biases[l].size());
        return n;
    }
};

struct ActivationTrace {
    std::vector<Eigen::MatrixXd> pre;  // pre[l] = act[l] * W_l^T + b_l
    std::vector<Eigen::MatrixXd> act;  // act[0] = input, act[L] = reconstruction
    std::size_t bottleneck_index = 0;  // index into act

    const Eigen::MatrixXd& bottleneck() const { return act[bottleneck_index]; }
    const Eigen::MatrixXd& reconstruction() const { return act.back(); }
};

struct ParamGrads {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static ParamGrads zeros_like(const NetworkParams& net) {
        ParamGrads g;
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
            g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        }
        return g;
    }

    bool all_finite() const {
        for (const auto& w : weights)
            if (!w.allFinite()) return false;
        for (const auto& b : biases)
            if (!b.allFinite()) return false;
        return true;
    }
};

struct AdamState {
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
    std::int64_t step_count = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

inline AdamState init_adam(const NetworkParams& net, double learning_rate = 1e-3) {
    AdamState st;
    st.learning_rate = learning_rate;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        st.m_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        st.v_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        st.m_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        st.v_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return st;
}

/// Weights uniform in +-sqrt(1/fan_in), biases zero, deterministic per seed.
inline NetworkParams init_network(const std::vector<int>& encoder_dims, std::uint64_t seed) {
    if (encoder_dims.size() < 2)
        throw std::invalid_argument("init_network: need at least input and bottleneck dims");
    for (int d : encoder_dims)
        if (d < 1) throw std::invalid_argument("init_network: layer dims must be positive");

    NetworkParams net;
    net.encoder_dims = encoder_dims;
    std::mt19937_64 rng(seed);
    const std::vector<int> dims = net.stack_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l], fan_out = dims[l + 1];
        const double scale = std::sqrt(1.0 / fan_in);
        std::uniform_real_distribution<double> unif(-scale, scale);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = unif(rng);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return net;
}

inline ActivationTrace forward(const NetworkParams& net, const Eigen::MatrixXd& batch) {
    if (batch.cols() != net.input_dim())
        throw std::invalid_argument("forward: batch width " + std::to_string(batch.cols()) +
                                    " != input dim " + std::to_string(net.input_dim()));
    ActivationTrace tr;
    tr.bottleneck_index = net.encoder_layers();
    tr.act.push_back(batch);
    for (std::size_t l = 0; l < net.total_layers(); ++l) {
        Eigen::MatrixXd z = tr.act.back() * net.weights[l].transpose();
        z.rowwise() += net.biases[l].transpose();
        tr.pre.push_back(z);
        if (net.layer_is_linear(l))
            tr.act.push_back(std::move(z));
        else
            tr.act.push_back(tr.pre.back().cwiseMax(0.0));
    }
    return tr;
}

/// Mean over all entries of the squared difference, plus its gradient
/// w.r.t. the reconstruction.
inline std::pair<double, Eigen::MatrixXd> mse_loss(const Eigen::MatrixXd& reconstruction,
                                                   const Eigen::MatrixXd& target) {
    if (reconstruction.rows() != target.rows() || reconstruction.cols() != target.cols())
        throw std::invalid_argument("mse_loss: shape mismatch");
    const double count = static_cast<double>(reconstruction.size());
    Eigen::MatrixXd diff = reconstruction - target;
    const double loss = diff.squaredNorm() / count;
    Eigen::MatrixXd grad = diff * (2.0 / count);
    return {loss, std::move(grad)};
}

/// Reverse-mode gradients for all weights/biases. Either gradient input may
/// be empty (size 0); a bottleneck gradient and a reconstruction gradient
/// injected together sum through the shared encoder.
inline ParamGrads backward(const NetworkParams& net, const ActivationTrace& trace,
                           const Eigen::MatrixXd& bottleneck_grad,
                           const Eigen::MatrixXd& reconstruction_grad) {
    const Eigen::Index rows = trace.act[0].rows();
    if (bottleneck_grad.size() != 0 &&
        (bottleneck_grad.rows() != rows || bottleneck_grad.cols() != net.latent_dim()))
        throw std::invalid_argument("backward: bottleneck gradient shape mismatch");
    if (reconstruction_grad.size() != 0 &&
        (reconstruction_grad.rows() != rows || reconstruction_grad.cols() != net.input_dim()))
        throw std::invalid_argument("backward: reconstruction gradient shape mismatch");

    ParamGrads grads = ParamGrads::zeros_like(net);
    Eigen::MatrixXd g;  // gradient w.r.t. act[l+1] while processing layer l
    if (reconstruction_grad.size() != 0)
        g = reconstruction_grad;
    else
        g = Eigen::MatrixXd::Zero(rows, net.input_dim());

    for (std::size_t l = net.total_layers(); l-- > 0;) {
        if (l + 1 == trace.bottleneck_index && bottleneck_grad.size() != 0) g += bottleneck_grad;
        Eigen::MatrixXd delta;
        if (net.layer_is_linear(l))
            delta = std::move(g);
        else
            delta = (trace.pre[l].array() > 0.0).cast<double>() * g.array();
        grads.weights[l].noalias() = delta.transpose() * trace.act[l];
        grads.biases[l] = delta.colwise().sum().transpose();
        if (l > 0) g.noalias() = delta * net.weights[l];
    }
    return grads;
}

/// Standard Adam with bias correction; mutates net and state in place.
inline void adam_step(NetworkParams& net, const ParamGrads& grads, AdamState& state) {
    if (!grads.all_finite())
        throw std::runtime_error("adam_step: non-finite gradients (training diverged)");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        state.m_w[l] = state.beta1 * state.m_w[l] + (1.0 - state.beta1) * grads.weights[l];
        state.v_w[l] = state.beta2 * state.v_w[l].array() +
                       (1.0 - state.beta2) * grads.weights[l].array().square();
        net.weights[l].array() -= state.learning_rate * (state.m_w[l].array() / bc1) /
                                  ((state.v_w[l].array() / bc2).sqrt() + state.epsilon);
        state.m_b[l] = state.beta1 * state.m_b[l] + (1.0 - state.beta1) * grads.biases[l];
        state.v_b[l] = state.beta2 * state.v_b[l].array() +
                       (1.0 - state.beta2) * grads.biases[l].array().square();
        net.biases[l].array() -= state.learning_rate * (state.m_b[l].array() / bc1) /
                                 ((state.v_b[l].array() / bc2).sqrt() + state.epsilon);
    }
}

/// Compares an analytic gradient against central finite differences of an
/// arbitrary scalar objective. Checks every parameter, or a seeded random
/// subset when the network exceeds `subset_above` parameters. Relative
/// error is floored at unit scale: |a-n| / max(1, |a|, |n|).
inline double grad_check(const NetworkParams& net,
                         const std::function<double(const NetworkParams&)>& objective,
                         const ParamGrads& analytic, double step = 1e-5,
                         std::size_t subset_above = 10'000, std::size_t subset_size = 200,
                         std::uint64_t seed = 0) {
    struct Slot {
        std::size_t layer;
        bool is_bias;
        Eigen::Index idx;
    };
    std::vector<Slot> slots;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (Eigen::Index i = 0; i < net.weights[l].size(); ++i) slots.push_back({l, false, i});
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) slots.push_back({l, true, i});
    }
    if (slots.size() > subset_above) {
        std::mt19937_64 rng(seed);
        std::shuffle(slots.begin(), slots.end(), rng);
        slots.resize(std::max(subset_size, std::size_t(200)));
    }

    NetworkParams probe = net;
    double worst = 0.0;
    for (const auto& s : slots) {
        double* p = s.is_bias ? &probe.biases[s.layer](s.idx) : &probe.weights[s.layer](s.idx);
        const double orig = *p;
        *p = orig + step;
        const double up = objective(probe);
        *p = orig - step;
        const double down = objective(probe);
        *p = orig;
        const double numeric = (up - down) / (2.0 * step);
        const double analytic_v =
            s.is_bias ? analytic.biases[s.layer](s.idx) : analytic.weights[s.layer](s.idx);
        const double denom = std::max({1.0, std::abs(analytic_v), std::abs(numeric)});
        worst = std::max(worst, std::abs(analytic_v - numeric) / denom);
    }
    return worst;
}

}  // namespace drift
