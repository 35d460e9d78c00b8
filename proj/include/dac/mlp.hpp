#pragma once

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dac/linalg.hpp"
#include "dac/rng.hpp"

namespace dac {

/// Thrown when network parameters go non-finite during training.
struct TrainingDiverged : std::runtime_error {
    explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

struct MlpGradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

/// Dense network: affine -> ReLU -> affine -> ReLU -> ... -> affine, 64-bit
/// arithmetic throughout. Layer sizes are fixed at construction.
class Mlp {
public:
    std::vector<Matrix> weights;              // weights[l]: (dims[l] x dims[l+1])
    std::vector<std::vector<double>> biases;  // biases[l]: dims[l+1]

    Mlp() = default;

    explicit Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
        if (dims_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output dims");
        for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
            weights.emplace_back(dims_[l], dims_[l + 1]);
            biases.emplace_back(static_cast<std::size_t>(dims_[l + 1]), 0.0);
        }
    }

    /// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases.
    static Mlp glorot(std::vector<int> dims, Rng& rng) {
        Mlp net(std::move(dims));
        for (auto& w : net.weights) {
            const double bound = std::sqrt(6.0 / (w.rows + w.cols));
            for (double& v : w.data) v = (2.0 * rng.uniform01() - 1.0) * bound;
        }
        return net;
    }

    const std::vector<int>& dims() const { return dims_; }
    int input_dim() const { return dims_.front(); }
    int output_dim() const { return dims_.back(); }
    std::size_t layer_count() const { return weights.size(); }

    Matrix forward(const Matrix& batch) const {
        if (batch.cols != input_dim())
            throw std::invalid_argument("Mlp::forward: batch column count != input dim");
        Matrix a = batch;
        Matrix z;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            matmul(a, weights[l], z);
            add_row_vector(z, biases[l]);
            if (l + 1 < weights.size()) relu_inplace(z);
            std::swap(a, z);
        }
        return a;
    }

    /// Exact gradients of the scalar loss whose output gradient is
    /// `upstream`; activations are recomputed from `batch`.
    MlpGradients backward(const Matrix& batch, const Matrix& upstream) const {
        if (batch.cols != input_dim() || upstream.cols != output_dim() ||
            batch.rows != upstream.rows)
            throw std::invalid_argument("Mlp::backward: shape mismatch");

        const std::size_t layers = weights.size();
        std::vector<Matrix> pre(layers);  // pre-activations per layer
        std::vector<Matrix> act(layers);  // post-ReLU activations (all but last layer used)
        {
            const Matrix* in = &batch;
            for (std::size_t l = 0; l < layers; ++l) {
                matmul(*in, weights[l], pre[l]);
                add_row_vector(pre[l], biases[l]);
                if (l + 1 < layers) {
                    act[l] = pre[l];
                    relu_inplace(act[l]);
                    in = &act[l];
                }
            }
        }

        MlpGradients g;
        g.weights.resize(layers);
        g.biases.resize(layers);
        Matrix delta = upstream;
        Matrix next_delta;
        for (std::size_t l = layers; l-- > 0;) {
            const Matrix& input = l == 0 ? batch : act[l - 1];
            matmul_at_b(input, delta, g.weights[l]);
            column_sums(delta, g.biases[l]);
            if (l > 0) {
                matmul_a_bt(delta, weights[l], next_delta);
                relu_backward_inplace(next_delta, pre[l - 1]);
                std::swap(delta, next_delta);
            }
        }
        return g;
    }

    bool all_finite() const {
        for (const auto& w : weights)
            for (double v : w.data)
                if (!std::isfinite(v)) return false;
        for (const auto& b : biases)
            for (double v : b)
                if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_architecture(const Mlp& o) const { return dims_ == o.dims_; }

private:
    std::vector<int> dims_;
};

/// Adam accumulators shaped like the network parameters.
struct AdamState {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long long timestep = 0;
    MlpGradients m;
    MlpGradients v;

    static AdamState for_net(const Mlp& net, double lr) {
        AdamState st;
        st.learning_rate = lr;
        for (const auto& w : net.weights) {
            st.m.weights.emplace_back(w.rows, w.cols);
            st.v.weights.emplace_back(w.rows, w.cols);
        }
        for (const auto& b : net.biases) {
            st.m.biases.emplace_back(b.size(), 0.0);
            st.v.biases.emplace_back(b.size(), 0.0);
        }
        return st;
    }
};

namespace detail {
inline void adam_update_span(double* param, const double* grad, double* m, double* v,
                             std::size_t count, const AdamState& st, double m_corr,
                             double v_corr) {
    for (std::size_t i = 0; i < count; ++i) {
        m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * grad[i];
        v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / m_corr;
        const double vhat = v[i] / v_corr;
        param[i] -= st.learning_rate * mhat / (std::sqrt(vhat) + st.epsilon);
    }
}
} // namespace detail

/// Standard Adam step with bias correction.
inline void adam_step(Mlp& net, const MlpGradients& grads, AdamState& st) {
    if (grads.weights.size() != net.weights.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    st.timestep += 1;
    const double m_corr = 1.0 - std::pow(st.beta1, static_cast<double>(st.timestep));
    const double v_corr = 1.0 - std::pow(st.beta2, static_cast<double>(st.timestep));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        detail::adam_update_span(net.weights[l].data.data(), grads.weights[l].data.data(),
                                 st.m.weights[l].data.data(), st.v.weights[l].data.data(),
                                 net.weights[l].data.size(), st, m_corr, v_corr);
        detail::adam_update_span(net.biases[l].data(), grads.biases[l].data(),
                                 st.m.biases[l].data(), st.v.biases[l].data(),
                                 net.biases[l].size(), st, m_corr, v_corr);
    }
}

/// target <- (1 - tau) * target + tau * online, elementwise.
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
    if (!target.same_architecture(online))
        throw std::invalid_argument("soft_update: architecture mismatch");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau out of (0, 1]");
    const double keep = 1.0 - tau;
    for (std::size_t l = 0; l < target.weights.size(); ++l) {
        auto& tw = target.weights[l].data;
        const auto& ow = online.weights[l].data;
        for (std::size_t i = 0; i < tw.size(); ++i) tw[i] = keep * tw[i] + tau * ow[i];
        auto& tb = target.biases[l];
        const auto& ob = online.biases[l];
        for (std::size_t i = 0; i < tb.size(); ++i) tb[i] = keep * tb[i] + tau * ob[i];
    }
}

/// Checkpoint format: JSON with architecture, metadata and nested parameter arrays.
inline nlohmann::json mlp_to_json(const Mlp& net) {
    nlohmann::json j;
    j["architecture"] = net.dims();
    auto& jw = j["weights"] = nlohmann::json::array();
    for (const auto& w : net.weights) {
        nlohmann::json rows = nlohmann::json::array();
        for (int r = 0; r < w.rows; ++r)
            rows.push_back(std::vector<double>(w.row(r), w.row(r) + w.cols));
        jw.push_back(std::move(rows));
    }
    j["biases"] = net.biases;
    return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
    Mlp net(j.at("architecture").get<std::vector<int>>());
    const auto& jw = j.at("weights");
    if (jw.size() != net.weights.size()) throw std::runtime_error("mlp_from_json: layer count mismatch");
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        auto& w = net.weights[l];
        for (int r = 0; r < w.rows; ++r) {
            const auto row = jw[l].at(r).get<std::vector<double>>();
            if (static_cast<int>(row.size()) != w.cols)
                throw std::runtime_error("mlp_from_json: row width mismatch");
            std::copy(row.begin(), row.end(), w.row(r));
        }
    }
    net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    return net;
}

inline void save_mlp_checkpoint(const Mlp& net, const std::string& path,
                                const nlohmann::json& metadata) {
    nlohmann::json j = mlp_to_json(net);
    j["metadata"] = metadata;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_mlp_checkpoint: cannot open " + path);
    out << j.dump(2) << '\n';
}

inline Mlp load_mlp_checkpoint(const std::string& path, nlohmann::json* metadata = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_mlp_checkpoint: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (metadata && j.contains("metadata")) *metadata = j["metadata"];
    return mlp_from_json(j);
}

} // namespace dac
