// Copyright 2026 The qpie-sim Authors.

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
/**
 * @file
 * Hybrid classical-quantum model: a five-layer SeLU dense frontend feeding
 * parallel quantum nodes, a linear softmax head, transfer-learning freeze
 * masks, the Adam training loop with step decay, and the VQE loop.
 *
 * The frontend output is squashed through a sigmoid before entering the
 * embedded slots, which map [0, 1] affinely onto their angle ranges. That
 * keeps the quantum embedding differentiable end to end.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpie/circuit.hpp"
#include "qpie/data.hpp"
#include "qpie/engine.hpp"
#include "qpie/grad.hpp"
#include "qpie/rng.hpp"

namespace qpie {

// --- dense frontend --------------------------------------------------------

inline constexpr int kDenseLayers = 5;
inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

inline double selu(double x) {
    return x > 0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

inline double selu_prime(double x) {
    return x > 0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

/// Five fully connected SeLU layers with dropout after layers 2 and 5.
struct DenseNet {
    std::vector<Eigen::MatrixXd> weights; // out x in, per layer
    std::vector<Eigen::VectorXd> biases;
    std::array<bool, kDenseLayers> frozen = {false, false, false, false, false};
    double dropout_rate = 0.2;

    static DenseNet init(const std::array<int, kDenseLayers + 1> &widths,
                         Rng &rng, double dropout_rate = 0.2) {
        DenseNet net;
        net.dropout_rate = dropout_rate;
        for (int l = 0; l < kDenseLayers; ++l) {
            const int fan_in = widths[l];
            const int fan_out = widths[l + 1];
            const double scale = std::sqrt(2.0 / (fan_in + fan_out));
            Eigen::MatrixXd w(fan_out, fan_in);
            for (int r = 0; r < fan_out; ++r) {
                for (int c = 0; c < fan_in; ++c) {
                    w(r, c) = scale * rng.normal();
                }
            }
            net.weights.push_back(std::move(w));
            net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
        }
        return net;
    }

    int input_width() const { return static_cast<int>(weights.front().cols()); }
    int output_width() const { return static_cast<int>(weights.back().rows()); }

    static bool has_dropout_after(int layer) {
        return layer == 1 || layer == kDenseLayers - 1;
    }
};

struct DenseCache {
    std::vector<Eigen::VectorXd> inputs;          // a_{l-1} per layer
    std::vector<Eigen::VectorXd> preactivations;  // z_l per layer
    std::vector<Eigen::VectorXd> dropout_mask;    // empty when not applied
};

inline Eigen::VectorXd dense_forward(const DenseNet &net,
                                     const Eigen::VectorXd &x, bool training,
                                     Rng *rng, DenseCache *cache) {
    if (x.size() != net.input_width()) {
        throw std::invalid_argument("frontend input width mismatch");
    }
    Eigen::VectorXd a = x;
    for (int l = 0; l < kDenseLayers; ++l) {
        if (cache) {
            cache->inputs.push_back(a);
        }
        Eigen::VectorXd z = net.weights[l] * a + net.biases[l];
        if (cache) {
            cache->preactivations.push_back(z);
        }
        a = z.unaryExpr([](double v) { return selu(v); });
        Eigen::VectorXd mask;
        if (DenseNet::has_dropout_after(l) && training &&
            net.dropout_rate > 0) {
            mask.resize(a.size());
            const double keep = 1.0 - net.dropout_rate;
            for (int i = 0; i < a.size(); ++i) {
                mask[i] = (rng->uniform() < keep) ? 1.0 / keep : 0.0;
            }
            a = a.cwiseProduct(mask);
        }
        if (cache) {
            cache->dropout_mask.push_back(std::move(mask));
        }
    }
    return a;
}

struct DenseGrads {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    explicit DenseGrads(const DenseNet &net) {
        for (int l = 0; l < kDenseLayers; ++l) {
            weights.emplace_back(
                Eigen::MatrixXd::Zero(net.weights[l].rows(),
                                      net.weights[l].cols()));
            biases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        }
    }

    void scale(double s) {
        for (auto &w : weights) {
            w *= s;
        }
        for (auto &b : biases) {
            b *= s;
        }
    }
};

/// Accumulate gradients for one sample; returns dL/dx.
inline Eigen::VectorXd dense_backward(const DenseNet &net,
                                      const DenseCache &cache,
                                      Eigen::VectorXd dout,
                                      DenseGrads &grads) {
    for (int l = kDenseLayers - 1; l >= 0; --l) {
        if (cache.dropout_mask[l].size() > 0) {
            dout = dout.cwiseProduct(cache.dropout_mask[l]);
        }
        const Eigen::VectorXd dz = dout.cwiseProduct(
            cache.preactivations[l].unaryExpr(
                [](double v) { return selu_prime(v); }));
        grads.weights[l] += dz * cache.inputs[l].transpose();
        grads.biases[l] += dz;
        dout = net.weights[l].transpose() * dz;
    }
    return dout;
}

// --- optimizer -------------------------------------------------------------

/// Adam with per-parameter-group state. Groups must be registered in the
/// same order on every step; frozen groups are skipped entirely so their
/// entries stay bit-identical.
class AdamOpt {
  public:
    AdamOpt(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void begin_step(double lr) {
        ++t_;
        lr_ = lr;
        idx_ = 0;
    }

    void update(Eigen::Ref<Eigen::MatrixXd> param,
                const Eigen::MatrixXd &grad, bool frozen = false) {
        if (idx_ >= m_.size()) {
            m_.emplace_back(Eigen::MatrixXd::Zero(param.rows(), param.cols()));
            v_.emplace_back(Eigen::MatrixXd::Zero(param.rows(), param.cols()));
        }
        Eigen::MatrixXd &m = m_[idx_];
        Eigen::MatrixXd &v = v_[idx_];
        ++idx_;
        if (frozen) {
            return;
        }
        m = beta1_ * m + (1.0 - beta1_) * grad;
        v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        param -= (lr_ / bc1) * m.cwiseQuotient(
                     ((v / bc2).cwiseSqrt().array() + eps_).matrix());
    }

  private:
    double beta1_, beta2_, eps_;
    double lr_ = 0.0;
    int t_ = 0;
    std::size_t idx_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
};

// --- hybrid model ----------------------------------------------------------

struct TrainConfig {
    int epochs = 100;
    double lr = 0.01;
    double gamma = 0.1;      // step-decay factor
    int decay_every = 50;    // epochs per decay
    std::uint64_t seed = 0;
    Backend backend = Backend::analytic();

    void validate() const {
        if (!(lr > 0)) {
            throw std::invalid_argument("learning rate must be positive");
        }
        if (!(gamma > 0 && gamma <= 1)) {
            throw std::invalid_argument("gamma must lie in (0, 1]");
        }
        if (epochs < 0 || decay_every < 1) {
            throw std::invalid_argument("invalid epoch configuration");
        }
    }
};

struct TrainTrace {
    std::vector<double> loss;
    std::vector<double> accuracy;
    std::vector<double> grad_norm;
};

struct HybridModel {
    DenseNet frontend;
    std::vector<ParamCircuit> nodes;
    std::vector<VectorXd> thetas;
    std::vector<std::vector<Observable>> observables; // per node
    Eigen::MatrixXd head_weights;
    Eigen::VectorXd head_bias;
    RotationPool pool;

    int feature_width() const {
        int w = 0;
        for (const ParamCircuit &node : nodes) {
            w += node.n_features;
        }
        return w;
    }

    int expectation_width() const {
        int w = 0;
        for (const auto &obs : observables) {
            w += static_cast<int>(obs.size());
        }
        return w;
    }

    void validate() const {
        if (frontend.output_width() != feature_width()) {
            throw std::invalid_argument(
                "frontend output width must equal the total feature width");
        }
        if (head_weights.cols() != expectation_width()) {
            throw std::invalid_argument(
                "head input width must equal the total observable count");
        }
    }
};

/// Default QPIE model: parallel VQC nodes behind a 2->32->32->16->16->F
/// frontend. Observables are Z on each prediction ancilla and each data
/// qubit of every node.
inline HybridModel make_hybrid_model(int n_nodes, int n_data, int n_classes,
                                     int ppel_layers, const RotationPool &pool,
                                     std::uint64_t seed, int input_dims = 2) {
    if (n_nodes < 1) {
        throw std::invalid_argument("need at least one quantum node");
    }
    Rng rng(seed);
    HybridModel model;
    model.pool = pool;
    for (int i = 0; i < n_nodes; ++i) {
        ParamCircuit circuit = build_qpie_vqc(n_data, n_classes, pool,
                                              ppel_layers);
        VectorXd theta(circuit.n_trainable);
        for (int j = 0; j < theta.size(); ++j) {
            theta[j] = rng.uniform(-M_PI / 4, M_PI / 4);
        }
        std::vector<Observable> obs;
        const int n_pred = prediction_ancillas(n_classes);
        for (int a = 0; a < n_pred; ++a) {
            obs.push_back({n_data + a});
        }
        for (int q = 0; q < n_data; ++q) {
            obs.push_back({q});
        }
        model.nodes.push_back(std::move(circuit));
        model.thetas.push_back(std::move(theta));
        model.observables.push_back(std::move(obs));
    }
    model.frontend = DenseNet::init(
        {input_dims, 32, 32, 16, 16, model.feature_width()}, rng);
    const int head_in = model.expectation_width();
    model.head_weights.resize(n_classes, head_in);
    for (int r = 0; r < n_classes; ++r) {
        for (int c = 0; c < head_in; ++c) {
            model.head_weights(r, c) = 0.1 * rng.normal();
        }
    }
    model.head_bias = Eigen::VectorXd::Zero(n_classes);
    model.validate();
    return model;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct HybridForwardCache {
    DenseCache dense;
    Eigen::VectorXd frontend_out;
    Eigen::VectorXd features; // sigmoid of frontend_out
    std::vector<RunResult> node_results;
    Eigen::VectorXd expectations;
    Eigen::VectorXd probabilities;
};

/// Full forward pass. Quantum nodes receive contiguous slices of the
/// squashed frontend output.
inline Eigen::VectorXd hybrid_forward(const HybridModel &model,
                                      const Eigen::VectorXd &x,
                                      const Backend &backend, bool training,
                                      Rng *rng,
                                      HybridForwardCache *cache = nullptr) {
    HybridForwardCache local;
    HybridForwardCache &c = cache ? *cache : local;
    c.frontend_out = dense_forward(model.frontend, x, training, rng,
                                   cache ? &c.dense : nullptr);
    c.features = c.frontend_out.unaryExpr(
        [](double z) { return sigmoid(z); });
    c.expectations.resize(model.expectation_width());
    int f_off = 0;
    int e_off = 0;
    for (std::size_t i = 0; i < model.nodes.size(); ++i) {
        const ParamCircuit &node = model.nodes[i];
        const VectorXd slice = c.features.segment(f_off, node.n_features);
        RunResult result = run(node, model.thetas[i], slice, backend,
                               model.observables[i]);
        for (std::size_t k = 0; k < result.expectations.size(); ++k) {
            c.expectations[e_off + static_cast<int>(k)] =
                result.expectations[k];
        }
        if (cache) {
            c.node_results.push_back(std::move(result));
        }
        f_off += node.n_features;
        e_off += static_cast<int>(model.observables[i].size());
    }
    c.probabilities =
        softmax(model.head_weights * c.expectations + model.head_bias);
    return c.probabilities;
}

/// Cross-entropy with the probability at the label clamped at 1e-12.
inline double cross_entropy(const Eigen::VectorXd &pred, int label) {
    if (label < 0 || label >= pred.size()) {
        throw std::invalid_argument("label out of range");
    }
    const double p = pred[label];
    return -std::log(p < 1e-12 ? 1e-12 : p);
}

struct HybridGrads {
    DenseGrads frontend;
    std::vector<VectorXd> thetas;
    Eigen::MatrixXd head_weights;
    Eigen::VectorXd head_bias;

    explicit HybridGrads(const HybridModel &model) : frontend(model.frontend) {
        for (const VectorXd &theta : model.thetas) {
            thetas.emplace_back(VectorXd::Zero(theta.size()));
        }
        head_weights = Eigen::MatrixXd::Zero(model.head_weights.rows(),
                                             model.head_weights.cols());
        head_bias = Eigen::VectorXd::Zero(model.head_bias.size());
    }
};

/// Backward pass for one sample given its forward cache. Quantum gradients
/// go through the backend's dispatched engine under frozen branches.
inline void hybrid_backward(const HybridModel &model,
                            const HybridForwardCache &cache, int label,
                            const Backend &backend, HybridGrads &grads) {
    const Eigen::VectorXd delta =
        cache.probabilities -
        Eigen::VectorXd::Unit(cache.probabilities.size(), label);
    grads.head_weights += delta * cache.expectations.transpose();
    grads.head_bias += delta;
    const Eigen::VectorXd dq = model.head_weights.transpose() * delta;

    Eigen::VectorXd dfeatures = Eigen::VectorXd::Zero(cache.features.size());
    int f_off = 0;
    int e_off = 0;
    const GradMethod method = grad_dispatch(backend);
    for (std::size_t i = 0; i < model.nodes.size(); ++i) {
        const ParamCircuit &node = model.nodes[i];
        const int n_obs = static_cast<int>(model.observables[i].size());
        const VectorXd weights = dq.segment(e_off, n_obs);
        const VectorXd slice = cache.features.segment(f_off, node.n_features);
        WeightedGrad wg;
        if (method == GradMethod::Adjoint) {
            wg = adjoint_weighted(cache.node_results[i].trace,
                                  model.thetas[i], slice,
                                  model.observables[i], weights);
        } else {
            wg = psr_weighted(cache.node_results[i].trace, model.thetas[i],
                              slice, backend, model.observables[i], weights);
        }
        grads.thetas[i] += wg.theta;
        dfeatures.segment(f_off, node.n_features) += wg.features;
        f_off += node.n_features;
        e_off += n_obs;
    }

    // Through the sigmoid squash into the frontend.
    Eigen::VectorXd dz(dfeatures.size());
    for (int j = 0; j < dz.size(); ++j) {
        const double s = cache.features[j];
        dz[j] = dfeatures[j] * s * (1.0 - s);
    }
    dense_backward(model.frontend, cache.dense, dz, grads.frontend);
}

inline double hybrid_accuracy(const HybridModel &model, const Dataset &data,
                              const Backend &backend) {
    int correct = 0;
    for (int i = 0; i < data.rows(); ++i) {
        const Eigen::VectorXd p = hybrid_forward(
            model, data.features.row(i).transpose(), backend, false, nullptr);
        int argmax = 0;
        p.maxCoeff(&argmax);
        if (argmax == data.labels[i]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / data.rows();
}

/// Full-batch training with Adam and step decay. Deterministic for a fixed
/// seed and config.
inline TrainTrace train(HybridModel &model, const Dataset &data,
                        const TrainConfig &config) {
    config.validate();
    data.validate();
    if (data.rows() == 0) {
        throw std::invalid_argument("train: empty dataset");
    }
    for (int label : data.labels) {
        if (label < 0 || label >= model.head_bias.size()) {
            throw std::invalid_argument("label exceeds head width");
        }
    }
    TrainTrace trace;
    AdamOpt opt;
    Rng rng(config.seed);
    double lr = config.lr;
    const int n = data.rows();
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (epoch > 0 && epoch % config.decay_every == 0) {
            lr *= config.gamma;
        }
        HybridGrads grads(model);
        double loss = 0;
        int correct = 0;
        for (int i = 0; i < n; ++i) {
            HybridForwardCache cache;
            const Eigen::VectorXd p =
                hybrid_forward(model, data.features.row(i).transpose(),
                               config.backend, true, &rng, &cache);
            loss += cross_entropy(p, data.labels[i]);
            int argmax = 0;
            p.maxCoeff(&argmax);
            if (argmax == data.labels[i]) {
                ++correct;
            }
            hybrid_backward(model, cache, data.labels[i], config.backend,
                            grads);
        }
        loss /= n;
        if (!std::isfinite(loss)) {
            throw std::runtime_error(
                "training aborted: non-finite loss at epoch " +
                std::to_string(epoch) + " (seed " +
                std::to_string(config.seed) + ")");
        }
        grads.frontend.scale(1.0 / n);
        for (auto &g : grads.thetas) {
            g /= n;
        }
        grads.head_weights /= n;
        grads.head_bias /= n;

        double norm_sq = 0;
        for (const auto &g : grads.frontend.weights) {
            norm_sq += g.squaredNorm();
        }
        for (const auto &g : grads.frontend.biases) {
            norm_sq += g.squaredNorm();
        }
        for (const auto &g : grads.thetas) {
            norm_sq += g.squaredNorm();
        }
        norm_sq += grads.head_weights.squaredNorm();
        norm_sq += grads.head_bias.squaredNorm();

        opt.begin_step(lr);
        for (int l = 0; l < kDenseLayers; ++l) {
            opt.update(model.frontend.weights[l], grads.frontend.weights[l],
                       model.frontend.frozen[l]);
            opt.update(model.frontend.biases[l], grads.frontend.biases[l],
                       model.frontend.frozen[l]);
        }
        for (std::size_t i = 0; i < model.thetas.size(); ++i) {
            opt.update(model.thetas[i], grads.thetas[i]);
        }
        opt.update(model.head_weights, grads.head_weights);
        opt.update(model.head_bias, grads.head_bias);

        trace.loss.push_back(loss);
        trace.accuracy.push_back(static_cast<double>(correct) / n);
        trace.grad_norm.push_back(std::sqrt(norm_sq));
    }
    return trace;
}

// --- classical counterpart and transfer learning ---------------------------

/// Dense frontend plus a linear softmax head, no quantum nodes. Used for
/// pretraining and as the Fisher-spectrum comparison baseline.
struct ClassicalClassifier {
    DenseNet net;
    Eigen::MatrixXd head_weights;
    Eigen::VectorXd head_bias;
};

inline ClassicalClassifier make_classical_classifier(int input_dims,
                                                     int hidden_out,
                                                     int n_classes,
                                                     std::uint64_t seed) {
    Rng rng(seed);
    ClassicalClassifier clf;
    clf.net = DenseNet::init({input_dims, 32, 32, 16, 16, hidden_out}, rng);
    clf.head_weights.resize(n_classes, hidden_out);
    for (int r = 0; r < n_classes; ++r) {
        for (int c = 0; c < hidden_out; ++c) {
            clf.head_weights(r, c) = 0.1 * rng.normal();
        }
    }
    clf.head_bias = Eigen::VectorXd::Zero(n_classes);
    return clf;
}

inline Eigen::VectorXd classical_forward(const ClassicalClassifier &clf,
                                         const Eigen::VectorXd &x,
                                         bool training = false,
                                         Rng *rng = nullptr,
                                         DenseCache *cache = nullptr) {
    const Eigen::VectorXd a = dense_forward(clf.net, x, training, rng, cache);
    return softmax(clf.head_weights * a + clf.head_bias);
}

inline TrainTrace train_classical(ClassicalClassifier &clf, const Dataset &data,
                                  const TrainConfig &config) {
    config.validate();
    TrainTrace trace;
    AdamOpt opt;
    Rng rng(config.seed);
    double lr = config.lr;
    const int n = data.rows();
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (epoch > 0 && epoch % config.decay_every == 0) {
            lr *= config.gamma;
        }
        DenseGrads net_grads(clf.net);
        Eigen::MatrixXd head_w_grad = Eigen::MatrixXd::Zero(
            clf.head_weights.rows(), clf.head_weights.cols());
        Eigen::VectorXd head_b_grad =
            Eigen::VectorXd::Zero(clf.head_bias.size());
        double loss = 0;
        int correct = 0;
        for (int i = 0; i < n; ++i) {
            DenseCache cache;
            const Eigen::VectorXd a = dense_forward(
                clf.net, data.features.row(i).transpose(), true, &rng, &cache);
            const Eigen::VectorXd p =
                softmax(clf.head_weights * a + clf.head_bias);
            loss += cross_entropy(p, data.labels[i]);
            int argmax = 0;
            p.maxCoeff(&argmax);
            if (argmax == data.labels[i]) {
                ++correct;
            }
            const Eigen::VectorXd delta =
                p - Eigen::VectorXd::Unit(p.size(), data.labels[i]);
            head_w_grad += delta * a.transpose();
            head_b_grad += delta;
            dense_backward(clf.net, cache,
                           clf.head_weights.transpose() * delta, net_grads);
        }
        loss /= n;
        if (!std::isfinite(loss)) {
            throw std::runtime_error("classical training: non-finite loss");
        }
        net_grads.scale(1.0 / n);
        head_w_grad /= n;
        head_b_grad /= n;
        opt.begin_step(lr);
        for (int l = 0; l < kDenseLayers; ++l) {
            opt.update(clf.net.weights[l], net_grads.weights[l],
                       clf.net.frozen[l]);
            opt.update(clf.net.biases[l], net_grads.biases[l],
                       clf.net.frozen[l]);
        }
        opt.update(clf.head_weights, head_w_grad);
        opt.update(clf.head_bias, head_b_grad);
        trace.loss.push_back(loss);
        trace.accuracy.push_back(static_cast<double>(correct) / n);
        double norm_sq = head_w_grad.squaredNorm() + head_b_grad.squaredNorm();
        for (const auto &g : net_grads.weights) {
            norm_sq += g.squaredNorm();
        }
        trace.grad_norm.push_back(std::sqrt(norm_sq));
    }
    return trace;
}

/// Pretrain the frontend on a source task, then freeze its first layers.
inline DenseNet pretrain_transfer(DenseNet frontend, const Dataset &source,
                                  int freeze_first,
                                  const TrainConfig &config) {
    if (freeze_first < 0 || freeze_first >= kDenseLayers) {
        throw std::invalid_argument(
            "freeze_first must lie in [0, " +
            std::to_string(kDenseLayers - 1) + "]");
    }
    ClassicalClassifier clf;
    clf.net = std::move(frontend);
    const int hidden_out = clf.net.output_width();
    const int n_classes =
        1 + *std::max_element(source.labels.begin(), source.labels.end());
    Rng rng(config.seed + 1);
    clf.head_weights.resize(n_classes, hidden_out);
    for (int r = 0; r < n_classes; ++r) {
        for (int c = 0; c < hidden_out; ++c) {
            clf.head_weights(r, c) = 0.1 * rng.normal();
        }
    }
    clf.head_bias = Eigen::VectorXd::Zero(n_classes);
    train_classical(clf, source, config);
    for (int l = 0; l < freeze_first; ++l) {
        clf.net.frozen[l] = true;
    }
    return std::move(clf.net);
}

// --- VQE -------------------------------------------------------------------

/// Weighted sum of Pauli-Z strings.
struct Hamiltonian {
    std::vector<double> weights;
    std::vector<Observable> terms;
};

/// Exact ground energy of a Z-string Hamiltonian by basis enumeration.
inline double ground_energy(const Hamiltonian &h, int n_qubits) {
    if (h.terms.empty()) {
        throw std::invalid_argument("empty Hamiltonian");
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t basis = 0; basis < (std::size_t{1} << n_qubits); ++basis) {
        double e = 0;
        for (std::size_t k = 0; k < h.terms.size(); ++k) {
            int parity = 0;
            for (int q : h.terms[k]) {
                if (basis & (std::size_t{1} << q)) {
                    parity ^= 1;
                }
            }
            e += h.weights[k] * (parity ? -1.0 : 1.0);
        }
        best = std::min(best, e);
    }
    return best;
}

struct VqeResult {
    VectorXd theta;
    std::vector<double> energy_trace;
    bool converged = false;
};

/**
 * Gradient descent on <psi(theta)|H|psi(theta)> until the energy change
 * stays below 1e-6 for five consecutive iterations or the epoch cap.
 */
inline VqeResult vqe_minimize(const ParamCircuit &circuit,
                              const Hamiltonian &hamiltonian,
                              const TrainConfig &config) {
    config.validate();
    if (hamiltonian.terms.empty()) {
        throw std::invalid_argument("vqe_minimize: empty Hamiltonian");
    }
    VqeResult result;
    Rng rng(config.seed);
    result.theta.resize(circuit.n_trainable);
    for (int j = 0; j < result.theta.size(); ++j) {
        result.theta[j] = rng.uniform(-M_PI / 4, M_PI / 4);
    }
    const VectorXd features = VectorXd::Zero(circuit.n_features);
    VectorXd weights(hamiltonian.weights.size());
    for (std::size_t k = 0; k < hamiltonian.weights.size(); ++k) {
        weights[k] = hamiltonian.weights[k];
    }

    auto energy_of = [&](const VectorXd &theta) {
        const RunResult r = run(circuit, theta, features, config.backend,
                                hamiltonian.terms);
        double e = 0;
        for (std::size_t k = 0; k < r.expectations.size(); ++k) {
            e += weights[k] * r.expectations[k];
        }
        return e;
    };

    AdamOpt opt;
    double lr = config.lr;
    double prev_energy = energy_of(result.theta);
    result.energy_trace.push_back(prev_energy);
    int quiet = 0;
    for (int it = 0; it < config.epochs; ++it) {
        if (it > 0 && it % config.decay_every == 0) {
            lr *= config.gamma;
        }
        const RunResult forward = run(circuit, result.theta, features,
                                      config.backend, {});
        WeightedGrad wg;
        if (grad_dispatch(config.backend) == GradMethod::Adjoint) {
            wg = adjoint_weighted(forward.trace, result.theta, features,
                                  hamiltonian.terms, weights);
        } else {
            wg = psr_weighted(forward.trace, result.theta, features,
                              config.backend, hamiltonian.terms, weights);
        }
        opt.begin_step(lr);
        opt.update(result.theta, wg.theta);
        const double energy = energy_of(result.theta);
        result.energy_trace.push_back(energy);
        quiet = std::abs(energy - prev_energy) < 1e-6 ? quiet + 1 : 0;
        prev_energy = energy;
        if (quiet >= 5) {
            result.converged = true;
            break;
        }
    }
    return result;
}

// --- checkpoint serialization ----------------------------------------------

namespace detail {

inline void write_matrix(std::ostringstream &out, const Eigen::MatrixXd &m) {
    out << m.rows() << " " << m.cols() << "\n";
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            out << (c ? " " : "") << format_double(m(r, c));
        }
        out << "\n";
    }
}

inline Eigen::MatrixXd read_matrix(std::istream &in) {
    int rows, cols;
    if (!(in >> rows >> cols)) {
        throw std::invalid_argument("malformed matrix header in checkpoint");
    }
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!(in >> m(r, c))) {
                throw std::invalid_argument("truncated matrix in checkpoint");
            }
        }
    }
    return m;
}

} // namespace detail

inline std::string serialize_model(const HybridModel &model,
                                   const TrainConfig &config) {
    std::ostringstream out;
    out << "qpie-checkpoint v1\n";
    out << "seed " << config.seed << "\n";
    out << "config " << config.epochs << " "
        << detail::format_double(config.lr) << " "
        << detail::format_double(config.gamma) << " " << config.decay_every
        << "\n";
    out << "frontend " << kDenseLayers << " "
        << detail::format_double(model.frontend.dropout_rate) << "\n";
    for (int l = 0; l < kDenseLayers; ++l) {
        out << "layer " << l << " " << (model.frontend.frozen[l] ? 1 : 0)
            << "\n";
        detail::write_matrix(out, model.frontend.weights[l]);
        detail::write_matrix(out, model.frontend.biases[l]);
    }
    out << "nodes " << model.nodes.size() << "\n";
    for (std::size_t i = 0; i < model.nodes.size(); ++i) {
        const std::string circ = serialize_circuit(model.nodes[i]);
        out << "circuit " << std::count(circ.begin(), circ.end(), '\n')
            << "\n"
            << circ;
        out << "theta\n";
        detail::write_matrix(out, model.thetas[i]);
        out << "observables " << model.observables[i].size() << "\n";
        for (const Observable &obs : model.observables[i]) {
            out << "obs";
            for (int q : obs) {
                out << " " << q;
            }
            out << "\n";
        }
    }
    out << "head\n";
    detail::write_matrix(out, model.head_weights);
    detail::write_matrix(out, model.head_bias);
    return out.str();
}

inline std::pair<HybridModel, TrainConfig>
parse_model(const std::string &text) {
    std::istringstream in(text);
    std::string line, word;
    if (!std::getline(in, line) || line != "qpie-checkpoint v1") {
        throw std::invalid_argument("not a qpie-checkpoint v1 document");
    }
    HybridModel model;
    TrainConfig config;
    in >> word >> config.seed;
    in >> word >> config.epochs >> config.lr >> config.gamma >>
        config.decay_every;
    int n_layers;
    in >> word >> n_layers >> model.frontend.dropout_rate;
    if (n_layers != kDenseLayers) {
        throw std::invalid_argument("unexpected frontend depth");
    }
    for (int l = 0; l < kDenseLayers; ++l) {
        int idx, frozen;
        in >> word >> idx >> frozen;
        model.frontend.frozen[l] = frozen != 0;
        model.frontend.weights.push_back(detail::read_matrix(in));
        model.frontend.biases.push_back(detail::read_matrix(in));
    }
    std::size_t n_nodes;
    in >> word >> n_nodes;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        int circ_lines;
        in >> word >> circ_lines;
        in.ignore();
        std::string circ_text;
        for (int j = 0; j < circ_lines; ++j) {
            std::getline(in, line);
            circ_text += line + "\n";
        }
        model.nodes.push_back(parse_circuit(circ_text));
        in >> word; // "theta"
        model.thetas.push_back(detail::read_matrix(in));
        model.pool = model.nodes.back().pool;
        std::size_t n_obs;
        in >> word >> n_obs;
        in.ignore();
        std::vector<Observable> observables;
        for (std::size_t k = 0; k < n_obs; ++k) {
            std::getline(in, line);
            std::istringstream ls(line);
            ls >> word; // "obs"
            Observable obs;
            int q;
            while (ls >> q) {
                obs.push_back(q);
            }
            observables.push_back(std::move(obs));
        }
        model.observables.push_back(std::move(observables));
    }
    in >> word; // "head"
    model.head_weights = detail::read_matrix(in);
    model.head_bias = detail::read_matrix(in);
    model.validate();
    return {std::move(model), config};
}

} // namespace qpie
