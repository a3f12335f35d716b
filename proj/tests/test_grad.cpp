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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qpie/circuit.hpp"
#include "qpie/grad.hpp"

using namespace qpie;

namespace {

ParamCircuit single_ry() {
    ParamCircuit circuit;
    circuit.n_data_qubits = 1;
    circuit.n_trainable = 1;
    circuit.nodes.emplace_back(GateOp(GateKind::RY, {0},
                                      {ParamSlot::trainable(0)}));
    return circuit;
}

VectorXd random_theta(const ParamCircuit &circuit, std::uint64_t seed) {
    Rng rng(seed);
    VectorXd theta(circuit.n_trainable);
    for (int j = 0; j < theta.size(); ++j) {
        theta[j] = rng.uniform(-M_PI, M_PI);
    }
    return theta;
}

} // namespace

TEST_CASE("shift rule on a single Y rotation") {
    const ParamCircuit circuit = single_ry();
    VectorXd theta(1);

    theta << M_PI / 3;
    const GradientVector g = grad_param_shift(circuit, theta, VectorXd(0),
                                              Backend::analytic(), {0});
    CHECK(g.values[0] ==
          doctest::Approx(-std::sin(M_PI / 3)).epsilon(1e-12));
    CHECK(g.circuit_evals == 3); // forward + two shifted

    theta << 0.0;
    const GradientVector at_zero = grad_param_shift(
        circuit, theta, VectorXd(0), Backend::analytic(), {0});
    CHECK(std::abs(at_zero.values[0]) < 1e-15);

    // Trigonometric exactness of the pi/2 shift at 100 angles.
    for (int i = 0; i < 100; ++i) {
        theta << -M_PI + 2.0 * M_PI * i / 99.0;
        const GradientVector gi = grad_param_shift(
            circuit, theta, VectorXd(0), Backend::analytic(), {0});
        CHECK(std::abs(gi.values[0] + std::sin(theta[0])) < 1e-12);
    }
}

TEST_CASE("shift rule matches finite differences on entangling circuits") {
    for (int s = 0; s < 10; ++s) {
        const ParamCircuit circuit = random_circuit(400 + s, 4, 12, 12);
        const VectorXd theta = random_theta(circuit, s);
        const GradientVector psr = grad_param_shift(
            circuit, theta, VectorXd(0), Backend::analytic(), {0});
        const GradientVector fd = grad_finite_diff(
            circuit, theta, VectorXd(0), Backend::analytic(), {0});
        for (int j = 0; j < theta.size(); ++j) {
            CHECK(std::abs(psr.values[j] - fd.values[j]) < 1e-6);
        }
    }
}

TEST_CASE("adjoint sweep") {
    const ParamCircuit circuit = single_ry();
    VectorXd theta(1);
    theta << M_PI / 3;
    const GradientVector g = grad_adjoint(circuit, theta, VectorXd(0), {0});
    CHECK(g.values[0] ==
          doctest::Approx(-std::sin(M_PI / 3)).epsilon(1e-10));
    CHECK(g.method == GradMethod::Adjoint);

    // Zero trainables: empty vector, no backward work.
    ParamCircuit fixed;
    fixed.n_data_qubits = 1;
    fixed.nodes.emplace_back(GateOp(GateKind::H, {0}));
    const GradientVector empty =
        grad_adjoint(fixed, VectorXd(0), VectorXd(0), {0});
    CHECK(empty.values.size() == 0);
    CHECK(empty.gate_applications == 0);

    CHECK_THROWS_AS(grad_adjoint(circuit, theta, VectorXd(0), {0},
                                 Backend::sampled(100, 1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(grad_adjoint(circuit, theta, VectorXd(0), {0},
                                 Backend::noisy(NoiseSpec{}, 0)),
                    std::invalid_argument);
}

TEST_CASE("three-way agreement over seeded random circuits") {
    for (int s = 0; s < 50; ++s) {
        const ParamCircuit circuit =
            random_circuit(500 + s, 1 + s % 6 + (s % 6 == 0 ? 1 : 0), 14, 30);
        const VectorXd theta = random_theta(circuit, 77 + s);
        const Observable obs = {0};
        const GradientVector psr = grad_param_shift(
            circuit, theta, VectorXd(0), Backend::analytic(), obs);
        const GradientVector adj =
            grad_adjoint(circuit, theta, VectorXd(0), obs);
        const GradientVector fd = grad_finite_diff(
            circuit, theta, VectorXd(0), Backend::analytic(), obs);
        for (int j = 0; j < theta.size(); ++j) {
            CHECK(std::abs(psr.values[j] - adj.values[j]) < 1e-6);
            CHECK(std::abs(psr.values[j] - fd.values[j]) < 1e-6);
            CHECK(std::abs(adj.values[j] - fd.values[j]) < 1e-6);
        }
    }
}

TEST_CASE("adjoint cost is independent of the trainable count") {
    // Two circuits with identical gates, different trainable counts.
    const ParamCircuit many = random_circuit(42, 6, 20, 40);
    const ParamCircuit few = random_circuit(42, 6, 20, 4);
    REQUIRE(many.n_trainable > few.n_trainable);

    const GradientVector g_many = grad_adjoint(
        many, random_theta(many, 1), VectorXd(0), {0});
    const GradientVector g_few = grad_adjoint(
        few, random_theta(few, 2), VectorXd(0), {0});

    // Backward-sweep structural cost (everything except the per-slot
    // derivative kernels) must match.
    const std::size_t structural_many =
        g_many.gate_applications - many.n_trainable;
    const std::size_t structural_few =
        g_few.gate_applications - few.n_trainable;
    CHECK(structural_many == structural_few);

    // And PSR does at least 10x the gate work on a 40-parameter circuit.
    const GradientVector psr = grad_param_shift(
        many, random_theta(many, 1), VectorXd(0), Backend::analytic(), {0});
    CHECK(psr.gate_applications >= 10 * g_many.gate_applications);
}

TEST_CASE("dispatch by backend capability") {
    CHECK(grad_dispatch(Backend::analytic()) == GradMethod::Adjoint);
    CHECK(grad_dispatch(Backend::sampled(100, 1)) == GradMethod::ParamShift);
    CHECK(grad_dispatch(Backend::noisy(NoiseSpec{}, 0)) ==
          GradMethod::ParamShift);
}

TEST_CASE("branch freezing keeps shift-rule and FD consistent") {
    // Mid-measured circuit: the conditional branch is frozen from the
    // forward pass for every shifted or perturbed evaluation.
    ParamCircuit circuit;
    circuit.n_data_qubits = 1;
    circuit.n_ancilla = 1;
    circuit.n_trainable = 2;
    circuit.nodes.emplace_back(GateOp(GateKind::RY, {1},
                                      {ParamSlot::trainable(0)}));
    circuit.nodes.emplace_back(MidMeasureNode{1, 0});
    circuit.nodes.emplace_back(
        ConditionalNode{0, 0, ParamSlot::trainable(1)});
    circuit.validate();

    for (double angle : {0.3, 1.3, 2.6}) {
        VectorXd theta(2);
        theta << angle, 0.8;
        const GradientVector psr = grad_param_shift(
            circuit, theta, VectorXd(0), Backend::analytic(), {0});
        const GradientVector fd = grad_finite_diff(
            circuit, theta, VectorXd(0), Backend::analytic(), {0});
        for (int j = 0; j < 2; ++j) {
            CHECK(std::abs(psr.values[j] - fd.values[j]) < 1e-6);
        }
    }
}

TEST_CASE("embedded-feature gradients chain through the angle range") {
    ParamCircuit circuit;
    circuit.n_data_qubits = 1;
    circuit.n_features = 1;
    circuit.nodes.emplace_back(GateOp(GateKind::RY, {0},
                                      {ParamSlot::embedded(0, 0.0, M_PI)}));
    VectorXd features(1);
    features << 0.4;
    const RunResult forward = run(circuit, VectorXd(0), features,
                                  Backend::analytic(), {});
    const WeightedGrad wg =
        psr_weighted(forward.trace, VectorXd(0), features,
                     Backend::analytic(), {{0}}, VectorXd::Ones(1));
    // d<Z>/df = -sin(pi f) * pi.
    CHECK(wg.features[0] ==
          doctest::Approx(-std::sin(M_PI * 0.4) * M_PI).epsilon(1e-10));

    const WeightedGrad adj =
        adjoint_weighted(forward.trace, VectorXd(0), features, {{0}},
                         VectorXd::Ones(1));
    CHECK(adj.features[0] == doctest::Approx(wg.features[0]).epsilon(1e-10));
}

TEST_CASE("sampled-backend gradients are statistically consistent") {
    const ParamCircuit circuit = single_ry();
    VectorXd theta(1);
    theta << 0.9;
    const GradientVector exact = grad_param_shift(
        circuit, theta, VectorXd(0), Backend::analytic(), {0});
    const std::uint64_t shots = 200000;
    const GradientVector noisy = grad_param_shift(
        circuit, theta, VectorXd(0), Backend::sampled(shots, 5), {0});
    // Shot noise of a +-1 observable mean: sigma <= 1/sqrt(shots) per
    // evaluation; the two-term rule halves and combines two of them.
    const double sigma = 1.0 / std::sqrt(static_cast<double>(shots));
    CHECK(std::abs(noisy.values[0] - exact.values[0]) < 5.0 * sigma);
}

TEST_CASE("adjoint rejects sampled collapse in the trace") {
    ParamCircuit circuit;
    circuit.n_data_qubits = 1;
    circuit.n_ancilla = 1;
    circuit.n_trainable = 1;
    circuit.nodes.emplace_back(GateOp(GateKind::H, {1}));
    circuit.nodes.emplace_back(MidMeasureNode{1, 0});
    circuit.nodes.emplace_back(
        ConditionalNode{0, 0, ParamSlot::trainable(0)});
    circuit.validate();
    VectorXd theta(1);
    theta << 0.4;
    const RunResult forward = run(circuit, theta, VectorXd(0),
                                  Backend::sampled(64, 3), {});
    CHECK_THROWS_AS(adjoint_weighted(forward.trace, theta, VectorXd(0),
                                     {{0}}, VectorXd::Ones(1)),
                    std::invalid_argument);
}

TEST_CASE("finite differences validate the step size") {
    const ParamCircuit circuit = single_ry();
    VectorXd theta(1);
    theta << 0.5;
    CHECK_THROWS_AS(grad_finite_diff(circuit, theta, VectorXd(0),
                                     Backend::analytic(), {0}, 0.0),
                    std::invalid_argument);
}

TEST_CASE("greedy growth step") {
    // Single candidate: appended unconditionally.
    ParamCircuit base;
    base.n_data_qubits = 2;
    base.nodes.emplace_back(GateOp(GateKind::H, {0}));
    CandidatePool solo;
    solo.candidates.push_back({GateKind::RY, 1, -1});
    auto [grown, theta] = aao_step(base, VectorXd(0), VectorXd(0),
                                   Backend::analytic(), {0}, solo);
    CHECK(grown.n_trainable == 1);
    CHECK(theta.size() == 1);
    CHECK(theta[0] == 0.0);
    CHECK(std::get<GateOp>(grown.nodes.back()).kind == GateKind::RY);

    // All-zero gradients: the tie rule keeps the first candidate.
    ParamCircuit empty;
    empty.n_data_qubits = 2;
    CandidatePool ties;
    ties.candidates.push_back({GateKind::CRY, 1, 0}); // control |0>: grad 0
    ties.candidates.push_back({GateKind::CRZ, 1, 0});
    auto [tied, tied_theta] = aao_step(empty, VectorXd(0), VectorXd(0),
                                       Backend::analytic(), {0}, ties);
    CHECK(std::get<GateOp>(tied.nodes.back()).kind == GateKind::CRY);

    // Selection matches exhaustive FD scoring over the full pool.
    ParamCircuit h0;
    h0.n_data_qubits = 2;
    h0.nodes.emplace_back(GateOp(GateKind::H, {0}));
    CandidatePool pool;
    pool.candidates.push_back({GateKind::RY, 0, -1});
    pool.candidates.push_back({GateKind::RY, 1, -1});
    pool.candidates.push_back({GateKind::CRY, 0, 1});
    pool.candidates.push_back({GateKind::CRY, 1, 0});

    int best = 0;
    double best_mag = -1;
    for (std::size_t c = 0; c < pool.candidates.size(); ++c) {
        const auto &cand = pool.candidates[c];
        ParamCircuit ext = h0;
        std::vector<int> targets =
            cand.target >= 0 ? std::vector<int>{cand.qubit, cand.target}
                             : std::vector<int>{cand.qubit};
        ext.nodes.emplace_back(GateOp(cand.kind, std::move(targets),
                                      {ParamSlot::trainable(0)}));
        ext.n_trainable = 1;
        VectorXd zero(1);
        zero << 0.0;
        const GradientVector fd = grad_finite_diff(
            ext, zero, VectorXd(0), Backend::analytic(), {0});
        if (std::abs(fd.values[0]) > best_mag + 1e-9) {
            best_mag = std::abs(fd.values[0]);
            best = static_cast<int>(c);
        }
    }
    auto [sel, sel_theta] = aao_step(h0, VectorXd(0), VectorXd(0),
                                     Backend::analytic(), {0}, pool);
    const GateOp &chosen = std::get<GateOp>(sel.nodes.back());
    const auto &expected = pool.candidates[best];
    CHECK(chosen.kind == expected.kind);
    CHECK(chosen.targets[0] == expected.qubit);
    // The H(0) circuit makes RY(0)'s gradient magnitude 1 at theta = 0.
    CHECK(best_mag == doctest::Approx(1.0).epsilon(1e-6));

    CandidatePool none;
    CHECK_THROWS_AS(aao_step(h0, VectorXd(0), VectorXd(0),
                             Backend::analytic(), {0}, none),
                    std::invalid_argument);
}
