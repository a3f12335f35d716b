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
 * Gradient engines: parameter-shift rule, adjoint differentiation, and a
 * finite-difference oracle, plus backend dispatch and the angle-adaptive
 * circuit-growth step.
 *
 * RX/RY/RZ and each R3 slot use the two-term shift
 *   d<M>/dt = ( <M>(t + pi/2) - <M>(t - pi/2) ) / 2.
 * Controlled rotations have generator spectrum {0, +-1/2}, so the two-term
 * rule is inexact for them; they use the exact four-term rule with shifts
 * pi/2 and 3pi/2.
 *
 * Conditional branches are frozen to the unshifted forward pass during all
 * shifted or perturbed evaluations.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpie/circuit.hpp"
#include "qpie/engine.hpp"

namespace qpie {

enum class GradMethod { ParamShift, Adjoint, FiniteDiff };

struct GradientVector {
    VectorXd values;
    GradMethod method = GradMethod::ParamShift;
    std::size_t circuit_evals = 0;     // full forward executions
    std::size_t gate_applications = 0; // total gate kernel invocations
};

/// Gradients of a weighted sum of observables, with respect to both the
/// trainable parameters and the embedded features.
struct WeightedGrad {
    VectorXd theta;
    VectorXd features;
    std::size_t circuit_evals = 0;
    std::size_t gate_applications = 0;
};

/// Backend capability dispatch: the analytic statevector gets the adjoint
/// sweep; sampled and density-matrix backends get the shift rule.
inline GradMethod grad_dispatch(const Backend &backend) {
    return backend.kind == BackendKind::AnalyticSV ? GradMethod::Adjoint
                                                   : GradMethod::ParamShift;
}

namespace detail {

inline bool uses_four_term_rule(GateKind kind) {
    return kind == GateKind::CRY || kind == GateKind::CRZ ||
           kind == GateKind::CYZ;
}

inline double weighted_value(const std::vector<double> &expectations,
                             const VectorXd &weights) {
    double acc = 0;
    for (std::size_t k = 0; k < expectations.size(); ++k) {
        acc += weights[k] * expectations[k];
    }
    return acc;
}

} // namespace detail

/**
 * Parameter-shift gradients evaluated on a frozen trace.
 *
 * Each parameter occurrence is shifted independently; occurrences bound to
 * the same trainable index accumulate, and embedded occurrences chain
 * through the slot's affine range.
 */
inline WeightedGrad psr_weighted(const ResolvedCircuit &trace,
                                 const VectorXd &theta,
                                 const VectorXd &features,
                                 const Backend &backend,
                                 const std::vector<Observable> &observables,
                                 const VectorXd &weights) {
    WeightedGrad grad;
    grad.theta = VectorXd::Zero(theta.size());
    grad.features = VectorXd::Zero(features.size());

    auto eval_shifted = [&](std::size_t op, int slot, double delta) {
        ++grad.circuit_evals;
        grad.gate_applications += trace.ops.size();
        const std::vector<detail::SlotShift> shifts = {{op, slot, delta}};
        return detail::weighted_value(
            execute_resolved(trace, theta, features, backend, observables,
                             shifts),
            weights);
    };

    static const double kHalf = M_PI / 2.0;
    static const double kThreeHalves = 3.0 * M_PI / 2.0;
    static const double kCPlus = (std::sqrt(2.0) + 1.0) / (4.0 * std::sqrt(2.0));
    static const double kCMinus = (std::sqrt(2.0) - 1.0) / (4.0 * std::sqrt(2.0));

    for (std::size_t i = 0; i < trace.ops.size(); ++i) {
        const ResolvedOp &op = trace.ops[i];
        if (op.projection) {
            continue;
        }
        for (std::size_t p = 0; p < op.slots.size(); ++p) {
            const ParamSlot &slot = op.slots[p];
            if (slot.kind == ParamSlot::Kind::Fixed) {
                continue;
            }
            double d;
            if (detail::uses_four_term_rule(op.kind)) {
                d = kCPlus * (eval_shifted(i, p, kHalf) -
                              eval_shifted(i, p, -kHalf)) -
                    kCMinus * (eval_shifted(i, p, kThreeHalves) -
                               eval_shifted(i, p, -kThreeHalves));
            } else {
                d = 0.5 * (eval_shifted(i, p, kHalf) -
                           eval_shifted(i, p, -kHalf));
            }
            if (slot.kind == ParamSlot::Kind::Trainable) {
                grad.theta[slot.index] += d;
            } else {
                grad.features[slot.index] += d * (slot.hi - slot.lo);
            }
        }
    }
    return grad;
}

/**
 * Adjoint differentiation on the analytic statevector: one forward pass and
 * one backward sweep give every gradient, independent of the trainable
 * count.
 */
inline WeightedGrad adjoint_weighted(const ResolvedCircuit &trace,
                                     const VectorXd &theta,
                                     const VectorXd &features,
                                     const std::vector<Observable> &observables,
                                     const VectorXd &weights) {
    WeightedGrad grad;
    grad.theta = VectorXd::Zero(theta.size());
    grad.features = VectorXd::Zero(features.size());
    grad.circuit_evals = 1;

    // Forward pass to the final state.
    StateVector psi(trace.n_qubits);
    std::vector<std::vector<double>> values(trace.ops.size());
    for (std::size_t i = 0; i < trace.ops.size(); ++i) {
        const ResolvedOp &op = trace.ops[i];
        if (op.projection) {
            throw std::invalid_argument(
                "adjoint differentiation requires an analytic trace without "
                "sampled collapse");
        }
        values[i] = detail::resolved_values(op, theta, features, {}, i);
        detail::apply_resolved_gate(psi, op.kind, op.targets, values[i]);
        ++grad.gate_applications;
    }

    // lambda = (sum_k w_k Z_k) psi; the weighted observable is diagonal.
    StateVector lambda = psi;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        double coeff = 0;
        for (std::size_t k = 0; k < observables.size(); ++k) {
            int parity = 0;
            for (int q : observables[k]) {
                if (i & (std::size_t{1} << q)) {
                    parity ^= 1;
                }
            }
            coeff += weights[k] * (parity ? -1.0 : 1.0);
        }
        lambda[i] *= coeff;
    }

    for (std::size_t i = trace.ops.size(); i-- > 0;) {
        const ResolvedOp &op = trace.ops[i];
        const Matrix2 block = gate_block(op.kind, values[i]);
        const Matrix2 block_dag = block.adjoint();
        const bool controlled = is_controlled(op.kind);

        // psi back to the state before this gate.
        if (controlled) {
            apply_controlled(psi, block_dag, op.targets[0], op.targets[1]);
        } else {
            apply_1q(psi, block_dag, op.targets[0]);
        }
        ++grad.gate_applications;

        for (std::size_t p = 0; p < op.slots.size(); ++p) {
            const ParamSlot &slot = op.slots[p];
            if (slot.kind == ParamSlot::Kind::Fixed) {
                continue;
            }
            StateVector mu = psi;
            const Matrix2 dblock =
                block_derivative(op.kind, values[i], static_cast<int>(p));
            if (controlled) {
                apply_controlled_generator(mu, dblock, op.targets[0],
                                           op.targets[1]);
            } else {
                apply_1q_generic(mu, dblock, op.targets[0]);
            }
            ++grad.gate_applications;
            const Complex inner =
                lambda.amplitudes().adjoint() * mu.amplitudes();
            const double d = 2.0 * inner.real();
            if (slot.kind == ParamSlot::Kind::Trainable) {
                grad.theta[slot.index] += d;
            } else {
                grad.features[slot.index] += d * (slot.hi - slot.lo);
            }
        }

        if (controlled) {
            apply_controlled(lambda, block_dag, op.targets[0], op.targets[1]);
        } else {
            apply_1q(lambda, block_dag, op.targets[0]);
        }
        ++grad.gate_applications;
    }
    return grad;
}

/// d<M>/d(theta) via the shift rule; branches frozen from one forward run.
inline GradientVector grad_param_shift(const ParamCircuit &circuit,
                                       const VectorXd &theta,
                                       const VectorXd &features,
                                       const Backend &backend,
                                       const Observable &observable) {
    const RunResult forward = run(circuit, theta, features, backend, {});
    const WeightedGrad wg =
        psr_weighted(forward.trace, theta, features, backend, {observable},
                     VectorXd::Ones(1));
    GradientVector grad;
    grad.values = wg.theta;
    grad.method = GradMethod::ParamShift;
    grad.circuit_evals = wg.circuit_evals + 1;
    grad.gate_applications = wg.gate_applications + forward.trace.ops.size();
    return grad;
}

/// Adjoint-differentiated gradient; analytic statevector only.
inline GradientVector grad_adjoint(const ParamCircuit &circuit,
                                   const VectorXd &theta,
                                   const VectorXd &features,
                                   const Observable &observable,
                                   const Backend &backend = Backend::analytic()) {
    if (backend.kind != BackendKind::AnalyticSV) {
        throw std::invalid_argument(
            "adjoint differentiation requires the analytic statevector "
            "backend");
    }
    if (circuit.n_trainable == 0) {
        GradientVector empty;
        empty.method = GradMethod::Adjoint;
        return empty;
    }
    const RunResult forward =
        run(circuit, theta, features, Backend::analytic(), {});
    const WeightedGrad wg = adjoint_weighted(forward.trace, theta, features,
                                             {observable}, VectorXd::Ones(1));
    GradientVector grad;
    grad.values = wg.theta;
    grad.method = GradMethod::Adjoint;
    grad.circuit_evals = 2; // forward run plus the sweep's own forward pass
    grad.gate_applications = wg.gate_applications + forward.trace.ops.size();
    return grad;
}

/// Central-difference oracle over the trainable vector, h = 1e-5 default.
inline GradientVector grad_finite_diff(const ParamCircuit &circuit,
                                       const VectorXd &theta,
                                       const VectorXd &features,
                                       const Backend &backend,
                                       const Observable &observable,
                                       double h = 1e-5) {
    if (!(h > 0)) {
        throw std::invalid_argument("finite-difference step must be positive");
    }
    const RunResult forward = run(circuit, theta, features, backend, {});
    GradientVector grad;
    grad.values = VectorXd::Zero(theta.size());
    grad.method = GradMethod::FiniteDiff;
    grad.circuit_evals = 1;
    grad.gate_applications = forward.trace.ops.size();
    for (int j = 0; j < theta.size(); ++j) {
        VectorXd tp = theta, tm = theta;
        tp[j] += h;
        tm[j] -= h;
        const double fp = execute_resolved(forward.trace, tp, features,
                                           backend, {observable})[0];
        const double fm = execute_resolved(forward.trace, tm, features,
                                           backend, {observable})[0];
        grad.values[j] = (fp - fm) / (2.0 * h);
        grad.circuit_evals += 2;
        grad.gate_applications += 2 * forward.trace.ops.size();
    }
    return grad;
}

/// Candidate gates for angle-adaptive circuit growth.
struct CandidatePool {
    struct Candidate {
        GateKind kind;   // RY, CRY, or CRZ
        int qubit;       // target (single) or control (controlled)
        int target = -1; // controlled target
    };
    std::vector<Candidate> candidates;
};

/**
 * One angle-adaptive step: tentatively append each candidate with a fresh
 * zero-initialized parameter, score it by the magnitude of the shift-rule
 * gradient of the observable, and keep the best. Ties go to the lowest
 * candidate index.
 */
inline std::pair<ParamCircuit, VectorXd>
aao_step(const ParamCircuit &circuit, const VectorXd &theta,
         const VectorXd &features, const Backend &backend,
         const Observable &observable, const CandidatePool &pool) {
    if (pool.candidates.empty()) {
        throw std::invalid_argument("aao_step: empty candidate pool");
    }
    int best = 0;
    double best_mag = -1.0;
    for (std::size_t c = 0; c < pool.candidates.size(); ++c) {
        const auto &cand = pool.candidates[c];
        ParamCircuit extended = circuit;
        std::vector<int> targets =
            cand.target >= 0 ? std::vector<int>{cand.qubit, cand.target}
                             : std::vector<int>{cand.qubit};
        extended.nodes.emplace_back(
            GateOp(cand.kind, std::move(targets),
                   {ParamSlot::trainable(circuit.n_trainable)}));
        extended.n_trainable = circuit.n_trainable + 1;
        VectorXd theta_ext(theta.size() + 1);
        theta_ext << theta, 0.0;
        const GradientVector g = grad_param_shift(extended, theta_ext,
                                                  features, backend,
                                                  observable);
        const double mag = std::abs(g.values[circuit.n_trainable]);
        if (mag > best_mag) {
            best_mag = mag;
            best = static_cast<int>(c);
        }
    }
    const auto &cand = pool.candidates[best];
    ParamCircuit grown = circuit;
    std::vector<int> targets =
        cand.target >= 0 ? std::vector<int>{cand.qubit, cand.target}
                         : std::vector<int>{cand.qubit};
    grown.nodes.emplace_back(GateOp(cand.kind, std::move(targets),
                                    {ParamSlot::trainable(circuit.n_trainable)}));
    grown.n_trainable = circuit.n_trainable + 1;
    VectorXd theta_new(theta.size() + 1);
    theta_new << theta, 0.0;
    return {std::move(grown), std::move(theta_new)};
}

} // namespace qpie
