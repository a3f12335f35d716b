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
 * Circuit execution over three backends: analytic statevector, shot-sampled
 * statevector, and noisy density matrix.
 *
 * Every run also records a resolved trace: the flat gate sequence after
 * binding parameter slots and fixing conditional branches. Gradient engines
 * re-execute that trace so that shifted evaluations reuse the forward
 * pass's branch decisions.
 */
#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpie/circuit.hpp"
#include "qpie/gates.hpp"
#include "qpie/kernel.hpp"
#include "qpie/rng.hpp"

namespace qpie {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Qubits carrying a Pauli-Z factor of one observable.
using Observable = std::vector<int>;

enum class BackendKind { AnalyticSV, SampledSV, NoisyDM };

/// Per-gate noise: depolarizing, bit-flip, phase-flip on every touched qubit.
struct NoiseSpec {
    double p_depol = 0.0;
    double p_bitflip = 0.0;
    double p_phaseflip = 0.0;

    bool any() const { return p_depol > 0 || p_bitflip > 0 || p_phaseflip > 0; }

    void validate() const {
        for (double p : {p_depol, p_bitflip, p_phaseflip}) {
            if (!(p >= 0.0 && p <= 1.0)) {
                throw std::invalid_argument(
                    "noise probabilities must lie in [0, 1]");
            }
        }
    }
};

struct Backend {
    BackendKind kind = BackendKind::AnalyticSV;
    std::uint64_t shots = 0; // 0 means the 2^n default
    std::uint64_t seed = 0;
    NoiseSpec noise;

    static Backend analytic() { return Backend{}; }

    static Backend sampled(std::uint64_t shots, std::uint64_t seed) {
        Backend b;
        b.kind = BackendKind::SampledSV;
        b.shots = shots;
        b.seed = seed;
        return b;
    }

    static Backend noisy(const NoiseSpec &noise, std::uint64_t seed) {
        noise.validate();
        Backend b;
        b.kind = BackendKind::NoisyDM;
        b.noise = noise;
        b.seed = seed;
        return b;
    }

    std::uint64_t effective_shots(int n_qubits) const {
        return shots != 0 ? shots : (std::uint64_t{1} << n_qubits);
    }
};

/// One entry of the resolved trace. Either a gate with bound slots or a
/// frozen projection from a sampled mid-measurement.
struct ResolvedOp {
    GateKind kind = GateKind::H;
    std::vector<int> targets;
    std::vector<ParamSlot> slots;
    bool projection = false;
    int proj_qubit = -1;
    int proj_outcome = 0;
};

struct ResolvedCircuit {
    int n_qubits = 0;
    std::vector<ResolvedOp> ops;
};

struct RunResult {
    std::vector<double> expectations;
    std::vector<double> registers;
    std::map<std::string, std::uint64_t> samples;
    bool has_samples = false;
    ResolvedCircuit trace;
};

/// Depolarizing, bit-flip, and phase-flip channels composed on one qubit.
inline void apply_channel(DensityMatrix &rho, const NoiseSpec &spec, int q) {
    spec.validate();
    using M = Eigen::MatrixXcd;
    auto conjugated = [&](const Matrix2 &pauli) {
        DensityMatrix tmp = rho;
        apply_1q_dm(tmp, pauli, q);
        return tmp.entries();
    };
    if (spec.p_depol > 0) {
        // (1-p) rho + p (I/2 (x) tr_q rho); the partial-trace replacement
        // equals the uniform Pauli twirl on qubit q.
        const M x = conjugated(gates::pauli_x());
        const M y = conjugated(gates::pauli_y());
        const M z = conjugated(gates::pauli_z());
        rho.entries() = (1.0 - spec.p_depol) * rho.entries() +
                        (spec.p_depol / 4.0) * (rho.entries() + x + y + z);
    }
    if (spec.p_bitflip > 0) {
        const M x = conjugated(gates::pauli_x());
        rho.entries() =
            (1.0 - spec.p_bitflip) * rho.entries() + spec.p_bitflip * x;
    }
    if (spec.p_phaseflip > 0) {
        const M z = conjugated(gates::pauli_z());
        rho.entries() =
            (1.0 - spec.p_phaseflip) * rho.entries() + spec.p_phaseflip * z;
    }
}

namespace detail {

inline double resolve_slot(const ParamSlot &slot, const VectorXd &theta,
                           const VectorXd &features) {
    switch (slot.kind) {
    case ParamSlot::Kind::Trainable:
        if (slot.index >= theta.size()) {
            throw std::invalid_argument("theta vector too short");
        }
        return theta[slot.index];
    case ParamSlot::Kind::Embedded: {
        if (slot.index >= features.size()) {
            throw std::invalid_argument("feature vector too short");
        }
        double f = features[slot.index];
        f = f < 0.0 ? 0.0 : (f > 1.0 ? 1.0 : f);
        return slot.lo + f * (slot.hi - slot.lo);
    }
    case ParamSlot::Kind::Fixed:
        return slot.value;
    }
    throw std::logic_error("unknown slot kind");
}

/// A shift applied to a single parameter occurrence during re-execution.
struct SlotShift {
    std::size_t op = 0;
    int slot = 0;
    double delta = 0.0;
};

template <typename State>
void apply_resolved_gate(State &state, GateKind kind,
                         const std::vector<int> &targets,
                         const std::vector<double> &values);

template <>
inline void apply_resolved_gate<StateVector>(StateVector &state, GateKind kind,
                                             const std::vector<int> &targets,
                                             const std::vector<double> &values) {
    // CYZ needs no special case: its target block is the RZ.RY composite.
    const Matrix2 block = gate_block(kind, values);
    if (is_controlled(kind)) {
        apply_controlled(state, block, targets[0], targets[1]);
    } else {
        apply_1q(state, block, targets[0]);
    }
}

template <>
inline void apply_resolved_gate<DensityMatrix>(DensityMatrix &state,
                                               GateKind kind,
                                               const std::vector<int> &targets,
                                               const std::vector<double> &values) {
    const Matrix2 block = gate_block(kind, values);
    if (is_controlled(kind)) {
        apply_controlled_dm(state, block, targets[0], targets[1]);
    } else {
        apply_1q_dm(state, block, targets[0]);
    }
}

inline std::vector<double>
resolved_values(const ResolvedOp &op, const VectorXd &theta,
                const VectorXd &features,
                const std::vector<SlotShift> &shifts, std::size_t op_index) {
    std::vector<double> values(op.slots.size());
    for (std::size_t p = 0; p < op.slots.size(); ++p) {
        values[p] = resolve_slot(op.slots[p], theta, features);
    }
    for (const SlotShift &shift : shifts) {
        if (shift.op == op_index) {
            values[shift.slot] += shift.delta;
        }
    }
    return values;
}

} // namespace detail

/// Re-execute a resolved trace (branches and projections frozen) and return
/// the analytic expectations. Used by the gradient engines.
inline std::vector<double>
execute_resolved(const ResolvedCircuit &trace, const VectorXd &theta,
                 const VectorXd &features, const Backend &backend,
                 const std::vector<Observable> &observables,
                 const std::vector<detail::SlotShift> &shifts = {}) {
    std::vector<double> expectations;
    expectations.reserve(observables.size());
    if (backend.kind == BackendKind::NoisyDM) {
        DensityMatrix rho(trace.n_qubits);
        for (std::size_t i = 0; i < trace.ops.size(); ++i) {
            const ResolvedOp &op = trace.ops[i];
            if (op.projection) {
                continue; // projections only arise on sampled backends
            }
            detail::apply_resolved_gate(
                rho, op.kind, op.targets,
                detail::resolved_values(op, theta, features, shifts, i));
            if (backend.noise.any()) {
                for (int q : op.targets) {
                    apply_channel(rho, backend.noise, q);
                }
            }
        }
        for (const Observable &obs : observables) {
            expectations.push_back(expectation_z(rho, obs));
        }
        return expectations;
    }
    StateVector psi(trace.n_qubits);
    for (std::size_t i = 0; i < trace.ops.size(); ++i) {
        const ResolvedOp &op = trace.ops[i];
        if (op.projection) {
            psi.project(op.proj_qubit, op.proj_outcome);
            continue;
        }
        detail::apply_resolved_gate(
            psi, op.kind, op.targets,
            detail::resolved_values(op, theta, features, shifts, i));
    }
    if (backend.kind == BackendKind::SampledSV) {
        const auto hist = sample_bitstrings(
            psi, backend.effective_shots(trace.n_qubits), backend.seed);
        const double shots =
            static_cast<double>(backend.effective_shots(trace.n_qubits));
        for (const Observable &obs : observables) {
            double acc = 0;
            for (const auto &[bits, count] : hist) {
                int parity = 0;
                for (int q : obs) {
                    if (bits[bits.size() - 1 - q] == '1') {
                        parity ^= 1;
                    }
                }
                acc += (parity ? -1.0 : 1.0) * static_cast<double>(count);
            }
            expectations.push_back(acc / shots);
        }
    } else {
        for (const Observable &obs : observables) {
            expectations.push_back(expectation_z(psi, obs));
        }
    }
    return expectations;
}

/**
 * Execute a circuit: resolve slots, walk the node list, evaluate
 * mid-measurements and pool conditionals, and compute the observables.
 *
 * Mid-measurement semantics per backend:
 *  - AnalyticSV / NoisyDM: the register takes the exact outcome-1
 *    probability; the state is not collapsed.
 *  - SampledSV: the register takes the empirical outcome-1 frequency over
 *    the backend's shots, and the state is projected onto the majority
 *    outcome. The projection is recorded in the trace.
 */
inline RunResult run(const ParamCircuit &circuit, const VectorXd &theta,
                     const VectorXd &features, const Backend &backend,
                     const std::vector<Observable> &observables) {
    if (theta.size() != circuit.n_trainable) {
        throw std::invalid_argument("theta length does not match circuit");
    }
    if (features.size() != circuit.n_features) {
        throw std::invalid_argument("feature length does not match circuit");
    }
    const int n = circuit.num_qubits();
    RunResult result;
    result.trace.n_qubits = n;

    StateVector psi(n);
    DensityMatrix rho(1);
    const bool dm = backend.kind == BackendKind::NoisyDM;
    if (dm) {
        rho = DensityMatrix(n);
    }
    Rng rng(backend.seed);

    auto apply_gate = [&](GateKind kind, const std::vector<int> &targets,
                          const std::vector<ParamSlot> &slots) {
        std::vector<double> values(slots.size());
        for (std::size_t p = 0; p < slots.size(); ++p) {
            values[p] = detail::resolve_slot(slots[p], theta, features);
        }
        if (dm) {
            detail::apply_resolved_gate(rho, kind, targets, values);
            if (backend.noise.any()) {
                for (int q : targets) {
                    apply_channel(rho, backend.noise, q);
                }
            }
        } else {
            detail::apply_resolved_gate(psi, kind, targets, values);
        }
        ResolvedOp op;
        op.kind = kind;
        op.targets = targets;
        op.slots = slots;
        result.trace.ops.push_back(std::move(op));
    };

    for (const CircuitNode &node : circuit.nodes) {
        if (const auto *gate = std::get_if<GateOp>(&node)) {
            apply_gate(gate->kind, gate->targets, gate->params);
        } else if (const auto *mm = std::get_if<MidMeasureNode>(&node)) {
            const double p1 = dm ? rho.prob_one(mm->qubit)
                                 : psi.prob_one(mm->qubit);
            double meas = p1;
            if (backend.kind == BackendKind::SampledSV) {
                const std::uint64_t shots = backend.effective_shots(n);
                std::uint64_t ones = 0;
                for (std::uint64_t s = 0; s < shots; ++s) {
                    if (rng.uniform() < p1) {
                        ++ones;
                    }
                }
                meas = static_cast<double>(ones) / static_cast<double>(shots);
                const int outcome = meas >= 0.5 ? 1 : 0;
                psi.project(mm->qubit, outcome);
                ResolvedOp op;
                op.projection = true;
                op.proj_qubit = mm->qubit;
                op.proj_outcome = outcome;
                result.trace.ops.push_back(std::move(op));
            }
            if (static_cast<std::size_t>(mm->register_id) >=
                result.registers.size()) {
                result.registers.resize(mm->register_id + 1, -1.0);
            }
            result.registers[mm->register_id] = meas;
        } else if (const auto *cond = std::get_if<ConditionalNode>(&node)) {
            if (static_cast<std::size_t>(cond->register_id) >=
                    result.registers.size() ||
                result.registers[cond->register_id] < 0.0) {
                throw std::runtime_error(
                    "conditional node evaluated before its register was set");
            }
            const GateKind kind = evaluate_conditional(
                circuit.pool, result.registers[cond->register_id]);
            apply_gate(kind, {cond->target}, {cond->param});
        }
        // Barrier nodes are structural only.
    }

    if (backend.kind == BackendKind::SampledSV) {
        const std::uint64_t shots = backend.effective_shots(n);
        result.samples = sample_bitstrings(psi, shots, rng.raw());
        result.has_samples = true;
        const double total = static_cast<double>(shots);
        for (const Observable &obs : observables) {
            detail::check_z_qubits(obs, n);
            double acc = 0;
            for (const auto &[bits, count] : result.samples) {
                int parity = 0;
                for (int q : obs) {
                    if (bits[bits.size() - 1 - q] == '1') {
                        parity ^= 1;
                    }
                }
                acc += (parity ? -1.0 : 1.0) * static_cast<double>(count);
            }
            result.expectations.push_back(acc / total);
        }
    } else if (dm) {
        for (const Observable &obs : observables) {
            result.expectations.push_back(expectation_z(rho, obs));
        }
    } else {
        for (const Observable &obs : observables) {
            result.expectations.push_back(expectation_z(psi, obs));
        }
    }
    return result;
}

inline VectorXd softmax(const VectorXd &logits) {
    const double m = logits.maxCoeff();
    VectorXd e = (logits.array() - m).exp();
    return e / e.sum();
}

/// Map prediction-ancilla expectations through a linear head and softmax.
inline VectorXd decode_prediction(const RunResult &result, int n_classes,
                                  const MatrixXd &head_weights,
                                  const VectorXd &head_bias) {
    const int needed = prediction_ancillas(n_classes);
    if (static_cast<int>(result.expectations.size()) < needed) {
        throw std::invalid_argument(
            "decode_prediction: fewer expectations than prediction ancillas");
    }
    VectorXd e(result.expectations.size());
    for (std::size_t i = 0; i < result.expectations.size(); ++i) {
        e[i] = result.expectations[i];
    }
    return softmax(head_weights * e + head_bias);
}

/// Head-free decode: class logits score the alignment between the class's
/// bit pattern and the ancilla Z expectations.
inline VectorXd decode_prediction(const RunResult &result, int n_classes) {
    const int n_anc = prediction_ancillas(n_classes);
    if (static_cast<int>(result.expectations.size()) < n_anc) {
        throw std::invalid_argument(
            "decode_prediction: fewer expectations than prediction ancillas");
    }
    MatrixXd w = MatrixXd::Zero(n_classes, result.expectations.size());
    for (int c = 0; c < n_classes; ++c) {
        for (int k = 0; k < n_anc; ++k) {
            w(c, k) = ((c >> k) & 1) ? -1.0 : 1.0;
        }
    }
    return decode_prediction(result, n_classes, w,
                             VectorXd::Zero(n_classes));
}

/// RunResult as a structured-text record.
inline std::string serialize_result(const RunResult &result) {
    std::ostringstream out;
    out << "qpie-result v1\n";
    out << "expectations";
    for (double e : result.expectations) {
        out << " " << detail::format_double(e);
    }
    out << "\nregisters";
    for (double r : result.registers) {
        out << " " << detail::format_double(r);
    }
    out << "\n";
    if (result.has_samples) {
        for (const auto &[bits, count] : result.samples) {
            out << "count " << bits << " " << count << "\n";
        }
    }
    return out.str();
}

} // namespace qpie
