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
 * Circuit IR and the QPIE builders.
 *
 * A circuit is an ordered program of gates, mid-circuit measurements, and
 * conditional rotations drawn from a three-way pool. The builders produce
 * the symmetric embedding layer (Hadamard / Y-angle embedding / Hadamard),
 * the partial entanglement block (ring CNOTs, CRY/CYZ pairs, per-qubit R3,
 * cycling by layer index mod 3), and the full VQC with prediction and
 * switch ancillas.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qpie/gates.hpp"
#include "qpie/rng.hpp"

namespace qpie {

/// Three-way rotation selection keyed on a measured value.
/// one_hot permutes the {RX, RY, RZ} branch assignment; identity by default.
struct RotationPool {
    double tau1 = 1.0 / 3.0;
    double tau2 = 2.0 / 3.0;
    std::array<int, 3> branch_gate = {0, 1, 2}; // rows of the one-hot matrix

    RotationPool() = default;
    RotationPool(double t1, double t2, std::array<int, 3> perm = {0, 1, 2})
        : tau1(t1), tau2(t2), branch_gate(perm) {
        if (!(t1 > 0.0 && t1 < t2 && t2 < 1.0)) {
            throw std::invalid_argument(
                "rotation pool thresholds must satisfy 0 < tau1 < tau2 < 1");
        }
        std::array<bool, 3> seen = {false, false, false};
        for (int g : perm) {
            if (g < 0 || g > 2 || seen[g]) {
                throw std::invalid_argument(
                    "rotation pool one-hot rows must form a permutation");
            }
            seen[g] = true;
        }
    }
};

/// Select a rotation kind from the pool for a measured value in [0, 1].
inline GateKind evaluate_conditional(const RotationPool &pool, double meas) {
    if (!(meas >= 0.0 && meas <= 1.0)) {
        throw std::domain_error("conditional measurement value outside [0, 1]");
    }
    int branch;
    if (meas < pool.tau1) {
        branch = 0;
    } else if (meas < pool.tau2) {
        branch = 1;
    } else {
        branch = 2;
    }
    static constexpr GateKind kinds[3] = {GateKind::RX, GateKind::RY,
                                          GateKind::RZ};
    return kinds[pool.branch_gate[branch]];
}

struct MidMeasureNode {
    int qubit;
    int register_id;
};

struct ConditionalNode {
    int register_id;
    int target;
    ParamSlot param;
};

struct BarrierNode {};

using CircuitNode =
    std::variant<GateOp, MidMeasureNode, ConditionalNode, BarrierNode>;

/// An ordered gate program with declared parameter and feature widths.
struct ParamCircuit {
    int n_data_qubits = 0;
    int n_ancilla = 0;
    std::vector<CircuitNode> nodes;
    int n_trainable = 0;
    int n_features = 0;
    RotationPool pool;

    int num_qubits() const { return n_data_qubits + n_ancilla; }

    void validate() const {
        std::vector<bool> trainable_used(n_trainable, false);
        std::vector<bool> register_written;
        bool has_mid_measure = false;
        for (const CircuitNode &node : nodes) {
            if (const auto *gate = std::get_if<GateOp>(&node)) {
                for (int q : gate->targets) {
                    detail::check_qubit(q, num_qubits());
                }
                for (const ParamSlot &slot : gate->params) {
                    check_slot(slot, trainable_used);
                }
            } else if (const auto *mm = std::get_if<MidMeasureNode>(&node)) {
                detail::check_qubit(mm->qubit, num_qubits());
                if (mm->register_id < 0) {
                    throw std::invalid_argument("negative register id");
                }
                if (static_cast<std::size_t>(mm->register_id) >=
                    register_written.size()) {
                    register_written.resize(mm->register_id + 1, false);
                }
                register_written[mm->register_id] = true;
                has_mid_measure = true;
            } else if (const auto *cond =
                           std::get_if<ConditionalNode>(&node)) {
                detail::check_qubit(cond->target, num_qubits());
                if (cond->register_id < 0 ||
                    static_cast<std::size_t>(cond->register_id) >=
                        register_written.size() ||
                    !register_written[cond->register_id]) {
                    throw std::invalid_argument(
                        "conditional node references a register with no "
                        "preceding mid-measurement");
                }
                check_slot(cond->param, trainable_used);
            }
        }
        if (has_mid_measure && n_ancilla < 1) {
            throw std::invalid_argument(
                "mid-measurement requires at least one ancilla qubit");
        }
        for (int i = 0; i < n_trainable; ++i) {
            if (!trainable_used[i]) {
                throw std::invalid_argument("trainable parameter " +
                                            std::to_string(i) + " is unused");
            }
        }
    }

  private:
    void check_slot(const ParamSlot &slot,
                    std::vector<bool> &trainable_used) const {
        if (slot.kind == ParamSlot::Kind::Trainable) {
            if (slot.index < 0 || slot.index >= n_trainable) {
                throw std::invalid_argument("trainable index out of range");
            }
            trainable_used[slot.index] = true;
        } else if (slot.kind == ParamSlot::Kind::Embedded) {
            if (slot.index < 0 || slot.index >= n_features) {
                throw std::invalid_argument("feature index out of range");
            }
        }
    }
};

/// Symmetric embedding layer: H on each qubit, embedded RY, H again.
/// Features map onto [0, pi] rotation angles.
inline std::vector<CircuitNode> build_sel(int n_qubits, int feature_offset) {
    if (n_qubits < 1) {
        throw std::invalid_argument("build_sel: need at least one qubit");
    }
    std::vector<CircuitNode> nodes;
    nodes.reserve(3 * n_qubits);
    for (int q = 0; q < n_qubits; ++q) {
        nodes.emplace_back(GateOp(GateKind::H, {q}));
    }
    for (int q = 0; q < n_qubits; ++q) {
        nodes.emplace_back(GateOp(
            GateKind::RY, {q},
            {ParamSlot::embedded(feature_offset + q, 0.0, M_PI)}));
    }
    for (int q = 0; q < n_qubits; ++q) {
        nodes.emplace_back(GateOp(GateKind::H, {q}));
    }
    return nodes;
}

/**
 * Partial entanglement block over the data qubits only.
 *
 * Layer index mod 3 selects the block type:
 *   0 - ring of CNOT(q, q+1 mod n)
 *   1 - controlled rotations over the same ring pairs, CRY on even
 *       pair index and CRY+CRZ (the CYZ composite) on odd
 *   2 - an R3 gate per data qubit
 * Fresh trainable slots are allocated starting at `trainable_offset`;
 * the updated offset is written back.
 */
inline std::vector<CircuitNode> build_ppel(int n_data, int layers,
                                           int &trainable_offset) {
    if (n_data < 2) {
        throw std::invalid_argument("build_ppel: need at least two data qubits");
    }
    if (layers < 1) {
        throw std::invalid_argument("build_ppel: need at least one layer");
    }
    std::vector<CircuitNode> nodes;
    for (int layer = 0; layer < layers; ++layer) {
        const int flag = layer % 3;
        if (flag == 0) {
            for (int q = 0; q < n_data; ++q) {
                nodes.emplace_back(
                    GateOp(GateKind::CNOT, {q, (q + 1) % n_data}));
            }
        } else if (flag == 1) {
            for (int q = 0; q < n_data; ++q) {
                const int control = q;
                const int target = (q + 1) % n_data;
                if (q % 2 == 0) {
                    nodes.emplace_back(GateOp(
                        GateKind::CRY, {control, target},
                        {ParamSlot::trainable(trainable_offset++)}));
                } else {
                    nodes.emplace_back(GateOp(
                        GateKind::CRY, {control, target},
                        {ParamSlot::trainable(trainable_offset++)}));
                    nodes.emplace_back(GateOp(
                        GateKind::CRZ, {control, target},
                        {ParamSlot::trainable(trainable_offset++)}));
                }
            }
        } else {
            for (int q = 0; q < n_data; ++q) {
                nodes.emplace_back(GateOp(
                    GateKind::R3, {q},
                    {ParamSlot::trainable(trainable_offset++),
                     ParamSlot::trainable(trainable_offset++),
                     ParamSlot::trainable(trainable_offset++)}));
            }
        }
    }
    return nodes;
}

inline int prediction_ancillas(int n_classes) {
    if (n_classes < 2) {
        throw std::invalid_argument("need at least two classes");
    }
    const int n = static_cast<int>(std::ceil(std::log2(n_classes)));
    return n < 1 ? 1 : n;
}

/**
 * Full QPIE circuit: SEL, PPEL block, mid-measurement of the switch
 * ancilla, one pool-conditioned rotation per data qubit, and the terminal
 * Hadamard layer restoring embedding symmetry.
 *
 * Qubit layout: data [0, n_data), prediction ancillas, switch ancilla last.
 */
inline ParamCircuit build_qpie_vqc(int n_data, int n_classes,
                                   const RotationPool &pool, int ppel_layers) {
    if (n_data < 2) {
        throw std::invalid_argument("build_qpie_vqc: need >= 2 data qubits");
    }
    ParamCircuit circuit;
    circuit.n_data_qubits = n_data;
    circuit.n_ancilla = prediction_ancillas(n_classes) + 1;
    circuit.n_features = n_data;
    circuit.pool = pool;

    const int switch_qubit = circuit.num_qubits() - 1;
    int trainable = 0;

    for (CircuitNode &node : build_sel(n_data, 0)) {
        circuit.nodes.push_back(std::move(node));
    }
    for (CircuitNode &node : build_ppel(n_data, ppel_layers, trainable)) {
        circuit.nodes.push_back(std::move(node));
    }
    circuit.nodes.emplace_back(MidMeasureNode{switch_qubit, 0});
    for (int q = 0; q < n_data; ++q) {
        circuit.nodes.emplace_back(
            ConditionalNode{0, q, ParamSlot::trainable(trainable++)});
    }
    for (int q = 0; q < n_data; ++q) {
        circuit.nodes.emplace_back(GateOp(GateKind::H, {q}));
    }
    circuit.n_trainable = trainable;
    circuit.validate();
    return circuit;
}

/// Seeded random circuit over the rotation vocabulary; no mid-measurement.
/// Gate parameters are fresh trainable slots up to `max_trainable`, then
/// fixed angles.
inline ParamCircuit random_circuit(std::uint64_t seed, int n_qubits,
                                   int n_gates, int max_trainable) {
    Rng rng(seed);
    ParamCircuit circuit;
    circuit.n_data_qubits = n_qubits;
    circuit.n_ancilla = 0;
    int trainable = 0;
    static constexpr GateKind pool_1q[] = {GateKind::H, GateKind::RX,
                                           GateKind::RY, GateKind::RZ,
                                           GateKind::R3};
    static constexpr GateKind pool_2q[] = {GateKind::CNOT, GateKind::CRY,
                                           GateKind::CRZ};
    for (int g = 0; g < n_gates; ++g) {
        const bool two_qubit = n_qubits >= 2 && rng.uniform() < 0.4;
        GateKind kind;
        std::vector<int> targets;
        if (two_qubit) {
            kind = pool_2q[rng.uniform_index(3)];
            const int c = static_cast<int>(rng.uniform_index(n_qubits));
            int t = static_cast<int>(rng.uniform_index(n_qubits - 1));
            if (t >= c) {
                ++t;
            }
            targets = {c, t};
        } else {
            kind = pool_1q[rng.uniform_index(5)];
            targets = {static_cast<int>(rng.uniform_index(n_qubits))};
        }
        std::vector<ParamSlot> slots;
        for (int p = 0; p < param_arity(kind); ++p) {
            if (trainable < max_trainable) {
                slots.push_back(ParamSlot::trainable(trainable++));
            } else {
                slots.push_back(ParamSlot::fixed(rng.uniform(-M_PI, M_PI)));
            }
        }
        circuit.nodes.emplace_back(GateOp(kind, std::move(targets),
                                          std::move(slots)));
    }
    circuit.n_trainable = trainable;
    circuit.validate();
    return circuit;
}

// --- serialization ---------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string slot_to_string(const ParamSlot &slot) {
    switch (slot.kind) {
    case ParamSlot::Kind::Trainable:
        return "t" + std::to_string(slot.index);
    case ParamSlot::Kind::Embedded:
        return "e" + std::to_string(slot.index) + ":" +
               format_double(slot.lo) + ":" + format_double(slot.hi);
    case ParamSlot::Kind::Fixed:
        return "f" + format_double(slot.value);
    }
    throw std::logic_error("unknown slot kind");
}

inline ParamSlot slot_from_string(const std::string &text) {
    if (text.empty()) {
        throw std::invalid_argument("empty parameter slot");
    }
    const std::string body = text.substr(1);
    switch (text[0]) {
    case 't':
        return ParamSlot::trainable(std::stoi(body));
    case 'e': {
        const std::size_t c1 = body.find(':');
        const std::size_t c2 = body.find(':', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw std::invalid_argument("malformed embedded slot: " + text);
        }
        return ParamSlot::embedded(std::stoi(body.substr(0, c1)),
                                   std::stod(body.substr(c1 + 1, c2 - c1 - 1)),
                                   std::stod(body.substr(c2 + 1)));
    }
    case 'f':
        return ParamSlot::fixed(std::stod(body));
    default:
        throw std::invalid_argument("unknown slot tag in: " + text);
    }
}

} // namespace detail

/// One record per node; lossless at full double precision.
inline std::string serialize_circuit(const ParamCircuit &circuit) {
    std::ostringstream out;
    out << "qpie-circuit v1\n";
    out << "qubits " << circuit.n_data_qubits << " " << circuit.n_ancilla
        << "\n";
    out << "params " << circuit.n_trainable << " " << circuit.n_features
        << "\n";
    out << "pool " << detail::format_double(circuit.pool.tau1) << " "
        << detail::format_double(circuit.pool.tau2) << " "
        << circuit.pool.branch_gate[0] << " " << circuit.pool.branch_gate[1]
        << " " << circuit.pool.branch_gate[2] << "\n";
    for (const CircuitNode &node : circuit.nodes) {
        if (const auto *gate = std::get_if<GateOp>(&node)) {
            out << "gate " << gate_name(gate->kind);
            for (int q : gate->targets) {
                out << " q" << q;
            }
            for (const ParamSlot &slot : gate->params) {
                out << " " << detail::slot_to_string(slot);
            }
            out << "\n";
        } else if (const auto *mm = std::get_if<MidMeasureNode>(&node)) {
            out << "measure q" << mm->qubit << " r" << mm->register_id << "\n";
        } else if (const auto *cond = std::get_if<ConditionalNode>(&node)) {
            out << "cond r" << cond->register_id << " q" << cond->target << " "
                << detail::slot_to_string(cond->param) << "\n";
        } else {
            out << "barrier\n";
        }
    }
    return out.str();
}

inline ParamCircuit parse_circuit(const std::string &text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "qpie-circuit v1") {
        throw std::invalid_argument("not a qpie-circuit v1 document");
    }
    ParamCircuit circuit;
    auto expect_int = [](std::istringstream &ls) {
        int v;
        if (!(ls >> v)) {
            throw std::invalid_argument("malformed circuit header");
        }
        return v;
    };
    auto strip_prefix = [](const std::string &tok, char prefix) {
        if (tok.empty() || tok[0] != prefix) {
            throw std::invalid_argument("expected token prefixed with '" +
                                        std::string(1, prefix) + "': " + tok);
        }
        return std::stoi(tok.substr(1));
    };
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "qubits") {
            circuit.n_data_qubits = expect_int(ls);
            circuit.n_ancilla = expect_int(ls);
        } else if (word == "params") {
            circuit.n_trainable = expect_int(ls);
            circuit.n_features = expect_int(ls);
        } else if (word == "pool") {
            double t1, t2;
            int b0, b1, b2;
            if (!(ls >> t1 >> t2 >> b0 >> b1 >> b2)) {
                throw std::invalid_argument("malformed pool record");
            }
            circuit.pool = RotationPool(t1, t2, {b0, b1, b2});
        } else if (word == "gate") {
            std::string name;
            ls >> name;
            const GateKind kind = parse_gate_name(name);
            std::vector<int> targets;
            std::vector<ParamSlot> slots;
            std::string tok;
            while (ls >> tok) {
                if (tok[0] == 'q' && targets.size() <
                                         static_cast<std::size_t>(
                                             target_arity(kind))) {
                    targets.push_back(strip_prefix(tok, 'q'));
                } else {
                    slots.push_back(detail::slot_from_string(tok));
                }
            }
            circuit.nodes.emplace_back(
                GateOp(kind, std::move(targets), std::move(slots)));
        } else if (word == "measure") {
            std::string qtok, rtok;
            ls >> qtok >> rtok;
            circuit.nodes.emplace_back(MidMeasureNode{
                strip_prefix(qtok, 'q'), strip_prefix(rtok, 'r')});
        } else if (word == "cond") {
            std::string rtok, qtok, stok;
            ls >> rtok >> qtok >> stok;
            circuit.nodes.emplace_back(
                ConditionalNode{strip_prefix(rtok, 'r'),
                                strip_prefix(qtok, 'q'),
                                detail::slot_from_string(stok)});
        } else if (word == "barrier") {
            circuit.nodes.emplace_back(BarrierNode{});
        } else {
            throw std::invalid_argument("unknown circuit record: " + word);
        }
    }
    circuit.validate();
    return circuit;
}

} // namespace qpie
