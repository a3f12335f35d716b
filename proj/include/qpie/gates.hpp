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
 * Gate vocabulary: parameterized matrix constructors and their analytic
 * parameter derivatives.
 *
 * The three-axis gate follows
 *   R3(theta, phi, lambda) = [[cos(t/2), -e^{i lambda} sin(t/2)],
 *                             [e^{i phi} sin(t/2), e^{i(phi+lambda)} cos(t/2)]]
 * which differs from the RZ.RY.RZ Euler form by a global phase only.
 */
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpie/kernel.hpp"

namespace qpie {

enum class GateKind { H, X, RX, RY, RZ, R3, CNOT, CRY, CRZ, CYZ };

inline int param_arity(GateKind kind) {
    switch (kind) {
    case GateKind::H:
    case GateKind::X:
    case GateKind::CNOT:
        return 0;
    case GateKind::RX:
    case GateKind::RY:
    case GateKind::RZ:
    case GateKind::CRY:
    case GateKind::CRZ:
        return 1;
    case GateKind::CYZ:
        return 2;
    case GateKind::R3:
        return 3;
    }
    throw std::logic_error("unknown gate kind");
}

inline int target_arity(GateKind kind) {
    switch (kind) {
    case GateKind::CNOT:
    case GateKind::CRY:
    case GateKind::CRZ:
    case GateKind::CYZ:
        return 2;
    default:
        return 1;
    }
}

inline bool is_controlled(GateKind kind) { return target_arity(kind) == 2; }

inline const char *gate_name(GateKind kind) {
    switch (kind) {
    case GateKind::H:
        return "H";
    case GateKind::X:
        return "X";
    case GateKind::RX:
        return "RX";
    case GateKind::RY:
        return "RY";
    case GateKind::RZ:
        return "RZ";
    case GateKind::R3:
        return "R3";
    case GateKind::CNOT:
        return "CNOT";
    case GateKind::CRY:
        return "CRY";
    case GateKind::CRZ:
        return "CRZ";
    case GateKind::CYZ:
        return "CYZ";
    }
    throw std::logic_error("unknown gate kind");
}

inline GateKind parse_gate_name(const std::string &name) {
    for (GateKind k :
         {GateKind::H, GateKind::X, GateKind::RX, GateKind::RY, GateKind::RZ,
          GateKind::R3, GateKind::CNOT, GateKind::CRY, GateKind::CRZ,
          GateKind::CYZ}) {
        if (name == gate_name(k)) {
            return k;
        }
    }
    throw std::invalid_argument("unknown gate name: " + name);
}

namespace gates {

inline Matrix2 hadamard() {
    const double s = 1.0 / std::sqrt(2.0);
    Matrix2 m;
    m << s, s, s, -s;
    return m;
}

inline Matrix2 pauli_x() {
    Matrix2 m;
    m << 0, 1, 1, 0;
    return m;
}

inline Matrix2 pauli_y() {
    Matrix2 m;
    m << Complex{0, 0}, Complex{0, -1}, Complex{0, 1}, Complex{0, 0};
    return m;
}

inline Matrix2 pauli_z() {
    Matrix2 m;
    m << 1, 0, 0, -1;
    return m;
}

inline Matrix2 rx(double theta) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    Matrix2 m;
    m << Complex{c, 0}, Complex{0, -s}, Complex{0, -s}, Complex{c, 0};
    return m;
}

inline Matrix2 ry(double theta) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    Matrix2 m;
    m << c, -s, s, c;
    return m;
}

inline Matrix2 rz(double theta) {
    Matrix2 m = Matrix2::Zero();
    m(0, 0) = std::exp(Complex{0, -theta / 2});
    m(1, 1) = std::exp(Complex{0, theta / 2});
    return m;
}

inline Matrix2 r3(double theta, double phi, double lambda) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    Matrix2 m;
    m(0, 0) = c;
    m(0, 1) = -std::exp(Complex{0, lambda}) * s;
    m(1, 0) = std::exp(Complex{0, phi}) * s;
    m(1, 1) = std::exp(Complex{0, phi + lambda}) * c;
    return m;
}

inline Matrix2 drx(double theta) {
    const double c = std::cos(theta / 2) / 2, s = std::sin(theta / 2) / 2;
    Matrix2 m;
    m << Complex{-s, 0}, Complex{0, -c}, Complex{0, -c}, Complex{-s, 0};
    return m;
}

inline Matrix2 dry(double theta) {
    const double c = std::cos(theta / 2) / 2, s = std::sin(theta / 2) / 2;
    Matrix2 m;
    m << -s, -c, c, -s;
    return m;
}

inline Matrix2 drz(double theta) {
    Matrix2 m = Matrix2::Zero();
    m(0, 0) = Complex{0, -0.5} * std::exp(Complex{0, -theta / 2});
    m(1, 1) = Complex{0, 0.5} * std::exp(Complex{0, theta / 2});
    return m;
}

/// Entrywise dR3/dparam for param index 0 (theta), 1 (phi), 2 (lambda).
inline Matrix2 dr3(double theta, double phi, double lambda, int which) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    const Complex eil = std::exp(Complex{0, lambda});
    const Complex eip = std::exp(Complex{0, phi});
    const Complex eipl = std::exp(Complex{0, phi + lambda});
    Matrix2 m = Matrix2::Zero();
    switch (which) {
    case 0:
        m(0, 0) = -s / 2;
        m(0, 1) = -eil * (c / 2);
        m(1, 0) = eip * (c / 2);
        m(1, 1) = -eipl * (s / 2);
        break;
    case 1:
        m(1, 0) = Complex{0, 1} * eip * s;
        m(1, 1) = Complex{0, 1} * eipl * c;
        break;
    case 2:
        m(0, 1) = Complex{0, -1} * eil * s; // d/dl of -e^{il} s
        m(1, 1) = Complex{0, 1} * eipl * c;
        break;
    default:
        throw std::invalid_argument("dr3: parameter index out of range");
    }
    return m;
}

} // namespace gates

namespace detail {

inline void check_arity(GateKind kind, std::size_t n_params) {
    if (static_cast<int>(n_params) != param_arity(kind)) {
        throw std::invalid_argument(std::string("gate ") + gate_name(kind) +
                                    " expects " +
                                    std::to_string(param_arity(kind)) +
                                    " parameters, got " +
                                    std::to_string(n_params));
    }
}

/// Embed a 2x2 target block into the controlled 4x4 matrix.
/// Basis ordering is |target, control>: control is the low bit.
inline Eigen::MatrixXcd controlled_4x4(const Matrix2 &block) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(4, 4);
    // Control = bit 0, target = bit 1: control-on states are indices 1 and 3.
    m(1, 1) = block(0, 0);
    m(1, 3) = block(0, 1);
    m(3, 1) = block(1, 0);
    m(3, 3) = block(1, 1);
    return m;
}

} // namespace detail

/// The 2x2 matrix of a single-qubit kind, or the target block of a
/// controlled rotation.
inline Matrix2 gate_block(GateKind kind, const std::vector<double> &params) {
    detail::check_arity(kind, params.size());
    switch (kind) {
    case GateKind::H:
        return gates::hadamard();
    case GateKind::X:
    case GateKind::CNOT:
        return gates::pauli_x();
    case GateKind::RX:
        return gates::rx(params[0]);
    case GateKind::RY:
    case GateKind::CRY:
        return gates::ry(params[0]);
    case GateKind::RZ:
    case GateKind::CRZ:
        return gates::rz(params[0]);
    case GateKind::R3:
        return gates::r3(params[0], params[1], params[2]);
    case GateKind::CYZ:
        return (gates::rz(params[1]) * gates::ry(params[0])).eval();
    }
    throw std::logic_error("unknown gate kind");
}

/// Full unitary of the gate: 2x2 for single-qubit kinds, 4x4 for controlled.
inline Eigen::MatrixXcd matrix_of(GateKind kind,
                                  const std::vector<double> &params) {
    const Matrix2 block = gate_block(kind, params);
    if (is_controlled(kind)) {
        return detail::controlled_4x4(block);
    }
    return block;
}

/// Entrywise derivative of the target block w.r.t. parameter `which`.
inline Matrix2 block_derivative(GateKind kind, const std::vector<double> &params,
                                int which) {
    detail::check_arity(kind, params.size());
    if (which < 0 || which >= param_arity(kind)) {
        throw std::invalid_argument("parameter index out of range");
    }
    switch (kind) {
    case GateKind::RX:
        return gates::drx(params[0]);
    case GateKind::RY:
    case GateKind::CRY:
        return gates::dry(params[0]);
    case GateKind::RZ:
    case GateKind::CRZ:
        return gates::drz(params[0]);
    case GateKind::R3:
        return gates::dr3(params[0], params[1], params[2], which);
    case GateKind::CYZ:
        if (which == 0) {
            return (gates::rz(params[1]) * gates::dry(params[0])).eval();
        }
        return (gates::drz(params[1]) * gates::ry(params[0])).eval();
    default:
        throw std::invalid_argument(std::string("gate ") + gate_name(kind) +
                                    " is not parameterized");
    }
}

/// Entrywise derivative of the full gate matrix.
inline Eigen::MatrixXcd param_derivative(GateKind kind,
                                         const std::vector<double> &params,
                                         int which) {
    const Matrix2 dblock = block_derivative(kind, params, which);
    if (is_controlled(kind)) {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(4, 4);
        m(1, 1) = dblock(0, 0);
        m(1, 3) = dblock(0, 1);
        m(3, 1) = dblock(1, 0);
        m(3, 3) = dblock(1, 1);
        return m;
    }
    return dblock;
}

/// Parameter binding of one gate-parameter slot.
struct ParamSlot {
    enum class Kind { Trainable, Embedded, Fixed };

    Kind kind = Kind::Fixed;
    int index = 0;      // theta index (Trainable) or feature index (Embedded)
    double lo = 0.0;    // Embedded target range
    double hi = 0.0;
    double value = 0.0; // Fixed angle in radians

    static ParamSlot trainable(int theta_index) {
        ParamSlot s;
        s.kind = Kind::Trainable;
        s.index = theta_index;
        return s;
    }

    static ParamSlot embedded(int feature_index, double lo, double hi) {
        ParamSlot s;
        s.kind = Kind::Embedded;
        s.index = feature_index;
        s.lo = lo;
        s.hi = hi;
        return s;
    }

    static ParamSlot fixed(double radians) {
        ParamSlot s;
        s.kind = Kind::Fixed;
        s.value = radians;
        return s;
    }
};

/// A gate instance: kind, qubit targets (control first for controlled
/// kinds), and one parameter slot per gate parameter.
struct GateOp {
    GateKind kind;
    std::vector<int> targets;
    std::vector<ParamSlot> params;

    GateOp(GateKind k, std::vector<int> t, std::vector<ParamSlot> p = {})
        : kind(k), targets(std::move(t)), params(std::move(p)) {
        if (static_cast<int>(targets.size()) != target_arity(kind)) {
            throw std::invalid_argument(std::string("gate ") + gate_name(kind) +
                                        " target count mismatch");
        }
        if (targets.size() == 2 && targets[0] == targets[1]) {
            throw std::invalid_argument("gate targets must be distinct");
        }
        detail::check_arity(kind, params.size());
    }
};

/// CYZ decomposed as CRY(theta_y) then CRZ(theta_z) on one control/target
/// pair. The paper-adjacent composite has no published matrix; this is the
/// minimal Y-then-Z reading.
inline std::array<GateOp, 2> cyz(double theta_y, double theta_z, int control = 0,
                                 int target = 1) {
    return {GateOp(GateKind::CRY, {control, target},
                   {ParamSlot::fixed(theta_y)}),
            GateOp(GateKind::CRZ, {control, target},
                   {ParamSlot::fixed(theta_z)})};
}

} // namespace qpie
