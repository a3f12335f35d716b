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
 * Pure-state and mixed-state representations with in-place gate kernels.
 *
 * Qubit 0 is the least significant bit of the basis-state index, so the
 * single-qubit stride for qubit q is 1 << q.
 */
#pragma once

#include <bit>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpie/rng.hpp"

namespace qpie {

inline constexpr int kMaxQubits = 24;

template <typename Scalar = double>
using ComplexT = std::complex<Scalar>;

template <typename Scalar = double>
using VectorT = Eigen::Matrix<ComplexT<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar = double>
using MatrixT = Eigen::Matrix<ComplexT<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar = double>
using Matrix2T = Eigen::Matrix<ComplexT<Scalar>, 2, 2>;

using Complex = ComplexT<double>;
using Matrix2 = Matrix2T<double>;

namespace detail {

template <typename Scalar>
bool is_unitary_2x2(const Matrix2T<Scalar> &u, Scalar tol) {
    const Matrix2T<Scalar> residual =
        u.adjoint() * u - Matrix2T<Scalar>::Identity();
    return residual.cwiseAbs().maxCoeff() < tol;
}

inline void check_qubit(int q, int n_qubits) {
    if (q < 0 || q >= n_qubits) {
        throw std::out_of_range("qubit index " + std::to_string(q) +
                                " out of range for " +
                                std::to_string(n_qubits) + " qubits");
    }
}

} // namespace detail

/**
 * Pure n-qubit state as a dense vector of 2^n complex amplitudes.
 */
template <typename Scalar = double>
class StateVectorT {
  public:
    explicit StateVectorT(int n_qubits)
        : n_qubits_(n_qubits),
          amps_(VectorT<Scalar>::Zero(std::size_t{1} << check_count(n_qubits))) {
        amps_[0] = ComplexT<Scalar>{1, 0};
    }

    static StateVectorT zero(int n_qubits) { return StateVectorT(n_qubits); }

    int num_qubits() const { return n_qubits_; }
    std::size_t size() const { return amps_.size(); }

    VectorT<Scalar> &amplitudes() { return amps_; }
    const VectorT<Scalar> &amplitudes() const { return amps_; }

    ComplexT<Scalar> &operator[](std::size_t i) { return amps_[i]; }
    const ComplexT<Scalar> &operator[](std::size_t i) const { return amps_[i]; }

    Scalar norm() const { return amps_.norm(); }

    /// Probability of measuring qubit q in |1>.
    Scalar prob_one(int q) const {
        detail::check_qubit(q, n_qubits_);
        const std::size_t bit = std::size_t{1} << q;
        Scalar p = 0;
        for (std::size_t i = 0; i < size(); ++i) {
            if (i & bit) {
                p += std::norm(amps_[i]);
            }
        }
        return p;
    }

    /// Project onto the given outcome of qubit q and renormalize.
    void project(int q, int outcome) {
        detail::check_qubit(q, n_qubits_);
        const std::size_t bit = std::size_t{1} << q;
        for (std::size_t i = 0; i < size(); ++i) {
            const bool one = (i & bit) != 0;
            if (one != (outcome != 0)) {
                amps_[i] = ComplexT<Scalar>{0, 0};
            }
        }
        const Scalar nrm = amps_.norm();
        if (nrm == Scalar{0}) {
            throw std::runtime_error("projection onto zero-probability outcome");
        }
        amps_ /= nrm;
    }

  private:
    static int check_count(int n) {
        if (n < 1 || n > kMaxQubits) {
            throw std::invalid_argument("qubit count " + std::to_string(n) +
                                        " outside supported range [1, " +
                                        std::to_string(kMaxQubits) + "]");
        }
        return n;
    }

    int n_qubits_;
    VectorT<Scalar> amps_;
};

/**
 * Mixed n-qubit state as a dense 2^n x 2^n matrix.
 */
template <typename Scalar = double>
class DensityMatrixT {
  public:
    explicit DensityMatrixT(int n_qubits)
        : n_qubits_(n_qubits),
          rho_(MatrixT<Scalar>::Zero(std::size_t{1} << n_qubits,
                                     std::size_t{1} << n_qubits)) {
        if (n_qubits < 1 || n_qubits > kMaxQubits / 2 + 2) {
            throw std::invalid_argument("density-matrix qubit count " +
                                        std::to_string(n_qubits) +
                                        " outside supported range");
        }
        rho_(0, 0) = ComplexT<Scalar>{1, 0};
    }

    static DensityMatrixT zero(int n_qubits) { return DensityMatrixT(n_qubits); }

    /// |psi><psi| projector of a pure state.
    static DensityMatrixT from_state(const StateVectorT<Scalar> &psi) {
        DensityMatrixT rho(psi.num_qubits());
        rho.rho_ = psi.amplitudes() * psi.amplitudes().adjoint();
        return rho;
    }

    int num_qubits() const { return n_qubits_; }
    std::size_t dim() const { return rho_.rows(); }

    MatrixT<Scalar> &entries() { return rho_; }
    const MatrixT<Scalar> &entries() const { return rho_; }

    Scalar trace() const { return rho_.trace().real(); }

    Scalar prob_one(int q) const {
        detail::check_qubit(q, n_qubits_);
        const std::size_t bit = std::size_t{1} << q;
        Scalar p = 0;
        for (std::size_t i = 0; i < dim(); ++i) {
            if (i & bit) {
                p += rho_(i, i).real();
            }
        }
        return p;
    }

  private:
    int n_qubits_;
    MatrixT<Scalar> rho_;
};

using StateVector = StateVectorT<double>;
using DensityMatrix = DensityMatrixT<double>;

inline StateVector new_zero_state(int n_qubits) {
    return StateVector::zero(n_qubits);
}

/// Apply a 2x2 unitary to qubit q, in place.
template <typename Scalar>
void apply_1q(StateVectorT<Scalar> &state, const Matrix2T<Scalar> &u, int q) {
    detail::check_qubit(q, state.num_qubits());
    if (!detail::is_unitary_2x2(u, Scalar(1e-10))) {
        throw std::invalid_argument("apply_1q: matrix is not unitary");
    }
    auto &amps = state.amplitudes();
    const std::size_t stride = std::size_t{1} << q;
    const std::size_t dim = state.size();
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const ComplexT<Scalar> a0 = amps[i];
            const ComplexT<Scalar> a1 = amps[i + stride];
            amps[i] = u(0, 0) * a0 + u(0, 1) * a1;
            amps[i + stride] = u(1, 0) * a0 + u(1, 1) * a1;
        }
    }
}

/// Apply a 2x2 unitary to the target, conditioned on the control bit.
template <typename Scalar>
void apply_controlled(StateVectorT<Scalar> &state, const Matrix2T<Scalar> &u,
                      int control, int target) {
    detail::check_qubit(control, state.num_qubits());
    detail::check_qubit(target, state.num_qubits());
    if (control == target) {
        throw std::invalid_argument("apply_controlled: control equals target");
    }
    if (!detail::is_unitary_2x2(u, Scalar(1e-10))) {
        throw std::invalid_argument("apply_controlled: matrix is not unitary");
    }
    auto &amps = state.amplitudes();
    const std::size_t cbit = std::size_t{1} << control;
    const std::size_t tbit = std::size_t{1} << target;
    const std::size_t dim = state.size();
    for (std::size_t i = 0; i < dim; ++i) {
        if ((i & cbit) && !(i & tbit)) {
            const ComplexT<Scalar> a0 = amps[i];
            const ComplexT<Scalar> a1 = amps[i | tbit];
            amps[i] = u(0, 0) * a0 + u(0, 1) * a1;
            amps[i | tbit] = u(1, 0) * a0 + u(1, 1) * a1;
        }
    }
}

/// Apply an arbitrary (possibly non-unitary) 2x2 operator to qubit q.
/// Used by derivative sweeps; skips the unitarity check.
template <typename Scalar>
void apply_1q_generic(StateVectorT<Scalar> &state, const Matrix2T<Scalar> &m,
                      int q) {
    detail::check_qubit(q, state.num_qubits());
    auto &amps = state.amplitudes();
    const std::size_t stride = std::size_t{1} << q;
    const std::size_t dim = state.size();
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const ComplexT<Scalar> a0 = amps[i];
            const ComplexT<Scalar> a1 = amps[i + stride];
            amps[i] = m(0, 0) * a0 + m(0, 1) * a1;
            amps[i + stride] = m(1, 0) * a0 + m(1, 1) * a1;
        }
    }
}

/// Apply P1 (x) m: zero the control-0 subspace, m on the control-1 block.
/// This is the derivative of a controlled rotation w.r.t. its angle.
template <typename Scalar>
void apply_controlled_generator(StateVectorT<Scalar> &state,
                                const Matrix2T<Scalar> &m, int control,
                                int target) {
    detail::check_qubit(control, state.num_qubits());
    detail::check_qubit(target, state.num_qubits());
    if (control == target) {
        throw std::invalid_argument("control equals target");
    }
    auto &amps = state.amplitudes();
    const std::size_t cbit = std::size_t{1} << control;
    const std::size_t tbit = std::size_t{1} << target;
    const std::size_t dim = state.size();
    for (std::size_t i = 0; i < dim; ++i) {
        if (!(i & cbit)) {
            amps[i] = ComplexT<Scalar>{0, 0};
        } else if (!(i & tbit)) {
            const ComplexT<Scalar> a0 = amps[i];
            const ComplexT<Scalar> a1 = amps[i | tbit];
            amps[i] = m(0, 0) * a0 + m(0, 1) * a1;
            amps[i | tbit] = m(1, 0) * a0 + m(1, 1) * a1;
        }
    }
}

namespace detail {

/// rho <- (U (x) I) rho on the row index of qubit q (no unitarity check).
template <typename Scalar>
void left_multiply_1q(MatrixT<Scalar> &rho, const Matrix2T<Scalar> &u, int q) {
    const std::size_t stride = std::size_t{1} << q;
    const std::size_t dim = rho.rows();
    for (std::size_t col = 0; col < dim; ++col) {
        for (std::size_t base = 0; base < dim; base += 2 * stride) {
            for (std::size_t i = base; i < base + stride; ++i) {
                const ComplexT<Scalar> a0 = rho(i, col);
                const ComplexT<Scalar> a1 = rho(i + stride, col);
                rho(i, col) = u(0, 0) * a0 + u(0, 1) * a1;
                rho(i + stride, col) = u(1, 0) * a0 + u(1, 1) * a1;
            }
        }
    }
}

/// rho <- rho (U^dagger) on the column index of qubit q.
template <typename Scalar>
void right_multiply_1q_dagger(MatrixT<Scalar> &rho, const Matrix2T<Scalar> &u,
                              int q) {
    const Matrix2T<Scalar> udag = u.adjoint();
    const std::size_t stride = std::size_t{1} << q;
    const std::size_t dim = rho.rows();
    for (std::size_t row = 0; row < dim; ++row) {
        for (std::size_t base = 0; base < dim; base += 2 * stride) {
            for (std::size_t j = base; j < base + stride; ++j) {
                const ComplexT<Scalar> a0 = rho(row, j);
                const ComplexT<Scalar> a1 = rho(row, j + stride);
                rho(row, j) = a0 * udag(0, 0) + a1 * udag(1, 0);
                rho(row, j + stride) = a0 * udag(0, 1) + a1 * udag(1, 1);
            }
        }
    }
}

} // namespace detail

/// rho' = U rho U^dagger on qubit q.
template <typename Scalar>
void apply_1q_dm(DensityMatrixT<Scalar> &rho, const Matrix2T<Scalar> &u, int q) {
    detail::check_qubit(q, rho.num_qubits());
    if (!detail::is_unitary_2x2(u, Scalar(1e-10))) {
        throw std::invalid_argument("apply_1q_dm: matrix is not unitary");
    }
    detail::left_multiply_1q(rho.entries(), u, q);
    detail::right_multiply_1q_dagger(rho.entries(), u, q);
}

/// Controlled-U conjugation of a density matrix.
template <typename Scalar>
void apply_controlled_dm(DensityMatrixT<Scalar> &rho, const Matrix2T<Scalar> &u,
                         int control, int target) {
    detail::check_qubit(control, rho.num_qubits());
    detail::check_qubit(target, rho.num_qubits());
    if (control == target) {
        throw std::invalid_argument("apply_controlled_dm: control equals target");
    }
    auto &m = rho.entries();
    const std::size_t cbit = std::size_t{1} << control;
    const std::size_t tbit = std::size_t{1} << target;
    const std::size_t dim = m.rows();
    // Left multiply on the row index.
    for (std::size_t col = 0; col < dim; ++col) {
        for (std::size_t i = 0; i < dim; ++i) {
            if ((i & cbit) && !(i & tbit)) {
                const ComplexT<Scalar> a0 = m(i, col);
                const ComplexT<Scalar> a1 = m(i | tbit, col);
                m(i, col) = u(0, 0) * a0 + u(0, 1) * a1;
                m(i | tbit, col) = u(1, 0) * a0 + u(1, 1) * a1;
            }
        }
    }
    // Right multiply by the adjoint on the column index.
    const Matrix2T<Scalar> udag = u.adjoint();
    for (std::size_t row = 0; row < dim; ++row) {
        for (std::size_t j = 0; j < dim; ++j) {
            if ((j & cbit) && !(j & tbit)) {
                const ComplexT<Scalar> a0 = m(row, j);
                const ComplexT<Scalar> a1 = m(row, j | tbit);
                m(row, j) = a0 * udag(0, 0) + a1 * udag(1, 0);
                m(row, j | tbit) = a0 * udag(0, 1) + a1 * udag(1, 1);
            }
        }
    }
}

namespace detail {

inline void check_z_qubits(const std::vector<int> &qubits, int n_qubits) {
    if (qubits.empty()) {
        throw std::invalid_argument("expectation_z: empty qubit list");
    }
    std::uint64_t seen = 0;
    for (int q : qubits) {
        check_qubit(q, n_qubits);
        const std::uint64_t bit = std::uint64_t{1} << q;
        if (seen & bit) {
            throw std::invalid_argument("expectation_z: duplicate qubit index");
        }
        seen |= bit;
    }
}

inline std::uint64_t z_mask(const std::vector<int> &qubits) {
    std::uint64_t mask = 0;
    for (int q : qubits) {
        mask |= std::uint64_t{1} << q;
    }
    return mask;
}

} // namespace detail

/// <Z ... Z> on the listed qubits of a pure state.
template <typename Scalar>
Scalar expectation_z(const StateVectorT<Scalar> &state,
                     const std::vector<int> &qubits) {
    detail::check_z_qubits(qubits, state.num_qubits());
    const std::uint64_t mask = detail::z_mask(qubits);
    Scalar acc = 0;
    for (std::size_t i = 0; i < state.size(); ++i) {
        const Scalar p = std::norm(state[i]);
        acc += (std::popcount(i & mask) & 1) ? -p : p;
    }
    return acc;
}

/// <Z ... Z> on the listed qubits of a density matrix.
template <typename Scalar>
Scalar expectation_z(const DensityMatrixT<Scalar> &rho,
                     const std::vector<int> &qubits) {
    detail::check_z_qubits(qubits, rho.num_qubits());
    const std::uint64_t mask = detail::z_mask(qubits);
    Scalar acc = 0;
    for (std::size_t i = 0; i < rho.dim(); ++i) {
        const Scalar p = rho.entries()(i, i).real();
        acc += (std::popcount(i & mask) & 1) ? -p : p;
    }
    return acc;
}

/// Seeded Born-rule sampling. Keys are bitstrings with qubit 0 rightmost.
template <typename Scalar>
std::map<std::string, std::uint64_t>
sample_bitstrings(const StateVectorT<Scalar> &state, std::uint64_t shots,
                  std::uint64_t seed) {
    if (shots < 1) {
        throw std::invalid_argument("sample_bitstrings: shots must be >= 1");
    }
    std::vector<Scalar> cdf(state.size());
    Scalar acc = 0;
    for (std::size_t i = 0; i < state.size(); ++i) {
        acc += std::norm(state[i]);
        cdf[i] = acc;
    }
    Rng rng(seed);
    std::vector<std::uint64_t> counts(state.size(), 0);
    for (std::uint64_t s = 0; s < shots; ++s) {
        const Scalar u = static_cast<Scalar>(rng.uniform()) * acc;
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        const std::size_t idx =
            std::min<std::size_t>(it - cdf.begin(), state.size() - 1);
        ++counts[idx];
    }
    std::map<std::string, std::uint64_t> hist;
    const int n = state.num_qubits();
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) {
            continue;
        }
        std::string bits(n, '0');
        for (int q = 0; q < n; ++q) {
            if (i & (std::size_t{1} << q)) {
                bits[n - 1 - q] = '1';
            }
        }
        hist.emplace(std::move(bits), counts[i]);
    }
    return hist;
}

} // namespace qpie
