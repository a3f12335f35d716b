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
 * Empirical Fisher information analysis: score vectors, the rank-one-sum
 * Fisher estimate, its eigenvalue spectrum and binned spectral density, and
 * the classical-versus-hybrid spectrum comparison report.
 */
#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "qpie/data.hpp"
#include "qpie/engine.hpp"
#include "qpie/hybrid.hpp"

namespace qpie {

/// F = (1/N) sum_i g_i g_i^T over per-sample score rows.
inline Eigen::MatrixXd empirical_fim(const Eigen::MatrixXd &scores) {
    if (scores.rows() == 0 || scores.cols() == 0) {
        throw std::invalid_argument("empirical_fim: empty score matrix");
    }
    return (scores.transpose() * scores) / static_cast<double>(scores.rows());
}

/// Ascending eigenvalues of a symmetric Fisher estimate. Values below
/// -1e-9 indicate a broken estimate and throw; small negative round-off is
/// clipped to zero.
inline Eigen::VectorXd fim_eigenvalues(const Eigen::MatrixXd &fim) {
    if (fim.rows() != fim.cols()) {
        throw std::invalid_argument("fim_eigenvalues: matrix must be square");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(fim);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("fim_eigenvalues: eigensolver failed");
    }
    Eigen::VectorXd eigs = solver.eigenvalues();
    if (eigs.minCoeff() < -1e-9) {
        throw std::runtime_error(
            "fim_eigenvalues: estimate is not positive semidefinite");
    }
    for (int i = 0; i < eigs.size(); ++i) {
        if (eigs[i] < 0) {
            eigs[i] = 0;
        }
    }
    return eigs;
}

/// Normalized eigenvalue histogram: Count(lambda in bin) / Total over the
/// positive eigenvalues, 50 uniform bins spanning (0, lambda_max].
struct SpectralDensity {
    static constexpr int kBins = 50;
    double lambda_max = 0;
    std::vector<double> density; // sums to 1 when any positive eigenvalue
    std::vector<std::size_t> counts;
    std::size_t total = 0;
};

inline SpectralDensity spectral_density(const Eigen::VectorXd &eigenvalues) {
    SpectralDensity d;
    d.counts.assign(SpectralDensity::kBins, 0);
    d.density.assign(SpectralDensity::kBins, 0.0);
    for (int i = 0; i < eigenvalues.size(); ++i) {
        if (eigenvalues[i] > 0) {
            d.lambda_max = std::max(d.lambda_max, eigenvalues[i]);
        }
    }
    if (d.lambda_max == 0) {
        return d;
    }
    for (int i = 0; i < eigenvalues.size(); ++i) {
        const double v = eigenvalues[i];
        if (v <= 0) {
            continue;
        }
        int bin = static_cast<int>(v / d.lambda_max * SpectralDensity::kBins);
        if (bin >= SpectralDensity::kBins) {
            bin = SpectralDensity::kBins - 1; // lambda_max itself
        }
        ++d.counts[bin];
        ++d.total;
    }
    for (int b = 0; b < SpectralDensity::kBins; ++b) {
        d.density[b] = static_cast<double>(d.counts[b]) /
                       static_cast<double>(d.total);
    }
    return d;
}

// --- score vectors ----------------------------------------------------------

namespace detail {

inline void append_flat(std::vector<double> &out, const Eigen::MatrixXd &m) {
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            out.push_back(m(r, c));
        }
    }
}

} // namespace detail

/// Score of one sample under the hybrid model: the gradient of
/// ln p(label | x) over the flattened parameters (frontend, thetas, head),
/// evaluated without dropout.
inline Eigen::VectorXd hybrid_score(const HybridModel &model,
                                    const Eigen::VectorXd &x, int label,
                                    const Backend &backend) {
    HybridForwardCache cache;
    hybrid_forward(model, x, backend, false, nullptr, &cache);
    HybridGrads grads(model);
    hybrid_backward(model, cache, label, backend, grads);
    std::vector<double> flat;
    for (int l = 0; l < kDenseLayers; ++l) {
        detail::append_flat(flat, grads.frontend.weights[l]);
        detail::append_flat(flat, grads.frontend.biases[l]);
    }
    for (const VectorXd &g : grads.thetas) {
        detail::append_flat(flat, g);
    }
    detail::append_flat(flat, grads.head_weights);
    detail::append_flat(flat, grads.head_bias);
    // hybrid_backward accumulates d(cross-entropy); the score is its negative.
    Eigen::VectorXd score(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
        score[static_cast<int>(i)] = -flat[i];
    }
    return score;
}

/// Score of one sample under the classical baseline.
inline Eigen::VectorXd classical_score(const ClassicalClassifier &clf,
                                       const Eigen::VectorXd &x, int label) {
    DenseCache cache;
    const Eigen::VectorXd a =
        dense_forward(clf.net, x, false, nullptr, &cache);
    const Eigen::VectorXd p = softmax(clf.head_weights * a + clf.head_bias);
    const Eigen::VectorXd delta =
        p - Eigen::VectorXd::Unit(p.size(), label);
    DenseGrads net_grads(clf.net);
    dense_backward(clf.net, cache, clf.head_weights.transpose() * delta,
                   net_grads);
    std::vector<double> flat;
    for (int l = 0; l < kDenseLayers; ++l) {
        detail::append_flat(flat, net_grads.weights[l]);
        detail::append_flat(flat, net_grads.biases[l]);
    }
    detail::append_flat(flat, delta * a.transpose());
    detail::append_flat(flat, delta);
    Eigen::VectorXd score(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
        score[static_cast<int>(i)] = -flat[i];
    }
    return score;
}

/// Stack per-sample scores into rows, truncated to the first n_params
/// entries of the flattened parameter vector.
inline Eigen::MatrixXd hybrid_score_matrix(const HybridModel &model,
                                           const Dataset &data,
                                           const Backend &backend,
                                           int n_params) {
    data.validate();
    if (n_params < 1) {
        throw std::invalid_argument("score matrix needs n_params >= 1");
    }
    Eigen::MatrixXd scores(data.rows(), n_params);
    for (int i = 0; i < data.rows(); ++i) {
        const Eigen::VectorXd g = hybrid_score(
            model, data.features.row(i).transpose(), data.labels[i], backend);
        if (g.size() < n_params) {
            throw std::invalid_argument(
                "model has fewer parameters than requested");
        }
        scores.row(i) = g.head(n_params).transpose();
    }
    return scores;
}

inline Eigen::MatrixXd classical_score_matrix(const ClassicalClassifier &clf,
                                              const Dataset &data,
                                              int n_params) {
    data.validate();
    if (n_params < 1) {
        throw std::invalid_argument("score matrix needs n_params >= 1");
    }
    Eigen::MatrixXd scores(data.rows(), n_params);
    for (int i = 0; i < data.rows(); ++i) {
        const Eigen::VectorXd g = classical_score(
            clf, data.features.row(i).transpose(), data.labels[i]);
        if (g.size() < n_params) {
            throw std::invalid_argument(
                "model has fewer parameters than requested");
        }
        scores.row(i) = g.head(n_params).transpose();
    }
    return scores;
}

// --- comparison report ------------------------------------------------------

struct SpectrumSummary {
    double min_eig = 0;
    double max_eig = 0;
    double range = 0;
    double trace = 0;
};

inline SpectrumSummary summarize_spectrum(const Eigen::VectorXd &eigs) {
    SpectrumSummary s;
    s.min_eig = eigs.minCoeff();
    s.max_eig = eigs.maxCoeff();
    s.range = s.max_eig - s.min_eig;
    s.trace = eigs.sum();
    return s;
}

/// Side-by-side eigenvalue-range report for the classical baseline and the
/// hybrid model.
inline std::string spectrum_compare(const Eigen::VectorXd &classical_eigs,
                                    const Eigen::VectorXd &hybrid_eigs) {
    const SpectrumSummary c = summarize_spectrum(classical_eigs);
    const SpectrumSummary h = summarize_spectrum(hybrid_eigs);
    std::ostringstream out;
    out << "model\tmin_eig\tmax_eig\trange\ttrace\n";
    out << "classical\t" << detail::format_double(c.min_eig) << "\t"
        << detail::format_double(c.max_eig) << "\t"
        << detail::format_double(c.range) << "\t"
        << detail::format_double(c.trace) << "\n";
    out << "hybrid\t" << detail::format_double(h.min_eig) << "\t"
        << detail::format_double(h.max_eig) << "\t"
        << detail::format_double(h.range) << "\t"
        << detail::format_double(h.trace) << "\n";
    return out.str();
}

// --- delimited-text export --------------------------------------------------

/// One eigenvalue per row, ascending.
inline std::string spectrum_to_table(const Eigen::VectorXd &eigs) {
    std::ostringstream out;
    out << "eigenvalue\n";
    for (int i = 0; i < eigs.size(); ++i) {
        out << detail::format_double(eigs[i]) << "\n";
    }
    return out.str();
}

inline Eigen::VectorXd spectrum_from_table(const std::string &text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "eigenvalue") {
        throw std::invalid_argument("not a spectrum table");
    }
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        values.push_back(std::stod(line));
    }
    Eigen::VectorXd eigs(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        eigs[static_cast<int>(i)] = values[i];
    }
    return eigs;
}

/// bin index, bin upper edge, probability mass.
inline std::string density_to_table(const SpectralDensity &d) {
    std::ostringstream out;
    out << "bin\tupper_edge\tdensity\n";
    for (int b = 0; b < SpectralDensity::kBins; ++b) {
        const double edge =
            d.lambda_max * (b + 1) / static_cast<double>(SpectralDensity::kBins);
        out << b << "\t" << detail::format_double(edge) << "\t"
            << detail::format_double(d.density[b]) << "\n";
    }
    return out.str();
}

/// Row-major matrix heatmap table; round-trips losslessly.
inline std::string matrix_to_table(const Eigen::MatrixXd &m) {
    std::ostringstream out;
    out << "rows " << m.rows() << " cols " << m.cols() << "\n";
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            out << (c ? "\t" : "") << detail::format_double(m(r, c));
        }
        out << "\n";
    }
    return out.str();
}

inline Eigen::MatrixXd matrix_from_table(const std::string &text) {
    std::istringstream in(text);
    std::string word;
    int rows, cols;
    if (!(in >> word >> rows >> word >> cols)) {
        throw std::invalid_argument("not a matrix table");
    }
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!(in >> m(r, c))) {
                throw std::invalid_argument("truncated matrix table");
            }
        }
    }
    return m;
}

} // namespace qpie
