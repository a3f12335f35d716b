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
 * Dataset generators (moon, spiral, concentric circles, NARMA) and feature
 * normalization into gate-angle ranges. All generators are pure functions
 * of their arguments and seed.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpie/rng.hpp"

namespace qpie {

struct Dataset {
    Eigen::MatrixXd features; // rows x dims
    std::vector<int> labels;
    std::string name;
    std::uint64_t seed = 0;
    std::vector<std::string> tags;

    int rows() const { return static_cast<int>(features.rows()); }
    int dims() const { return static_cast<int>(features.cols()); }

    void validate() const {
        if (static_cast<int>(labels.size()) != rows()) {
            throw std::invalid_argument("dataset label/row count mismatch");
        }
    }
};

namespace detail {

inline void shuffle_rows(Dataset &data, Rng &rng) {
    const int n = data.rows();
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_index(i + 1));
        data.features.row(i).swap(data.features.row(j));
        std::swap(data.labels[i], data.labels[j]);
    }
}

} // namespace detail

/// Two interlocking half-circles, n/2 points per arm, optional Gaussian
/// jitter. With noise_sd = 0 every point lies exactly on its arc.
inline Dataset gen_moon(int n, double noise_sd, std::uint64_t seed) {
    if (n < 2 || n % 2 != 0) {
        throw std::invalid_argument("gen_moon: n must be even and positive");
    }
    Rng rng(seed);
    Dataset data;
    data.name = "moon";
    data.seed = seed;
    data.tags = {"shuffle", "noise"};
    data.features.resize(n, 2);
    data.labels.resize(n);
    const int half = n / 2;
    for (int i = 0; i < half; ++i) {
        const double t = M_PI * i / (half - 1);
        data.features(i, 0) = std::cos(t);
        data.features(i, 1) = std::sin(t);
        data.labels[i] = 0;
        data.features(half + i, 0) = 1.0 - std::cos(t);
        data.features(half + i, 1) = 0.5 - std::sin(t);
        data.labels[half + i] = 1;
    }
    if (noise_sd > 0) {
        for (int i = 0; i < n; ++i) {
            data.features(i, 0) += noise_sd * rng.normal();
            data.features(i, 1) += noise_sd * rng.normal();
        }
    }
    detail::shuffle_rows(data, rng);
    return data;
}

/// Robustness probe: k deliberately mislabeled points at the arc midpoints.
inline Dataset add_moon_outliers(Dataset data, int k, std::uint64_t seed) {
    Rng rng(seed);
    const int n = data.rows();
    Eigen::MatrixXd features(n + k, 2);
    features.topRows(n) = data.features;
    for (int i = 0; i < k; ++i) {
        const int wrong_class = static_cast<int>(rng.uniform_index(2));
        if (wrong_class == 1) {
            // Midpoint of arm 0 labeled as class 1.
            features(n + i, 0) = std::cos(M_PI / 2);
            features(n + i, 1) = std::sin(M_PI / 2);
        } else {
            features(n + i, 0) = 1.0 - std::cos(M_PI / 2);
            features(n + i, 1) = 0.5 - std::sin(M_PI / 2);
        }
        data.labels.push_back(wrong_class);
    }
    data.features = std::move(features);
    data.tags.push_back("outliers");
    return data;
}

/// Two interleaved Archimedean spiral arms; radius grows linearly with the
/// arc parameter.
inline Dataset gen_spiral(int n, double turns, std::uint64_t seed) {
    if (n < 2 || n % 2 != 0) {
        throw std::invalid_argument("gen_spiral: n must be even and positive");
    }
    Rng rng(seed);
    Dataset data;
    data.name = "spiral";
    data.seed = seed;
    data.tags = {"shuffle", "turn"};
    data.features.resize(n, 2);
    data.labels.resize(n);
    const int half = n / 2;
    const double t_max = turns * 2.0 * M_PI;
    for (int i = 0; i < half; ++i) {
        const double t = 0.25 + t_max * i / (half - 1);
        const double r = t / t_max;
        data.features(i, 0) = r * std::cos(t);
        data.features(i, 1) = r * std::sin(t);
        data.labels[i] = 0;
        data.features(half + i, 0) = r * std::cos(t + M_PI);
        data.features(half + i, 1) = r * std::sin(t + M_PI);
        data.labels[half + i] = 1;
    }
    detail::shuffle_rows(data, rng);
    return data;
}

/// Concentric circles, used as the transfer-learning source task.
inline Dataset gen_circles(int n, double noise_sd, std::uint64_t seed) {
    if (n < 2 || n % 2 != 0) {
        throw std::invalid_argument("gen_circles: n must be even and positive");
    }
    Rng rng(seed);
    Dataset data;
    data.name = "circles";
    data.seed = seed;
    data.tags = {"shuffle", "noise"};
    data.features.resize(n, 2);
    data.labels.resize(n);
    const int half = n / 2;
    for (int i = 0; i < half; ++i) {
        const double t = 2.0 * M_PI * i / half;
        data.features(i, 0) = 0.5 * std::cos(t);
        data.features(i, 1) = 0.5 * std::sin(t);
        data.labels[i] = 0;
        data.features(half + i, 0) = std::cos(t);
        data.features(half + i, 1) = std::sin(t);
        data.labels[half + i] = 1;
    }
    if (noise_sd > 0) {
        for (int i = 0; i < n; ++i) {
            data.features(i, 0) += noise_sd * rng.normal();
            data.features(i, 1) += noise_sd * rng.normal();
        }
    }
    detail::shuffle_rows(data, rng);
    return data;
}

/// NARMA benchmark series with the standard recurrence coefficients
/// (0.3, 0.05, 1.5, 0.1) and uniform input u in [0, 0.5].
struct NarmaSeries {
    int order = 5;
    std::vector<double> input;  // u
    std::vector<double> target; // y
    double alpha = 0.1;         // decaying-noise scale
    std::uint64_t seed = 0;
};

/// Run the recurrence over a given input series, zero initial history.
inline NarmaSeries narma_from_input(int order, std::vector<double> input,
                                    std::uint64_t seed = 0) {
    if (order != 5 && order != 10) {
        throw std::invalid_argument("narma order must be 5 or 10");
    }
    const int length = static_cast<int>(input.size());
    if (length <= order) {
        throw std::invalid_argument("narma length must exceed the order");
    }
    NarmaSeries series;
    series.order = order;
    series.alpha = order == 5 ? 0.1 : 0.2;
    series.seed = seed;
    series.input = std::move(input);
    series.target.assign(length, 0.0);
    auto history = [&](int t, int back) {
        const int idx = t - back;
        return idx < 0 ? 0.0 : series.target[idx];
    };
    for (int t = 0; t + 1 < length; ++t) {
        double window = 0.0;
        for (int i = 0; i < order; ++i) {
            window += history(t, i);
        }
        const double u_old = t - order + 1 < 0 ? 0.0 : series.input[t - order + 1];
        series.target[t + 1] = 0.3 * series.target[t] +
                               0.05 * series.target[t] * window +
                               1.5 * u_old * series.input[t] + 0.1;
        if (std::abs(series.target[t + 1]) > 10.0) {
            throw std::runtime_error(
                "narma series diverged at step " + std::to_string(t + 1) +
                " (seed " + std::to_string(seed) + ")");
        }
    }
    return series;
}

inline NarmaSeries gen_narma(int order, int length, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> input(std::max(length, 0));
    for (double &u : input) {
        u = rng.uniform(0.0, 0.5);
    }
    return narma_from_input(order, std::move(input), seed);
}

/// Target with epoch-decaying noise: y(t) + eta * eps(t), eta = alpha *
/// exp(-epoch / 50), eps ~ N(0, 1). The eps series is a pure function of
/// the seed, so one seed yields a common noise path across epochs.
inline std::vector<double> noisy_target(const NarmaSeries &series, int epoch,
                                        std::uint64_t seed) {
    if (epoch < 0) {
        throw std::invalid_argument("noisy_target: epoch must be >= 0");
    }
    const double eta = series.alpha * std::exp(-epoch / 50.0);
    Rng rng(seed);
    std::vector<double> noisy(series.target.size());
    for (std::size_t t = 0; t < noisy.size(); ++t) {
        noisy[t] = series.target[t] + eta * rng.normal();
    }
    return noisy;
}

inline double noise_scale(double alpha, int epoch) {
    return alpha * std::exp(-epoch / 50.0);
}

/// Min-max affine map onto [lo, hi]; constant input maps to the midpoint.
inline Eigen::VectorXd normalize_features(const Eigen::VectorXd &x, double lo,
                                          double hi) {
    if (x.size() == 0) {
        return x;
    }
    const double xmin = x.minCoeff();
    const double xmax = x.maxCoeff();
    if (xmax == xmin) {
        return Eigen::VectorXd::Constant(x.size(), 0.5 * (lo + hi));
    }
    return (lo + (hi - lo) * (x.array() - xmin) / (xmax - xmin)).matrix();
}

// --- delimited-text export/import ------------------------------------------

inline std::string dataset_to_table(const Dataset &data) {
    std::ostringstream out;
    for (int d = 0; d < data.dims(); ++d) {
        out << "x" << d << "\t";
    }
    out << "label\n";
    char buf[40];
    for (int i = 0; i < data.rows(); ++i) {
        for (int d = 0; d < data.dims(); ++d) {
            std::snprintf(buf, sizeof(buf), "%.17g", data.features(i, d));
            out << buf << "\t";
        }
        out << data.labels[i] << "\n";
    }
    return out.str();
}

inline Dataset dataset_from_table(const std::string &text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument("empty dataset table");
    }
    int dims = 0;
    {
        std::istringstream header(line);
        std::string col;
        while (header >> col) {
            if (col != "label") {
                ++dims;
            }
        }
    }
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::istringstream ls(line);
        std::vector<double> row(dims);
        for (int d = 0; d < dims; ++d) {
            if (!(ls >> row[d])) {
                throw std::invalid_argument("malformed dataset row: " + line);
            }
        }
        int label;
        if (!(ls >> label)) {
            throw std::invalid_argument("missing label in row: " + line);
        }
        rows.push_back(std::move(row));
        labels.push_back(label);
    }
    Dataset data;
    data.features.resize(rows.size(), dims);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int d = 0; d < dims; ++d) {
            data.features(i, d) = rows[i][d];
        }
    }
    data.labels = std::move(labels);
    data.validate();
    return data;
}

/// Two-column (u, y) table for a NARMA series.
inline std::string narma_to_table(const NarmaSeries &series) {
    std::ostringstream out;
    out << "u\ty\n";
    char buf[40];
    for (std::size_t t = 0; t < series.input.size(); ++t) {
        std::snprintf(buf, sizeof(buf), "%.17g", series.input[t]);
        out << buf << "\t";
        std::snprintf(buf, sizeof(buf), "%.17g", series.target[t]);
        out << buf << "\n";
    }
    return out.str();
}

} // namespace qpie
