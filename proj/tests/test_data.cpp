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

#include <algorithm>
#include <cmath>

#include "qpie/data.hpp"

using namespace qpie;

namespace {

int count_label(const Dataset &data, int label) {
    return static_cast<int>(
        std::count(data.labels.begin(), data.labels.end(), label));
}

} // namespace

TEST_CASE("moon generator") {
    const Dataset data = gen_moon(600, 0.0, 7);
    CHECK(data.rows() == 600);
    CHECK(data.dims() == 2);
    CHECK(count_label(data, 0) == 300);
    CHECK(count_label(data, 1) == 300);
    data.validate();

    // Noise-free points lie exactly on their arcs.
    for (int i = 0; i < data.rows(); ++i) {
        const double x = data.features(i, 0);
        const double y = data.features(i, 1);
        if (data.labels[i] == 0) {
            CHECK(std::abs(x * x + y * y - 1.0) < 1e-12);
            CHECK(y >= -1e-12);
        } else {
            const double dx = 1.0 - x;
            const double dy = 0.5 - y;
            CHECK(std::abs(dx * dx + dy * dy - 1.0) < 1e-12);
            CHECK(dy >= -1e-12);
        }
    }

    // Same seed, same dataset; different seed, different shuffle.
    const Dataset again = gen_moon(600, 0.0, 7);
    CHECK((data.features - again.features).cwiseAbs().maxCoeff() == 0.0);
    CHECK(data.labels == again.labels);
    const Dataset other = gen_moon(600, 0.0, 8);
    CHECK((data.features - other.features).cwiseAbs().maxCoeff() > 0.0);

    // Jitter spreads points off the arcs but stays small.
    const Dataset noisy = gen_moon(600, 0.05, 7);
    double worst = 0.0;
    for (int i = 0; i < noisy.rows(); ++i) {
        const double x = noisy.features(i, 0);
        const double y = noisy.features(i, 1);
        const double r = noisy.labels[i] == 0
                             ? std::hypot(x, y)
                             : std::hypot(1.0 - x, 0.5 - y);
        worst = std::max(worst, std::abs(r - 1.0));
    }
    CHECK(worst > 0.0);
    CHECK(worst < 0.5);

    CHECK_THROWS_AS(gen_moon(601, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_moon(0, 0.0, 1), std::invalid_argument);
}

TEST_CASE("moon outliers") {
    const Dataset base = gen_moon(100, 0.0, 3);
    const Dataset probed = add_moon_outliers(base, 10, 5);
    CHECK(probed.rows() == 110);
    CHECK(static_cast<int>(probed.labels.size()) == 110);
    CHECK(std::find(probed.tags.begin(), probed.tags.end(), "outliers") !=
          probed.tags.end());
    // Every appended point sits at an arc midpoint with the wrong class.
    for (int i = 100; i < 110; ++i) {
        const double x = probed.features(i, 0);
        const double y = probed.features(i, 1);
        if (probed.labels[i] == 1) {
            CHECK(x == doctest::Approx(0.0).epsilon(1e-12));
            CHECK(y == doctest::Approx(1.0).epsilon(1e-12));
        } else {
            CHECK(x == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(y == doctest::Approx(-0.5).epsilon(1e-12));
        }
    }
}

TEST_CASE("spiral generator") {
    const double turns = 1.75;
    const Dataset data = gen_spiral(600, turns, 11);
    CHECK(data.rows() == 600);
    CHECK(count_label(data, 0) == 300);
    CHECK(count_label(data, 1) == 300);

    // Each point reconstructs as radius * (cos, sin) of its arc parameter,
    // with the second arm offset by pi.
    const double t_max = turns * 2.0 * M_PI;
    for (int i = 0; i < data.rows(); ++i) {
        const double x = data.features(i, 0);
        const double y = data.features(i, 1);
        const double r = std::hypot(x, y);
        CHECK(r > 0.0);
        CHECK(r <= 1.0 + 0.25 / t_max + 1e-12);
        const double t = r * t_max + (data.labels[i] == 0 ? 0.0 : M_PI);
        CHECK(x == doctest::Approx(r * std::cos(t)).epsilon(1e-9));
        CHECK(y == doctest::Approx(r * std::sin(t)).epsilon(1e-9));
    }

    CHECK_THROWS_AS(gen_spiral(7, turns, 1), std::invalid_argument);
}

TEST_CASE("circles generator") {
    const Dataset data = gen_circles(200, 0.0, 13);
    CHECK(count_label(data, 0) == 100);
    CHECK(count_label(data, 1) == 100);
    for (int i = 0; i < data.rows(); ++i) {
        const double r = std::hypot(data.features(i, 0), data.features(i, 1));
        const double expected = data.labels[i] == 0 ? 0.5 : 1.0;
        CHECK(std::abs(r - expected) < 1e-12);
    }
    CHECK_THROWS_AS(gen_circles(5, 0.0, 1), std::invalid_argument);
}

TEST_CASE("series recurrence") {
    // All-zero input: the constant term alone drives the first step.
    NarmaSeries flat = narma_from_input(5, std::vector<double>(20, 0.0));
    CHECK(flat.target[0] == 0.0);
    CHECK(flat.target[1] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(flat.alpha == 0.1);

    NarmaSeries deep = narma_from_input(10, std::vector<double>(20, 0.0));
    CHECK(deep.alpha == 0.2);

    CHECK_THROWS_AS(narma_from_input(3, std::vector<double>(20, 0.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(narma_from_input(5, std::vector<double>(5, 0.0)),
                    std::invalid_argument);

    // Large constant input makes the recurrence blow up.
    CHECK_THROWS_AS(narma_from_input(5, std::vector<double>(20, 3.0)),
                    std::runtime_error);
}

TEST_CASE("seeded series are deterministic and bounded") {
    const NarmaSeries a = gen_narma(5, 500, 99);
    const NarmaSeries b = gen_narma(5, 500, 99);
    CHECK(a.input == b.input);
    CHECK(a.target == b.target);
    for (double u : a.input) {
        CHECK(u >= 0.0);
        CHECK(u < 0.5);
    }

    // Order 5 stays bounded over long horizons for every seed tried; the
    // order-10 recurrence has a known divergence mode and is covered by the
    // explicit blow-up guard instead.
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const NarmaSeries series = gen_narma(5, 10000, seed);
        const double worst =
            *std::max_element(series.target.begin(), series.target.end(),
                              [](double l, double r) {
                                  return std::abs(l) < std::abs(r);
                              });
        CHECK(std::abs(worst) < 1.0);
    }
    const NarmaSeries ten = gen_narma(10, 2000, 0);
    for (double y : ten.target) {
        CHECK(std::isfinite(y));
        CHECK(std::abs(y) <= 10.0);
    }
}

TEST_CASE("decaying target noise") {
    const NarmaSeries series = gen_narma(5, 200, 17);
    CHECK(noise_scale(series.alpha, 0) == doctest::Approx(0.1));
    CHECK(noise_scale(series.alpha, 50) ==
          doctest::Approx(0.1 * std::exp(-1.0)).epsilon(1e-15));

    const std::vector<double> at0 = noisy_target(series, 0, 5);
    const std::vector<double> at50 = noisy_target(series, 50, 5);
    CHECK(at0.size() == series.target.size());
    // One seed fixes one noise path: the normalized residuals coincide
    // across epochs.
    const double eta0 = noise_scale(series.alpha, 0);
    const double eta50 = noise_scale(series.alpha, 50);
    for (std::size_t t = 0; t < at0.size(); ++t) {
        const double eps0 = (at0[t] - series.target[t]) / eta0;
        const double eps50 = (at50[t] - series.target[t]) / eta50;
        CHECK(eps0 == doctest::Approx(eps50).epsilon(1e-10));
    }

    // Empirical spread tracks eta at scale.
    const NarmaSeries big = gen_narma(5, 10000, 21);
    const std::vector<double> sample = noisy_target(big, 10, 9);
    double ss = 0.0;
    for (std::size_t t = 0; t < sample.size(); ++t) {
        const double r = sample[t] - big.target[t];
        ss += r * r;
    }
    const double sd = std::sqrt(ss / sample.size());
    CHECK(sd == doctest::Approx(noise_scale(big.alpha, 10)).epsilon(0.1));

    CHECK_THROWS_AS(noisy_target(series, -1, 5), std::invalid_argument);
}

TEST_CASE("feature normalization") {
    Eigen::VectorXd x(3);
    x << 0.0, 5.0, 10.0;
    const Eigen::VectorXd mapped = normalize_features(x, 0.0, M_PI);
    CHECK(mapped[0] == doctest::Approx(0.0));
    CHECK(mapped[1] == doctest::Approx(M_PI / 2).epsilon(1e-15));
    CHECK(mapped[2] == doctest::Approx(M_PI).epsilon(1e-15));

    const Eigen::VectorXd flat =
        normalize_features(Eigen::VectorXd::Constant(4, 3.3), 0.0, 2.0);
    for (int i = 0; i < 4; ++i) {
        CHECK(flat[i] == doctest::Approx(1.0));
    }

    CHECK(normalize_features(Eigen::VectorXd(0), 0.0, 1.0).size() == 0);
}

TEST_CASE("table round-trips") {
    const Dataset data = gen_moon(10, 0.1, 29);
    const Dataset back = dataset_from_table(dataset_to_table(data));
    CHECK(back.rows() == data.rows());
    CHECK(back.dims() == data.dims());
    CHECK(back.labels == data.labels);
    CHECK((back.features - data.features).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(dataset_from_table(""), std::invalid_argument);
    CHECK_THROWS_AS(dataset_from_table("x0\tlabel\nnot-a-number\t0\n"),
                    std::invalid_argument);
    CHECK_THROWS_AS(dataset_from_table("x0\tlabel\n0.5\n"),
                    std::invalid_argument);

    const NarmaSeries series = gen_narma(5, 30, 31);
    const std::string table = narma_to_table(series);
    CHECK(table.rfind("u\ty\n", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 31);
}
