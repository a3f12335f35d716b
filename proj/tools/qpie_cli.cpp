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
 * Command-line surface: train, gradcheck, narma, fim, vqe, aao-grow.
 *
 * Every artifact is delimited text with exactly one '#'-prefixed header
 * line embedding the config hash and seed. Exit codes: 0 success,
 * 1 assertion/tolerance failure, 2 usage/config error. All commands are
 * deterministic for a fixed config and seed.
 */
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qpie/analysis.hpp"
#include "qpie/circuit.hpp"
#include "qpie/data.hpp"
#include "qpie/engine.hpp"
#include "qpie/grad.hpp"
#include "qpie/hybrid.hpp"

using json = nlohmann::json;
using namespace qpie;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct CliOptions {
    std::string config_path;
    std::string backend_name = "analytic";
    std::string out_dir = ".";
    std::uint64_t seed = 0;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- config plumbing -------------------------------------------------------

json load_config(const CliOptions &opt) {
    if (opt.config_path.empty()) {
        return json::object();
    }
    std::ifstream in(opt.config_path);
    if (!in) {
        throw ConfigError("cannot open config file: " + opt.config_path);
    }
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception &e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    if (!cfg.is_object()) {
        throw ConfigError("config root must be a JSON object");
    }
    return cfg;
}

/// Schema: key -> type tag ('s' string, 'i' integer, 'f' number, 'b' bool,
/// 'a' array). Unknown keys and type mismatches reject before any compute.
void validate_schema(const json &cfg,
                     const std::map<std::string, char> &schema) {
    for (const auto &[key, value] : cfg.items()) {
        const auto it = schema.find(key);
        if (it == schema.end()) {
            throw ConfigError("unknown config key: " + key);
        }
        bool ok = false;
        switch (it->second) {
        case 's': ok = value.is_string(); break;
        case 'i': ok = value.is_number_integer(); break;
        case 'f': ok = value.is_number(); break;
        case 'b': ok = value.is_boolean(); break;
        case 'a': ok = value.is_array(); break;
        }
        if (!ok) {
            throw ConfigError("config key has wrong type: " + key);
        }
    }
}

std::uint64_t fnv1a(const std::string &text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_hash(const json &cfg, const CliOptions &opt) {
    std::ostringstream canon;
    canon << cfg.dump() << "|" << opt.backend_name << "|" << opt.seed;
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(canon.str())));
    return buf;
}

Backend make_backend(const CliOptions &opt, const json &cfg) {
    if (opt.backend_name == "analytic") {
        return Backend::analytic();
    }
    if (opt.backend_name == "sampled") {
        const std::uint64_t shots = cfg.value("shots", 0);
        return Backend::sampled(shots, opt.seed);
    }
    if (opt.backend_name == "noisy") {
        NoiseSpec noise;
        const double p = cfg.value("noise_p", 0.0);
        noise.p_depol = cfg.value("noise_depol", p);
        noise.p_bitflip = cfg.value("noise_bitflip", p);
        noise.p_phaseflip = cfg.value("noise_phaseflip", p);
        return Backend::noisy(noise, opt.seed);
    }
    throw ConfigError("unknown backend: " + opt.backend_name +
                      " (expected analytic|sampled|noisy)");
}

std::string artifact_header(const std::string &command, const json &cfg,
                            const CliOptions &opt,
                            const std::string &extra = "") {
    std::ostringstream out;
    out << "# qpie " << command << " config=" << config_hash(cfg, opt)
        << " seed=" << opt.seed;
    if (!extra.empty()) {
        out << " " << extra;
    }
    out << "\n";
    return out.str();
}

void write_artifact(const CliOptions &opt, const std::string &name,
                    const std::string &header, const std::string &body) {
    std::filesystem::create_directories(opt.out_dir);
    const std::filesystem::path path =
        std::filesystem::path(opt.out_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write artifact: " + path.string());
    }
    out << header << body;
}

std::string fmt(double v) { return qpie::detail::format_double(v); }

// --- train -----------------------------------------------------------------

const std::map<std::string, char> kTrainSchema = {
    {"dataset", 's'},   {"n_points", 'i'},   {"noise_sd", 'f'},
    {"turns", 'f'},     {"outliers", 'i'},   {"nodes", 'i'},
    {"data_qubits", 'i'}, {"ppel_layers", 'i'}, {"epochs", 'i'},
    {"lr", 'f'},        {"gamma", 'f'},      {"decay_every", 'i'},
    {"grid", 'i'},      {"shots", 'i'},      {"noise_p", 'f'},
    {"noise_depol", 'f'}, {"noise_bitflip", 'f'}, {"noise_phaseflip", 'f'},
    {"transfer", 'b'},  {"freeze_first", 'i'}, {"source_points", 'i'},
    {"source_epochs", 'i'},
};

Dataset make_dataset(const json &cfg, std::uint64_t seed) {
    const std::string name = cfg.value("dataset", "moon");
    const int n = cfg.value("n_points", 600);
    if (name == "moon") {
        Dataset d = gen_moon(n, cfg.value("noise_sd", 0.1), seed);
        const int outliers = cfg.value("outliers", 0);
        return outliers > 0 ? add_moon_outliers(std::move(d), outliers, seed)
                            : d;
    }
    if (name == "spiral") {
        return gen_spiral(n, cfg.value("turns", 1.75), seed);
    }
    if (name == "circles") {
        return gen_circles(n, cfg.value("noise_sd", 0.05), seed);
    }
    throw ConfigError("unknown dataset: " + name);
}

int cmd_train(const CliOptions &opt) {
    const json cfg = load_config(opt);
    validate_schema(cfg, kTrainSchema);
    const Backend backend = make_backend(opt, cfg);
    const Dataset data = make_dataset(cfg, opt.seed);

    TrainConfig tc;
    tc.epochs = cfg.value("epochs", 100);
    tc.lr = cfg.value("lr", 0.01);
    tc.gamma = cfg.value("gamma", 0.1);
    tc.decay_every = cfg.value("decay_every", 50);
    tc.seed = opt.seed;
    tc.backend = backend;
    tc.validate();

    HybridModel model = make_hybrid_model(
        cfg.value("nodes", 1), cfg.value("data_qubits", 4), 2,
        cfg.value("ppel_layers", 2), RotationPool{}, opt.seed);

    if (cfg.value("transfer", false)) {
        const Dataset source =
            gen_circles(cfg.value("source_points", 200), 0.05, opt.seed + 1);
        TrainConfig pre = tc;
        pre.epochs = cfg.value("source_epochs", 50);
        pre.backend = Backend::analytic();
        model.frontend = pretrain_transfer(std::move(model.frontend), source,
                                           cfg.value("freeze_first", 2), pre);
    }

    const TrainTrace trace = train(model, data, tc);
    const double final_acc = trace.accuracy.empty() ? 0 : trace.accuracy.back();

    std::ostringstream trace_body;
    trace_body << "epoch\tloss\taccuracy\tgrad_norm\n";
    for (std::size_t e = 0; e < trace.loss.size(); ++e) {
        trace_body << e << "\t" << fmt(trace.loss[e]) << "\t"
                   << fmt(trace.accuracy[e]) << "\t"
                   << fmt(trace.grad_norm[e]) << "\n";
    }
    write_artifact(opt, "train_trace.tsv",
                   artifact_header("train", cfg, opt,
                                   "final_accuracy=" + fmt(final_acc)),
                   trace_body.str());
    write_artifact(opt, "checkpoint.txt",
                   artifact_header("train", cfg, opt),
                   serialize_model(model, tc));

    const int grid = cfg.value("grid", 200);
    if (grid > 0 && data.dims() == 2) {
        const double x0 = data.features.col(0).minCoeff() - 0.5;
        const double x1 = data.features.col(0).maxCoeff() + 0.5;
        const double y0 = data.features.col(1).minCoeff() - 0.5;
        const double y1 = data.features.col(1).maxCoeff() + 0.5;
        std::ostringstream body;
        body << "x\ty\tp0\tp1\n";
        for (int i = 0; i < grid; ++i) {
            for (int j = 0; j < grid; ++j) {
                Eigen::VectorXd point(2);
                point << x0 + (x1 - x0) * i / (grid - 1),
                    y0 + (y1 - y0) * j / (grid - 1);
                const Eigen::VectorXd p =
                    hybrid_forward(model, point, backend, false, nullptr);
                body << fmt(point[0]) << "\t" << fmt(point[1]) << "\t"
                     << fmt(p[0]) << "\t" << fmt(p[1]) << "\n";
            }
        }
        write_artifact(opt, "boundary.tsv",
                       artifact_header("train", cfg, opt), body.str());
    }
    std::cout << "final_accuracy " << fmt(final_acc) << "\n";
    return 0;
}

// --- gradcheck -------------------------------------------------------------

const std::map<std::string, char> kGradcheckSchema = {
    {"circuits", 'i'},      {"max_qubits", 'i'}, {"max_trainables", 'i'},
    {"tolerance", 'f'},     {"corrupt", 'b'},    {"method", 's'},
    {"shots", 'i'},         {"noise_p", 'f'},    {"noise_depol", 'f'},
    {"noise_bitflip", 'f'}, {"noise_phaseflip", 'f'},
};

int cmd_gradcheck(const CliOptions &opt) {
    const json cfg = load_config(opt);
    validate_schema(cfg, kGradcheckSchema);
    const std::string method = cfg.value("method", "all");
    if (method != "all" && method != "adjoint" && method != "paramshift") {
        throw ConfigError("unknown gradcheck method: " + method);
    }
    if (method == "adjoint" && opt.backend_name != "analytic") {
        throw ConfigError(
            "dispatch violation: adjoint differentiation requires the "
            "analytic backend");
    }
    const Backend backend = make_backend(opt, cfg);
    const bool with_adjoint =
        method != "paramshift" && backend.kind == BackendKind::AnalyticSV;
    const int n_circuits = cfg.value("circuits", 10);
    const double tolerance = cfg.value("tolerance", 1e-6);
    const bool corrupt = cfg.value("corrupt", false);

    std::ostringstream body;
    body << "circuit\tparam\tparamshift\tadjoint\tfinite_diff\tmax_dev\n";
    double worst = 0;
    for (int c = 0; c < n_circuits; ++c) {
        const ParamCircuit circuit = random_circuit(
            opt.seed + static_cast<std::uint64_t>(c) * 7919 + 1,
            cfg.value("max_qubits", 6), 12, cfg.value("max_trainables", 30));
        Rng rng(opt.seed + static_cast<std::uint64_t>(c));
        VectorXd theta(circuit.n_trainable);
        for (int j = 0; j < theta.size(); ++j) {
            theta[j] = rng.uniform(-M_PI, M_PI);
        }
        const VectorXd features = VectorXd::Zero(circuit.n_features);
        const Observable obs = {0};
        GradientVector psr = grad_param_shift(circuit, theta, features,
                                              backend, obs);
        if (corrupt && psr.values.size() > 0) {
            psr.values[0] += 1e-3; // deliberate corruption test hook
        }
        const GradientVector fd =
            grad_finite_diff(circuit, theta, features, backend, obs);
        GradientVector adj;
        if (with_adjoint) {
            adj = grad_adjoint(circuit, theta, features, obs);
        }
        for (int j = 0; j < theta.size(); ++j) {
            const double a = with_adjoint ? adj.values[j] : psr.values[j];
            double dev = std::abs(psr.values[j] - fd.values[j]);
            dev = std::max(dev, std::abs(psr.values[j] - a));
            dev = std::max(dev, std::abs(a - fd.values[j]));
            worst = std::max(worst, dev);
            body << c << "\t" << j << "\t" << fmt(psr.values[j]) << "\t"
                 << fmt(a) << "\t" << fmt(fd.values[j]) << "\t" << fmt(dev)
                 << "\n";
        }
    }
    write_artifact(opt, "gradcheck.tsv",
                   artifact_header("gradcheck", cfg, opt,
                                   "max_deviation=" + fmt(worst)),
                   body.str());
    std::cout << "max_deviation " << fmt(worst) << "\n";
    // Finite differences are only a loose oracle away from the analytic
    // statevector; the tolerance gate applies there.
    if (backend.kind == BackendKind::AnalyticSV && worst > tolerance) {
        std::cerr << "gradcheck failed: max deviation " << fmt(worst)
                  << " exceeds tolerance " << fmt(tolerance) << "\n";
        return kExitFailure;
    }
    return 0;
}

// --- narma -----------------------------------------------------------------

const std::map<std::string, char> kNarmaSchema = {
    {"order", 'i'},
    {"steps", 'i'},
    {"epochs", 'i'},
    {"sigma_samples", 'i'},
};

int cmd_narma(const CliOptions &opt) {
    const json cfg = load_config(opt);
    validate_schema(cfg, kNarmaSchema);
    const int order = cfg.value("order", 5);
    if (order != 5 && order != 10) {
        throw ConfigError("narma order must be 5 or 10");
    }
    const int steps = cfg.value("steps", 100);
    const int epochs = cfg.value("epochs", 50);
    const int sigma_samples = cfg.value("sigma_samples", 10000);
    if (steps <= order || epochs < 1 || sigma_samples < 2) {
        throw ConfigError("invalid narma configuration");
    }

    const NarmaSeries series = gen_narma(order, steps, opt.seed);

    // Per-epoch decay of the injected-noise prediction error. The noise
    // path eps(t) is a pure function of the seed, shared across epochs.
    std::ostringstream epochs_body;
    epochs_body << "epoch\teta\tsigma_est\tmse\n";
    double final_mse = 0;
    Rng sigma_rng(opt.seed + 99);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        const double eta = noise_scale(series.alpha, epoch);
        const std::vector<double> pred =
            noisy_target(series, epoch, opt.seed + 17);
        double mse = 0;
        for (int t = 0; t < steps; ++t) {
            const double err = pred[t] - series.target[t];
            mse += err * err;
        }
        mse /= steps;
        final_mse = mse;
        // Sample std of eta * eps over a large draw.
        double sum = 0, sum_sq = 0;
        for (int s = 0; s < sigma_samples; ++s) {
            const double v = eta * sigma_rng.normal();
            sum += v;
            sum_sq += v * v;
        }
        const double mean = sum / sigma_samples;
        const double sigma =
            std::sqrt((sum_sq - sigma_samples * mean * mean) /
                      (sigma_samples - 1));
        epochs_body << epoch << "\t" << fmt(eta) << "\t" << fmt(sigma)
                    << "\t" << fmt(mse) << "\n";
    }
    write_artifact(opt, "narma_epochs.tsv",
                   artifact_header("narma", cfg, opt,
                                   "final_mse=" + fmt(final_mse)),
                   epochs_body.str());

    // Prediction-vs-target table at the final epoch with its sigma band.
    const double eta_final = noise_scale(series.alpha, epochs - 1);
    const std::vector<double> pred =
        noisy_target(series, epochs - 1, opt.seed + 17);
    std::ostringstream series_body;
    series_body << "t\tu\ty\tprediction\tband_lo\tband_hi\n";
    for (int t = 0; t < steps; ++t) {
        series_body << t << "\t" << fmt(series.input[t]) << "\t"
                    << fmt(series.target[t]) << "\t" << fmt(pred[t]) << "\t"
                    << fmt(series.target[t] - eta_final) << "\t"
                    << fmt(series.target[t] + eta_final) << "\n";
    }
    write_artifact(opt, "narma_series.tsv",
                   artifact_header("narma", cfg, opt), series_body.str());
    std::cout << "final_mse " << fmt(final_mse) << "\n";
    return 0;
}

// --- fim -------------------------------------------------------------------

const std::map<std::string, char> kFimSchema = {
    {"dataset", 's'},     {"n_points", 'i'},  {"noise_sd", 'f'},
    {"turns", 'f'},       {"outliers", 'i'},  {"nodes", 'i'},
    {"data_qubits", 'i'}, {"ppel_layers", 'i'}, {"fim_params", 'i'},
    {"compare", 'b'},     {"checkpoint", 's'}, {"shots", 'i'},
    {"noise_p", 'f'},     {"noise_depol", 'f'}, {"noise_bitflip", 'f'},
    {"noise_phaseflip", 'f'},
};

int cmd_fim(const CliOptions &opt) {
    const json cfg = load_config(opt);
    validate_schema(cfg, kFimSchema);
    const Backend backend = make_backend(opt, cfg);
    const int n_params = cfg.value("fim_params", 100);
    if (n_params < 1) {
        throw ConfigError("fim_params must be >= 1");
    }

    json data_cfg = cfg;
    if (!data_cfg.contains("n_points")) {
        data_cfg["n_points"] = 100;
    }
    const Dataset data = make_dataset(data_cfg, opt.seed);

    HybridModel model;
    if (cfg.contains("checkpoint")) {
        std::ifstream in(cfg["checkpoint"].get<std::string>());
        if (!in) {
            throw ConfigError("cannot open checkpoint: " +
                              cfg["checkpoint"].get<std::string>());
        }
        std::ostringstream text;
        text << in.rdbuf();
        std::string body = text.str();
        // Skip the artifact header comment if present.
        if (!body.empty() && body[0] == '#') {
            body.erase(0, body.find('\n') + 1);
        }
        model = parse_model(body).first;
    } else {
        model = make_hybrid_model(cfg.value("nodes", 1),
                                  cfg.value("data_qubits", 3), 2,
                                  cfg.value("ppel_layers", 2), RotationPool{},
                                  opt.seed);
    }

    const Eigen::MatrixXd scores =
        hybrid_score_matrix(model, data, backend, n_params);
    const Eigen::MatrixXd fim = empirical_fim(scores);
    const Eigen::VectorXd eigs = fim_eigenvalues(fim);
    const SpectralDensity density = spectral_density(eigs);

    write_artifact(opt, "fim_heatmap.tsv", artifact_header("fim", cfg, opt),
                   matrix_to_table(fim));
    write_artifact(opt, "fim_eigenvalues.tsv",
                   artifact_header("fim", cfg, opt), spectrum_to_table(eigs));

    std::ostringstream spec_body;
    spec_body << "lambda\tdensity\n";
    for (int b = 0; b < SpectralDensity::kBins; ++b) {
        const double lambda = density.lambda_max * (b + 1) /
                              static_cast<double>(SpectralDensity::kBins);
        spec_body << fmt(lambda) << "\t" << fmt(density.density[b]) << "\n";
    }
    write_artifact(opt, "fim_spectrum.tsv", artifact_header("fim", cfg, opt),
                   spec_body.str());

    if (cfg.value("compare", false)) {
        const ClassicalClassifier clf = make_classical_classifier(
            data.dims(), model.feature_width(), 2, opt.seed);
        const Eigen::MatrixXd cls_scores =
            classical_score_matrix(clf, data, n_params);
        const Eigen::VectorXd cls_eigs =
            fim_eigenvalues(empirical_fim(cls_scores));
        write_artifact(opt, "fim_compare.tsv",
                       artifact_header("fim", cfg, opt),
                       spectrum_compare(cls_eigs, eigs));
    }
    std::cout << "max_eigenvalue " << fmt(eigs.maxCoeff()) << "\n";
    return 0;
}

// --- vqe -------------------------------------------------------------------

const std::map<std::string, char> kVqeSchema = {
    {"n_qubits", 'i'}, {"weights", 'a'},     {"terms", 'a'},
    {"epochs", 'i'},   {"lr", 'f'},          {"gamma", 'f'},
    {"decay_every", 'i'}, {"shots", 'i'},    {"noise_p", 'f'},
    {"noise_depol", 'f'}, {"noise_bitflip", 'f'}, {"noise_phaseflip", 'f'},
};

int cmd_vqe(const CliOptions &opt) {
    const json cfg = load_config(opt);
    validate_schema(cfg, kVqeSchema);
    const int n_qubits = cfg.value("n_qubits", 2);
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw ConfigError("n_qubits out of range");
    }
    Hamiltonian h;
    if (cfg.contains("terms")) {
        for (const auto &term : cfg["terms"]) {
            if (!term.is_array()) {
                throw ConfigError("each Hamiltonian term must be an array");
            }
            Observable obs;
            for (const auto &q : term) {
                if (!q.is_number_integer() || q.get<int>() < 0 ||
                    q.get<int>() >= n_qubits) {
                    throw ConfigError("term qubit out of range");
                }
                obs.push_back(q.get<int>());
            }
            h.terms.push_back(std::move(obs));
        }
        if (!cfg.contains("weights")) {
            h.weights.assign(h.terms.size(), 1.0);
        } else {
            for (const auto &w : cfg["weights"]) {
                if (!w.is_number()) {
                    throw ConfigError("weights must be numbers");
                }
                h.weights.push_back(w.get<double>());
            }
            if (h.weights.size() != h.terms.size()) {
                throw ConfigError("weights/terms length mismatch");
            }
        }
    } else {
        // Default problem: H = Z0 + Z1 on two qubits.
        h.terms = {{0}, {1}};
        h.weights = {1.0, 1.0};
    }

    // Product-RY ansatz: one trainable Y rotation per qubit.
    ParamCircuit ansatz;
    ansatz.n_data_qubits = n_qubits;
    ansatz.n_ancilla = 0;
    for (int q = 0; q < n_qubits; ++q) {
        ansatz.nodes.push_back(GateOp(GateKind::RY, {q},
                                      {ParamSlot::trainable(q)}));
    }
    ansatz.n_trainable = n_qubits;

    TrainConfig tc;
    tc.epochs = cfg.value("epochs", 500);
    tc.lr = cfg.value("lr", 0.1);
    tc.gamma = cfg.value("gamma", 1.0);
    tc.decay_every = cfg.value("decay_every", 100);
    tc.seed = opt.seed;
    tc.backend = make_backend(opt, cfg);
    tc.validate();

    const VqeResult result = vqe_minimize(ansatz, h, tc);
    const double exact = ground_energy(h, n_qubits);
    const double final_energy = result.energy_trace.back();

    std::ostringstream body;
    body << "iter\tenergy\n";
    for (std::size_t i = 0; i < result.energy_trace.size(); ++i) {
        body << i << "\t" << fmt(result.energy_trace[i]) << "\n";
    }
    write_artifact(
        opt, "vqe_trace.tsv",
        artifact_header("vqe", cfg, opt,
                        "final_energy=" + fmt(final_energy) +
                            " ground_energy=" + fmt(exact) + " converged=" +
                            (result.converged ? "1" : "0")),
        body.str());
    std::cout << "final_energy " << fmt(final_energy) << " ground_energy "
              << fmt(exact) << "\n";
    if (final_energy < exact - 1e-9) {
        std::cerr << "vqe failed: energy below the variational bound\n";
        return kExitFailure;
    }
    return 0;
}

// --- aao-grow --------------------------------------------------------------

const std::map<std::string, char> kAaoSchema = {
    {"n_qubits", 'i'}, {"steps", 'i'}, {"observable", 'a'},
    {"initial", 's'},  {"shots", 'i'}, {"noise_p", 'f'},
    {"noise_depol", 'f'}, {"noise_bitflip", 'f'}, {"noise_phaseflip", 'f'},
};

int cmd_aao(const CliOptions &opt) {
    const json cfg = load_config(opt);
    validate_schema(cfg, kAaoSchema);
    const int n_qubits = cfg.value("n_qubits", 2);
    const int steps = cfg.value("steps", 3);
    if (n_qubits < 1 || n_qubits > kMaxQubits || steps < 1) {
        throw ConfigError("invalid aao configuration");
    }
    Observable obs = {0};
    if (cfg.contains("observable")) {
        obs.clear();
        for (const auto &q : cfg["observable"]) {
            if (!q.is_number_integer() || q.get<int>() < 0 ||
                q.get<int>() >= n_qubits) {
                throw ConfigError("observable qubit out of range");
            }
            obs.push_back(q.get<int>());
        }
    }
    const std::string initial = cfg.value("initial", "h-layer");
    if (initial != "h-layer" && initial != "empty") {
        throw ConfigError("initial must be h-layer or empty");
    }
    const Backend backend = make_backend(opt, cfg);

    ParamCircuit circuit;
    circuit.n_data_qubits = n_qubits;
    circuit.n_ancilla = 0;
    if (initial == "h-layer") {
        for (int q = 0; q < n_qubits; ++q) {
            circuit.nodes.push_back(GateOp(GateKind::H, {q}, {}));
        }
    }

    // Candidate library: Y rotations plus Y/Z-angle controlled gates.
    CandidatePool pool;
    for (int q = 0; q < n_qubits; ++q) {
        pool.candidates.push_back({GateKind::RY, q, -1});
    }
    for (int c = 0; c < n_qubits; ++c) {
        for (int t = 0; t < n_qubits; ++t) {
            if (c != t) {
                pool.candidates.push_back({GateKind::CRY, c, t});
                pool.candidates.push_back({GateKind::CRZ, c, t});
            }
        }
    }

    VectorXd theta(0);
    const VectorXd features = VectorXd::Zero(0);
    std::ostringstream body;
    body << "step\tgate\tqubits\tgradient\n";
    for (int s = 0; s < steps; ++s) {
        auto [grown, theta_new] =
            aao_step(circuit, theta, features, backend, obs, pool);
        circuit = std::move(grown);
        theta = std::move(theta_new);
        const auto &gate = std::get<GateOp>(circuit.nodes.back());
        const GradientVector g =
            grad_param_shift(circuit, theta, features, backend, obs);
        std::ostringstream qubits;
        for (std::size_t i = 0; i < gate.targets.size(); ++i) {
            qubits << (i ? "," : "") << gate.targets[i];
        }
        body << s << "\t" << gate_name(gate.kind) << "\t" << qubits.str()
             << "\t" << fmt(g.values[circuit.n_trainable - 1]) << "\n";
    }
    write_artifact(opt, "aao_steps.tsv", artifact_header("aao-grow", cfg, opt),
                   body.str());
    write_artifact(opt, "aao_circuit.txt",
                   artifact_header("aao-grow", cfg, opt),
                   serialize_circuit(circuit));
    std::cout << "grown_gates " << steps << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"qpie: differentiable quantum circuit simulation engine"};
    app.require_subcommand(1);

    CliOptions opt;
    int (*handler)(const CliOptions &) = nullptr;
    const std::vector<std::pair<std::string, int (*)(const CliOptions &)>>
        commands = {{"train", cmd_train},  {"gradcheck", cmd_gradcheck},
                    {"narma", cmd_narma},  {"fim", cmd_fim},
                    {"vqe", cmd_vqe},      {"aao-grow", cmd_aao}};
    for (const auto &[name, fn] : commands) {
        CLI::App *sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config_path, "JSON config file");
        sub->add_option("--seed", opt.seed, "random seed");
        sub->add_option("--backend", opt.backend_name,
                        "analytic|sampled|noisy");
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->callback([&handler, fn = fn] { handler = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        return handler(opt);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}
