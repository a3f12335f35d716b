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
//
// Black-box tests of the command-line binary. The binary path arrives via
// `--cli <path>` on the test command line.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string g_cli_path;
fs::path g_work;

int run_cli(const std::string &args) {
    const std::string cmd =
        "\"" + g_cli_path + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status < 0) {
        return -1;
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

fs::path write_config(const std::string &name, const std::string &body) {
    const fs::path path = g_work / name;
    std::ofstream out(path);
    out << body;
    return path;
}

/// Runs one command into a fresh directory and returns artifact-name ->
/// bytes for everything it wrote.
std::map<std::string, std::string> run_into(const std::string &base_args,
                                            const std::string &dir_name,
                                            int expected_exit = 0) {
    const fs::path dir = g_work / dir_name;
    fs::create_directories(dir);
    const int code = run_cli(base_args + " --out \"" + dir.string() + "\"");
    CHECK(code == expected_exit);
    std::map<std::string, std::string> artifacts;
    for (const auto &entry : fs::directory_iterator(dir)) {
        artifacts[entry.path().filename().string()] =
            read_file(entry.path());
    }
    return artifacts;
}

bool header_ok(const std::string &content, const std::string &command) {
    const std::string prefix = "# qpie " + command + " config=";
    if (content.rfind(prefix, 0) != 0) {
        return false;
    }
    // 16 lowercase hex digits, then " seed=".
    const std::string hash = content.substr(prefix.size(), 16);
    for (char c : hash) {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) {
            return false;
        }
    }
    return content.compare(prefix.size() + 16, 6, " seed=") == 0;
}

} // namespace

TEST_CASE("usage and config errors exit with code 2") {
    CHECK(run_cli("") == 2);                       // missing subcommand
    CHECK(run_cli("no-such-command") == 2);        // unknown subcommand
    CHECK(run_cli("vqe --config /nonexistent.json") == 2);
    CHECK(run_cli("vqe --backend hardware") == 2); // unknown backend

    const fs::path bad_key =
        write_config("bad_key.json", "{\"not_a_key\": 1}");
    CHECK(run_cli("vqe --config \"" + bad_key.string() + "\"") == 2);

    const fs::path bad_type =
        write_config("bad_type.json", "{\"epochs\": \"many\"}");
    CHECK(run_cli("vqe --config \"" + bad_type.string() + "\"") == 2);

    const fs::path bad_json = write_config("bad_json.json", "{oops");
    CHECK(run_cli("vqe --config \"" + bad_json.string() + "\"") == 2);

    // Adjoint-only gradient checks cannot run on a non-analytic backend.
    const fs::path adjoint = write_config(
        "adjoint.json",
        "{\"method\": \"adjoint\", \"circuits\": 1, \"noise_p\": 0.01}");
    CHECK(run_cli("gradcheck --backend noisy --config \"" +
                  adjoint.string() + "\"") == 2);
}

TEST_CASE("gradient check gate") {
    const fs::path small = write_config(
        "gradcheck.json",
        "{\"circuits\": 3, \"max_qubits\": 3, \"max_trainables\": 8}");
    const auto out = run_into(
        "gradcheck --seed 1 --config \"" + small.string() + "\"", "gc_ok");
    REQUIRE(out.count("gradcheck.tsv") == 1);
    const std::string &table = out.at("gradcheck.tsv");
    CHECK(header_ok(table, "gradcheck"));
    CHECK(table.find("max_deviation=") != std::string::npos);

    // The corruption hook must trip the tolerance gate.
    const fs::path corrupt = write_config(
        "gradcheck_corrupt.json",
        "{\"circuits\": 2, \"max_qubits\": 3, \"max_trainables\": 8, "
        "\"corrupt\": true}");
    run_into("gradcheck --seed 1 --config \"" + corrupt.string() + "\"",
             "gc_bad", 1);
}

TEST_CASE("variational solver reaches the two-qubit bound") {
    const auto out = run_into("vqe --seed 3", "vqe_default");
    REQUIRE(out.count("vqe_trace.tsv") == 1);
    const std::string &trace = out.at("vqe_trace.tsv");
    CHECK(header_ok(trace, "vqe"));
    CHECK(trace.find("ground_energy=-2") != std::string::npos);
    CHECK(trace.find("iter\tenergy\n") != std::string::npos);
}

TEST_CASE("every command is byte-identical across reruns") {
    const fs::path train_cfg = write_config(
        "train.json",
        "{\"dataset\": \"moon\", \"n_points\": 20, \"epochs\": 2, "
        "\"data_qubits\": 2, \"ppel_layers\": 1, \"grid\": 8, "
        "\"lr\": 0.05}");
    const fs::path grad_cfg = write_config(
        "grad.json",
        "{\"circuits\": 2, \"max_qubits\": 3, \"max_trainables\": 6}");
    const fs::path narma_cfg = write_config(
        "narma.json",
        "{\"steps\": 30, \"epochs\": 5, \"sigma_samples\": 200}");
    const fs::path fim_cfg = write_config(
        "fim.json",
        "{\"n_points\": 10, \"data_qubits\": 2, \"ppel_layers\": 1, "
        "\"fim_params\": 20, \"compare\": true}");
    const fs::path aao_cfg = write_config("aao.json", "{\"steps\": 2}");

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"train --seed 7 --config \"" + train_cfg.string() + "\"", "train"},
        {"gradcheck --seed 7 --config \"" + grad_cfg.string() + "\"", "grad"},
        {"narma --seed 7 --config \"" + narma_cfg.string() + "\"", "narma"},
        {"fim --seed 7 --config \"" + fim_cfg.string() + "\"", "fim"},
        {"vqe --seed 7", "vqe"},
        {"aao-grow --seed 7 --config \"" + aao_cfg.string() + "\"", "aao"},
    };
    for (const auto &[args, name] : commands) {
        CAPTURE(name);
        const auto first = run_into(args, name + "_a");
        const auto second = run_into(args, name + "_b");
        CHECK(first.size() > 0);
        REQUIRE(first.size() == second.size());
        for (const auto &[file, bytes] : first) {
            CAPTURE(file);
            REQUIRE(second.count(file) == 1);
            CHECK(bytes == second.at(file));
        }
    }
}

TEST_CASE("training artifacts") {
    const fs::path cfg = write_config(
        "train_artifacts.json",
        "{\"dataset\": \"moon\", \"n_points\": 20, \"epochs\": 2, "
        "\"data_qubits\": 2, \"ppel_layers\": 1, \"grid\": 5, "
        "\"lr\": 0.05}");
    const auto out = run_into(
        "train --seed 9 --config \"" + cfg.string() + "\"", "train_files");
    REQUIRE(out.count("train_trace.tsv") == 1);
    REQUIRE(out.count("checkpoint.txt") == 1);
    REQUIRE(out.count("boundary.tsv") == 1);
    CHECK(header_ok(out.at("train_trace.tsv"), "train"));
    CHECK(out.at("train_trace.tsv").find("final_accuracy=") !=
          std::string::npos);
    CHECK(out.at("checkpoint.txt").find("qpie-checkpoint v1\n") !=
          std::string::npos);
    // 5x5 grid plus header and column-name lines.
    CHECK(std::count(out.at("boundary.tsv").begin(),
                     out.at("boundary.tsv").end(), '\n') == 27);

    // A trained checkpoint feeds straight into the Fisher analysis.
    const fs::path fim_cfg = write_config(
        "fim_from_ckpt.json",
        "{\"n_points\": 8, \"fim_params\": 15, \"checkpoint\": \"" +
            (g_work / "train_files" / "checkpoint.txt").string() + "\"}");
    const auto fim_out = run_into(
        "fim --seed 9 --config \"" + fim_cfg.string() + "\"", "fim_ckpt");
    REQUIRE(fim_out.count("fim_eigenvalues.tsv") == 1);
    CHECK(fim_out.at("fim_eigenvalues.tsv").find("eigenvalue\n") !=
          std::string::npos);
}

TEST_CASE("narma artifacts") {
    const fs::path cfg = write_config(
        "narma_artifacts.json",
        "{\"order\": 5, \"steps\": 40, \"epochs\": 6, "
        "\"sigma_samples\": 500}");
    const auto out = run_into(
        "narma --seed 11 --config \"" + cfg.string() + "\"", "narma_files");
    REQUIRE(out.count("narma_epochs.tsv") == 1);
    REQUIRE(out.count("narma_series.tsv") == 1);
    CHECK(header_ok(out.at("narma_epochs.tsv"), "narma"));
    CHECK(out.at("narma_epochs.tsv").find("epoch\teta\tsigma_est\tmse\n") !=
          std::string::npos);
    // 6 epochs + header + column names.
    CHECK(std::count(out.at("narma_epochs.tsv").begin(),
                     out.at("narma_epochs.tsv").end(), '\n') == 8);
    CHECK(out.at("narma_series.tsv")
              .find("t\tu\ty\tprediction\tband_lo\tband_hi\n") !=
          std::string::npos);

    const fs::path bad = write_config("narma_bad.json", "{\"order\": 7}");
    CHECK(run_cli("narma --config \"" + bad.string() + "\"") == 2);
}

TEST_CASE("adaptive growth artifacts") {
    const fs::path cfg = write_config("aao_artifacts.json", "{\"steps\": 2}");
    const auto out = run_into(
        "aao-grow --seed 13 --config \"" + cfg.string() + "\"", "aao_files");
    REQUIRE(out.count("aao_steps.tsv") == 1);
    REQUIRE(out.count("aao_circuit.txt") == 1);
    const std::string &steps = out.at("aao_steps.tsv");
    CHECK(header_ok(steps, "aao-grow"));
    CHECK(steps.find("step\tgate\tqubits\tgradient\n") != std::string::npos);
    // After an H layer the first pick is the Y rotation on the measured
    // qubit, whose gradient magnitude is 1 at angle zero.
    const std::size_t row = steps.find("0\tRY\t0\t");
    REQUIRE(row != std::string::npos);
    const std::size_t value_at = row + 7;
    const double gradient = std::stod(steps.substr(value_at));
    CHECK(std::abs(gradient + 1.0) < 1e-12);
}

int main(int argc, char **argv) {
    std::vector<char *> passthrough;
    passthrough.push_back(argv[0]);
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--cli" && i + 1 < argc) {
            g_cli_path = argv[++i];
        } else {
            passthrough.push_back(argv[i]);
        }
    }
    if (g_cli_path.empty()) {
        std::fprintf(stderr, "usage: test_cli --cli <path-to-binary>\n");
        return 2;
    }
    g_work = fs::temp_directory_path() /
             ("qpie-cli-tests-" + std::to_string(::getpid()));
    fs::create_directories(g_work);
    doctest::Context context;
    context.applyCommandLine(static_cast<int>(passthrough.size()),
                             passthrough.data());
    const int rc = context.run();
    fs::remove_all(g_work);
    return rc;
}
