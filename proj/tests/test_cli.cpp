#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "purikit/config.hpp"

using namespace purikit;
namespace fs = std::filesystem;

namespace {

struct RunOutput {
    int exit_code = 0;
    std::string out;
    std::string err;
};

// Runs the built CLI binary with stdout/stderr captured to files.
RunOutput run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out_file = dir / "stdout.txt";
    const fs::path err_file = dir / "stderr.txt";
    const std::string cmd = std::string(PURIKIT_CLI_PATH) + " " + args + " > " + out_file.string() +
                            " 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    RunOutput r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

fs::path temp_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "purikit_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Tiny config so CLI-level tests stay fast.
std::string write_tiny_config(const fs::path& dir) {
    nlohmann::json j = default_config_json();
    j["dataset"]["classes"] = 2;
    j["dataset"]["per_class_train"] = 8;
    j["dataset"]["per_class_eval"] = 4;
    j["net"]["epochs"] = 1;
    const fs::path path = dir / "config.json";
    std::ofstream(path) << j.dump(2);
    return path.string();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("unknown config keys are rejected by name") {
    nlohmann::json j = default_config_json();
    j["net"]["epoch"] = 20;  // typo
    CHECK_THROWS_WITH_AS(static_cast<void>(parse_run_config(j)), doctest::Contains("epoch"),
                         std::invalid_argument);

    nlohmann::json j2 = default_config_json();
    j2["unknown_section"] = 1;
    CHECK_THROWS_WITH_AS(static_cast<void>(parse_run_config(j2)),
                         doctest::Contains("unknown_section"), std::invalid_argument);
}

TEST_CASE("config values are bounds-checked before any compute") {
    nlohmann::json j = default_config_json();
    j["net"]["epochs"] = 0;
    CHECK_THROWS_AS(static_cast<void>(parse_run_config(j)), std::invalid_argument);

    nlohmann::json j2 = default_config_json();
    j2["dataset"]["noise_sigma"] = -0.5;
    CHECK_THROWS_AS(static_cast<void>(parse_run_config(j2)), std::invalid_argument);

    nlohmann::json j3 = default_config_json();
    j3["attacks"][0]["method"] = "cw";
    CHECK_THROWS_WITH_AS(static_cast<void>(parse_run_config(j3)), doctest::Contains("cw"),
                         std::invalid_argument);
}

TEST_CASE("dotted overrides reach nested keys and keep validation total") {
    nlohmann::json j = default_config_json();
    apply_override(j, "net.epochs=33");
    apply_override(j, "dataset.source=synthetic");
    apply_override(j, "purify.tikhonov_lambda=2.5");
    const RunConfig cfg = parse_run_config(j);
    CHECK(cfg.net.epochs == 33);
    CHECK(cfg.purify.tikhonov.lambda_low == doctest::Approx(2.5));

    apply_override(j, "net.epoc=1");
    CHECK_THROWS_WITH_AS(static_cast<void>(parse_run_config(j)), doctest::Contains("epoc"),
                         std::invalid_argument);
    CHECK_THROWS_AS(apply_override(j, "no_equals_sign"), std::invalid_argument);
}

TEST_CASE("stage seeds follow the documented offsets") {
    CHECK(stage_seed(100, Stage::DatasetTrain) == 101);
    CHECK(stage_seed(100, Stage::DatasetEval) == 102);
    CHECK(stage_seed(100, Stage::Baseline) == 103);
    CHECK(stage_seed(100, Stage::Srd) == 104);
    CHECK(stage_seed(100, Stage::Robust) == 105);
    CHECK(stage_seed(100, Stage::Attack, 2) == 108);
}

TEST_CASE("default config parses and carries the documented defaults") {
    const RunConfig cfg = parse_run_config(default_config_json());
    CHECK(cfg.robust.inner_attack.method == AttackMethod::Pgd);
    CHECK(cfg.robust.inner_attack.epsilon == doctest::Approx(0.3));
    CHECK(cfg.robust.inner_attack.steps == 10);
    CHECK(cfg.purify.tikhonov.lambda_low == doctest::Approx(5.0));
    CHECK(cfg.srd.atom_count == 16);
    CHECK(cfg.srd.filter_size == 5);
    REQUIRE(cfg.attacks.size() == 2);
    CHECK(cfg.attacks[1].epsilon == doctest::Approx(0.08));
}

TEST_CASE("purify without build-srd fails with a dependency error naming srd") {
    const fs::path dir = temp_dir("cli_dep");
    const std::string config = write_tiny_config(dir);
    const RunOutput synth =
        run_cli("synth --config " + config + " --out " + (dir / "out").string(), dir);
    REQUIRE(synth.exit_code == 0);

    const RunOutput purify_run =
        run_cli("purify --config " + config + " --out " + (dir / "out").string(), dir);
    CHECK(purify_run.exit_code == 2);
    CHECK(purify_run.err.find("dependency") != std::string::npos);
    CHECK(purify_run.err.find("'srd'") != std::string::npos);
}

TEST_CASE("downstream commands name their missing upstream artifacts") {
    const fs::path dir = temp_dir("cli_dep2");
    const std::string config = write_tiny_config(dir);
    const RunOutput r =
        run_cli("train-baseline --config " + config + " --out " + (dir / "out").string(), dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("dataset_train") != std::string::npos);
}

TEST_CASE("invalid config file exits with the config category") {
    const fs::path dir = temp_dir("cli_badcfg");
    const fs::path cfg = dir / "bad.json";
    std::ofstream(cfg) << "{ \"net\": { \"epoch\": 3 } }";
    const RunOutput r =
        run_cli("synth --config " + cfg.string() + " --out " + (dir / "out").string(), dir);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("epoch") != std::string::npos);
}

TEST_CASE("eval grid emits one row per attack plus the clean row") {
    const fs::path dir = temp_dir("cli_eval");
    const std::string config = write_tiny_config(dir);
    const std::string out = (dir / "out").string();
    REQUIRE(run_cli("synth --config " + config + " --out " + out, dir).exit_code == 0);
    REQUIRE(run_cli("train-baseline --config " + config + " --out " + out, dir).exit_code == 0);
    const RunOutput ev = run_cli("eval --no-purify --config " + config + " --out " + out, dir);
    REQUIRE(ev.exit_code == 0);

    std::ifstream report(fs::path(out) / "report.txt");
    REQUIRE(report.good());
    std::string line;
    int data_rows = 0;
    bool saw_clean = false, saw_004 = false, saw_008 = false;
    while (std::getline(report, line)) {
        if (line.rfind("clean", 0) == 0) saw_clean = true, ++data_rows;
        if (line.find("eps0.04") != std::string::npos) saw_004 = true, ++data_rows;
        if (line.find("eps0.08") != std::string::npos) saw_008 = true, ++data_rows;
    }
    CHECK(saw_clean);
    CHECK(saw_004);
    CHECK(saw_008);
    CHECK(data_rows == 3);
    CHECK(fs::exists(fs::path(out) / "records.jsonl"));
}

}  // TEST_SUITE
