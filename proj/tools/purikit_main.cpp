// Command-line front end for the purification pipeline. Stages read and
// write ArtifactBundle files in the output directory; a fixed config plus
// --threads=1 reproduces every artifact byte for byte.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "purikit/artifacts.hpp"
#include "purikit/config.hpp"
#include "purikit/datasets.hpp"
#include "purikit/parallel.hpp"
#include "purikit/pipeline.hpp"
#include "purikit/rng.hpp"

namespace fs = std::filesystem;
using namespace purikit;

namespace {

// Exit codes by diagnostic category.
constexpr int kExitConfig = 1;
constexpr int kExitDependency = 2;
constexpr int kExitArtifact = 3;
constexpr int kExitInternal = 4;

struct DependencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Run config JSON file");
    cmd->add_option("--out", opts.out_dir, "Output directory (default $PURIKIT_OUT or ./purikit_out)");
    cmd->add_option("--set", opts.overrides, "Dotted config override, e.g. net.epochs=20")
        ->take_all();
    cmd->add_option("--seed", opts.seed, "Override the global seed")->each([&opts](const std::string&) {
        opts.seed_set = true;
    });
    cmd->add_option("--threads", opts.threads, "Worker threads (1 = bit-exact reproducible)");
}

RunConfig resolve_config(const CommonOpts& opts) {
    nlohmann::json raw = default_config_json();
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw std::invalid_argument("config: cannot open '" + opts.config_path + "'");
        try {
            in >> raw;
        } catch (const nlohmann::json::exception& ex) {
            throw std::invalid_argument("config: '" + opts.config_path + "' is not valid JSON: " +
                                        ex.what());
        }
    }
    for (const auto& o : opts.overrides) apply_override(raw, o);
    RunConfig cfg = parse_run_config(raw);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (opts.threads > 0) cfg.threads = opts.threads;
    return cfg;
}

fs::path resolve_out(const CommonOpts& opts) {
    if (!opts.out_dir.empty()) return opts.out_dir;
    if (const char* env = std::getenv("PURIKIT_OUT"); env && *env) return env;
    return "purikit_out";
}

ArtifactBundle require_bundle(const fs::path& out, const char* stem, const char* stage_hint) {
    const fs::path path = out / (std::string(stem) + ".pkit");
    if (!fs::exists(path))
        throw DependencyError(std::string("missing artifact '") + stem + "' (expected at " +
                              path.string() + "); run " + stage_hint + " first");
    return load_bundle(path);
}

void write(const ArtifactBundle& bundle, const fs::path& out, const std::string& stem) {
    fs::create_directories(out);
    const fs::path path = out / (stem + ".pkit");
    save_bundle(bundle, path);
    std::cout << "wrote " << path.string() << "\n";
}

// ---- stage bodies (shared by the individual commands and full-run) ----

void stage_synth(const RunConfig& cfg, const fs::path& out) {
    LabeledDataset train, eval;
    if (cfg.dataset.source == "synthetic") {
        train = generate_synthetic_dataset(cfg.dataset.classes, cfg.dataset.per_class_train,
                                           cfg.dataset.side, cfg.dataset.noise_sigma,
                                           stage_seed(cfg.seed, Stage::DatasetTrain));
        eval = generate_synthetic_dataset(cfg.dataset.classes, cfg.dataset.per_class_eval,
                                          cfg.dataset.side, cfg.dataset.noise_sigma,
                                          stage_seed(cfg.seed, Stage::DatasetEval));
    } else {
        train = load_cifar10_binary(cfg.dataset.cifar_train_path, cfg.dataset.cifar_train_limit);
        eval = load_cifar10_binary(cfg.dataset.cifar_eval_path, cfg.dataset.cifar_eval_limit);
    }
    ArtifactBundle tb = dataset_to_bundle(train);
    tb.manifest()["source"] = cfg.dataset.source;
    tb.manifest()["split"] = "train";
    write(tb, out, "dataset_train");
    ArtifactBundle eb = dataset_to_bundle(eval);
    eb.manifest()["source"] = cfg.dataset.source;
    eb.manifest()["split"] = "eval";
    write(eb, out, "dataset_eval");
}

void stage_train_baseline(const RunConfig& cfg, const fs::path& out) {
    const LabeledDataset train = dataset_from_bundle(require_bundle(out, "dataset_train", "synth"));
    TrainConfig tc = cfg.net;
    tc.seed = stage_seed(cfg.seed, Stage::Baseline);
    const TrainResult result = train_baseline(train, tc);
    ArtifactBundle bundle = params_to_bundle(result.params);
    nlohmann::json metrics = nlohmann::json::array();
    for (const auto& e : result.epochs)
        metrics.push_back({{"loss", e.loss}, {"accuracy", e.accuracy}});
    bundle.manifest()["training"] = {{"epochs", metrics},
                                     {"seed", tc.seed},
                                     {"role", "baseline"}};
    write(bundle, out, "baseline");
    std::printf("baseline train accuracy: %.4f\n", result.epochs.back().accuracy);
}

void stage_build_srd(const RunConfig& cfg, const fs::path& out) {
    const LabeledDataset train = dataset_from_bundle(require_bundle(out, "dataset_train", "synth"));
    const NetworkParams baseline =
        params_from_bundle(require_bundle(out, "baseline", "train-baseline"));
    SrdConfig sc = cfg.srd;
    sc.seed = stage_seed(cfg.seed, Stage::Srd);
    const SemanticReconstructionDictionary phi = build_srd(baseline, train, sc);
    ArtifactBundle bundle = srd_to_bundle(phi);
    write(bundle, out, "srd");
    std::printf("srd entries: %zu\n", phi.entries.size());
    for (const auto& d : phi.diagnostics) std::printf("  note: %s\n", d.c_str());
}

void stage_train_robust(const RunConfig& cfg, const fs::path& out) {
    const LabeledDataset train = dataset_from_bundle(require_bundle(out, "dataset_train", "synth"));
    const SemanticReconstructionDictionary phi =
        srd_from_bundle(require_bundle(out, "srd", "build-srd"));
    RobustTrainConfig rc = cfg.robust;
    rc.base.seed = stage_seed(cfg.seed, Stage::Robust);
    const TrainResult result = train_robust(train, phi, rc);
    ArtifactBundle bundle = params_to_bundle(result.params);
    nlohmann::json metrics = nlohmann::json::array();
    for (const auto& e : result.epochs)
        metrics.push_back({{"loss", e.loss}, {"accuracy", e.accuracy}, {"mean_md", e.mean_md}});
    bundle.manifest()["training"] = {{"epochs", metrics},
                                     {"seed", rc.base.seed},
                                     {"alpha", rc.alpha},
                                     {"role", "robust"}};
    write(bundle, out, "robust");
    std::printf("robust train accuracy: %.4f, final mean MD: %.4f\n",
                result.epochs.back().accuracy, result.epochs.back().mean_md);
}

void stage_attack(const RunConfig& cfg, const fs::path& out) {
    const LabeledDataset eval = dataset_from_bundle(require_bundle(out, "dataset_eval", "synth"));
    const NetworkParams baseline =
        params_from_bundle(require_bundle(out, "baseline", "train-baseline"));
    const InputGradFn grad = input_grad_fn(baseline);
    for (std::size_t a = 0; a < cfg.attacks.size(); ++a) {
        LabeledDataset attacked = eval;
        const std::uint64_t base_seed = stage_seed(cfg.seed, Stage::Attack, a);
        parallel_for(eval.size(), [&](std::size_t i) {
            AttackConfig per_sample = cfg.attacks[a];
            per_sample.seed = derive_seed(base_seed, 0xA77, i);
            attacked.images[i] = run_attack(grad, eval.images[i], eval.labels[i], per_sample);
        });
        ArtifactBundle bundle = dataset_to_bundle(attacked);
        bundle.manifest()["attack"] = attack_to_json(cfg.attacks[a]);
        bundle.manifest()["attack"]["seed"] = base_seed;
        write(bundle, out, "attacked_" + attack_condition_name(a, cfg.attacks[a]));
    }
}

void stage_purify(const RunConfig& cfg, const fs::path& out, const std::string& input_stem) {
    const fs::path input_path = out / (input_stem + ".pkit");
    if (!fs::exists(input_path))
        throw DependencyError("missing artifact '" + input_stem + "' (expected at " +
                              input_path.string() + ")");
    const LabeledDataset input = dataset_from_bundle(load_bundle(input_path));
    const SemanticReconstructionDictionary phi =
        srd_from_bundle(require_bundle(out, "srd", "build-srd"));
    const NetworkParams robust = params_from_bundle(require_bundle(out, "robust", "train-robust"));

    LabeledDataset purified = input;
    std::vector<PurifyTrace> traces(input.size());
    parallel_for(input.size(), [&](std::size_t i) {
        auto [img, trace] = purify(input.images[i], robust, phi, cfg.purify);
        purified.images[i] = std::move(img);
        traces[i] = trace;
    });
    ArtifactBundle bundle = dataset_to_bundle(purified);
    nlohmann::json trace_json = nlohmann::json::array();
    std::size_t flagged = 0;
    for (const auto& t : traces) {
        trace_json.push_back({{"matched_class", t.matched_class},
                              {"matched_cluster", t.matched_cluster},
                              {"md", t.md},
                              {"cbpdn_converged", t.cbpdn_converged},
                              {"cbpdn_iterations", t.cbpdn_iterations}});
        if (!t.cbpdn_converged) ++flagged;
    }
    bundle.manifest()["purify"] = {{"input", input_stem},
                                   {"tikhonov_lambda", cfg.purify.tikhonov.lambda_low},
                                   {"lambda", cfg.purify.lambda_l1},
                                   {"traces", std::move(trace_json)}};
    write(bundle, out, "purified_" + input_stem);
    if (flagged > 0) std::printf("note: %zu sample(s) carried a non-convergence flag\n", flagged);
}

void stage_eval(const RunConfig& cfg, const fs::path& out, bool with_purifier) {
    const LabeledDataset eval = dataset_from_bundle(require_bundle(out, "dataset_eval", "synth"));
    const NetworkParams baseline =
        params_from_bundle(require_bundle(out, "baseline", "train-baseline"));

    // Attack seeds come from the stage rule so cmd_attack and cmd_eval craft
    // identical adversarial sets.
    std::vector<AttackConfig> attacks = cfg.attacks;
    for (std::size_t a = 0; a < attacks.size(); ++a)
        attacks[a].seed = stage_seed(cfg.seed, Stage::Attack, a);

    SemanticReconstructionDictionary phi;
    NetworkParams robust;
    Purifier purifier;
    EvaluationReport report;
    if (with_purifier) {
        phi = srd_from_bundle(require_bundle(out, "srd", "build-srd"));
        robust = params_from_bundle(require_bundle(out, "robust", "train-robust"));
        purifier.robust_params = &robust;
        purifier.phi = &phi;
        purifier.cfg = cfg.purify;
        report = evaluate(baseline, eval, attacks, &purifier);
    } else {
        report = evaluate(baseline, eval, attacks, nullptr);
    }

    fs::create_directories(out);
    write_report_files(report, out);
    std::cout << render_report_table(report);
    for (const auto& c : report.conditions)
        std::printf("timing %-28s %.2fs\n", c.name.c_str(), c.wall_seconds);
    std::cout << "wrote " << (out / "report.txt").string() << "\n";
    std::cout << "wrote " << (out / "records.jsonl").string() << "\n";
}

int dispatch(const std::string& name, const CommonOpts& opts, const std::string& purify_input,
             bool no_purify) {
    const RunConfig cfg = resolve_config(opts);
    set_thread_count(cfg.threads);
    const fs::path out = resolve_out(opts);

    if (name == "synth") {
        stage_synth(cfg, out);
    } else if (name == "train-baseline") {
        stage_train_baseline(cfg, out);
    } else if (name == "build-srd") {
        stage_build_srd(cfg, out);
    } else if (name == "train-robust") {
        stage_train_robust(cfg, out);
    } else if (name == "attack") {
        stage_attack(cfg, out);
    } else if (name == "purify") {
        stage_purify(cfg, out, purify_input);
    } else if (name == "eval") {
        stage_eval(cfg, out, !no_purify);
    } else if (name == "full-run") {
        stage_synth(cfg, out);
        stage_train_baseline(cfg, out);
        stage_build_srd(cfg, out);
        stage_train_robust(cfg, out);
        stage_eval(cfg, out, !no_purify);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial image purification pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string purify_input = "dataset_eval";
    bool no_purify = false;

    const std::vector<std::string> commands = {"synth",  "train-baseline", "build-srd",
                                               "train-robust", "attack", "purify",
                                               "eval",   "full-run"};
    const std::vector<std::string> descriptions = {
        "Materialize the train/eval datasets",
        "Train the baseline classifier",
        "Build the semantic reconstruction dictionary",
        "Robust semantic training with the Mahalanobis constraint",
        "Craft the attack grid against the baseline",
        "Purify a dataset artifact",
        "Evaluate the {attack} x {purify} grid",
        "Run every stage in order"};

    for (std::size_t i = 0; i < commands.size(); ++i) {
        CLI::App* cmd = app.add_subcommand(commands[i], descriptions[i]);
        add_common(cmd, opts);
        if (commands[i] == "purify")
            cmd->add_option("--input", purify_input, "Input dataset artifact stem (default dataset_eval)");
        if (commands[i] == "eval" || commands[i] == "full-run")
            cmd->add_flag("--no-purify", no_purify, "Skip the purification cells of the grid");
    }

    CLI11_PARSE(app, argc, argv);

    const std::string chosen = app.get_subcommands().front()->get_name();
    try {
        return dispatch(chosen, opts, purify_input, no_purify);
    } catch (const DependencyError& ex) {
        std::cerr << "error(dependency): " << ex.what() << "\n";
        return kExitDependency;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "error(config): " << ex.what() << "\n";
        return kExitConfig;
    } catch (const std::runtime_error& ex) {
        std::cerr << "error(artifact): " << ex.what() << "\n";
        return kExitArtifact;
    } catch (const std::exception& ex) {
        std::cerr << "error(internal): " << ex.what() << "\n";
        return kExitInternal;
    }
}
