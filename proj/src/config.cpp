#include "purikit/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace purikit {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config: " + path + ": " + what);
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) fail(path, "expected an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) fail(path, "unknown key '" + key + "'");
}

template <typename T>
T get_or(const json& j, const std::string& path, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(path + "." + key, "wrong type");
    }
}

double get_number(const json& j, const std::string& path, const char* key, double fallback,
                  double lo, double hi) {
    const double v = get_or<double>(j, path, key, fallback);
    if (!(v >= lo && v <= hi))
        fail(path + "." + key, "value " + std::to_string(v) + " outside [" + std::to_string(lo) +
                                   ", " + std::to_string(hi) + "]");
    return v;
}

int get_int(const json& j, const std::string& path, const char* key, int fallback, int lo, int hi) {
    const int v = get_or<int>(j, path, key, fallback);
    if (v < lo || v > hi)
        fail(path + "." + key, "value " + std::to_string(v) + " outside [" + std::to_string(lo) +
                                   ", " + std::to_string(hi) + "]");
    return v;
}

AdmmConfig parse_admm(const json& j, const std::string& path, const AdmmConfig& defaults) {
    check_keys(j, path, {"rho", "max_iters", "tol_primal", "tol_dual", "rho_adapt"});
    AdmmConfig cfg = defaults;
    cfg.rho = get_number(j, path, "rho", defaults.rho, 0.0, 1e9);
    cfg.max_iters = get_int(j, path, "max_iters", defaults.max_iters, 1, 1000000);
    cfg.tol_primal = get_number(j, path, "tol_primal", defaults.tol_primal, 1e-12, 1.0);
    cfg.tol_dual = get_number(j, path, "tol_dual", defaults.tol_dual, 1e-12, 1.0);
    cfg.rho_adapt = get_or<bool>(j, path, "rho_adapt", defaults.rho_adapt);
    cfg.validate();
    return cfg;
}

TrainConfig parse_train(const json& j, const std::string& path, const TrainConfig& defaults) {
    check_keys(j, path, {"epochs", "batch_size", "learning_rate", "weight_decay"});
    TrainConfig cfg = defaults;
    cfg.epochs = get_int(j, path, "epochs", defaults.epochs, 1, 100000);
    cfg.batch_size = get_int(j, path, "batch_size", defaults.batch_size, 1, 100000);
    cfg.learning_rate = get_number(j, path, "learning_rate", defaults.learning_rate, 0.0, 100.0);
    cfg.weight_decay = get_number(j, path, "weight_decay", defaults.weight_decay, 0.0, 10.0);
    cfg.validate();
    return cfg;
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t seed, Stage stage, std::uint64_t extra) {
    return seed + static_cast<std::uint64_t>(stage) + extra;
}

nlohmann::json attack_to_json(const AttackConfig& cfg) {
    return {{"method", attack_method_name(cfg.method)},
            {"norm", attack_norm_name(cfg.norm)},
            {"epsilon", cfg.epsilon},
            {"steps", cfg.steps},
            {"step_size", cfg.step_size}};
}

AttackConfig attack_from_json(const nlohmann::json& j, const std::string& path) {
    check_keys(j, path, {"method", "norm", "epsilon", "steps", "step_size"});
    AttackConfig cfg;
    const std::string method = get_or<std::string>(j, path, "method", "fgsm");
    if (method == "fgsm") {
        cfg.method = AttackMethod::Fgsm;
    } else if (method == "bim") {
        cfg.method = AttackMethod::Bim;
    } else if (method == "pgd") {
        cfg.method = AttackMethod::Pgd;
    } else {
        fail(path + ".method", "unknown attack '" + method + "' (expected fgsm, bim, or pgd)");
    }
    const std::string norm = get_or<std::string>(j, path, "norm", "l2");
    if (norm == "l2") {
        cfg.norm = AttackNorm::L2;
    } else if (norm == "linf") {
        cfg.norm = AttackNorm::Linf;
    } else {
        fail(path + ".norm", "unknown norm '" + norm + "' (expected l2 or linf)");
    }
    cfg.epsilon = get_number(j, path, "epsilon", 0.04, 0.0, 1000.0);
    cfg.steps = get_int(j, path, "steps", cfg.method == AttackMethod::Fgsm ? 1 : 10, 1, 1000000);
    cfg.step_size = get_number(j, path, "step_size", 0.0, 0.0, 1000.0);
    if (cfg.method == AttackMethod::Fgsm) cfg.steps = 1;
    cfg.validate();
    return cfg;
}

nlohmann::json default_config_json() {
    const RunConfig d;
    return {
        {"seed", d.seed},
        {"threads", d.threads},
        {"dataset",
         {{"source", d.dataset.source},
          {"classes", d.dataset.classes},
          {"per_class_train", d.dataset.per_class_train},
          {"per_class_eval", d.dataset.per_class_eval},
          {"side", d.dataset.side},
          {"noise_sigma", d.dataset.noise_sigma}}},
        {"net",
         {{"epochs", d.net.epochs},
          {"batch_size", d.net.batch_size},
          {"learning_rate", d.net.learning_rate},
          {"weight_decay", d.net.weight_decay}}},
        {"robust",
         {{"epochs", d.robust.base.epochs},
          {"batch_size", d.robust.base.batch_size},
          {"learning_rate", d.robust.base.learning_rate},
          {"weight_decay", d.robust.base.weight_decay},
          {"alpha", d.robust.alpha},
          {"attack",
           {{"method", "pgd"}, {"norm", "l2"}, {"epsilon", 0.3}, {"steps", 10}, {"step_size", 0.0}}}}},
        {"srd",
         {{"psi_max", d.srd.psi_max},
          {"atoms", d.srd.atom_count},
          {"filter_size", d.srd.filter_size},
          {"lambda", d.srd.lambda_l1},
          {"tikhonov_lambda", d.srd.tikhonov.lambda_low},
          {"cdl_iters", d.srd.cdl_outer_iters},
          {"admm",
           {{"rho", d.srd.admm.rho},
            {"max_iters", d.srd.admm.max_iters},
            {"tol_primal", d.srd.admm.tol_primal},
            {"tol_dual", d.srd.admm.tol_dual},
            {"rho_adapt", d.srd.admm.rho_adapt}}}}},
        {"purify",
         {{"tikhonov_lambda", d.purify.tikhonov.lambda_low},
          {"lambda", d.purify.lambda_l1},
          {"admm",
           {{"rho", d.purify.admm.rho},
            {"max_iters", d.purify.admm.max_iters},
            {"tol_primal", d.purify.admm.tol_primal},
            {"tol_dual", d.purify.admm.tol_dual},
            {"rho_adapt", d.purify.admm.rho_adapt}}}}},
        {"attacks",
         {{{"method", "fgsm"}, {"norm", "l2"}, {"epsilon", 0.04}, {"steps", 1}, {"step_size", 0.0}},
          {{"method", "fgsm"}, {"norm", "l2"}, {"epsilon", 0.08}, {"steps", 1}, {"step_size", 0.0}}}},
    };
}

RunConfig parse_run_config(const nlohmann::json& j) {
    check_keys(j, "config",
               {"seed", "threads", "dataset", "net", "robust", "srd", "purify", "attacks"});
    RunConfig cfg;
    cfg.seed = get_or<std::uint64_t>(j, "config", "seed", cfg.seed);
    cfg.threads = get_int(j, "config", "threads", cfg.threads, 1, 4096);

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_keys(d, "dataset",
                   {"source", "classes", "per_class_train", "per_class_eval", "side", "noise_sigma",
                    "cifar_train_path", "cifar_eval_path", "cifar_train_limit", "cifar_eval_limit"});
        cfg.dataset.source = get_or<std::string>(d, "dataset", "source", cfg.dataset.source);
        if (cfg.dataset.source != "synthetic" && cfg.dataset.source != "cifar10")
            fail("dataset.source", "expected 'synthetic' or 'cifar10'");
        cfg.dataset.classes = get_int(d, "dataset", "classes", cfg.dataset.classes, 2, 10);
        cfg.dataset.per_class_train =
            get_int(d, "dataset", "per_class_train", cfg.dataset.per_class_train, 2, 1000000);
        cfg.dataset.per_class_eval =
            get_int(d, "dataset", "per_class_eval", cfg.dataset.per_class_eval, 1, 1000000);
        cfg.dataset.side = get_int(d, "dataset", "side", cfg.dataset.side, 8, 512);
        cfg.dataset.noise_sigma =
            get_number(d, "dataset", "noise_sigma", cfg.dataset.noise_sigma, 0.0, 1.0);
        cfg.dataset.cifar_train_path =
            get_or<std::string>(d, "dataset", "cifar_train_path", cfg.dataset.cifar_train_path);
        cfg.dataset.cifar_eval_path =
            get_or<std::string>(d, "dataset", "cifar_eval_path", cfg.dataset.cifar_eval_path);
        cfg.dataset.cifar_train_limit =
            get_int(d, "dataset", "cifar_train_limit", cfg.dataset.cifar_train_limit, 0, 60000);
        cfg.dataset.cifar_eval_limit =
            get_int(d, "dataset", "cifar_eval_limit", cfg.dataset.cifar_eval_limit, 0, 60000);
        if (cfg.dataset.source == "cifar10") {
            for (const auto* p : {&cfg.dataset.cifar_train_path, &cfg.dataset.cifar_eval_path}) {
                if (p->empty()) fail("dataset", "cifar10 source requires cifar_train_path and cifar_eval_path");
                if (!std::filesystem::exists(*p)) fail("dataset", "path '" + *p + "' does not exist");
            }
        }
    }

    if (j.contains("net")) cfg.net = parse_train(j.at("net"), "net", cfg.net);

    if (j.contains("robust")) {
        const json& r = j.at("robust");
        check_keys(r, "robust",
                   {"epochs", "batch_size", "learning_rate", "weight_decay", "alpha", "attack"});
        json base = r;
        base.erase("alpha");
        base.erase("attack");
        cfg.robust.base = parse_train(base, "robust", cfg.robust.base);
        cfg.robust.alpha = get_number(r, "robust", "alpha", 0.3, 0.0, 1e6);
        if (r.contains("attack")) {
            cfg.robust.inner_attack = attack_from_json(r.at("attack"), "robust.attack");
        } else {
            cfg.robust.inner_attack = attack_from_json(default_config_json()["robust"]["attack"],
                                                       "robust.attack");
        }
        cfg.robust.validate();
    } else {
        cfg.robust.alpha = 0.3;
        cfg.robust.inner_attack =
            attack_from_json(default_config_json()["robust"]["attack"], "robust.attack");
    }

    if (j.contains("srd")) {
        const json& s = j.at("srd");
        check_keys(s, "srd", {"psi_max", "atoms", "filter_size", "lambda", "tikhonov_lambda", "cdl_iters", "admm"});
        cfg.srd.psi_max = get_int(s, "srd", "psi_max", cfg.srd.psi_max, 2, 64);
        cfg.srd.atom_count = get_int(s, "srd", "atoms", cfg.srd.atom_count, 1, 256);
        cfg.srd.filter_size = get_int(s, "srd", "filter_size", cfg.srd.filter_size, 1, 64);
        cfg.srd.lambda_l1 = get_number(s, "srd", "lambda", cfg.srd.lambda_l1, 0.0, 1e6);
        cfg.srd.tikhonov.lambda_low =
            get_number(s, "srd", "tikhonov_lambda", cfg.srd.tikhonov.lambda_low, 0.0, 1e9);
        cfg.srd.cdl_outer_iters = get_int(s, "srd", "cdl_iters", cfg.srd.cdl_outer_iters, 1, 10000);
        if (s.contains("admm")) cfg.srd.admm = parse_admm(s.at("admm"), "srd.admm", cfg.srd.admm);
    }
    cfg.srd.validate();

    if (j.contains("purify")) {
        const json& p = j.at("purify");
        check_keys(p, "purify", {"tikhonov_lambda", "lambda", "admm"});
        cfg.purify.tikhonov.lambda_low =
            get_number(p, "purify", "tikhonov_lambda", cfg.purify.tikhonov.lambda_low, 0.0, 1e9);
        cfg.purify.lambda_l1 = get_number(p, "purify", "lambda", cfg.purify.lambda_l1, 0.0, 1e6);
        if (p.contains("admm")) cfg.purify.admm = parse_admm(p.at("admm"), "purify.admm", cfg.purify.admm);
    }
    cfg.purify.admm.validate();

    if (j.contains("attacks")) {
        if (!j.at("attacks").is_array()) fail("attacks", "expected an array");
        for (std::size_t i = 0; i < j.at("attacks").size(); ++i)
            cfg.attacks.push_back(
                attack_from_json(j.at("attacks")[i], "attacks[" + std::to_string(i) + "]"));
    } else {
        for (const auto& a : default_config_json()["attacks"])
            cfg.attacks.push_back(attack_from_json(a, "attacks"));
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw std::invalid_argument("config: '" + path.string() + "' is not valid JSON: " + ex.what());
    }
    return parse_run_config(j);
}

void apply_override(nlohmann::json& j, const std::string& dotted_assignment) {
    const auto eq = dotted_assignment.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("override '" + dotted_assignment + "' must look like key.path=value");
    const std::string path = dotted_assignment.substr(0, eq);
    const std::string value = dotted_assignment.substr(eq + 1);
    if (path.empty()) throw std::invalid_argument("override: empty key path");

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
        parsed = value;  // plain string
    }

    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw std::invalid_argument("override: empty segment in '" + path + "'");
        if (dot == std::string::npos) {
            (*node)[key] = parsed;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

}  // namespace purikit
