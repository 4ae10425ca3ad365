#include "purikit/attack.hpp"

#include <cmath>
#include <stdexcept>

#include "purikit/rng.hpp"

namespace purikit {

namespace {

double l2_norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

void project_ball(std::vector<double>& delta, AttackNorm norm, double epsilon) {
    if (norm == AttackNorm::L2) {
        const double n = l2_norm(delta);
        if (n > epsilon) {
            const double scale = epsilon / n;
            for (double& d : delta) d *= scale;
        }
    } else {
        for (double& d : delta) {
            if (d > epsilon) d = epsilon;
            if (d < -epsilon) d = -epsilon;
        }
    }
}

// Keeps x0 + delta inside [0,1] coordinate-wise; can only shrink |delta|.
void project_box(std::vector<double>& delta, const std::vector<double>& x0) {
    for (std::size_t i = 0; i < delta.size(); ++i) {
        double v = x0[i] + delta[i];
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        delta[i] = v - x0[i];
    }
}

Image attack_iterate(const InputGradFn& grad, const Image& x, int label, AttackNorm norm,
                     double epsilon, int steps, double step_size, bool random_start,
                     std::uint64_t seed) {
    const Tensor& x0 = x.tensor();
    std::vector<double> delta(x0.data.size(), 0.0);

    if (random_start && epsilon > 0.0) {
        Rng rng(seed);
        if (norm == AttackNorm::L2) {
            std::vector<double> dir(delta.size());
            for (double& d : dir) d = rng.normal();
            const double n = l2_norm(dir);
            if (n > 0.0) {
                const double radius =
                    epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(delta.size()));
                for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = dir[i] * (radius / n);
            }
        } else {
            for (double& d : delta) d = rng.uniform(-epsilon, epsilon);
        }
        project_box(delta, x0.data);
    }

    Tensor cur = x0;
    for (int step = 0; step < steps; ++step) {
        for (std::size_t i = 0; i < delta.size(); ++i) cur.data[i] = x0.data[i] + delta[i];
        const Tensor g = grad(cur, label);
        if (g.data.size() != delta.size())
            throw std::invalid_argument("attack: gradient shape does not match the input");

        if (norm == AttackNorm::L2) {
            const double n = l2_norm(g.data);
            if (n > 0.0) {
                const double scale = step_size / n;
                for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += g.data[i] * scale;
            }
        } else {
            for (std::size_t i = 0; i < delta.size(); ++i) {
                const double s = g.data[i] > 0.0 ? 1.0 : (g.data[i] < 0.0 ? -1.0 : 0.0);
                delta[i] += step_size * s;
            }
        }
        project_ball(delta, norm, epsilon);
        project_box(delta, x0.data);
    }

    Tensor out = x0;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        double v = x0.data[i] + delta[i];
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        out.data[i] = v;
    }
    return Image::checked(std::move(out));
}

double default_step(const AttackConfig& cfg) {
    return cfg.step_size > 0.0 ? cfg.step_size : cfg.epsilon / 10.0;
}

}  // namespace

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("attack: epsilon must be nonnegative");
    if (steps < 1) throw std::invalid_argument("attack: steps must be at least 1");
}

Image fgsm(const InputGradFn& grad, const Image& x, int label, const AttackConfig& cfg) {
    cfg.validate();
    return attack_iterate(grad, x, label, cfg.norm, cfg.epsilon, 1, cfg.epsilon, false, 0);
}

Image bim(const InputGradFn& grad, const Image& x, int label, const AttackConfig& cfg) {
    cfg.validate();
    return attack_iterate(grad, x, label, cfg.norm, cfg.epsilon, cfg.steps, default_step(cfg), false, 0);
}

Image pgd(const InputGradFn& grad, const Image& x, int label, const AttackConfig& cfg) {
    cfg.validate();
    return attack_iterate(grad, x, label, cfg.norm, cfg.epsilon, cfg.steps, default_step(cfg), true,
                          cfg.seed);
}

Image run_attack(const InputGradFn& grad, const Image& x, int label, const AttackConfig& cfg) {
    switch (cfg.method) {
        case AttackMethod::Fgsm: return fgsm(grad, x, label, cfg);
        case AttackMethod::Bim: return bim(grad, x, label, cfg);
        case AttackMethod::Pgd: return pgd(grad, x, label, cfg);
    }
    throw std::logic_error("attack: bad method");
}

const char* attack_method_name(AttackMethod m) {
    switch (m) {
        case AttackMethod::Fgsm: return "fgsm";
        case AttackMethod::Bim: return "bim";
        case AttackMethod::Pgd: return "pgd";
    }
    return "?";
}

const char* attack_norm_name(AttackNorm n) {
    return n == AttackNorm::L2 ? "l2" : "linf";
}

}  // namespace purikit
