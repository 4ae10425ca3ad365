#pragma once

#include <cstdint>
#include <functional>

#include "purikit/tensor.hpp"

namespace purikit {

enum class AttackMethod { Fgsm, Bim, Pgd };
enum class AttackNorm { L2, Linf };

struct AttackConfig {
    AttackMethod method = AttackMethod::Fgsm;
    AttackNorm norm = AttackNorm::L2;
    double epsilon = 0.0;
    int steps = 1;            // FGSM always takes exactly one step
    double step_size = 0.0;   // <= 0 selects the default epsilon / 10
    std::uint64_t seed = 0;   // PGD random start

    void validate() const;
};

// Gradient of the classification loss with respect to the input. Attacks
// are written against this callback so any differentiable model can be
// targeted; the network module provides the adapter for its classifier.
using InputGradFn = std::function<Tensor(const Tensor& x, int label)>;

// One full-budget step along the (sign of the) gradient, clamped to [0,1].
// Zero-gradient inputs come back unchanged.
Image fgsm(const InputGradFn& grad, const Image& x, int label, const AttackConfig& cfg);

// Iterative FGSM; after every step the perturbation is re-projected onto
// the epsilon ball around the original input and onto [0,1]. With steps=1
// and step_size=epsilon this is exactly fgsm.
Image bim(const InputGradFn& grad, const Image& x, int label, const AttackConfig& cfg);

// BIM from a seeded uniformly random start inside the epsilon ball.
Image pgd(const InputGradFn& grad, const Image& x, int label, const AttackConfig& cfg);

// Dispatch on cfg.method.
Image run_attack(const InputGradFn& grad, const Image& x, int label, const AttackConfig& cfg);

const char* attack_method_name(AttackMethod m);
const char* attack_norm_name(AttackNorm n);

}  // namespace purikit
