#include <doctest.h>

#include <cmath>

#include "purikit/attack.hpp"
#include "purikit/datasets.hpp"
#include "purikit/net.hpp"
#include "purikit/rng.hpp"

using namespace purikit;

namespace {

double l2_dist(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) acc += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    return std::sqrt(acc);
}

double linf_dist(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

// Test-only convex model: softmax regression on raw pixels. Cross-entropy
// of an affine model is convex in x, so any correctly-signed full-budget
// step cannot decrease the loss.
struct LinearSoftmax {
    int classes;
    std::size_t dim;
    std::vector<double> w;  // [class][pixel]
    std::vector<double> b;

    static LinearSoftmax random(int classes, std::size_t dim, std::uint64_t seed) {
        LinearSoftmax m{classes, dim, {}, {}};
        Rng rng(seed);
        m.w.resize(static_cast<std::size_t>(classes) * dim);
        m.b.resize(classes);
        for (double& v : m.w) v = rng.normal(0.0, 0.5);
        for (double& v : m.b) v = rng.normal(0.0, 0.1);
        return m;
    }

    std::vector<double> softmax(const Tensor& x) const {
        std::vector<double> logits(classes, 0.0);
        for (int c = 0; c < classes; ++c) {
            double acc = b[c];
            for (std::size_t i = 0; i < dim; ++i) acc += w[static_cast<std::size_t>(c) * dim + i] * x.data[i];
            logits[c] = acc;
        }
        const double m = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double& l : logits) {
            l = std::exp(l - m);
            sum += l;
        }
        for (double& l : logits) l /= sum;
        return logits;
    }

    double loss(const Tensor& x, int y) const { return -std::log(softmax(x)[y]); }

    InputGradFn grad_fn() const {
        return [this](const Tensor& x, int y) {
            const std::vector<double> p = softmax(x);
            Tensor g(x.height, x.width, x.channels);
            for (int c = 0; c < classes; ++c) {
                const double coef = p[c] - (c == y ? 1.0 : 0.0);
                for (std::size_t i = 0; i < dim; ++i) g.data[i] += coef * w[static_cast<std::size_t>(c) * dim + i];
            }
            return g;
        };
    }
};

Image random_image(int side, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(side, side, 1);
    for (double& v : t.data) v = rng.uniform(0.2, 0.8);
    return Image::checked(std::move(t));
}

double misclassification_rate(const NetworkParams& params, const LabeledDataset& ds,
                              const AttackConfig& cfg) {
    const InputGradFn grad = input_grad_fn(params);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        AttackConfig per = cfg;
        per.seed = derive_seed(cfg.seed, i);
        const Image adv = run_attack(grad, ds.images[i], ds.labels[i], per);
        const ForwardResult f = forward(params, adv.tensor());
        const int pred = static_cast<int>(std::max_element(f.logits.begin(), f.logits.end()) -
                                          f.logits.begin());
        if (pred != ds.labels[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

}  // namespace

TEST_SUITE("attack") {

TEST_CASE("zero budget returns the input bit-exactly") {
    const LinearSoftmax model = LinearSoftmax::random(3, 64, 3);
    const Image x = random_image(8, 5);
    for (auto method : {AttackMethod::Fgsm, AttackMethod::Bim, AttackMethod::Pgd}) {
        for (auto norm : {AttackNorm::L2, AttackNorm::Linf}) {
            AttackConfig cfg;
            cfg.method = method;
            cfg.norm = norm;
            cfg.epsilon = 0.0;
            cfg.steps = 5;
            cfg.seed = 7;
            const Image out = run_attack(model.grad_fn(), x, 1, cfg);
            CHECK(out.tensor().data == x.tensor().data);
        }
    }
}

TEST_CASE("budget invariant holds for every method and norm") {
    const LinearSoftmax model = LinearSoftmax::random(4, 100, 11);
    const Image x = random_image(10, 13);
    for (auto method : {AttackMethod::Fgsm, AttackMethod::Bim, AttackMethod::Pgd}) {
        for (auto norm : {AttackNorm::L2, AttackNorm::Linf}) {
            for (double eps : {0.02, 0.08, 0.3}) {
                AttackConfig cfg;
                cfg.method = method;
                cfg.norm = norm;
                cfg.epsilon = eps;
                cfg.steps = 7;
                cfg.seed = 17;
                const Image out = run_attack(model.grad_fn(), x, 2, cfg);
                const double dist = norm == AttackNorm::L2 ? l2_dist(out.tensor(), x.tensor())
                                                           : linf_dist(out.tensor(), x.tensor());
                CHECK(dist <= eps + 1e-9);
                for (double v : out.tensor().data) {
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0);
                }
            }
        }
    }
}

TEST_CASE("fgsm cannot decrease the loss of a convex model") {
    const LinearSoftmax model = LinearSoftmax::random(3, 100, 19);
    AttackConfig cfg;
    cfg.method = AttackMethod::Fgsm;
    cfg.norm = AttackNorm::L2;
    cfg.epsilon = 0.08;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Image x = random_image(10, 100 + s);
        const Image adv = fgsm(model.grad_fn(), x, 0, cfg);
        CHECK(model.loss(adv.tensor(), 0) >= model.loss(x.tensor(), 0) - 1e-12);
    }
}

TEST_CASE("bim with one full-budget step equals fgsm bit-exactly") {
    const LinearSoftmax model = LinearSoftmax::random(3, 64, 23);
    const Image x = random_image(8, 29);
    for (auto norm : {AttackNorm::L2, AttackNorm::Linf}) {
        AttackConfig cfg;
        cfg.norm = norm;
        cfg.epsilon = 0.05;
        cfg.method = AttackMethod::Fgsm;
        const Image a = fgsm(model.grad_fn(), x, 1, cfg);
        cfg.method = AttackMethod::Bim;
        cfg.steps = 1;
        cfg.step_size = cfg.epsilon;
        const Image b = bim(model.grad_fn(), x, 1, cfg);
        CHECK(a.tensor().data == b.tensor().data);
    }
}

TEST_CASE("bim stays inside the ball after 100 steps") {
    const LinearSoftmax model = LinearSoftmax::random(3, 64, 31);
    const Image x = random_image(8, 37);
    AttackConfig cfg;
    cfg.method = AttackMethod::Bim;
    cfg.norm = AttackNorm::L2;
    cfg.epsilon = 0.04;
    cfg.steps = 100;
    const Image out = bim(model.grad_fn(), x, 0, cfg);
    CHECK(l2_dist(out.tensor(), x.tensor()) <= 0.04 + 1e-9);
}

TEST_CASE("pgd is deterministic under a fixed seed and random-started otherwise") {
    const LinearSoftmax model = LinearSoftmax::random(3, 64, 41);
    const Image x = random_image(8, 43);
    AttackConfig cfg;
    cfg.method = AttackMethod::Pgd;
    cfg.norm = AttackNorm::L2;
    cfg.epsilon = 0.3;
    cfg.steps = 10;
    cfg.seed = 99;
    const Image a = pgd(model.grad_fn(), x, 1, cfg);
    const Image b = pgd(model.grad_fn(), x, 1, cfg);
    CHECK(a.tensor().data == b.tensor().data);
    cfg.seed = 100;
    const Image c = pgd(model.grad_fn(), x, 1, cfg);
    CHECK(a.tensor().data != c.tensor().data);
}

TEST_CASE("attack config validation") {
    AttackConfig cfg;
    cfg.epsilon = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.epsilon = 0.1;
    cfg.steps = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("on a trained model, iterated attacks dominate one-step attacks") {
    const LabeledDataset train = generate_synthetic_dataset(2, 150, 16, 0.05, 5);
    const LabeledDataset eval = generate_synthetic_dataset(2, 30, 16, 0.05, 6);
    TrainConfig tc;
    tc.epochs = 15;
    tc.batch_size = 8;
    tc.learning_rate = 0.05;
    tc.seed = 7;
    const TrainResult trained = train_baseline(train, tc);

    AttackConfig fgsm_cfg;
    fgsm_cfg.method = AttackMethod::Fgsm;
    fgsm_cfg.norm = AttackNorm::L2;
    fgsm_cfg.epsilon = 0.04;

    AttackConfig bim_cfg = fgsm_cfg;
    bim_cfg.method = AttackMethod::Bim;
    bim_cfg.steps = 100;

    const double fgsm_rate = misclassification_rate(trained.params, eval, fgsm_cfg);
    const double bim_rate = misclassification_rate(trained.params, eval, bim_cfg);
    CHECK(bim_rate >= fgsm_rate);
}

}  // TEST_SUITE
