#include "purikit/net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "purikit/parallel.hpp"
#include "purikit/rng.hpp"

namespace purikit {

namespace {

// Channel-planar activation block: v[(c * h + y) * w + x].
struct Planes {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Planes() = default;
    Planes(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}

    double& at(int ci, int y, int x) { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
    double at(int ci, int y, int x) const { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
};

Planes to_planes(const Tensor& t) {
    Planes p(t.channels, t.height, t.width);
    for (int c = 0; c < t.channels; ++c)
        for (int y = 0; y < t.height; ++y)
            for (int x = 0; x < t.width; ++x) p.at(c, y, x) = t.at(y, x, c);
    return p;
}

Tensor to_tensor(const Planes& p) {
    Tensor t(p.h, p.w, p.c);
    for (int c = 0; c < p.c; ++c)
        for (int y = 0; y < p.h; ++y)
            for (int x = 0; x < p.w; ++x) t.at(y, x, c) = p.at(c, y, x);
    return t;
}

// 3x3 convolution with same zero padding.
void conv3x3(const Planes& in, const std::vector<double>& w, const std::vector<double>& b,
             int out_channels, Planes& out) {
    const int k = NetworkParams::kKernel;
    out = Planes(out_channels, in.h, in.w);
    for (int o = 0; o < out_channels; ++o) {
        for (int y = 0; y < in.h; ++y) {
            for (int x = 0; x < in.w; ++x) {
                double acc = b[o];
                for (int i = 0; i < in.c; ++i) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int yy = y + ky - 1;
                        if (yy < 0 || yy >= in.h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int xx = x + kx - 1;
                            if (xx < 0 || xx >= in.w) continue;
                            acc += w[((static_cast<std::size_t>(o) * in.c + i) * k + ky) * k + kx] *
                                   in.at(i, yy, xx);
                        }
                    }
                }
                out.at(o, y, x) = acc;
            }
        }
    }
}

// Gradients through conv3x3: accumulates weight/bias grads and fills the
// gradient with respect to the convolution input.
void conv3x3_backward(const Planes& in, const std::vector<double>& w, int out_channels,
                      const Planes& gout, std::vector<double>& gw, std::vector<double>& gb,
                      Planes* gin) {
    const int k = NetworkParams::kKernel;
    if (gin) *gin = Planes(in.c, in.h, in.w);
    for (int o = 0; o < out_channels; ++o) {
        for (int y = 0; y < in.h; ++y) {
            for (int x = 0; x < in.w; ++x) {
                const double g = gout.at(o, y, x);
                if (g == 0.0) continue;
                gb[o] += g;
                for (int i = 0; i < in.c; ++i) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int yy = y + ky - 1;
                        if (yy < 0 || yy >= in.h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int xx = x + kx - 1;
                            if (xx < 0 || xx >= in.w) continue;
                            const std::size_t wi =
                                ((static_cast<std::size_t>(o) * in.c + i) * k + ky) * k + kx;
                            gw[wi] += g * in.at(i, yy, xx);
                            if (gin) gin->at(i, yy, xx) += g * w[wi];
                        }
                    }
                }
            }
        }
    }
}

void relu_inplace(Planes& p) {
    for (double& x : p.v)
        if (x < 0.0) x = 0.0;
}

// 2x2 max pool, stride 2, floor semantics (trailing odd row/column dropped).
// First occurrence wins ties so the backward route is unambiguous.
void maxpool2(const Planes& in, Planes& out, std::vector<int>& argmax) {
    const int oh = in.h / 2, ow = in.w / 2;
    out = Planes(in.c, oh, ow);
    argmax.assign(out.v.size(), 0);
    for (int c = 0; c < in.c; ++c)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                int best_y = 2 * y, best_x = 2 * x;
                double best = in.at(c, best_y, best_x);
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const double v = in.at(c, 2 * y + dy, 2 * x + dx);
                        if (v > best) {
                            best = v;
                            best_y = 2 * y + dy;
                            best_x = 2 * x + dx;
                        }
                    }
                out.at(c, y, x) = best;
                argmax[(static_cast<std::size_t>(c) * oh + y) * ow + x] =
                    (best_y * in.w + best_x);
            }
}

struct Activations {
    Planes input;
    Planes conv1_pre;   // pre-ReLU
    Planes act1;        // post-ReLU
    Planes pooled;
    std::vector<int> pool_argmax;
    Planes conv2_pre;
    Planes act2;
    LatentVector latent;
    std::vector<double> logits;
};

void run_forward(const NetworkParams& p, const Tensor& x, Activations& a) {
    if (x.channels != p.in_channels)
        throw std::invalid_argument("net: input has " + std::to_string(x.channels) +
                                    " channels, expected " + std::to_string(p.in_channels));
    if (x.height < 2 || x.width < 2) throw std::invalid_argument("net: input too small to pool");

    a.input = to_planes(x);
    conv3x3(a.input, p.conv1_w, p.conv1_b, NetworkParams::kConv1Out, a.conv1_pre);
    a.act1 = a.conv1_pre;
    relu_inplace(a.act1);
    maxpool2(a.act1, a.pooled, a.pool_argmax);
    conv3x3(a.pooled, p.conv2_w, p.conv2_b, NetworkParams::kConv2Out, a.conv2_pre);
    a.act2 = a.conv2_pre;
    relu_inplace(a.act2);

    // Global average pool -> latent.
    const double inv_area = 1.0 / (static_cast<double>(a.act2.h) * a.act2.w);
    a.latent.assign(NetworkParams::kLatentDim, 0.0);
    for (int c = 0; c < a.act2.c; ++c) {
        double acc = 0.0;
        for (int y = 0; y < a.act2.h; ++y)
            for (int x2 = 0; x2 < a.act2.w; ++x2) acc += a.act2.at(c, y, x2);
        a.latent[c] = acc * inv_area;
    }

    a.logits.assign(p.class_count, 0.0);
    for (int cls = 0; cls < p.class_count; ++cls) {
        double acc = p.fc_b[cls];
        for (int j = 0; j < NetworkParams::kLatentDim; ++j)
            acc += p.fc_w[static_cast<std::size_t>(cls) * NetworkParams::kLatentDim + j] * a.latent[j];
        a.logits[cls] = acc;
    }
}

// Backward from (logit gradient, extra latent gradient) into parameter
// grads and optionally the input gradient.
void run_backward(const NetworkParams& p, const Activations& a, const std::vector<double>& glogits,
                  const std::vector<double>& glatent_extra, NetworkParams* gparams, Planes* ginput) {
    std::vector<double> glatent(NetworkParams::kLatentDim, 0.0);
    for (int cls = 0; cls < p.class_count; ++cls) {
        const double g = glogits[cls];
        if (gparams) gparams->fc_b[cls] += g;
        for (int j = 0; j < NetworkParams::kLatentDim; ++j) {
            if (gparams)
                gparams->fc_w[static_cast<std::size_t>(cls) * NetworkParams::kLatentDim + j] +=
                    g * a.latent[j];
            glatent[j] += g * p.fc_w[static_cast<std::size_t>(cls) * NetworkParams::kLatentDim + j];
        }
    }
    if (!glatent_extra.empty())
        for (int j = 0; j < NetworkParams::kLatentDim; ++j) glatent[j] += glatent_extra[j];

    // Latent -> conv2 activation via the average pool.
    const double inv_area = 1.0 / (static_cast<double>(a.act2.h) * a.act2.w);
    Planes gact2(a.act2.c, a.act2.h, a.act2.w);
    for (int c = 0; c < a.act2.c; ++c) {
        const double g = glatent[c] * inv_area;
        for (int y = 0; y < a.act2.h; ++y)
            for (int x = 0; x < a.act2.w; ++x)
                gact2.at(c, y, x) = g * (a.conv2_pre.at(c, y, x) > 0.0 ? 1.0 : 0.0);
    }

    Planes gpooled;
    std::vector<double> dummy_w, dummy_b;
    if (gparams) {
        conv3x3_backward(a.pooled, p.conv2_w, NetworkParams::kConv2Out, gact2, gparams->conv2_w,
                         gparams->conv2_b, &gpooled);
    } else {
        dummy_w.assign(p.conv2_w.size(), 0.0);
        dummy_b.assign(p.conv2_b.size(), 0.0);
        conv3x3_backward(a.pooled, p.conv2_w, NetworkParams::kConv2Out, gact2, dummy_w, dummy_b,
                         &gpooled);
    }

    // Pool backward: route to the argmax positions, then through ReLU1.
    Planes gact1(a.act1.c, a.act1.h, a.act1.w);
    for (int c = 0; c < gpooled.c; ++c)
        for (int y = 0; y < gpooled.h; ++y)
            for (int x = 0; x < gpooled.w; ++x) {
                const int flat = a.pool_argmax[(static_cast<std::size_t>(c) * gpooled.h + y) * gpooled.w + x];
                gact1.v[static_cast<std::size_t>(c) * a.act1.h * a.act1.w + flat] += gpooled.at(c, y, x);
            }
    for (std::size_t i = 0; i < gact1.v.size(); ++i)
        if (a.conv1_pre.v[i] <= 0.0) gact1.v[i] = 0.0;

    if (gparams) {
        conv3x3_backward(a.input, p.conv1_w, NetworkParams::kConv1Out, gact1, gparams->conv1_w,
                         gparams->conv1_b, ginput);
    } else {
        dummy_w.assign(p.conv1_w.size(), 0.0);
        dummy_b.assign(p.conv1_b.size(), 0.0);
        conv3x3_backward(a.input, p.conv1_w, NetworkParams::kConv1Out, gact1, dummy_w, dummy_b, ginput);
    }
}

double stable_cross_entropy(const std::vector<double>& logits, int label,
                            std::vector<double>& softmax_out) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    softmax_out.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        softmax_out[i] = std::exp(logits[i] - m);
        sum += softmax_out[i];
    }
    for (double& s : softmax_out) s /= sum;
    return std::log(sum) + m - logits[label];
}

int argmax_index(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

NetworkParams NetworkParams::zeros(int in_channels, int class_count) {
    if (in_channels < 1 || class_count < 2)
        throw std::invalid_argument("net: need in_channels >= 1 and class_count >= 2");
    NetworkParams p;
    p.in_channels = in_channels;
    p.class_count = class_count;
    p.conv1_w.assign(static_cast<std::size_t>(kConv1Out) * in_channels * kKernel * kKernel, 0.0);
    p.conv1_b.assign(kConv1Out, 0.0);
    p.conv2_w.assign(static_cast<std::size_t>(kConv2Out) * kConv1Out * kKernel * kKernel, 0.0);
    p.conv2_b.assign(kConv2Out, 0.0);
    p.fc_w.assign(static_cast<std::size_t>(class_count) * kLatentDim, 0.0);
    p.fc_b.assign(class_count, 0.0);
    return p;
}

NetworkParams NetworkParams::init(int in_channels, int class_count, std::uint64_t seed) {
    NetworkParams p = zeros(in_channels, class_count);
    Rng rng(seed);
    // He-scaled kernels, centered per filter so the first layers respond to
    // contrast rather than the image's DC level, plus a small positive bias
    // to keep ReLU units alive at the start.
    auto fill_conv = [&rng](std::vector<double>& w, int taps, double scale) {
        const std::size_t filters = w.size() / static_cast<std::size_t>(taps);
        for (std::size_t f = 0; f < filters; ++f) {
            double mean = 0.0;
            for (int t = 0; t < taps; ++t) {
                w[f * taps + t] = rng.normal(0.0, scale);
                mean += w[f * taps + t];
            }
            mean /= taps;
            for (int t = 0; t < taps; ++t) w[f * taps + t] -= mean;
        }
    };
    fill_conv(p.conv1_w, in_channels * kKernel * kKernel,
              std::sqrt(2.0 / (in_channels * kKernel * kKernel)));
    fill_conv(p.conv2_w, kConv1Out * kKernel * kKernel,
              std::sqrt(2.0 / (kConv1Out * kKernel * kKernel)));
    std::fill(p.conv1_b.begin(), p.conv1_b.end(), 0.05);
    std::fill(p.conv2_b.begin(), p.conv2_b.end(), 0.05);
    const double s3 = std::sqrt(1.0 / kLatentDim);
    for (double& w : p.fc_w) w = rng.normal(0.0, s3);
    return p;
}

std::size_t NetworkParams::parameter_count() const {
    return conv1_w.size() + conv1_b.size() + conv2_w.size() + conv2_b.size() + fc_w.size() +
           fc_b.size();
}

double NetworkParams::squared_norm() const {
    double acc = 0.0;
    for (const auto* arr : arrays())
        for (double v : *arr) acc += v * v;
    return acc;
}

std::vector<std::vector<double>*> NetworkParams::arrays() {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc_w, &fc_b};
}

std::vector<const std::vector<double>*> NetworkParams::arrays() const {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc_w, &fc_b};
}

ForwardResult forward(const NetworkParams& params, const Tensor& x) {
    Activations a;
    run_forward(params, x, a);
    return {std::move(a.logits), std::move(a.latent)};
}

LossGrads loss_and_grads(const NetworkParams& params, const std::vector<const Tensor*>& batch,
                         const std::vector<int>& labels, double weight_decay, const MdTerm* md) {
    if (batch.empty()) throw std::invalid_argument("loss_and_grads: empty batch");
    if (batch.size() != labels.size())
        throw std::invalid_argument("loss_and_grads: batch and labels differ in length");
    if (md && md->clusters.size() != batch.size())
        throw std::invalid_argument("loss_and_grads: md term needs one cluster per sample");

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    LossGrads out;
    out.grads = NetworkParams::zeros(params.in_channels, params.class_count);
    out.predictions.resize(batch.size());

    // Per-sample grads land in disjoint buffers and are reduced in index
    // order, so the result is independent of the worker count.
    std::vector<NetworkParams> sample_grads(batch.size());
    std::vector<double> sample_ce(batch.size(), 0.0);
    std::vector<double> sample_md(batch.size(), 0.0);

    parallel_for(batch.size(), [&](std::size_t i) {
        Activations a;
        run_forward(params, *batch[i], a);
        out.predictions[i] = argmax_index(a.logits);

        std::vector<double> softmax;
        sample_ce[i] = stable_cross_entropy(a.logits, labels[i], softmax);

        std::vector<double> glogits(softmax.size());
        for (std::size_t c = 0; c < softmax.size(); ++c)
            glogits[c] = (softmax[c] - (static_cast<int>(c) == labels[i] ? 1.0 : 0.0)) * inv_n;

        std::vector<double> glatent_extra;
        if (md) {
            const ClusterDistribution* dist = md->clusters[i];
            if (!dist)
                throw std::invalid_argument("loss_and_grads: sample " + std::to_string(i) +
                                            " has no cluster association");
            const double d = mahalanobis(a.latent, *dist);
            sample_md[i] = d;
            if (md->alpha != 0.0 && d >= 1e-8) {
                // d MD / d latent = inverse * (latent - mu) / MD
                LatentVector diff(a.latent.size());
                for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = a.latent[j] - dist->mean[j];
                const LatentVector iv = matvec(dist->inverse, diff);
                glatent_extra.resize(a.latent.size());
                for (std::size_t j = 0; j < iv.size(); ++j)
                    glatent_extra[j] = md->alpha * inv_n * iv[j] / d;
            }
        }

        sample_grads[i] = NetworkParams::zeros(params.in_channels, params.class_count);
        run_backward(params, a, glogits, glatent_extra, &sample_grads[i], nullptr);
    });

    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto dst = out.grads.arrays();
        auto src = sample_grads[i].arrays();
        for (std::size_t k = 0; k < dst.size(); ++k)
            for (std::size_t j = 0; j < dst[k]->size(); ++j) (*dst[k])[j] += (*src[k])[j];
        out.cross_entropy += sample_ce[i];
        out.mean_md += sample_md[i];
    }
    out.cross_entropy *= inv_n;
    out.mean_md *= inv_n;

    out.loss = out.cross_entropy + weight_decay * params.squared_norm();
    if (md) out.loss += md->alpha * out.mean_md;

    if (weight_decay != 0.0) {
        auto dst = out.grads.arrays();
        auto src = params.arrays();
        for (std::size_t k = 0; k < dst.size(); ++k)
            for (std::size_t j = 0; j < dst[k]->size(); ++j)
                (*dst[k])[j] += 2.0 * weight_decay * (*src[k])[j];
    }
    return out;
}

Tensor input_gradient(const NetworkParams& params, const Tensor& x, int label) {
    Activations a;
    run_forward(params, x, a);
    std::vector<double> softmax;
    stable_cross_entropy(a.logits, label, softmax);
    std::vector<double> glogits(softmax.size());
    for (std::size_t c = 0; c < softmax.size(); ++c)
        glogits[c] = softmax[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
    Planes ginput;
    run_backward(params, a, glogits, {}, nullptr, &ginput);
    return to_tensor(ginput);
}

InputGradFn input_grad_fn(const NetworkParams& params) {
    return [&params](const Tensor& x, int label) { return input_gradient(params, x, label); };
}

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) throw std::invalid_argument("train: epochs and batch_size must be positive");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("train: learning_rate must be nonnegative");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be nonnegative");
    if (!(grad_clip >= 0.0)) throw std::invalid_argument("train: grad_clip must be nonnegative");
}

void RobustTrainConfig::validate() const {
    base.validate();
    if (!(alpha >= 0.0)) throw std::invalid_argument("train_robust: alpha must be nonnegative");
    inner_attack.validate();
}

namespace {

// Shared SGD loop. train_baseline and train_robust differ only in the
// adversarial hook and the MD term, so the alpha = 0 / epsilon = 0 case
// runs the exact baseline arithmetic.
TrainResult train_loop(const LabeledDataset& dataset, const TrainConfig& cfg, double alpha,
                       const AttackConfig* inner_attack,
                       const std::vector<const ClusterDistribution*>* cluster_lookup) {
    dataset.validate();
    cfg.validate();
    if (dataset.images.empty()) throw std::invalid_argument("train: empty dataset");

    const int in_channels = dataset.images[0].channels();
    TrainResult result;
    result.params = NetworkParams::init(in_channels, dataset.class_count, derive_seed(cfg.seed, 0x1817));
    NetworkParams velocity = NetworkParams::zeros(in_channels, dataset.class_count);
    constexpr double kMomentum = 0.9;

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 0x5801, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        EpochMetrics metrics;
        std::size_t seen = 0, correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::size_t n = end - start;

            std::vector<Image> crafted(n);
            std::vector<const Tensor*> batch(n);
            std::vector<int> labels(n);
            MdTerm md;
            const bool with_md = cluster_lookup != nullptr;
            if (with_md) {
                md.alpha = alpha;
                md.clusters.resize(n);
            }

            if (inner_attack) {
                const InputGradFn grad = input_grad_fn(result.params);
                parallel_for(n, [&](std::size_t b) {
                    const std::size_t idx = order[start + b];
                    AttackConfig per_sample = *inner_attack;
                    per_sample.seed = derive_seed(inner_attack->seed, static_cast<std::uint64_t>(epoch), idx);
                    crafted[b] = run_attack(grad, dataset.images[idx], dataset.labels[idx], per_sample);
                });
            }
            for (std::size_t b = 0; b < n; ++b) {
                const std::size_t idx = order[start + b];
                batch[b] = inner_attack ? &crafted[b].tensor() : &dataset.images[idx].tensor();
                labels[b] = dataset.labels[idx];
                if (with_md) md.clusters[b] = (*cluster_lookup)[idx];
            }

            LossGrads lg =
                loss_and_grads(result.params, batch, labels, cfg.weight_decay, with_md ? &md : nullptr);

            if (cfg.grad_clip > 0.0) {
                const double norm = std::sqrt(lg.grads.squared_norm());
                if (norm > cfg.grad_clip) {
                    const double scale = cfg.grad_clip / norm;
                    for (auto* arr : lg.grads.arrays())
                        for (double& g : *arr) g *= scale;
                }
            }

            auto pv = result.params.arrays();
            auto vv = velocity.arrays();
            auto gv = lg.grads.arrays();
            for (std::size_t k = 0; k < pv.size(); ++k)
                for (std::size_t j = 0; j < pv[k]->size(); ++j) {
                    (*vv[k])[j] = kMomentum * (*vv[k])[j] + (*gv[k])[j];
                    (*pv[k])[j] -= cfg.learning_rate * (*vv[k])[j];
                }

            metrics.loss += lg.loss * static_cast<double>(n);
            metrics.mean_md += lg.mean_md * static_cast<double>(n);
            for (std::size_t b = 0; b < n; ++b)
                if (lg.predictions[b] == labels[b]) ++correct;
            seen += n;
        }
        metrics.loss /= static_cast<double>(seen);
        metrics.mean_md /= static_cast<double>(seen);
        metrics.accuracy = static_cast<double>(correct) / static_cast<double>(seen);
        result.epochs.push_back(metrics);
    }
    return result;
}

}  // namespace

TrainResult train_baseline(const LabeledDataset& dataset, const TrainConfig& cfg) {
    return train_loop(dataset, cfg, 0.0, nullptr, nullptr);
}

TrainResult train_robust(const LabeledDataset& dataset,
                         const std::vector<const ClusterDistribution*>& cluster_lookup,
                         const RobustTrainConfig& cfg) {
    cfg.validate();
    if (cluster_lookup.size() != dataset.size())
        throw std::invalid_argument("train_robust: cluster_lookup must cover every training sample");
    return train_loop(dataset, cfg.base, cfg.alpha, &cfg.inner_attack, &cluster_lookup);
}

}  // namespace purikit
