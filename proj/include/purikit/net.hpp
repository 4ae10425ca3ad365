#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "purikit/attack.hpp"
#include "purikit/cluster.hpp"
#include "purikit/tensor.hpp"

namespace purikit {

// Fixed tiny architecture: conv 3x3 (8 filters, same padding) -> ReLU ->
// 2x2 max pool -> conv 3x3 (16 filters) -> ReLU -> global average pool ->
// latent (k = 16) -> affine -> logits. All parameters double precision.
struct NetworkParams {
    static constexpr int kConv1Out = 8;
    static constexpr int kConv2Out = 16;
    static constexpr int kKernel = 3;
    static constexpr int kLatentDim = kConv2Out;

    int in_channels = 0;
    int class_count = 0;
    std::vector<double> conv1_w;  // [out][in][ky][kx]
    std::vector<double> conv1_b;
    std::vector<double> conv2_w;
    std::vector<double> conv2_b;
    std::vector<double> fc_w;  // [class][latent]
    std::vector<double> fc_b;

    static NetworkParams zeros(int in_channels, int class_count);
    // Seeded He/Xavier initialization.
    static NetworkParams init(int in_channels, int class_count, std::uint64_t seed);

    std::size_t parameter_count() const;
    double squared_norm() const;

    // Flat views for optimizers and persistence, in a fixed order.
    std::vector<std::vector<double>*> arrays();
    std::vector<const std::vector<double>*> arrays() const;
};

struct ForwardCache;  // internal activations; defined in net.cpp

struct ForwardResult {
    std::vector<double> logits;
    LatentVector latent;
};

ForwardResult forward(const NetworkParams& params, const Tensor& x);

// Extra penalty term alpha * mean(mahalanobis(latent_i, clusters[i])).
// clusters holds one distribution per batch sample; a null entry is a
// missing-association error.
struct MdTerm {
    double alpha = 0.0;
    std::vector<const ClusterDistribution*> clusters;
};

struct LossGrads {
    double loss = 0.0;
    double cross_entropy = 0.0;
    double mean_md = 0.0;
    NetworkParams grads;
    std::vector<int> predictions;
};

// Mean softmax cross-entropy + weight_decay * ||theta||^2, plus the optional
// Mahalanobis term routed through the latent. The MD gradient at MD below
// 1e-8 is defined as zero.
LossGrads loss_and_grads(const NetworkParams& params, const std::vector<const Tensor*>& batch,
                         const std::vector<int>& labels, double weight_decay, const MdTerm* md);

// Gradient of the cross-entropy at (x, y) with respect to the input.
Tensor input_gradient(const NetworkParams& params, const Tensor& x, int label);

// Adapter for the attack module.
InputGradFn input_grad_fn(const NetworkParams& params);

struct TrainConfig {
    int epochs = 20;
    int batch_size = 16;
    double learning_rate = 0.05;
    double weight_decay = 1e-4;
    // Global gradient-norm clip; guards the small net against dying-ReLU
    // blowups under momentum. 0 disables.
    double grad_clip = 10.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
    double mean_md = 0.0;
};

struct TrainResult {
    NetworkParams params;
    std::vector<EpochMetrics> epochs;
};

// Mini-batch SGD with momentum 0.9; a pure function of (dataset, cfg.seed).
TrainResult train_baseline(const LabeledDataset& dataset, const TrainConfig& cfg);

struct RobustTrainConfig {
    TrainConfig base;
    double alpha = 0.0;          // weight of the Mahalanobis constraint
    AttackConfig inner_attack;   // PGD setting for the inner maximization

    void validate() const;
};

// Robust semantic training: every step perturbs the batch with the inner
// attack against the current parameters, then minimizes cross-entropy plus
// the Mahalanobis distance of the adversarial latent to the clean sample's
// recorded cluster. cluster_lookup maps dataset index -> distribution; a
// null entry for a training sample is an error. With alpha = 0 and
// epsilon = 0 the trajectory is bit-identical to train_baseline.
TrainResult train_robust(const LabeledDataset& dataset,
                         const std::vector<const ClusterDistribution*>& cluster_lookup,
                         const RobustTrainConfig& cfg);

}  // namespace purikit
