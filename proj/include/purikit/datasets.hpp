#pragma once

#include <cstdint>
#include <filesystem>

#include "purikit/tensor.hpp"

namespace purikit {

// Number of built-in synthetic shape families (one family per class):
// 0 oriented bars, 1 rings, 2 crosses, 3 gradients, 4 checker phases.
constexpr int kSyntheticFamilyCount = 5;

// Deterministic grayscale shape dataset. Each class draws from one fixed
// parametric family with per-sample geometric jitter and additive Gaussian
// noise; the result is clipped to [0,1]. A pure function of its arguments:
// sample i of class c depends only on (seed, c, i).
LabeledDataset generate_synthetic_dataset(int class_count, int per_class, int side,
                                          double noise_sigma, std::uint64_t seed);

// Reads the CIFAR-10 binary layout: records of 1 label byte followed by
// 3072 channel-planar pixel bytes (R plane, G plane, B plane), 32x32.
// Pixels are scaled by 1/255 and stored interleaved H x W x C.
// limit = 0 loads every record; otherwise at most `limit` images.
LabeledDataset load_cifar10_binary(const std::filesystem::path& path, std::size_t limit = 0);

}  // namespace purikit
