#pragma once

#include <utility>

#include "purikit/fft.hpp"
#include "purikit/tensor.hpp"

namespace purikit {

struct TikhonovConfig {
    // Smoothing weight on the squared circular gradients. 0 keeps the input
    // untouched. Boundary handling is circular throughout the pipeline.
    double lambda_low = 5.0;
};

// Circular (periodic) convolution computed in the frequency domain:
// out(p) = sum_q a(q) * kernel(p - q mod shape). The kernel is anchored at
// the origin and may not exceed the image in either dimension.
Grid circular_convolve(const Grid& a, const Grid& kernel);

// Splits an image into a smooth band and its residual. The smooth band is
// the exact frequency-domain minimizer of
//   1/2 ||x_low - x||^2 + lambda/2 * sum_j ||G_j x_low||^2
// with G_j the first-order circular difference along axis j; channels are
// filtered independently. x_high = x - x_low elementwise, so the two bands
// always add back to the input exactly. Neither band is clamped to [0,1].
std::pair<Tensor, Tensor> tikhonov_decompose(const Image& x, const TikhonovConfig& cfg);

// Squared magnitude of the combined circular-difference symbol at each
// frequency bin: |G_row|^2 + |G_col|^2. Shared by the closed-form filter
// and its tests.
std::vector<double> gradient_symbol_sq(int height, int width);

}  // namespace purikit
