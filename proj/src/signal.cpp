#include "purikit/signal.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace purikit {

Grid circular_convolve(const Grid& a, const Grid& kernel) {
    if (kernel.rows > a.rows || kernel.cols > a.cols)
        throw std::invalid_argument("circular_convolve: kernel larger than image");
    FrequencyPlan plan(a.rows, a.cols);
    Grid padded(a.rows, a.cols);
    for (int r = 0; r < kernel.rows; ++r)
        for (int c = 0; c < kernel.cols; ++c) padded.at(r, c) = kernel.at(r, c);
    Spectrum sa = plan.forward(a);
    const Spectrum sk = plan.forward(padded);
    for (std::size_t i = 0; i < sa.size(); ++i) sa[i] *= sk[i];
    return plan.inverse_real(sa);
}

std::vector<double> gradient_symbol_sq(int height, int width) {
    // |e^{2*pi*i*k/n} - 1|^2 = 4 sin^2(pi*k/n) per axis.
    std::vector<double> sym(static_cast<std::size_t>(height) * width);
    for (int ky = 0; ky < height; ++ky) {
        const double sy = std::sin(std::numbers::pi * ky / height);
        for (int kx = 0; kx < width; ++kx) {
            const double sx = std::sin(std::numbers::pi * kx / width);
            sym[static_cast<std::size_t>(ky) * width + kx] = 4.0 * (sy * sy + sx * sx);
        }
    }
    return sym;
}

std::pair<Tensor, Tensor> tikhonov_decompose(const Image& x, const TikhonovConfig& cfg) {
    if (!(cfg.lambda_low >= 0.0))
        throw std::invalid_argument("tikhonov: lambda_low must be nonnegative");
    const Tensor& t = x.tensor();
    Tensor low(t.height, t.width, t.channels);
    Tensor high(t.height, t.width, t.channels);

    if (cfg.lambda_low == 0.0) {
        low = t;  // objective reduces to the identity; high stays zero
        return {std::move(low), std::move(high)};
    }

    FrequencyPlan plan(t.height, t.width);
    const std::vector<double> sym = gradient_symbol_sq(t.height, t.width);
    for (int c = 0; c < t.channels; ++c) {
        Grid channel(t.height, t.width);
        for (int yy = 0; yy < t.height; ++yy)
            for (int xx = 0; xx < t.width; ++xx) channel.at(yy, xx) = t.at(yy, xx, c);
        Spectrum spec = plan.forward(channel);
        for (std::size_t i = 0; i < spec.size(); ++i) spec[i] /= 1.0 + cfg.lambda_low * sym[i];
        const Grid smooth = plan.inverse_real(spec);
        for (int yy = 0; yy < t.height; ++yy)
            for (int xx = 0; xx < t.width; ++xx) {
                low.at(yy, xx, c) = smooth.at(yy, xx);
                high.at(yy, xx, c) = t.at(yy, xx, c) - smooth.at(yy, xx);
            }
    }
    return {std::move(low), std::move(high)};
}

}  // namespace purikit
