#include <doctest.h>

#include <cmath>
#include <complex>

#include "purikit/fft.hpp"
#include "purikit/rng.hpp"
#include "purikit/signal.hpp"

using namespace purikit;

namespace {

Grid random_grid(int rows, int cols, Rng& rng) {
    Grid g(rows, cols);
    for (double& v : g.v) v = rng.normal();
    return g;
}

Image random_image(int side, int channels, Rng& rng) {
    Tensor t(side, side, channels);
    for (double& v : t.data) v = rng.uniform();
    return Image::checked(std::move(t));
}

// Oracle: direct double-loop circular convolution.
Grid direct_circular_convolve(const Grid& a, const Grid& k) {
    Grid out(a.rows, a.cols);
    for (int y = 0; y < a.rows; ++y)
        for (int x = 0; x < a.cols; ++x) {
            double acc = 0.0;
            for (int ky = 0; ky < k.rows; ++ky)
                for (int kx = 0; kx < k.cols; ++kx) {
                    const int sy = ((y - ky) % a.rows + a.rows) % a.rows;
                    const int sx = ((x - kx) % a.cols + a.cols) % a.cols;
                    acc += k.at(ky, kx) * a.at(sy, sx);
                }
            out.at(y, x) = acc;
        }
    return out;
}

// Oracle: conjugate-gradient solve of (I + lambda * sum_j G_j^T G_j) x = b
// with matrix-free circular difference operators.
Grid tikhonov_cg(const Grid& b, double lambda, int iters = 400, double tol = 1e-14) {
    const int h = b.rows, w = b.cols;
    auto apply = [&](const Grid& v) {
        Grid out(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int yp = (y + 1) % h, ym = (y - 1 + h) % h;
                const int xp = (x + 1) % w, xm = (x - 1 + w) % w;
                // G^T G for the forward circular difference is the 2-D
                // circular Laplacian times -1.
                const double lap = 4.0 * v.at(y, x) - v.at(yp, x) - v.at(ym, x) - v.at(y, xp) -
                                   v.at(y, xm);
                out.at(y, x) = v.at(y, x) + lambda * lap;
            }
        return out;
    };

    Grid x(h, w);
    Grid r = b;
    Grid p = r;
    double rs = 0.0;
    for (double v : r.v) rs += v * v;
    for (int it = 0; it < iters && rs > tol; ++it) {
        const Grid ap = apply(p);
        double pap = 0.0;
        for (std::size_t i = 0; i < p.v.size(); ++i) pap += p.v[i] * ap.v[i];
        const double alpha = rs / pap;
        for (std::size_t i = 0; i < x.v.size(); ++i) {
            x.v[i] += alpha * p.v[i];
            r.v[i] -= alpha * ap.v[i];
        }
        double rs_new = 0.0;
        for (double v : r.v) rs_new += v * v;
        for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = r.v[i] + (rs_new / rs) * p.v[i];
        rs = rs_new;
    }
    return x;
}

double total_variation(const Tensor& t) {
    double acc = 0.0;
    for (int c = 0; c < t.channels; ++c)
        for (int y = 0; y < t.height; ++y)
            for (int x = 0; x < t.width; ++x) {
                acc += std::abs(t.at((y + 1) % t.height, x, c) - t.at(y, x, c));
                acc += std::abs(t.at(y, (x + 1) % t.width, c) - t.at(y, x, c));
            }
    return acc;
}

}  // namespace

TEST_SUITE("signal") {

TEST_CASE("fft round trip reproduces the input") {
    Rng rng(3);
    for (const auto [h, w] : {std::pair{8, 8}, std::pair{16, 16}, std::pair{12, 10}, std::pair{9, 7}}) {
        FrequencyPlan plan(h, w);
        const Grid g = random_grid(h, w, rng);
        const Grid back = plan.inverse_real(plan.forward(g));
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < g.v.size(); ++i) {
            num += (back.v[i] - g.v[i]) * (back.v[i] - g.v[i]);
            den += g.v[i] * g.v[i];
        }
        CHECK(std::sqrt(num / den) < 1e-12);
    }
}

TEST_CASE("fft matches the defining DFT sum on a small grid") {
    Rng rng(5);
    const int h = 4, w = 6;
    const Grid g = random_grid(h, w, rng);
    FrequencyPlan plan(h, w);
    const Spectrum spec = plan.forward(g);
    for (int ky = 0; ky < h; ++ky)
        for (int kx = 0; kx < w; ++kx) {
            std::complex<double> acc = 0.0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double ang =
                        -2.0 * std::numbers::pi * (static_cast<double>(ky) * y / h +
                                                   static_cast<double>(kx) * x / w);
                    acc += g.at(y, x) * std::complex<double>(std::cos(ang), std::sin(ang));
                }
            CHECK(std::abs(acc - spec[static_cast<std::size_t>(ky) * w + kx]) < 1e-9);
        }
}

TEST_CASE("delta kernel is the convolution identity") {
    Rng rng(7);
    const Grid a = random_grid(8, 8, rng);
    Grid delta(1, 1);
    delta.at(0, 0) = 1.0;
    const Grid out = circular_convolve(a, delta);
    for (std::size_t i = 0; i < a.v.size(); ++i) CHECK(out.v[i] == doctest::Approx(a.v[i]).epsilon(1e-12));
}

TEST_CASE("shifted delta shifts circularly by one column") {
    Rng rng(9);
    const Grid a = random_grid(6, 6, rng);
    Grid delta(1, 2);
    delta.at(0, 1) = 1.0;
    const Grid out = circular_convolve(a, delta);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            CHECK(out.at(y, x) == doctest::Approx(a.at(y, (x + 5) % 6)).epsilon(1e-12));
}

TEST_CASE("frequency-domain convolution matches the direct-sum oracle") {
    Rng rng(13);
    const Grid a = random_grid(8, 8, rng);
    const Grid k = random_grid(3, 3, rng);
    const Grid fast = circular_convolve(a, k);
    const Grid slow = direct_circular_convolve(a, k);
    for (std::size_t i = 0; i < fast.v.size(); ++i) CHECK(std::abs(fast.v[i] - slow.v[i]) < 1e-10);
}

TEST_CASE("kernel larger than the image is rejected") {
    const Grid a(4, 4);
    const Grid k(5, 5);
    CHECK_THROWS_AS(static_cast<void>(circular_convolve(a, k)), std::invalid_argument);
}

TEST_CASE("lambda zero keeps the image untouched") {
    Rng rng(21);
    const Image x = random_image(16, 1, rng);
    const auto [low, high] = tikhonov_decompose(x, {.lambda_low = 0.0});
    for (std::size_t i = 0; i < low.data.size(); ++i) {
        CHECK(low.data[i] == x.tensor().data[i]);
        CHECK(high.data[i] == 0.0);
    }
}

TEST_CASE("constant image has no high band for any lambda") {
    Tensor t(12, 12, 1);
    std::fill(t.data.begin(), t.data.end(), 0.37);
    const Image x = Image::checked(std::move(t));
    for (double lambda : {0.5, 5.0, 50.0}) {
        const auto [low, high] = tikhonov_decompose(x, {.lambda_low = lambda});
        for (std::size_t i = 0; i < low.data.size(); ++i) {
            CHECK(low.data[i] == doctest::Approx(0.37).epsilon(1e-12));
            CHECK(std::abs(high.data[i]) < 1e-12);
        }
    }
}

TEST_CASE("closed form matches the conjugate-gradient oracle") {
    Rng rng(33);
    const double lambda = 5.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Image x = random_image(16, 1, rng);
        const auto [low, high] = tikhonov_decompose(x, {.lambda_low = lambda});
        Grid b(16, 16);
        for (int y = 0; y < 16; ++y)
            for (int xx = 0; xx < 16; ++xx) b.at(y, xx) = x.at(y, xx, 0);
        const Grid oracle = tikhonov_cg(b, lambda);
        double rms = 0.0;
        for (int y = 0; y < 16; ++y)
            for (int xx = 0; xx < 16; ++xx) {
                const double d = low.at(y, xx, 0) - oracle.at(y, xx);
                rms += d * d;
            }
        CHECK(std::sqrt(rms / 256.0) < 1e-6);
    }
}

TEST_CASE("additivity holds to 1e-12 for random inputs and lambdas") {
    Rng rng(41);
    for (double lambda : {0.0, 0.3, 2.0, 5.0, 40.0}) {
        const Image x = random_image(12, 3, rng);
        const auto [low, high] = tikhonov_decompose(x, {.lambda_low = lambda});
        for (std::size_t i = 0; i < low.data.size(); ++i)
            CHECK(std::abs(low.data[i] + high.data[i] - x.tensor().data[i]) <= 1e-12);
    }
}

TEST_CASE("total variation of the low band is non-increasing in lambda") {
    Rng rng(55);
    const Image x = random_image(16, 1, rng);
    double prev_tv = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0}) {
        const auto [low, high] = tikhonov_decompose(x, {.lambda_low = lambda});
        const double tv = total_variation(low);
        CHECK(tv <= prev_tv + 1e-9);
        prev_tv = tv;
    }
}

}  // TEST_SUITE
