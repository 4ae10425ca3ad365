#include "purikit/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace purikit {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_pow2(int n) {
    int m = 1;
    while (m < n) m <<= 1;
    return m;
}

std::vector<int> bitrev_table(int n) {
    std::vector<int> rev(n, 0);
    int bits = 0;
    while ((1 << bits) < n) ++bits;
    for (int i = 0; i < n; ++i) {
        int r = 0;
        for (int b = 0; b < bits; ++b)
            if (i & (1 << b)) r |= 1 << (bits - 1 - b);
        rev[i] = r;
    }
    return rev;
}

std::vector<std::complex<double>> twiddle_table(int m) {
    std::vector<std::complex<double>> tw(m / 2);
    for (int j = 0; j < m / 2; ++j) {
        const double a = -2.0 * std::numbers::pi * j / m;
        tw[j] = {std::cos(a), std::sin(a)};
    }
    return tw;
}

}  // namespace

FrequencyPlan::Dim FrequencyPlan::make_dim(int n) {
    if (n < 1) throw std::invalid_argument("fft: dimension must be positive");
    Dim dim;
    dim.n = n;
    dim.pow2 = is_pow2(n);
    if (dim.pow2) {
        dim.m = n;
        dim.bitrev = bitrev_table(n);
        dim.twiddle = twiddle_table(n);
        return dim;
    }
    // Bluestein setup: pad to a power of two >= 2n-1 and cache the FFT of
    // the wrapped conjugate chirp.
    dim.m = next_pow2(2 * n - 1);
    dim.bitrev = bitrev_table(dim.m);
    dim.twiddle = twiddle_table(dim.m);
    dim.chirp.resize(n);
    for (int j = 0; j < n; ++j) {
        // angle = -pi * j^2 / n, reduced mod 2n to keep j^2 exact
        const long long jj = (static_cast<long long>(j) * j) % (2LL * n);
        const double a = -std::numbers::pi * static_cast<double>(jj) / n;
        dim.chirp[j] = {std::cos(a), std::sin(a)};
    }
    std::vector<std::complex<double>> kernel(dim.m, {0.0, 0.0});
    for (int j = 0; j < n; ++j) {
        const std::complex<double> c = std::conj(dim.chirp[j]);
        kernel[j] = c;
        if (j > 0) kernel[dim.m - j] = c;
    }
    fft_pow2(kernel.data(), dim, false);
    dim.kernel_fft = std::move(kernel);
    return dim;
}

void FrequencyPlan::fft_pow2(std::complex<double>* data, const Dim& dim, bool inverse_dir) {
    const int m = dim.m;
    for (int i = 0; i < m; ++i) {
        const int r = dim.bitrev[i];
        if (i < r) std::swap(data[i], data[r]);
    }
    for (int len = 2; len <= m; len <<= 1) {
        const int half = len >> 1;
        const int stride = m / len;
        for (int start = 0; start < m; start += len) {
            for (int j = 0; j < half; ++j) {
                std::complex<double> w = dim.twiddle[static_cast<std::size_t>(j) * stride];
                if (inverse_dir) w = std::conj(w);
                const std::complex<double> u = data[start + j];
                const std::complex<double> v = data[start + j + half] * w;
                data[start + j] = u + v;
                data[start + j + half] = u - v;
            }
        }
    }
}

void FrequencyPlan::transform(std::complex<double>* data, const Dim& dim, bool inverse_dir) {
    if (dim.pow2) {
        fft_pow2(data, dim, inverse_dir);
        return;
    }
    const int n = dim.n;
    // Inverse via conjugation: idft(x) = conj(dft(conj(x))) without the 1/n
    // factor (normalization belongs to the caller).
    if (inverse_dir)
        for (int j = 0; j < n; ++j) data[j] = std::conj(data[j]);
    std::vector<std::complex<double>> a(dim.m, {0.0, 0.0});
    for (int j = 0; j < n; ++j) a[j] = data[j] * dim.chirp[j];
    fft_pow2(a.data(), dim, false);
    for (int j = 0; j < dim.m; ++j) a[j] *= dim.kernel_fft[j];
    fft_pow2(a.data(), dim, true);
    const double scale = 1.0 / dim.m;
    for (int j = 0; j < n; ++j) data[j] = a[j] * scale * dim.chirp[j];
    if (inverse_dir)
        for (int j = 0; j < n; ++j) data[j] = std::conj(data[j]);
}

FrequencyPlan::FrequencyPlan(int height, int width)
    : height_(height), width_(width), row_dim_(make_dim(width)), col_dim_(make_dim(height)) {}

void FrequencyPlan::transform_2d(std::vector<std::complex<double>>& buf, bool inverse_dir) const {
    for (int y = 0; y < height_; ++y)
        transform(buf.data() + static_cast<std::size_t>(y) * width_, row_dim_, inverse_dir);
    std::vector<std::complex<double>> column(height_);
    for (int x = 0; x < width_; ++x) {
        for (int y = 0; y < height_; ++y) column[y] = buf[static_cast<std::size_t>(y) * width_ + x];
        transform(column.data(), col_dim_, inverse_dir);
        for (int y = 0; y < height_; ++y) buf[static_cast<std::size_t>(y) * width_ + x] = column[y];
    }
}

Spectrum FrequencyPlan::forward(const Grid& spatial) const {
    if (spatial.rows != height_ || spatial.cols != width_)
        throw std::invalid_argument("fft: input shape does not match plan");
    Spectrum buf(bins());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = {spatial.v[i], 0.0};
    transform_2d(buf, false);
    return buf;
}

Spectrum FrequencyPlan::forward(const std::vector<std::complex<double>>& spatial) const {
    if (spatial.size() != bins()) throw std::invalid_argument("fft: input size does not match plan");
    Spectrum buf = spatial;
    transform_2d(buf, false);
    return buf;
}

Spectrum FrequencyPlan::inverse(const Spectrum& spectrum) const {
    if (spectrum.size() != bins()) throw std::invalid_argument("fft: spectrum size does not match plan");
    Spectrum buf = spectrum;
    transform_2d(buf, true);
    const double scale = 1.0 / static_cast<double>(bins());
    for (auto& z : buf) z *= scale;
    return buf;
}

Grid FrequencyPlan::inverse_real(const Spectrum& spectrum) const {
    const Spectrum full = inverse(spectrum);
    Grid out(height_, width_);
    for (std::size_t i = 0; i < full.size(); ++i) out.v[i] = full[i].real();
    return out;
}

}  // namespace purikit
