#pragma once

#include <complex>
#include <vector>

#include "purikit/tensor.hpp"

namespace purikit {

using Spectrum = std::vector<std::complex<double>>;

// Cached 2-D DFT workspace for a fixed height x width. Power-of-two sizes
// run iterative radix-2; everything else goes through Bluestein's chirp
// transform. Forward is unnormalized; inverse divides by height*width, so
// inverse(forward(x)) reproduces x to machine precision.
//
// A plan is immutable after construction and transforms are pure given a
// plan; share freely across threads.
class FrequencyPlan {
public:
    FrequencyPlan(int height, int width);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t bins() const { return static_cast<std::size_t>(height_) * width_; }

    Spectrum forward(const Grid& spatial) const;
    Spectrum forward(const std::vector<std::complex<double>>& spatial) const;
    Spectrum inverse(const Spectrum& spectrum) const;
    // Inverse transform keeping only the real part (inputs with Hermitian
    // symmetry come back real up to rounding).
    Grid inverse_real(const Spectrum& spectrum) const;

private:
    struct Dim {
        int n = 0;
        bool pow2 = false;
        // radix-2 machinery (for n itself, or for the Bluestein pad size m)
        int m = 0;
        std::vector<int> bitrev;
        std::vector<std::complex<double>> twiddle;   // e^{-2*pi*i*j/m}, j < m/2
        // Bluestein chirp data (empty when n is a power of two)
        std::vector<std::complex<double>> chirp;     // e^{-pi*i*j^2/n}, j < n
        std::vector<std::complex<double>> kernel_fft;  // FFT of the wrapped conjugate chirp
    };

    static Dim make_dim(int n);
    static void fft_pow2(std::complex<double>* data, const Dim& dim, bool inverse_dir);
    static void transform(std::complex<double>* data, const Dim& dim, bool inverse_dir);

    void transform_2d(std::vector<std::complex<double>>& buf, bool inverse_dir) const;

    int height_, width_;
    Dim row_dim_;  // along width
    Dim col_dim_;  // along height
};

}  // namespace purikit
