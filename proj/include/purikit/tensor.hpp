#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace purikit {

// Dense row-major H x W x C array of doubles, channel index fastest.
// This is the one in-memory layout used across the whole pipeline.
// No range invariant; Image adds the [0,1] certification on top.
struct Tensor {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int h, int w, int c) : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, 0.0) {
        if (h < 0 || w < 0 || c < 0) throw std::invalid_argument("tensor: negative dimension");
    }

    static Tensor zeros(int h, int w, int c) { return Tensor(h, w, c); }

    std::size_t size() const { return data.size(); }

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_shape(const Tensor& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

// Single-channel 2-D plane, used for coefficient maps and frequency-domain work.
struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Grid() = default;
    Grid(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw std::invalid_argument("grid: negative dimension");
    }

    static Grid zeros(int r, int c) { return Grid(r, c); }

    std::size_t size() const { return v.size(); }
    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

// A Tensor certified to hold unit-interval intensities. Constructed only
// through checked(), so holding an Image is proof the invariant held.
class Image {
public:
    Image() = default;

    // Validates shape consistency and the [0,1] range. Violations are errors,
    // never silent clamps.
    static Image checked(Tensor t) {
        const std::size_t expect = static_cast<std::size_t>(t.height) * t.width * t.channels;
        if (t.data.size() != expect)
            throw std::invalid_argument("image: data length " + std::to_string(t.data.size()) +
                                        " does not match shape");
        if (t.channels != 1 && t.channels != 3)
            throw std::invalid_argument("image: channels must be 1 or 3, got " + std::to_string(t.channels));
        for (double p : t.data) {
            if (!(p >= 0.0 && p <= 1.0))
                throw std::invalid_argument("image: intensity " + std::to_string(p) + " outside [0,1]");
        }
        return Image(std::move(t));
    }

    const Tensor& tensor() const { return t_; }
    int height() const { return t_.height; }
    int width() const { return t_.width; }
    int channels() const { return t_.channels; }
    double at(int y, int x, int c) const { return t_.at(y, x, c); }

private:
    explicit Image(Tensor t) : t_(std::move(t)) {}
    Tensor t_;
};

// Clamps a tensor into [0,1] and certifies it. Only purification and attack
// outputs go through here; loaders must reject instead of clamping.
inline Image clamp_to_image(Tensor t) {
    for (double& p : t.data) {
        if (p < 0.0) p = 0.0;
        if (p > 1.0) p = 1.0;
    }
    return Image::checked(std::move(t));
}

struct LabeledDataset {
    std::vector<Image> images;
    std::vector<int> labels;
    int class_count = 0;

    void validate() const {
        if (images.size() != labels.size())
            throw std::invalid_argument("dataset: images and labels differ in length");
        for (int y : labels) {
            if (y < 0 || y >= class_count)
                throw std::invalid_argument("dataset: label " + std::to_string(y) + " outside [0, " +
                                            std::to_string(class_count) + ")");
        }
    }

    std::size_t size() const { return images.size(); }
};

}  // namespace purikit
