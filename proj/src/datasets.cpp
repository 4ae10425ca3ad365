#include "purikit/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "purikit/rng.hpp"

namespace purikit {

namespace {

// Contrast of the shape patterns over the 0.5 gray background. Fixed so the
// family definitions (and the thresholds measured against them) stay stable.
constexpr double kAmplitude = 0.2;

// The bar/cross and ring/gradient family pairs share one morph axis each
// (secondary-arm strength, ring strength). The class ranges below leave a
// thin gap around 0.5, so jittered samples of adjacent families come close
// in pixel space while staying separable.
constexpr double kMorphInner = 0.45;   // upper edge of the weak-side range
constexpr double kMorphSpread = 0.06;  // half-normal concentration at the edge
constexpr double kMorphFloor = 0.25;   // lower edge of the weak-side range

double smoothstep(double edge0, double edge1, double x) {
    if (x <= edge0) return 0.0;
    if (x >= edge1) return 1.0;
    const double t = (x - edge0) / (edge1 - edge0);
    return t * t * (3.0 - 2.0 * t);
}

// Soft band profile: 1 inside |d| < halfwidth, 0 outside, ~1.5 px edge.
double band(double d, double halfwidth) {
    return 1.0 - smoothstep(halfwidth - 0.75, halfwidth + 0.75, d);
}

// Morph coordinate concentrated at the inner edge of its class range:
// weak side draws from [kMorphFloor, kMorphInner], strong side mirrors it
// above 1 - kMorphInner.
double draw_morph(Rng& rng, bool strong_side) {
    double s = kMorphInner - std::abs(rng.normal(0.0, kMorphSpread));
    s = std::max(s, kMorphFloor);
    return strong_side ? 1.0 - s : s;
}

// Per-sample global contrast jitter. Class boundaries must be carried by
// component ratios rather than absolute pattern energy, so every family
// scales its whole pattern by a shared random factor.
double draw_scale(Rng& rng) { return rng.uniform(0.85, 1.15); }

struct BarGeometry {
    double cx, cy, theta, halfwidth;
};

BarGeometry draw_bar_geometry(Rng& rng, double side) {
    BarGeometry g;
    g.cx = side / 2.0 + rng.uniform(-0.08, 0.08) * side;
    g.cy = side / 2.0 + rng.uniform(-0.08, 0.08) * side;
    g.theta = std::numbers::pi / 5.0 + rng.uniform(-0.35, 0.35);
    g.halfwidth = side * (0.075 + 0.015 * rng.uniform());
    return g;
}

// Families 0 and 1: a full-length bar plus a perpendicular secondary arm
// through the same center. "Bars" carry a faint arm (strength in
// [0.25, 0.45]); "crosses" a strong one (in [0.55, 0.75]). The arm-strength
// ratio is the morph coordinate.
void draw_bar_cross(Tensor& img, Rng& rng, bool cross) {
    const BarGeometry g = draw_bar_geometry(rng, img.height);
    const double arm = draw_morph(rng, cross);
    const double scale = draw_scale(rng);
    const double s = std::sin(g.theta), c = std::cos(g.theta);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double u = c * (x + 0.5 - g.cx) + s * (y + 0.5 - g.cy);
            const double v = -s * (x + 0.5 - g.cx) + c * (y + 0.5 - g.cy);
            const double main_mask = band(std::abs(v), g.halfwidth);
            const double arm_mask = band(std::abs(u), g.halfwidth);
            img.at(y, x, 0) += kAmplitude * scale * std::max(main_mask, arm * arm_mask);
        }
}

// Families 2 and 3: a thin annulus over a checkerboard whose phase is tied
// to the annulus center, so the two components translate together. "Rings"
// have a strong annulus (ratio in [0.55, 0.75]) over the checker; "checker
// phases" keep the checker with a faint annulus (in [0.25, 0.45]). The
// annulus-to-checker ratio is the morph coordinate.
void draw_ring_checker(Tensor& img, Rng& rng, bool ring) {
    const double side = img.height;
    const double cx = side / 2.0 + rng.uniform(-0.12, 0.12) * side;
    const double cy = side / 2.0 + rng.uniform(-0.12, 0.12) * side;
    const double radius = side * (0.27 + 0.025 * rng.uniform());
    const double halfthick = side * (0.055 + 0.015 * rng.uniform());
    const double ring_strength = draw_morph(rng, ring);
    const double scale = draw_scale(rng);
    const double period = side / 4.0;
    constexpr double tau = 2.0 * std::numbers::pi;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double d = std::abs(std::sqrt(dx * dx + dy * dy) - radius);
            const double ring_mask = band(d, halfthick);
            const double checker =
                0.32 * std::cos(tau * dx / period) * std::cos(tau * dy / period);
            img.at(y, x, 0) += kAmplitude * scale * (ring_strength * ring_mask + checker);
        }
}

// Family 4: a signed linear ramp with jittered direction and phase.
void draw_gradient(Tensor& img, Rng& rng) {
    const double side = img.height;
    const double theta = std::numbers::pi / 2.0 + rng.uniform(-0.5, 0.5);
    const double phase = rng.uniform(-0.2, 0.2);
    const double scale = draw_scale(rng);
    const double s = std::sin(theta), c = std::cos(theta);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double proj = (c * (x + 0.5 - side / 2.0) + s * (y + 0.5 - side / 2.0)) / (side / 2.0);
            img.at(y, x, 0) += kAmplitude * scale * 0.55 * std::clamp(proj + phase, -1.0, 1.0);
        }
}

void draw_family(Tensor& img, Rng& rng, int family) {
    switch (family) {
        case 0: draw_bar_cross(img, rng, false); return;     // oriented bars
        case 1: draw_bar_cross(img, rng, true); return;      // crosses
        case 2: draw_ring_checker(img, rng, true); return;   // rings
        case 3: draw_ring_checker(img, rng, false); return;  // checker phases
        case 4: draw_gradient(img, rng); return;              // gradients
        default: throw std::logic_error("synthetic: bad family");
    }
}

}  // namespace

LabeledDataset generate_synthetic_dataset(int class_count, int per_class, int side,
                                          double noise_sigma, std::uint64_t seed) {
    if (class_count < 2) throw std::invalid_argument("synthetic: class_count must be at least 2");
    if (class_count > kSyntheticFamilyCount)
        throw std::invalid_argument("synthetic: class_count " + std::to_string(class_count) +
                                    " exceeds the " + std::to_string(kSyntheticFamilyCount) +
                                    " available shape families");
    if (per_class < 1) throw std::invalid_argument("synthetic: per_class must be positive");
    if (side < 8) throw std::invalid_argument("synthetic: side must be at least 8");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("synthetic: noise_sigma must be nonnegative");

    LabeledDataset out;
    out.class_count = class_count;
    out.images.reserve(static_cast<std::size_t>(class_count) * per_class);
    out.labels.reserve(out.images.capacity());

    for (int c = 0; c < class_count; ++c) {
        for (int i = 0; i < per_class; ++i) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)));
            Tensor img(side, side, 1);
            std::fill(img.data.begin(), img.data.end(), 0.5);
            draw_family(img, rng, c);
            if (noise_sigma > 0.0)
                for (double& p : img.data) p += rng.normal(0.0, noise_sigma);
            out.images.push_back(clamp_to_image(std::move(img)));
            out.labels.push_back(c);
        }
    }
    out.validate();
    return out;
}

LabeledDataset load_cifar10_binary(const std::filesystem::path& path, std::size_t limit) {
    constexpr std::size_t kRecordSize = 3073;   // 1 label byte + 3 * 1024 pixel bytes
    constexpr int kSide = 32;
    constexpr std::size_t kPlane = 1024;

    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cifar10: cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() % kRecordSize != 0) {
        const std::size_t offset = (bytes.size() / kRecordSize) * kRecordSize;
        throw std::runtime_error("cifar10: truncated record at offset " + std::to_string(offset) +
                                 " (file length " + std::to_string(bytes.size()) +
                                 " is not a multiple of " + std::to_string(kRecordSize) + ")");
    }

    std::size_t records = bytes.size() / kRecordSize;
    if (limit > 0) records = std::min(records, limit);

    LabeledDataset out;
    out.class_count = 10;
    out.images.reserve(records);
    out.labels.reserve(records);

    for (std::size_t r = 0; r < records; ++r) {
        const std::uint8_t* rec = bytes.data() + r * kRecordSize;
        const int label = rec[0];
        if (label >= out.class_count)
            throw std::runtime_error("cifar10: invalid label " + std::to_string(label) +
                                     " in record " + std::to_string(r));
        Tensor img(kSide, kSide, 3);
        // Source planes are channel-planar; memory layout is interleaved.
        for (int c = 0; c < 3; ++c) {
            const std::uint8_t* plane = rec + 1 + static_cast<std::size_t>(c) * kPlane;
            for (int y = 0; y < kSide; ++y)
                for (int x = 0; x < kSide; ++x)
                    img.at(y, x, c) = plane[y * kSide + x] / 255.0;
        }
        out.images.push_back(Image::checked(std::move(img)));
        out.labels.push_back(label);
    }
    out.validate();
    return out;
}

}  // namespace purikit
