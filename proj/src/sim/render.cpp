#include "slicing/sim/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "slicing/rng.hpp"

namespace slicing {

namespace {

constexpr double kInk = 0.6;
// Interior columns alternate around kInk: surface texture at a fixed physical pitch.
constexpr double kStripe = 0.25;
constexpr int kBarHeight = 8;
constexpr int kEllipseHeight = 18;
constexpr int kJitter = 2;

double px_per_cm(VegKind type) { return kMaxExtent / vegetable_type(type).length_max; }

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

}  // namespace

int drawn_extent(double thickness, VegKind type) {
    const double w = thickness * px_per_cm(type);
    return static_cast<int>(std::clamp(std::round(w), 1.0, static_cast<double>(kMaxExtent)));
}

Observation render(double thickness, VegKind type, std::uint64_t seed, Role role, double pixel_noise) {
    if (!(thickness > 0.0)) throw std::invalid_argument("render: thickness must be positive");
    const int n = drawn_extent(thickness, type);
    const double w = std::min(thickness * px_per_cm(type), kMaxExtent + 0.49);

    // Column intensities; edge columns carry the sub-pixel remainder.
    std::vector<double> col(n, kInk);
    for (int c = 1; c + 1 < n; ++c) col[c] = kInk * (1.0 + (c % 2 ? kStripe : -kStripe));
    if (n == 1) {
        col[0] = kInk * w;
    } else {
        col.front() = col.back() = kInk * (1.0 + (w - n) / 2.0);
    }

    Rng rng(derive_seed({seed, 0x9E4D}));
    const int jitter = static_cast<int>(rng.uniform_int(-kJitter, kJitter));
    const int x0 = (static_cast<int>(kImageSize) - n) / 2;
    const double cy = kImageSize / 2.0 + jitter;
    const bool ellipse = vegetable_type(type).shape == ShapeTag::ellipse;
    const double half_h = (ellipse ? kEllipseHeight : kBarHeight) / 2.0;

    Observation obs;
    obs.role = role;
    obs.pixels.assign(kImageSize * kImageSize, 0.0);
    int min_r = kImageSize, max_r = -1;
    for (int c = 0; c < n; ++c) {
        double half = half_h;
        if (ellipse) {
            const double u = (c + 0.5) / n * 2.0 - 1.0;
            half = std::max(half_h * std::sqrt(1.0 - u * u), 0.5);
        }
        for (int r = 0; r < static_cast<int>(kImageSize); ++r) {
            if (std::abs(r + 0.5 - cy) > half) continue;
            obs.pixels[static_cast<std::size_t>(r) * kImageSize + x0 + c] = col[c];
            min_r = std::min(min_r, r);
            max_r = std::max(max_r, r);
        }
    }
    obs.bbox = BBox{x0 - 1, min_r - 1, n + 2, max_r - min_r + 3};

    if (pixel_noise > 0.0) {
        for (auto& p : obs.pixels) p += rng.uniform(-pixel_noise, pixel_noise);
    }
    for (auto& p : obs.pixels) p = quantize(p);
    return obs;
}

Observation render(const VegetableState& state, std::uint64_t seed, double pixel_noise) {
    return render(state.remaining_length, state.type, seed, Role::whole_vegetable, pixel_noise);
}

std::vector<double> crop_resize(const Observation& obs) {
    const auto& b = obs.bbox;
    const int size = static_cast<int>(kImageSize);
    if (b.w < 1 || b.h < 1) throw std::invalid_argument("degenerate bounding box");
    if (b.x < 0 || b.y < 0 || b.x + b.w > size || b.y + b.h > size) {
        throw std::invalid_argument("bounding box outside the image");
    }
    if (obs.pixels.size() != kImageSize * kImageSize) throw std::invalid_argument("observation has wrong size");
    std::vector<double> out(kImageSize * kImageSize);
    for (int r = 0; r < size; ++r) {
        const int sr = b.y + (2 * r + 1) * b.h / (2 * size);
        for (int c = 0; c < size; ++c) {
            const int sc = b.x + (2 * c + 1) * b.w / (2 * size);
            out[static_cast<std::size_t>(r) * kImageSize + c] = obs.at(sr, sc);
        }
    }
    return out;
}

}  // namespace slicing
