#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "slicing/sim/vegetable.hpp"

namespace slicing {

inline constexpr std::size_t kImageSize = 32;
inline constexpr int kMaxExtent = 28;
inline constexpr double kDefaultPixelNoise = 0.05;

struct BBox {
    int x = 0, y = 0, w = 0, h = 0;
    bool operator==(const BBox&) const = default;
};

// Grayscale raster (row-major, kImageSize^2, values in [0,1] on the 1/255
// grid so PGM storage is lossless) plus the object's bounding box.
struct Observation {
    std::vector<double> pixels;
    BBox bbox;
    Role role = Role::whole_vegetable;

    double at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * kImageSize + col]; }
    bool operator==(const Observation&) const = default;
};

// Horizontal pixel extent of an object of the given thickness.
int drawn_extent(double thickness, VegKind type);

// Side view of a bar (cucumber) or ellipse (tomato) whose width encodes the
// thickness. The two edge columns carry the sub-pixel remainder as partial
// intensity. Vertical placement is jittered by the seed; `pixel_noise` is the
// half-width of the additive uniform noise.
Observation render(double thickness, VegKind type, std::uint64_t seed, Role role,
                   double pixel_noise = kDefaultPixelNoise);
Observation render(const VegetableState& state, std::uint64_t seed, double pixel_noise = kDefaultPixelNoise);

// Nearest-neighbour resample of the bbox region to kImageSize x kImageSize.
std::vector<double> crop_resize(const Observation& obs);

}  // namespace slicing
