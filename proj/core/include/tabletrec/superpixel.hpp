#pragma once

#include <optional>
#include <vector>

#include "tabletrec/grid.hpp"

namespace tabletrec {

struct SuperpixelResult {
  GridI labels;  // dense labels 0..count-1, every pixel assigned
  int count = 0;
};

// SLIC in CIELAB + xy: grid seeding with gradient perturbation, windowed
// assignment under D = sqrt(d_lab^2 + (m/S)^2 d_xy^2), center updates, and a
// connectivity pass that folds orphan components into an adjacent region.
SuperpixelResult slic_superpixels(const Image& image, int target_count, double compactness = 10.0);

struct PooledGeometry {
  double depth = 0;
  Vec3 normal;  // camera frame, unit
};

// Average-pooled depth/normal per superpixel. Entries are nullopt when the
// region has no valid depth or its mean normal degenerates (norm < 1e-3).
std::vector<std::optional<PooledGeometry>> pool_superpixel_geometry(const GridI& labels, int count,
                                                                    const GridF& depth,
                                                                    const Image& normal);

// Pixel lists per superpixel label, each in row-major order.
std::vector<std::vector<struct PixelCoord>> superpixel_masks(const GridI& labels, int count);

Vec3 rgb_to_lab(const Vec3& rgb);

}  // namespace tabletrec
