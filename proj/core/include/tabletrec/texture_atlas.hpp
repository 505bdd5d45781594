#pragma once

#include <span>
#include <vector>

#include "tabletrec/tablet.hpp"

namespace tabletrec {

// Tile placements for packing per-tablet texture/alpha tiles onto one page.
// Tile i belongs to tablet i and is sized (2*ru_i) x (2*rv_i) texels; tiles
// never overlap, so sampling one tile can never read a neighbor.
struct TextureAtlas {
  struct Tile {
    int origin_row = 0, origin_col = 0;
    int rows = 0, cols = 0;
  };
  int page_rows = 0, page_cols = 0;
  std::vector<Tile> tiles;  // indexed by tablet id
};

// Shelf-packs all tablet tiles; deterministic for a fixed tablet order.
TextureAtlas plan_atlas(std::span<const Tablet> tablets);

// Materializes the packed color page and alpha page.
void bake_atlas(std::span<const Tablet> tablets, const TextureAtlas& atlas, Image& color,
                GridF& alpha);

// Bilinear, edge-clamped sample of one tablet tile at texel-grid coordinates
// (qu in [0, 2*ru], qv in [0, 2*rv]).
void sample_tile(const Tablet& t, double qu, double qv, Vec3& color, double& alpha);

}  // namespace tabletrec
