#include "tabletrec/texture_atlas.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tabletrec {

TextureAtlas plan_atlas(std::span<const Tablet> tablets) {
  TextureAtlas atlas;
  atlas.tiles.resize(tablets.size());
  if (tablets.empty()) return atlas;

  // Shelf packing into a page whose width targets a roughly square result.
  size_t area = 0;
  int max_cols = 1;
  for (const Tablet& t : tablets) {
    area += size_t(t.tex_rows()) * t.tex_cols();
    max_cols = std::max(max_cols, t.tex_cols());
  }
  const int page_cols = std::max(max_cols, int(std::ceil(std::sqrt(double(area)))));

  // Tallest-first placement keeps shelves tight; order by (rows desc, id asc).
  std::vector<int> order(tablets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return tablets[a].tex_rows() > tablets[b].tex_rows();
  });

  int shelf_row = 0, shelf_height = 0, cursor_col = 0;
  for (int id : order) {
    const int rows = tablets[id].tex_rows(), cols = tablets[id].tex_cols();
    if (cursor_col + cols > page_cols) {
      shelf_row += shelf_height;
      shelf_height = 0;
      cursor_col = 0;
    }
    atlas.tiles[id] = {shelf_row, cursor_col, rows, cols};
    cursor_col += cols;
    shelf_height = std::max(shelf_height, rows);
  }
  atlas.page_rows = shelf_row + shelf_height;
  atlas.page_cols = page_cols;
  return atlas;
}

void bake_atlas(std::span<const Tablet> tablets, const TextureAtlas& atlas, Image& color,
                GridF& alpha) {
  color = Image(atlas.page_rows, atlas.page_cols, Vec3{0, 0, 0});
  alpha = GridF(atlas.page_rows, atlas.page_cols, 0.0);
  for (size_t id = 0; id < tablets.size(); ++id) {
    const TextureAtlas::Tile& tile = atlas.tiles[id];
    for (int i = 0; i < tile.rows; ++i)
      for (int j = 0; j < tile.cols; ++j) {
        color.at(tile.origin_row + i, tile.origin_col + j) = tablets[id].texture.at(i, j);
        alpha.at(tile.origin_row + i, tile.origin_col + j) = tablets[id].alpha.at(i, j);
      }
  }
}

void sample_tile(const Tablet& t, double qu, double qv, Vec3& color, double& alpha) {
  const int rows = t.tex_rows(), cols = t.tex_cols();
  const double su = std::clamp(qu - 0.5, 0.0, double(rows - 1));
  const double sv = std::clamp(qv - 0.5, 0.0, double(cols - 1));
  const int i0 = std::min(int(su), std::max(rows - 2, 0));
  const int j0 = std::min(int(sv), std::max(cols - 2, 0));
  const int i1 = std::min(i0 + 1, rows - 1);
  const int j1 = std::min(j0 + 1, cols - 1);
  const double fu = su - i0, fv = sv - j0;

  const double w00 = (1 - fu) * (1 - fv), w01 = (1 - fu) * fv;
  const double w10 = fu * (1 - fv), w11 = fu * fv;
  color = t.texture.at(i0, j0) * w00 + t.texture.at(i0, j1) * w01 + t.texture.at(i1, j0) * w10 +
          t.texture.at(i1, j1) * w11;
  alpha = t.alpha.at(i0, j0) * w00 + t.alpha.at(i0, j1) * w01 + t.alpha.at(i1, j0) * w10 +
          t.alpha.at(i1, j1) * w11;
}

}  // namespace tabletrec
