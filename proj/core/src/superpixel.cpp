#include "tabletrec/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "tabletrec/tablet.hpp"

namespace tabletrec {

Vec3 rgb_to_lab(const Vec3& rgb) {
  auto inv_gamma = [](double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  const double r = inv_gamma(std::clamp(rgb.x, 0.0, 1.0));
  const double g = inv_gamma(std::clamp(rgb.y, 0.0, 1.0));
  const double b = inv_gamma(std::clamp(rgb.z, 0.0, 1.0));

  // sRGB D65
  const double X = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double Y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double Z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

  auto f = [](double t) {
    return t > 0.008856 ? std::cbrt(t) : (903.3 * t + 16.0) / 116.0;
  };
  const double fx = f(X / 0.95047), fy = f(Y), fz = f(Z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

namespace {

struct Cluster {
  double l = 0, a = 0, b = 0, x = 0, y = 0;
};

double image_gradient(const Image& lab, int y, int x) {
  const int xm = std::max(x - 1, 0), xp = std::min(x + 1, lab.width - 1);
  const int ym = std::max(y - 1, 0), yp = std::min(y + 1, lab.height - 1);
  return norm2(lab.at(y, xp) - lab.at(y, xm)) + norm2(lab.at(yp, x) - lab.at(ym, x));
}

}  // namespace

SuperpixelResult slic_superpixels(const Image& image, int target_count, double compactness) {
  const int W = image.width, H = image.height;
  SuperpixelResult result;
  result.labels = GridI(H, W, -1);
  if (W == 0 || H == 0 || target_count <= 0) return result;

  Image lab(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) lab.at(y, x) = rgb_to_lab(image.at(y, x));

  const double S = std::max(1.0, std::sqrt(double(W) * H / double(target_count)));

  // Grid seeds, perturbed to the lowest-gradient spot in a 3x3 window.
  std::vector<Cluster> clusters;
  for (double cy = S / 2; cy < H; cy += S)
    for (double cx = S / 2; cx < W; cx += S) {
      int bx = std::min(int(cx), W - 1), by = std::min(int(cy), H - 1);
      double best = image_gradient(lab, by, bx);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = bx + dx, ny = by + dy;
          if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
          const double g = image_gradient(lab, ny, nx);
          if (g < best) {
            best = g;
            bx = nx;
            by = ny;
          }
        }
      const Vec3& c = lab.at(by, bx);
      clusters.push_back({c.x, c.y, c.z, double(bx), double(by)});
    }
  if (clusters.empty()) {
    const Vec3& c = lab.at(H / 2, W / 2);
    clusters.push_back({c.x, c.y, c.z, W / 2.0, H / 2.0});
  }

  const double spatial_w = (compactness / S) * (compactness / S);
  GridF best_dist(H, W, 0.0);
  constexpr int kIterations = 10;
  for (int iter = 0; iter < kIterations; ++iter) {
    best_dist.fill(std::numeric_limits<double>::max());
    result.labels.fill(-1);
    for (size_t k = 0; k < clusters.size(); ++k) {
      const Cluster& c = clusters[k];
      const int x0 = std::max(int(c.x - 2 * S), 0), x1 = std::min(int(c.x + 2 * S), W - 1);
      const int y0 = std::max(int(c.y - 2 * S), 0), y1 = std::min(int(c.y + 2 * S), H - 1);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const Vec3& p = lab.at(y, x);
          const double dl = p.x - c.l, da = p.y - c.a, db = p.z - c.b;
          const double dx = x - c.x, dy = y - c.y;
          const double d = dl * dl + da * da + db * db + spatial_w * (dx * dx + dy * dy);
          if (d < best_dist.at(y, x)) {
            best_dist.at(y, x) = d;
            result.labels.at(y, x) = int(k);
          }
        }
    }
    // Pixels outside every window (possible with few clusters): nearest cluster.
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (result.labels.at(y, x) >= 0) continue;
        double best = std::numeric_limits<double>::max();
        for (size_t k = 0; k < clusters.size(); ++k) {
          const double dx = x - clusters[k].x, dy = y - clusters[k].y;
          const double d = dx * dx + dy * dy;
          if (d < best) {
            best = d;
            result.labels.at(y, x) = int(k);
          }
        }
      }

    std::vector<Cluster> next(clusters.size());
    std::vector<int> sizes(clusters.size(), 0);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const int k = result.labels.at(y, x);
        const Vec3& p = lab.at(y, x);
        next[k].l += p.x;
        next[k].a += p.y;
        next[k].b += p.z;
        next[k].x += x;
        next[k].y += y;
        ++sizes[k];
      }
    for (size_t k = 0; k < clusters.size(); ++k) {
      if (!sizes[k]) continue;
      next[k].l /= sizes[k];
      next[k].a /= sizes[k];
      next[k].b /= sizes[k];
      next[k].x /= sizes[k];
      next[k].y /= sizes[k];
      clusters[k] = next[k];
    }
  }

  // Connectivity: flood-fill components; relabel all but the largest component
  // of each label to the adjacent component they touch first.
  GridI comp(H, W, -1);
  std::vector<int> comp_label, comp_size;
  std::vector<std::pair<int, int>> comp_best;  // (size, component) per label
  int n_comp = 0;
  std::vector<std::pair<int, int>> stack_px;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (comp.at(y, x) >= 0) continue;
      const int label = result.labels.at(y, x);
      const int id = n_comp++;
      int size = 0;
      stack_px.push_back({y, x});
      comp.at(y, x) = id;
      while (!stack_px.empty()) {
        auto [py, px] = stack_px.back();
        stack_px.pop_back();
        ++size;
        const int nb[4][2] = {{py - 1, px}, {py + 1, px}, {py, px - 1}, {py, px + 1}};
        for (auto& n : nb) {
          if (n[0] < 0 || n[0] >= H || n[1] < 0 || n[1] >= W) continue;
          if (comp.at(n[0], n[1]) >= 0 || result.labels.at(n[0], n[1]) != label) continue;
          comp.at(n[0], n[1]) = id;
          stack_px.push_back({n[0], n[1]});
        }
      }
      comp_label.push_back(label);
      comp_size.push_back(size);
      if (label >= int(comp_best.size())) comp_best.resize(label + 1, {0, -1});
      if (size > comp_best[label].first) comp_best[label] = {size, id};
    }

  // Orphan components adopt the label of a neighboring pixel from another component.
  std::vector<int> comp_new_label(n_comp, -1);
  for (int c = 0; c < n_comp; ++c)
    if (comp_best[comp_label[c]].second == c) comp_new_label[c] = comp_label[c];
  bool changed = true;
  while (changed) {
    changed = false;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const int c = comp.at(y, x);
        if (comp_new_label[c] >= 0) continue;
        const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
        for (auto& n : nb) {
          if (n[0] < 0 || n[0] >= H || n[1] < 0 || n[1] >= W) continue;
          const int nc = comp.at(n[0], n[1]);
          if (nc != c && comp_new_label[nc] >= 0) {
            comp_new_label[c] = comp_new_label[nc];
            changed = true;
            break;
          }
        }
      }
  }
  for (int c = 0; c < n_comp; ++c)
    if (comp_new_label[c] < 0) comp_new_label[c] = comp_label[c];

  // Compact to dense labels over the surviving regions.
  std::vector<int> dense(comp_best.size(), -1);
  int count = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int lbl = comp_new_label[comp.at(y, x)];
      if (dense[lbl] < 0) dense[lbl] = count++;
      result.labels.at(y, x) = dense[lbl];
    }
  result.count = count;
  return result;
}

std::vector<std::optional<PooledGeometry>> pool_superpixel_geometry(const GridI& labels, int count,
                                                                    const GridF& depth,
                                                                    const Image& normal) {
  std::vector<double> depth_sum(count, 0.0);
  std::vector<int> depth_n(count, 0);
  std::vector<Vec3> normal_sum(count);
  std::vector<int> normal_n(count, 0);

  for (int y = 0; y < labels.height; ++y)
    for (int x = 0; x < labels.width; ++x) {
      const int k = labels.at(y, x);
      if (!depth.empty() && depth.at(y, x) > 0) {
        depth_sum[k] += depth.at(y, x);
        ++depth_n[k];
      }
      if (!normal.empty() && norm2(normal.at(y, x)) > 0.25) {
        normal_sum[k] += normal.at(y, x);
        ++normal_n[k];
      }
    }

  std::vector<std::optional<PooledGeometry>> out(count);
  for (int k = 0; k < count; ++k) {
    if (!depth_n[k] || !normal_n[k]) continue;
    const Vec3 mean = normal_sum[k] / double(normal_n[k]);
    if (norm(mean) < 1e-3) continue;  // opposing normals cancel out
    out[k] = PooledGeometry{depth_sum[k] / depth_n[k], normalized(mean)};
  }
  return out;
}

std::vector<std::vector<PixelCoord>> superpixel_masks(const GridI& labels, int count) {
  std::vector<std::vector<PixelCoord>> masks(count);
  for (int y = 0; y < labels.height; ++y)
    for (int x = 0; x < labels.width; ++x) masks[labels.at(y, x)].push_back({y, x});
  return masks;
}

}  // namespace tabletrec
