#include "tabletrec/merge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tabletrec/errors.hpp"
#include "tabletrec/kdtree.hpp"
#include "tabletrec/texture_atlas.hpp"

namespace tabletrec {

MergeForest::MergeForest(std::span<const UnitTablet> units) {
  const int n = int(units.size());
  parent_.resize(n);
  rank_.assign(n, 0);
  color_sum_.resize(n);
  center_sum_.resize(n);
  normal_sum_.resize(n);
  count_.assign(n, 1);
  set_count_ = n;
  for (int i = 0; i < n; ++i) {
    parent_[i] = i;
    color_sum_[i] = units[i].mean_color;
    center_sum_[i] = units[i].center;
    normal_sum_[i] = units[i].normal;
  }
}

int MergeForest::find(int i) {
  while (parent_[i] != i) {
    parent_[i] = parent_[parent_[i]];
    i = parent_[i];
  }
  return i;
}

bool MergeForest::unite(int a, int b) {
  int ra = find(a), rb = find(b);
  if (ra == rb) return false;
  if (rank_[ra] < rank_[rb]) std::swap(ra, rb);
  parent_[rb] = ra;
  if (rank_[ra] == rank_[rb]) ++rank_[ra];
  color_sum_[ra] += color_sum_[rb];
  center_sum_[ra] += center_sum_[rb];
  normal_sum_[ra] += normal_sum_[rb];
  count_[ra] += count_[rb];
  --set_count_;
  return true;
}

Vec3 MergeForest::mean_normal(int root) const {
  const Vec3 mean = normal_sum_[root] / double(count_[root]);
  const double len = norm(mean);
  return len > 1e-12 ? mean / len : Vec3{0, 0, 1};
}

std::vector<int> MergeForest::roots() {
  std::vector<int> out(parent_.size());
  for (size_t i = 0; i < parent_.size(); ++i) out[i] = find(int(i));
  return out;
}

InitialTablet make_initial_record(const Tablet& t, int current_id) {
  InitialTablet rec;
  const Frame f = t.frame();
  rec.anchor = t.center;
  rec.frame_u = f.up;
  rec.frame_r = f.right;
  rec.half_u = t.half_extent_u();
  rec.half_v = t.half_extent_v();
  rec.ratio_u = t.ratio_u;
  rec.ratio_v = t.ratio_v;
  rec.source_camera = t.source_camera;
  rec.current_id = current_id;

  Vec3 weighted{};
  double wsum = 0;
  Vec3 plain{};
  for (size_t k = 0; k < t.texture.data.size(); ++k) {
    weighted += t.texture.data[k] * t.alpha.data[k];
    wsum += t.alpha.data[k];
    plain += t.texture.data[k];
  }
  rec.mean_color = wsum > 1e-9 ? weighted / wsum : plain / double(t.texture.data.size());
  return rec;
}

std::vector<UnitTablet> project_units(const Scene& scene) {
  std::vector<UnitTablet> units;
  units.reserve(scene.initial.size());
  for (size_t i = 0; i < scene.initial.size(); ++i) {
    const InitialTablet& rec = scene.initial[i];
    if (rec.current_id < 0) continue;
    const Tablet& cur = scene.tablets[rec.current_id];
    const Vec3 n = normalized(cur.normal);
    UnitTablet u;
    u.center = rec.anchor - n * dot(rec.anchor - cur.center, n);
    u.normal = n;
    u.mean_color = rec.mean_color;
    u.current_id = rec.current_id;
    u.initial_id = int(i);
    u.source_camera = rec.source_camera;
    units.push_back(u);
  }
  return units;
}

MergeForest merge_pass(std::span<const UnitTablet> units, const MergeConfig& config,
                       MergeStats* stats) {
  MergeForest forest(units);
  if (units.empty()) return forest;

  std::vector<Vec3> centers(units.size());
  for (size_t i = 0; i < units.size(); ++i) centers[i] = units[i].center;
  const KdTree3 tree(std::move(centers));

  // Neighborhoods are fixed for the whole pass; set statistics update per union.
  std::vector<std::vector<int>> neighbors(units.size());
  for (size_t i = 0; i < units.size(); ++i)
    neighbors[i] = tree.knn(units[i].center, config.k_neighbors, int(i));

  int sweeps = 0, total_unions = 0;
  bool merged = true;
  while (merged) {
    merged = false;
    ++sweeps;
    for (size_t i = 0; i < units.size(); ++i) {
      for (int j : neighbors[i]) {
        const int ra = forest.find(int(i));
        const int rb = forest.find(j);
        if (ra == rb) continue;
        // (1) pairwise normals
        if (dot(units[i].normal, units[j].normal) < config.min_cos_pair) continue;
        // (2) set-average normals
        const Vec3 na = forest.mean_normal(ra), nb = forest.mean_normal(rb);
        if (dot(na, nb) < config.min_cos_set) continue;
        // (3) projected center distance along the average normal
        const Vec3 n_avg = normalized(na + nb);
        const Vec3 delta = forest.mean_center(ra) - forest.mean_center(rb);
        if (std::fabs(dot(delta, n_avg)) > config.max_plane_dist) continue;
        // (4) mean color distance (per channel)
        if (max_abs(forest.mean_color(ra) - forest.mean_color(rb)) > config.max_color_dist)
          continue;
        forest.unite(ra, rb);
        merged = true;
        ++total_unions;
      }
    }
  }
  if (stats) {
    stats->sweeps = sweeps;
    stats->unions = total_unions;
  }
  return forest;
}

int assign_camera(std::span<const int> member_cameras) {
  std::map<int, int> votes;
  for (int c : member_cameras) ++votes[c];
  int best_cam = -1, best_votes = -1;
  for (const auto& [cam, v] : votes)
    if (v > best_votes) {  // map iterates ascending, so ties keep the lowest index
      best_cam = cam;
      best_votes = v;
    }
  return best_cam;
}

namespace {

struct SourceSample {
  const Tablet* tablet;
  Frame frame;
};

}  // namespace

void rebuild_tablets(MergeForest& forest, std::span<const UnitTablet> units, Scene& scene,
                     std::span<const CameraView> views) {
  // Group the units per set, ordered by smallest member unit index.
  std::map<int, std::vector<int>> sets;  // root -> unit indices (ascending)
  for (size_t i = 0; i < units.size(); ++i) sets[forest.find(int(i))].push_back(int(i));
  std::vector<std::pair<int, const std::vector<int>*>> ordered;
  ordered.reserve(sets.size());
  for (const auto& [root, members] : sets) ordered.emplace_back(members.front(), &members);
  // map key order is root index; re-sort by first member for a stable output order
  std::sort(ordered.begin(), ordered.end());

  std::vector<Tablet> new_tablets;
  new_tablets.reserve(ordered.size());

  for (const auto& [first_member, members_ptr] : ordered) {
    const std::vector<int>& members = *members_ptr;
    const int root = forest.find(members.front());
    const Vec3 n_new = forest.mean_normal(root);
    const Vec3 plane_point = forest.mean_center(root);

    // Up vector follows the first member's current frame onto the new normal.
    const Tablet& seed = scene.tablets[units[members.front()].current_id];
    Vec3 up_new;
    try {
      up_new = update_up_vector(normalized(seed.normal), n_new, seed.frame().up);
    } catch (const AntiparallelNormals&) {
      up_new = std::fabs(n_new.y) > 0.99 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    }
    Basis basis = orthonormalize_basis(n_new, up_new);

    // Camera assignment and averaged texel densities over the member initials.
    std::vector<int> cams;
    cams.reserve(members.size());
    double ratio_u = 0, ratio_v = 0;
    for (int m : members) {
      const InitialTablet& rec = scene.initial[units[m].initial_id];
      cams.push_back(rec.source_camera);
      ratio_u += rec.ratio_u;
      ratio_v += rec.ratio_v;
    }
    ratio_u /= double(members.size());
    ratio_v /= double(members.size());

    // Bounds: min/max of member initial-tablet corners on the new in-plane axes.
    double min_u = std::numeric_limits<double>::max(), max_u = -min_u;
    double min_v = min_u, max_v = max_u;
    for (int m : members) {
      for (const Vec3& corner : scene.initial[units[m].initial_id].corners()) {
        const Vec3 rel = corner - plane_point;
        min_u = std::min(min_u, dot(rel, basis.up));
        max_u = std::max(max_u, dot(rel, basis.up));
        min_v = std::min(min_v, dot(rel, basis.right));
        max_v = std::max(max_v, dot(rel, basis.right));
      }
    }

    Tablet t;
    t.normal = basis.normal;
    t.up = basis.up;
    t.right = basis.right;
    t.center = plane_point + basis.up * (0.5 * (min_u + max_u)) +
               basis.right * (0.5 * (min_v + max_v));
    t.ratio_u = ratio_u;
    t.ratio_v = ratio_v;
    t.pixel_range_u = std::max(1, int(std::ceil(ratio_u * 0.5 * (max_u - min_u) - 1e-9)));
    t.pixel_range_v = std::max(1, int(std::ceil(ratio_v * 0.5 * (max_v - min_v) - 1e-9)));
    t.source_camera = assign_camera(cams);
    reanchor_ray(t, views[t.source_camera]);

    // Resample texture/alpha from the distinct previous tablets of this set:
    // highest sampled alpha wins per texel, lowest tablet id on ties.
    std::vector<int> source_ids;
    for (int m : members) source_ids.push_back(units[m].current_id);
    std::sort(source_ids.begin(), source_ids.end());
    source_ids.erase(std::unique(source_ids.begin(), source_ids.end()), source_ids.end());

    t.allocate_tiles(forest.mean_color(root), 0.0);
    GridF best(t.tex_rows(), t.tex_cols(), -1.0);
    const Frame tf = t.frame();
    for (int src_id : source_ids) {
      const Tablet& src = scene.tablets[src_id];
      const Frame sf = src.frame();
      // Texel bounding box of the source rectangle on the new grid.
      double lo_u = std::numeric_limits<double>::max(), hi_u = -lo_u;
      double lo_v = lo_u, hi_v = hi_u;
      for (const Vec3& corner : src.corners()) {
        const Vec3 rel = corner - t.center;
        lo_u = std::min(lo_u, dot(rel, tf.up));
        hi_u = std::max(hi_u, dot(rel, tf.up));
        lo_v = std::min(lo_v, dot(rel, tf.right));
        hi_v = std::max(hi_v, dot(rel, tf.right));
      }
      const int i0 = std::max(0, int(std::floor(lo_u * t.ratio_u + t.pixel_range_u)) - 1);
      const int i1 = std::min(t.tex_rows() - 1, int(std::ceil(hi_u * t.ratio_u + t.pixel_range_u)));
      const int j0 = std::max(0, int(std::floor(lo_v * t.ratio_v + t.pixel_range_v)) - 1);
      const int j1 = std::min(t.tex_cols() - 1, int(std::ceil(hi_v * t.ratio_v + t.pixel_range_v)));
      for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j) {
          const Vec3 w = t.grid_point(i + 0.5, j + 0.5);
          const Vec3 rel = w - src.center;
          const double su = dot(rel, sf.up), sv = dot(rel, sf.right);
          if (std::fabs(su) > src.half_extent_u() || std::fabs(sv) > src.half_extent_v())
            continue;
          Vec3 color;
          double alpha;
          sample_tile(src, su * src.ratio_u + src.pixel_range_u,
                      sv * src.ratio_v + src.pixel_range_v, color, alpha);
          if (alpha > best.at(i, j)) {
            best.at(i, j) = alpha;
            t.texture.at(i, j) = color;
            t.alpha.at(i, j) = alpha;
          }
        }
    }

    // Re-point affiliations and walk the anchors onto the new plane.
    const int new_id = int(new_tablets.size());
    for (int m : members) {
      InitialTablet& rec = scene.initial[units[m].initial_id];
      rec.current_id = new_id;
      rec.anchor -= t.normal * dot(rec.anchor - t.center, t.normal);
    }
    new_tablets.push_back(std::move(t));
  }
  scene.tablets = std::move(new_tablets);
}

WeightCheckStats weight_check(Scene& scene, std::span<const CameraView> all_views,
                              std::span<const int> render_ids, const WeightCheckConfig& config,
                              const RasterConfig& raster) {
  const size_t n = scene.tablets.size();
  std::vector<int> counts(n, 0);
  std::vector<double> lo_u(n, std::numeric_limits<double>::max()), hi_u(n, -1e300);
  std::vector<double> lo_v(n, std::numeric_limits<double>::max()), hi_v(n, -1e300);

  std::vector<int> all_ids;
  if (render_ids.empty()) {
    all_ids.resize(all_views.size());
    for (size_t i = 0; i < all_views.size(); ++i) all_ids[i] = int(i);
    render_ids = all_ids;
  }

  const PseudoMesh mesh = pseudo_mesh(std::span<const Tablet>(scene.tablets));
  for (int view_id : render_ids) {
    const CameraView& view = all_views[view_id];
    LayerStack stack = rasterize_peeled(scene.tablets, mesh, view, raster);
    sample_atlas(scene.tablets, mesh, stack);
    const int L = stack.layers;
    for (int y = 0; y < stack.height; ++y)
      for (int x = 0; x < stack.width; ++x) {
        const size_t base = stack.idx(y, x, 0);
        double transmittance = 1.0;
        for (int l = 0; l < L && stack.tri[base + l] >= 0; ++l) {
          const double a = stack.alpha[base + l];
          if (transmittance * a > config.weight_threshold) {
            const int face = stack.tri[base + l];
            const int id = face / 2;
            const auto& fv = mesh.faces[face];
            const double b1 = stack.b1[base + l], b2 = stack.b2[base + l];
            const Vec2 uv =
                mesh.uv[fv[0]] * (1.0 - b1 - b2) + mesh.uv[fv[1]] * b1 + mesh.uv[fv[2]] * b2;
            ++counts[id];
            lo_u[id] = std::min(lo_u[id], uv.x);
            hi_u[id] = std::max(hi_u[id], uv.x);
            lo_v[id] = std::min(lo_v[id], uv.y);
            hi_v[id] = std::max(hi_v[id], uv.y);
          }
          transmittance *= 1.0 - a;
        }
      }
  }

  WeightCheckStats stats;
  std::vector<int> remap(n, -1);
  std::vector<Tablet> kept;
  kept.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    if (counts[i] < config.min_points) {
      ++stats.dropped;
      continue;
    }
    Tablet t = std::move(scene.tablets[i]);
    const int rows = t.tex_rows(), cols = t.tex_cols();
    int wlo_u = std::clamp(int(std::floor(lo_u[i])), 0, rows);
    int whi_u = std::clamp(int(std::ceil(hi_u[i])), 0, rows);
    int wlo_v = std::clamp(int(std::floor(lo_v[i])), 0, cols);
    int whi_v = std::clamp(int(std::ceil(hi_v[i])), 0, cols);

    const int new_ru = std::max(1, (whi_u - wlo_u + 1) / 2);
    const int new_rv = std::max(1, (whi_v - wlo_v + 1) / 2);
    if (2 * new_ru < rows || 2 * new_rv < cols) {
      // Shift the even-sized crop window inside the old tile.
      wlo_u = std::clamp(wlo_u, 0, rows - 2 * new_ru);
      wlo_v = std::clamp(wlo_v, 0, cols - 2 * new_rv);
      Grid<Vec3> tex(2 * new_ru, 2 * new_rv);
      GridF alp(2 * new_ru, 2 * new_rv);
      for (int r = 0; r < 2 * new_ru; ++r)
        for (int c = 0; c < 2 * new_rv; ++c) {
          tex.at(r, c) = t.texture.at(wlo_u + r, wlo_v + c);
          alp.at(r, c) = t.alpha.at(wlo_u + r, wlo_v + c);
        }
      const Frame f = t.frame();
      const double mid_u = (wlo_u + new_ru - t.pixel_range_u) / t.ratio_u;
      const double mid_v = (wlo_v + new_rv - t.pixel_range_v) / t.ratio_v;
      t.center += f.up * mid_u + f.right * mid_v;
      t.texture = std::move(tex);
      t.alpha = std::move(alp);
      t.pixel_range_u = new_ru;
      t.pixel_range_v = new_rv;
      reanchor_ray(t, all_views[t.source_camera]);
      ++stats.shrunk;
    }
    remap[i] = int(kept.size());
    kept.push_back(std::move(t));
  }
  scene.tablets = std::move(kept);
  for (InitialTablet& rec : scene.initial)
    if (rec.current_id >= 0) rec.current_id = remap[rec.current_id];
  return stats;
}

}  // namespace tabletrec
