#pragma once

#include <span>
#include <vector>

#include "tabletrec/raster.hpp"
#include "tabletrec/scene.hpp"

namespace tabletrec {

// Fixed-size merge element: the projection of an initial tablet onto its
// current tablet's plane, carrying the current tablet's normal.
struct UnitTablet {
  Vec3 center;
  Vec3 normal;
  Vec3 mean_color;
  int current_id = -1;
  int initial_id = -1;
  int source_camera = 0;
};

struct MergeConfig {
  int k_neighbors = 16;
  double min_cos_pair = 0.93;   // constraint (1), pairwise unit normals
  double min_cos_set = 0.93;    // constraint (2), set-average normals
  double max_plane_dist = 0.05; // constraint (3), world units along the average normal
  double max_color_dist = 0.12; // constraint (4), per-channel on mean RGB
};

// Union-find over unit tablets with running per-set mean color/center/normal.
class MergeForest {
 public:
  explicit MergeForest(std::span<const UnitTablet> units);

  int find(int i);
  bool unite(int a, int b);  // false when already joined
  int set_count() const { return set_count_; }
  size_t size() const { return parent_.size(); }

  Vec3 mean_color(int root) const { return color_sum_[root] / double(count_[root]); }
  Vec3 mean_center(int root) const { return center_sum_[root] / double(count_[root]); }
  Vec3 mean_normal(int root) const;  // normalized arithmetic mean
  int member_count(int root) const { return count_[root]; }

  // Root of every unit, path-compressed, suitable for equality comparisons.
  std::vector<int> roots();

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
  std::vector<Vec3> color_sum_, center_sum_, normal_sum_;
  std::vector<int> count_;
  int set_count_ = 0;
};

// Snapshot of a freshly built tablet as an immutable first-generation record.
InitialTablet make_initial_record(const Tablet& t, int current_id);

// Projects every live initial tablet onto its current tablet's plane.
std::vector<UnitTablet> project_units(const Scene& scene);

struct MergeStats {
  int sweeps = 0;
  int unions = 0;
};

// KD-tree neighborhoods + union-find sweeps until a full sweep performs no
// union. Deterministic: ascending unit order, neighbors by ascending distance.
MergeForest merge_pass(std::span<const UnitTablet> units, const MergeConfig& config,
                       MergeStats* stats = nullptr);

// Most frequent source camera; ties break to the lowest index.
int assign_camera(std::span<const int> member_cameras);

// Replaces scene.tablets with one tablet per forest set, resampling texture and
// alpha from the previous tablets and re-pointing initial-tablet affiliations.
void rebuild_tablets(MergeForest& forest, std::span<const UnitTablet> units, Scene& scene,
                     std::span<const CameraView> views);

struct WeightCheckConfig {
  double weight_threshold = 0.3;
  int min_points = 8;
};

struct WeightCheckStats {
  int dropped = 0;
  int shrunk = 0;
};

// Rasterizes the given views, keeps per-tablet points with blending weight above
// the threshold, drops under-supported tablets, and shrinks survivors' bounds to
// the uv range of their supporting points. Never grows any tablet.
// `all_views` spans every camera (source_camera indexes into it); `render_ids`
// selects the views to rasterize (empty means all).
WeightCheckStats weight_check(Scene& scene, std::span<const CameraView> all_views,
                              std::span<const int> render_ids, const WeightCheckConfig& config,
                              const RasterConfig& raster);

}  // namespace tabletrec
