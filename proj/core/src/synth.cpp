#include "tabletrec/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "tabletrec/errors.hpp"
#include "tabletrec/metrics.hpp"
#include "tabletrec/raster.hpp"
#include "tabletrec/scene_io.hpp"

namespace fs = std::filesystem;

namespace tabletrec {

namespace {

constexpr double kPi = std::numbers::pi;

// Gentle two-tone pattern: base color plus a low-amplitude sinusoid, so local
// mean colors stay well inside the merge color threshold across one plane.
Tablet make_plane(const Vec3& center, const Vec3& normal, const Vec3& up, double half_u,
                  double half_v, double texels_per_meter, const Vec3& base, double amplitude,
                  double frequency) {
  Tablet t;
  const Basis basis = orthonormalize_basis(normal, up);
  t.center = center;
  t.normal = basis.normal;
  t.up = basis.up;
  t.right = basis.right;
  t.ratio_u = texels_per_meter;
  t.ratio_v = texels_per_meter;
  t.pixel_range_u = std::max(1, int(std::lround(half_u * texels_per_meter)));
  t.pixel_range_v = std::max(1, int(std::lround(half_v * texels_per_meter)));
  t.ray_dir = normalized(center + basis.normal);  // placeholder; synth planes are not optimized
  t.cam_distance = 1.0;
  t.allocate_tiles({}, 1.0);
  for (int i = 0; i < t.tex_rows(); ++i)
    for (int j = 0; j < t.tex_cols(); ++j) {
      const double u = double(i) / t.tex_rows(), v = double(j) / t.tex_cols();
      const double wobble = std::sin(2 * kPi * frequency * u + 0.7) *
                            std::sin(2 * kPi * frequency * v);
      const double wobble2 = std::sin(2 * kPi * (frequency * 0.5) * (u + v));
      Vec3 c = base + Vec3{wobble, wobble2, -wobble} * amplitude;
      t.texture.at(i, j) = {std::clamp(c.x, 0.0, 1.0), std::clamp(c.y, 0.0, 1.0),
                            std::clamp(c.z, 0.0, 1.0)};
    }
  return t;
}

CameraView make_view(const Intrinsics& K, const Vec3& eye, const Vec3& dir) {
  CameraView v;
  v.K = K;
  v.pose = look_at(eye, eye + dir, {0, 1, 0});
  return v;
}

// Renders the ground-truth planes into each view to produce the observed image
// and exact depth/normal supervision.
void bake_views(SynthScene& scene) {
  const Scene gt = as_scene(scene.gt_planes);
  RasterConfig config;
  config.layers = 4;  // opaque ground truth needs no deep peeling
  for (CameraView& view : scene.views) {
    const RenderOutput render = render_view(gt, view, config);
    view.image = render.color;
    view.depth_supervision = GridF(render.depth.height, render.depth.width, 0.0);
    view.normal_supervision = Image(render.normal.height, render.normal.width, Vec3{});
    for (int y = 0; y < render.depth.height; ++y)
      for (int x = 0; x < render.depth.width; ++x)
        if (render.valid.at(y, x)) {
          view.depth_supervision.at(y, x) = render.depth.at(y, x);
          view.normal_supervision.at(y, x) = render.normal.at(y, x);
        }
  }
}

SynthScene make_box_room() {
  SynthScene scene;
  scene.scale = 4.0;

  // Interior box x,z in [-2,2], y in [0,2.5]; floor plus four walls, normals inward.
  const double tex = 48.0;
  scene.gt_planes.planes.push_back(make_plane({0, 0, 0}, {0, 1, 0}, {0, 0, 1}, 2.0, 2.0, tex,
                                              {0.52, 0.48, 0.42}, 0.045, 6));
  scene.gt_planes.planes.push_back(make_plane({-2, 1.25, 0}, {1, 0, 0}, {0, 1, 0}, 1.25, 2.0, tex,
                                              {0.68, 0.30, 0.28}, 0.05, 5));
  scene.gt_planes.planes.push_back(make_plane({2, 1.25, 0}, {-1, 0, 0}, {0, 1, 0}, 1.25, 2.0, tex,
                                              {0.28, 0.62, 0.33}, 0.05, 5));
  scene.gt_planes.planes.push_back(make_plane({0, 1.25, -2}, {0, 0, 1}, {0, 1, 0}, 1.25, 2.0, tex,
                                              {0.30, 0.38, 0.70}, 0.05, 4));
  scene.gt_planes.planes.push_back(make_plane({0, 1.25, 2}, {0, 0, -1}, {0, 1, 0}, 1.25, 2.0, tex,
                                              {0.66, 0.60, 0.30}, 0.05, 4));

  Intrinsics K{277.0, 277.0, 160.0, 120.0, 320, 240};
  // Two interleaved rings looking across the room: one pitched down for the
  // floor and wall bases, one pitched up for the upper walls.
  const int n_pairs = 10;
  for (int k = 0; k < n_pairs; ++k) {
    const double theta = 2 * kPi * k / n_pairs;
    const Vec3 eye{0.8 * std::cos(theta), 1.4, 0.8 * std::sin(theta)};
    const Vec3 inward = normalized(Vec3{-std::cos(theta), 0, -std::sin(theta)});
    const double down = 25.0 * kPi / 180.0, up = 8.0 * kPi / 180.0;
    scene.views.push_back(
        make_view(K, eye, inward * std::cos(down) - Vec3{0, 1, 0} * std::sin(down)));
    scene.views.push_back(
        make_view(K, eye, inward * std::cos(up) + Vec3{0, 1, 0} * std::sin(up)));
  }
  bake_views(scene);
  return scene;
}

SynthScene make_quad() {
  SynthScene scene;
  scene.scale = 2.0;
  scene.gt_planes.planes.push_back(make_plane({0, 1.0, 2.5}, {0, 0, -1}, {0, 1, 0}, 0.75, 1.0,
                                              64.0, {0.55, 0.45, 0.35}, 0.09, 3));

  Intrinsics K{277.0, 277.0, 160.0, 120.0, 320, 240};
  for (int k = 0; k < 6; ++k) {
    const Vec3 eye{-0.45 + 0.18 * k, 1.0 + 0.05 * (k % 2), 0.0};
    scene.views.push_back(make_view(K, eye, normalized(Vec3{0, 1.0, 2.5} - eye)));
  }
  bake_views(scene);
  return scene;
}

}  // namespace

SynthScene synth_scene(const std::string& preset) {
  if (preset == "box") return make_box_room();
  if (preset == "quad") return make_quad();
  throw NotFound("unknown synth preset: " + preset);
}

void write_synth_scene(const std::string& preset, const std::string& dir) {
  const SynthScene scene = synth_scene(preset);
  write_scene(dir, scene.views);

  const fs::path gt_dir = fs::path(dir) / "gt";
  fs::create_directories(gt_dir);
  const LabeledPointCloud cloud = sample_planeset(scene.gt_planes);
  write_labeled_ply((gt_dir / "gt_points.ply").string(), cloud.points, cloud.labels);

  nlohmann::json j;
  j["scale"] = scene.scale;
  j["planes"] = nlohmann::json::array();
  for (size_t i = 0; i < scene.gt_planes.planes.size(); ++i) {
    const Tablet& t = scene.gt_planes.planes[i];
    j["planes"].push_back({{"id", i},
                           {"center", {t.center.x, t.center.y, t.center.z}},
                           {"normal", {t.normal.x, t.normal.y, t.normal.z}},
                           {"half_extent_u", t.half_extent_u()},
                           {"half_extent_v", t.half_extent_v()}});
  }
  std::ofstream(gt_dir / "gt_planes.json") << j.dump(1) << "\n";
}

}  // namespace tabletrec
