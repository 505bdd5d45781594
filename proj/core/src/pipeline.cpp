#include "tabletrec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "tabletrec/adam.hpp"
#include "tabletrec/errors.hpp"
#include "tabletrec/grad.hpp"
#include "tabletrec/merge.hpp"
#include "tabletrec/superpixel.hpp"

namespace tabletrec {

std::vector<std::vector<int>> select_keyframes(std::span<const CameraView> views,
                                               const Schedule& schedule) {
  if (views.empty()) return {};
  std::vector<int> keyframes{0};
  const double rot_thresh = schedule.keyframe_rotation_deg * std::numbers::pi / 180.0;
  for (size_t i = 1; i < views.size(); ++i) {
    const Pose& last = views[keyframes.back()].pose;
    if (relative_translation(last, views[i].pose) > schedule.keyframe_translation ||
        relative_rotation_angle(last, views[i].pose) > rot_thresh)
      keyframes.push_back(int(i));
  }

  if (keyframes.size() < 2) {
    std::vector<int> all(views.size());
    for (size_t i = 0; i < views.size(); ++i) all[i] = int(i);
    return {all};
  }

  std::vector<std::vector<int>> fragments;
  const int per = std::max(1, schedule.keyframes_per_fragment);
  for (size_t start = 0; start < keyframes.size(); start += per) {
    const size_t end = std::min(start + per, keyframes.size());
    fragments.emplace_back(keyframes.begin() + start, keyframes.begin() + end);
  }
  return fragments;
}

std::vector<CameraView> downscale_views(std::span<const CameraView> views, int long_side) {
  std::vector<CameraView> out(views.begin(), views.end());
  for (CameraView& view : out) {
    const int long_now = std::max(view.K.width, view.K.height);
    if (long_now <= long_side) continue;
    const double s = double(long_side) / double(long_now);
    const int W = std::max(1, int(std::lround(view.K.width * s)));
    const int H = std::max(1, int(std::lround(view.K.height * s)));
    const double sx = double(view.K.width) / W, sy = double(view.K.height) / H;

    Image image(H, W);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const int x0 = int(x * sx), x1 = std::max(x0 + 1, int((x + 1) * sx));
        const int y0 = int(y * sy), y1 = std::max(y0 + 1, int((y + 1) * sy));
        Vec3 sum{};
        int n = 0;
        for (int yy = y0; yy < y1 && yy < view.image.height; ++yy)
          for (int xx = x0; xx < x1 && xx < view.image.width; ++xx) {
            sum += view.image.at(yy, xx);
            ++n;
          }
        image.at(y, x) = n ? sum / double(n) : Vec3{};
      }

    GridF depth;
    Image normal;
    if (view.has_depth()) {
      depth = GridF(H, W, 0.0);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const int yy = std::min(int((y + 0.5) * sy), view.K.height - 1);
          const int xx = std::min(int((x + 0.5) * sx), view.K.width - 1);
          depth.at(y, x) = view.depth_supervision.at(yy, xx);
        }
    }
    if (view.has_normal()) {
      normal = Image(H, W, Vec3{});
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const int yy = std::min(int((y + 0.5) * sy), view.K.height - 1);
          const int xx = std::min(int((x + 0.5) * sx), view.K.width - 1);
          normal.at(y, x) = view.normal_supervision.at(yy, xx);
        }
    }

    view.K.fx /= sx;
    view.K.fy /= sy;
    view.K.cx /= sx;
    view.K.cy /= sy;
    view.K.width = W;
    view.K.height = H;
    view.image = std::move(image);
    view.depth_supervision = std::move(depth);
    view.normal_supervision = std::move(normal);
  }
  return out;
}

namespace {

struct Telemetry {
  const ReconstructHooks& hooks;
  long step = 0;

  void loss_row(const LossValues& v, double total) {
    if (!hooks.loss_csv) {
      ++step;
      return;
    }
    (*hooks.loss_csv) << step++ << "," << v.photometric << "," << v.alpha_inverse << ","
                      << v.distortion << "," << v.depth << "," << v.normal << "," << total
                      << "\n";
  }
  void merge_row(const std::string& event, int pass, size_t set_count, int dropped) {
    if (hooks.merge_csv)
      (*hooks.merge_csv) << event << "," << pass << "," << set_count << "," << dropped << "\n";
    if (hooks.on_event) hooks.on_event(event, set_count);
  }
};

void run_merge(Scene& scene, std::span<const CameraView> views, const Config& config,
               Telemetry& telemetry, const std::string& event, int pass) {
  const std::vector<UnitTablet> units = project_units(scene);
  if (units.empty()) return;
  MergeForest forest = merge_pass(units, config.merge);
  rebuild_tablets(forest, units, scene, views);
  telemetry.merge_row(event, pass, scene.tablets.size(), 0);
}

void run_weight_check(Scene& scene, std::span<const CameraView> views,
                      std::span<const int> render_ids, const Config& config, Telemetry& telemetry,
                      const std::string& event, int pass) {
  const WeightCheckStats stats = weight_check(scene, views, render_ids, config.weight_check,
                                              config.raster);
  telemetry.merge_row(event, pass, scene.tablets.size(), stats.dropped);
}

void init_fragment_tablets(Scene& scene, std::span<const CameraView> views,
                           std::span<const int> keyframes, const Config& config) {
  for (int kf : keyframes) {
    const CameraView& view = views[kf];
    if (!view.has_depth() || !view.has_normal())
      throw Error("reconstruct requires depth and normal supervision on every keyframe");
    const int target =
        std::max(1, view.image.width * view.image.height /
                        (config.superpixel_block * config.superpixel_block));
    const SuperpixelResult sp =
        slic_superpixels(view.image, target, config.slic_compactness);
    const auto pooled = pool_superpixel_geometry(sp.labels, sp.count, view.depth_supervision,
                                                 view.normal_supervision);
    const auto masks = superpixel_masks(sp.labels, sp.count);
    for (int k = 0; k < sp.count; ++k) {
      if (!pooled[k]) continue;  // no valid geometry in this superpixel
      Tablet t =
          backproject_superpixel(masks[k], pooled[k]->depth, pooled[k]->normal, view, kf);
      scene.initial.push_back(make_initial_record(t, int(scene.tablets.size())));
      scene.tablets.push_back(std::move(t));
    }
  }
}

void optimize_epochs(Scene& scene, std::span<const CameraView> views,
                     std::span<const int> keyframes, const Config& config, int epochs,
                     const std::vector<int>& merge_epochs, int& merges_done, Telemetry& telemetry,
                     const std::string& phase) {
  AdamConfig adam = config.adam;
  if (merges_done >= 2) adam.lr_distance = config.schedule.distance_lr_after_second_merge;
  AdamState state;
  state.reset(scene);

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    for (int kf : keyframes) {
      if (scene.tablets.empty()) break;
      const BackwardResult result = backward_render(scene, std::span(&views[kf], 1),
                                                    config.weights, config.raster, config.loss);
      if (!std::isfinite(result.total)) {
        std::ostringstream what;
        what << "non-finite loss in " << phase << " epoch " << epoch << " view " << kf
             << " (pho " << result.losses.photometric << ", ainv " << result.losses.alpha_inverse
             << ", dist " << result.losses.distortion << ", depth " << result.losses.depth
             << ", normal " << result.losses.normal << ")";
        throw Error(what.str());
      }
      adam_step(scene, state, result.grads, adam);
      telemetry.loss_row(result.losses, result.total);
    }
    if (std::find(merge_epochs.begin(), merge_epochs.end(), epoch) != merge_epochs.end()) {
      run_weight_check(scene, views, keyframes, config, telemetry, phase + "_weight_check",
                       epoch);
      run_merge(scene, views, config, telemetry, phase + "_merge", epoch);
      ++merges_done;
      if (merges_done == 2) adam.lr_distance = config.schedule.distance_lr_after_second_merge;
      state.reset(scene);
    }
  }
}

}  // namespace

PlaneSet reconstruct(std::span<const CameraView> input_views, const Config& config,
                     const ReconstructHooks& hooks) {
  if (input_views.empty()) throw Error("reconstruct: no input views");
  Telemetry telemetry{hooks};

  const std::vector<CameraView> working =
      downscale_views(input_views, std::max(16, config.working_long_side));
  const std::span<const CameraView> views(working);

  const std::vector<std::vector<int>> fragments = select_keyframes(views, config.schedule);

  Scene global;
  global.background = config.raster.background;
  std::vector<int> all_keyframes;

  for (size_t fi = 0; fi < fragments.size(); ++fi) {
    const std::vector<int>& fragment = fragments[fi];
    all_keyframes.insert(all_keyframes.end(), fragment.begin(), fragment.end());

    Scene scene;
    scene.background = config.raster.background;
    init_fragment_tablets(scene, views, fragment, config);
    telemetry.merge_row("fragment" + std::to_string(fi) + "_init", 0, scene.tablets.size(), 0);
    if (scene.tablets.empty()) continue;

    // Initial merge straight after initialization.
    run_merge(scene, views, config, telemetry, "fragment" + std::to_string(fi) + "_initial_merge",
              0);

    int merges_done = 0;
    optimize_epochs(scene, views, fragment, config, config.schedule.epochs_separate,
                    config.schedule.merge_epochs, merges_done, telemetry,
                    "fragment" + std::to_string(fi));

    // Fold into the global scene, re-pointing affiliations.
    const int offset = int(global.tablets.size());
    for (InitialTablet rec : scene.initial) {
      if (rec.current_id >= 0) rec.current_id += offset;
      global.initial.push_back(rec);
    }
    for (Tablet& t : scene.tablets) global.tablets.push_back(std::move(t));
  }

  if (global.tablets.empty()) throw Error("reconstruct: initialization produced no tablets");

  // Joint refinement across fragments.
  run_weight_check(global, views, all_keyframes, config, telemetry, "joint_weight_check", 0);
  run_merge(global, views, config, telemetry, "joint_initial_merge", 0);

  std::vector<int> joint_merge_epochs;
  if (config.schedule.joint_merge_interval > 0)
    for (int e = config.schedule.joint_merge_interval; e < config.schedule.epochs_joint;
         e += config.schedule.joint_merge_interval)
      joint_merge_epochs.push_back(e);
  int joint_merges = 2;  // fragments completed their schedules; keep the reduced distance rate
  optimize_epochs(global, views, all_keyframes, config, config.schedule.epochs_joint,
                  joint_merge_epochs, joint_merges, telemetry, "joint");

  run_weight_check(global, views, all_keyframes, config, telemetry, "final_weight_check", 0);
  run_merge(global, views, config, telemetry, "final_merge", 0);

  PlaneSet out;
  out.background = global.background;
  out.planes = std::move(global.tablets);
  return out;
}

void edit_plane_texture(PlaneSet& planes, int instance_id, const Image* new_texture,
                        const std::optional<Vec3>& tint) {
  if (instance_id < 0 || instance_id >= int(planes.planes.size()))
    throw NotFound("no plane with instance id " + std::to_string(instance_id));
  Tablet& t = planes.planes[instance_id];

  if (new_texture && !new_texture->empty()) {
    const int rows = t.tex_rows(), cols = t.tex_cols();
    Grid<Vec3> tex(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        // Bilinear resample of the replacement image onto the tile grid.
        const double sy = (i + 0.5) / rows * new_texture->height - 0.5;
        const double sx = (j + 0.5) / cols * new_texture->width - 0.5;
        const double cy = std::clamp(sy, 0.0, double(new_texture->height - 1));
        const double cx = std::clamp(sx, 0.0, double(new_texture->width - 1));
        const int y0 = std::min(int(cy), std::max(new_texture->height - 2, 0));
        const int x0 = std::min(int(cx), std::max(new_texture->width - 2, 0));
        const int y1 = std::min(y0 + 1, new_texture->height - 1);
        const int x1 = std::min(x0 + 1, new_texture->width - 1);
        const double fy = cy - y0, fx = cx - x0;
        tex.at(i, j) = new_texture->at(y0, x0) * ((1 - fy) * (1 - fx)) +
                       new_texture->at(y0, x1) * ((1 - fy) * fx) +
                       new_texture->at(y1, x0) * (fy * (1 - fx)) +
                       new_texture->at(y1, x1) * (fy * fx);
      }
    t.texture = std::move(tex);
  }
  if (tint) {
    for (Vec3& c : t.texture.data) {
      c = hadamard(c, *tint);
      c = {std::clamp(c.x, 0.0, 1.0), std::clamp(c.y, 0.0, 1.0), std::clamp(c.z, 0.0, 1.0)};
    }
  }
}

Scene as_scene(const PlaneSet& planes) {
  Scene scene;
  scene.background = planes.background;
  scene.tablets = planes.planes;
  return scene;
}

double psnr(const Image& a, const Image& b) {
  double mse = 0;
  for (size_t i = 0; i < a.data.size(); ++i) mse += norm2(a.data[i] - b.data[i]);
  mse /= double(a.data.size()) * 3.0;
  if (mse <= 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace tabletrec
