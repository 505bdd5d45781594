#pragma once

#include <functional>
#include <iosfwd>
#include <optional>

#include "tabletrec/config.hpp"
#include "tabletrec/scene.hpp"

namespace tabletrec {

// Final reconstruction: instance id == index, every tablet has positive area.
struct PlaneSet {
  std::vector<Tablet> planes;
  Vec3 background{0, 0, 0};
};

// CSV sinks and event notifications for telemetry; all optional.
struct ReconstructHooks {
  std::ostream* loss_csv = nullptr;   // step, L_pho, L_ainv, L_dist, L_depth, L_normal, total
  std::ostream* merge_csv = nullptr;  // event, pass, set_count, dropped
  std::function<void(const std::string& event, size_t tablet_count)> on_event;
};

// Keyframe selection per pose deltas, grouped into fragments of
// schedule.keyframes_per_fragment (remainder forms a trailing short fragment).
// Fewer than 2 keyframes falls back to a single fragment of all views.
std::vector<std::vector<int>> select_keyframes(std::span<const CameraView> views,
                                               const Schedule& schedule);

// Views resized so the long image side is at most `long_side` (area-averaged
// color, nearest-sample supervision, intrinsics rescaled). No-op when already
// small enough.
std::vector<CameraView> downscale_views(std::span<const CameraView> views, int long_side);

// The full optimize-and-merge loop over all fragments plus joint refinement.
PlaneSet reconstruct(std::span<const CameraView> views, const Config& config,
                     const ReconstructHooks& hooks = {});

// Texture edit of a single plane: replace the tile (resampled to the tile
// resolution) and/or scale per channel. Geometry and alpha are untouched.
// Throws NotFound for an unknown instance id.
void edit_plane_texture(PlaneSet& planes, int instance_id, const Image* new_texture,
                        const std::optional<Vec3>& tint);

// Rendering adapter so callers can render a PlaneSet directly.
Scene as_scene(const PlaneSet& planes);

double psnr(const Image& a, const Image& b);

}  // namespace tabletrec
