#pragma once

#include <string>
#include <vector>

#include "tabletrec/camera.hpp"
#include "tabletrec/pipeline.hpp"

namespace tabletrec {

struct FrameRecord {
  std::string image_path;
  std::array<double, 16> pose;  // row-major 4x4 world_from_camera
  std::string depth_path;       // optional
  std::string normal_path;      // optional
};

struct SceneManifest {
  Intrinsics intrinsics;
  std::vector<FrameRecord> frames;
};

// Reads `intrinsics.txt` (fx fy cx cy width height) and `manifest.txt` (one
// frame per line: image path, 16 pose floats, optional depth and normal paths).
// Depth: PFM in meters or 16-bit PNG in millimeters. Normals: PFM or 8-bit PNG
// mapped [0,255] -> [-1,1]. Throws LoadError with a description on any problem.
std::vector<CameraView> load_scene(const std::string& dir, SceneManifest* manifest = nullptr);

// Writes a scene directory in the load_scene layout.
void write_scene(const std::string& dir, std::span<const CameraView> views);

// Exports: planes.json (parameters, tile table, cameras), atlas.png (RGBA
// preview), atlas_color.pfm / atlas_alpha.pfm (lossless), mesh.obj/.mtl, and
// points.ply (labeled samples for evaluation).
void export_planes(const PlaneSet& planes, std::span<const CameraView> views,
                   const std::string& dir);

struct PlaneArchive {
  PlaneSet planes;
  std::vector<CameraView> views;  // intrinsics + poses only (no images)
};
PlaneArchive load_planes(const std::string& dir);

// Labeled point cloud as ascii PLY with a per-vertex plane_id property.
void write_labeled_ply(const std::string& path, const std::vector<Vec3>& points,
                       const std::vector<int>& labels);
void read_labeled_ply(const std::string& path, std::vector<Vec3>& points,
                      std::vector<int>& labels);

// Debug dump of render buffers: <prefix>_color.png plus float PFMs for depth,
// normal and opacity.
void dump_render(const struct RenderOutput& render, const std::string& prefix);

}  // namespace tabletrec
