#pragma once

#include <string>

#include "tabletrec/pipeline.hpp"

namespace tabletrec {

// Synthetic test scenes with exact depth/normal supervision rendered from
// known planes. Presets: "box" (five-plane room, 20 views at 320x240) and
// "quad" (one fronto-parallel textured plane, 6 views).
struct SynthScene {
  std::vector<CameraView> views;
  PlaneSet gt_planes;
  double scale = 1.0;  // characteristic scene size in meters
};

SynthScene synth_scene(const std::string& preset);

// Writes the scene directory (load_scene layout) plus gt/ with the labeled
// ground-truth point cloud and plane parameters.
void write_synth_scene(const std::string& preset, const std::string& dir);

}  // namespace tabletrec
