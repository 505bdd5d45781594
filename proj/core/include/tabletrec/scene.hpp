#pragma once

#include <vector>

#include "tabletrec/tablet.hpp"

namespace tabletrec {

// Frozen record of a first-generation tablet. Anchors walk onto the merged
// tablet planes after every merge; color/frame/extents stay as initialized.
struct InitialTablet {
  Vec3 anchor;     // center, re-projected onto the owning tablet after merges
  Vec3 frame_u;    // initial in-plane axes, used for corner projections in merges
  Vec3 frame_r;
  double half_u = 0, half_v = 0;
  double ratio_u = 1, ratio_v = 1;  // texel densities at initialization
  Vec3 mean_color;
  int source_camera = 0;
  int current_id = -1;  // owning current tablet; -1 once retired

  std::array<Vec3, 4> corners() const {
    const Vec3 du = frame_u * half_u, dv = frame_r * half_v;
    return {anchor - du - dv, anchor - du + dv, anchor + du + dv, anchor + du - dv};
  }
};

struct Scene {
  std::vector<Tablet> tablets;
  std::vector<InitialTablet> initial;
  Vec3 background{0, 0, 0};
};

}  // namespace tabletrec
