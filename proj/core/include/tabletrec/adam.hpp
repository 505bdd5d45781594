#pragma once

#include "tabletrec/grad.hpp"
#include "tabletrec/scene.hpp"

namespace tabletrec {

struct AdamConfig {
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  double lr_texture = 0.01;
  double lr_alpha = 0.03;
  double lr_normal = 1e-4;
  double lr_distance = 5e-4;  // drops to 2e-4 after the second in-training merge
};

// Bias-corrected first/second moment state, one entry per tablet parameter.
struct AdamState {
  struct TabletState {
    Grid<Vec3> m_texture, v_texture;
    GridF m_alpha, v_alpha;
    Vec3 m_normal{}, v_normal{};
    double m_distance = 0, v_distance = 0;
  };
  std::vector<TabletState> tablets;
  long step = 0;

  void reset(const Scene& scene);
};

// One Adam update. Afterwards alpha is clamped to [0,1], the normal is
// renormalized with the up vector rotated along (the up vector itself is not
// learned), and the center is re-derived from the camera ray.
void adam_step(Scene& scene, AdamState& state, const SceneGrads& grads, const AdamConfig& config);

}  // namespace tabletrec
