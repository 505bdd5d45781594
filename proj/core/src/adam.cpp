#include "tabletrec/adam.hpp"

#include <algorithm>
#include <cmath>

#include "tabletrec/errors.hpp"

namespace tabletrec {

void AdamState::reset(const Scene& scene) {
  step = 0;
  tablets.assign(scene.tablets.size(), {});
  for (size_t i = 0; i < scene.tablets.size(); ++i) {
    const Tablet& t = scene.tablets[i];
    tablets[i].m_texture = Grid<Vec3>(t.tex_rows(), t.tex_cols(), Vec3{});
    tablets[i].v_texture = Grid<Vec3>(t.tex_rows(), t.tex_cols(), Vec3{});
    tablets[i].m_alpha = GridF(t.tex_rows(), t.tex_cols(), 0.0);
    tablets[i].v_alpha = GridF(t.tex_rows(), t.tex_cols(), 0.0);
  }
}

namespace {

inline double adam_update(double g, double& m, double& v, double lr, double bc1, double bc2,
                          const AdamConfig& c) {
  m = c.beta1 * m + (1.0 - c.beta1) * g;
  v = c.beta2 * v + (1.0 - c.beta2) * g * g;
  return lr * (m / bc1) / (std::sqrt(v / bc2) + c.epsilon);
}

}  // namespace

void adam_step(Scene& scene, AdamState& state, const SceneGrads& grads, const AdamConfig& config) {
  if (state.tablets.size() != scene.tablets.size()) state.reset(scene);
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, double(state.step));

  for (size_t i = 0; i < scene.tablets.size(); ++i) {
    Tablet& t = scene.tablets[i];
    const TabletGrads& g = grads.tablets[i];
    AdamState::TabletState& s = state.tablets[i];

    for (size_t k = 0; k < t.texture.data.size(); ++k) {
      for (int ch = 0; ch < 3; ++ch)
        t.texture.data[k][ch] -= adam_update(g.texture.data[k][ch], s.m_texture.data[k][ch],
                                             s.v_texture.data[k][ch], config.lr_texture, bc1, bc2,
                                             config);
      t.alpha.data[k] = std::clamp(
          t.alpha.data[k] - adam_update(g.alpha.data[k], s.m_alpha.data[k], s.v_alpha.data[k],
                                        config.lr_alpha, bc1, bc2, config),
          0.0, 1.0);
    }

    Vec3 n_raw = t.normal;
    for (int ch = 0; ch < 3; ++ch)
      n_raw[ch] -= adam_update(g.normal[ch], s.m_normal[ch], s.v_normal[ch], config.lr_normal,
                               bc1, bc2, config);
    if (norm2(n_raw) > 1e-18) {
      const Vec3 n_old = normalized(t.normal);
      const Vec3 n_new = normalized(n_raw);
      try {
        t.up = update_up_vector(n_old, n_new, t.up);
        t.normal = n_new;
      } catch (const AntiparallelNormals&) {
        // Clamp the update: keep the previous orientation for this step.
      }
      t.right = cross(t.normal, t.up);
    }

    const double d_old = t.cam_distance;
    const double d_new = std::max(
        d_old - adam_update(g.distance, s.m_distance, s.v_distance, config.lr_distance, bc1, bc2,
                            config),
        1e-6);
    t.cam_distance = d_new;
    t.center += t.ray_dir * (d_new - d_old);
  }
}

}  // namespace tabletrec
