#include "tabletrec/grad.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tabletrec/errors.hpp"
#include "tabletrec/texture_atlas.hpp"

namespace tabletrec {

void SceneGrads::init(const Scene& scene) {
  tablets.assign(scene.tablets.size(), {});
  for (size_t i = 0; i < scene.tablets.size(); ++i) {
    const Tablet& t = scene.tablets[i];
    tablets[i].texture = Grid<Vec3>(t.tex_rows(), t.tex_cols(), Vec3{});
    tablets[i].alpha = GridF(t.tex_rows(), t.tex_cols(), 0.0);
  }
}

void SceneGrads::scale(double s) {
  for (TabletGrads& g : tablets) {
    for (Vec3& v : g.texture.data) v *= s;
    for (double& a : g.alpha.data) a *= s;
    g.normal *= s;
    g.distance *= s;
  }
}

namespace {

// Adjoint of c = cross(a, b): da += b x dc, db += dc x a.
inline void cross_backward(const Vec3& a, const Vec3& b, const Vec3& dc, Vec3& da, Vec3& db) {
  da += cross(b, dc);
  db += cross(dc, a);
}

// Adjoint of y = x / |x| given y and |x|: dx += (dy - y * dot(y, dy)) / |x|.
inline Vec3 normalize_backward(const Vec3& y, double len, const Vec3& dy) {
  return (dy - y * dot(y, dy)) / len;
}

// Differentiable geometry chain of one tablet, cached for the backward pass.
struct FrameChain {
  Vec3 n_raw;
  double n_len = 1;
  Vec3 nh;
  Vec3 r_raw;
  double r_len = 1;
  Vec3 rh;
  Vec3 uh;
  Vec3 p;
  std::array<Vec3, 4> v_cam;
};

FrameChain forward_frame(const Tablet& t, const Pose& render_pose) {
  FrameChain f;
  f.n_raw = t.normal;
  f.n_len = norm(f.n_raw);
  f.nh = f.n_raw / f.n_len;
  f.r_raw = cross(f.nh, t.up);
  f.r_len = norm(f.r_raw);
  f.rh = f.r_raw / f.r_len;
  f.uh = cross(f.rh, f.nh);
  f.p = t.center;
  const double a = t.half_extent_u(), b = t.half_extent_v();
  const Vec3 du = f.uh * a, dv = f.rh * b;
  const Vec3 world[4] = {f.p - du - dv, f.p - du + dv, f.p + du + dv, f.p + du - dv};
  for (int i = 0; i < 4; ++i) f.v_cam[i] = render_pose.to_camera(world[i]);
  return f;
}

// Folds camera-space corner cotangents and an extra world-normal cotangent back
// to the raw normal parameter and the camera distance.
void backward_frame(const Tablet& t, const FrameChain& f, const Pose& render_pose,
                    const std::array<Vec3, 4>& dv_cam, const Vec3& d_nh_world, Vec3& d_normal,
                    double& d_distance) {
  static constexpr double sign_u[4] = {-1, -1, 1, 1};
  static constexpr double sign_v[4] = {-1, 1, 1, -1};
  const double a = t.half_extent_u(), b = t.half_extent_v();

  Vec3 dp{}, duh{}, drh{};
  for (int i = 0; i < 4; ++i) {
    const Vec3 dw = render_pose.rotate_to_world(dv_cam[i]);
    dp += dw;
    duh += dw * (sign_u[i] * a);
    drh += dw * (sign_v[i] * b);
  }

  Vec3 dnh = d_nh_world;
  cross_backward(f.rh, f.nh, duh, drh, dnh);  // uh = rh x nh
  const Vec3 dr_raw = normalize_backward(f.rh, f.r_len, drh);
  Vec3 dup_unused{};
  cross_backward(f.nh, t.up, dr_raw, dnh, dup_unused);  // r_raw = nh x up, up is a buffer
  d_normal += normalize_backward(f.nh, f.n_len, dnh);
  d_distance += dot(t.ray_dir, dp);  // p = cam + d * ray
}

// Adjoint of the Moeller-Trumbore solve in ray_triangle().
void ray_triangle_backward(const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c,
                           double dt, double db1, double db2, Vec3& da, Vec3& db, Vec3& dc) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pvec = cross(dir, e2);
  const double det = dot(e1, pvec);
  if (std::fabs(det) < 1e-16) return;
  const double inv = 1.0 / det;
  const Vec3 tvec = -a;
  const Vec3 qvec = cross(tvec, e1);

  Vec3 dqvec = e2 * (dt * inv) + dir * (db2 * inv);
  Vec3 de2 = qvec * (dt * inv);
  double dinv = dt * dot(e2, qvec) + db2 * dot(dir, qvec) + db1 * dot(tvec, pvec);
  Vec3 dpvec = tvec * (db1 * inv);
  Vec3 dtvec = pvec * (db1 * inv);
  Vec3 de1{};
  cross_backward(tvec, e1, dqvec, dtvec, de1);  // qvec = tvec x e1
  const double ddet = -inv * inv * dinv;
  de1 += pvec * ddet;
  dpvec += e1 * ddet;
  de2 += cross(dpvec, dir);  // pvec = dir x e2, dir constant

  da += -dtvec - de1 - de2;
  db += de1;
  dc += de2;
}

struct MaskCounts {
  size_t photo = 0, depth = 0, normal = 0, covered = 0, pixels = 0;
};

}  // namespace

BackwardResult backward_render(const Scene& scene, std::span<const CameraView> views,
                               const LossWeights& weights, const RasterConfig& raster_config,
                               const LossConfig& loss_config, const GridU8* loss_mask) {
  BackwardResult result;
  result.grads.init(scene);
  if (views.empty()) return result;
  if (raster_config.aa == AAMode::naive)
    throw Error("backward_render does not differentiate the naive AA ablation");

  const size_t n_tablets = scene.tablets.size();
  const PseudoMesh mesh = pseudo_mesh(std::span<const Tablet>(scene.tablets));
  const double view_scale = 1.0 / double(views.size());

  for (const CameraView& view : views) {
    // Forward, keeping the raw (pre-AA) samples.
    LayerStack stack = rasterize_peeled(scene.tablets, mesh, view, raster_config);
    sample_atlas(scene.tablets, mesh, stack);
    const std::vector<Vec3> raw_color = stack.color;
    antialias(stack, raster_config.aa);

    RenderOutput render;
    render.color = composite_color(stack, raster_config.background);
    composite_geometry(stack, raster_config.min_opacity, render.depth, render.normal,
                       render.opacity, render.valid);
    render.stack = std::move(stack);
    const LayerStack& st = render.stack;

    const LossValues lv = compute_losses(render, view, loss_config, loss_mask);
    result.losses.photometric += lv.photometric * view_scale;
    result.losses.alpha_inverse += lv.alpha_inverse * view_scale;
    result.losses.distortion += lv.distortion * view_scale;
    result.losses.depth += lv.depth * view_scale;
    result.losses.normal += lv.normal * view_scale;

    const int W = st.width, H = st.height, L = st.layers;

    // Mask populations, mirroring compute_losses.
    MaskCounts counts;
    GridU8 photo_mask(H, W, 0), depth_mask(H, W, 0), normal_mask(H, W, 0);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const bool in_mask = !loss_mask || loss_mask->at(y, x);
        if (!in_mask) continue;
        ++counts.pixels;
        if (st.covered(y, x)) ++counts.covered;
        if (render.valid.at(y, x)) {
          photo_mask.at(y, x) = 1;
          ++counts.photo;
          if (view.has_depth() && view.depth_supervision.at(y, x) > 0) {
            depth_mask.at(y, x) = 1;
            ++counts.depth;
          }
          if (view.has_normal() && norm2(view.normal_supervision.at(y, x)) > 0.25) {
            normal_mask.at(y, x) = 1;
            ++counts.normal;
          }
        }
      }

    // Per-tablet accumulators for this view.
    std::vector<std::array<Vec3, 4>> dv_cam(n_tablets, {Vec3{}, Vec3{}, Vec3{}, Vec3{}});
    std::vector<Vec3> d_nh_world(n_tablets, Vec3{});

    // Camera-frame tablet normals with the per-view flip signs used by the raster.
    std::vector<Vec3> normal_cam(n_tablets);
    for (size_t i = 0; i < n_tablets; ++i)
      normal_cam[i] = view.pose.rotate_to_camera(normalized(scene.tablets[i].normal));

    const double w_pho = weights.photometric, w_ainv = weights.alpha_inverse;
    const double w_dist = weights.distortion, w_dep = weights.depth, w_nor = weights.normal;
    const double eps8 = 1e-8;

    std::vector<double> T(L + 1), dT(L + 1);
    std::vector<Vec3> dc_post(L), dc_raw(L), dp(L), dn(L);
    std::vector<double> dalpha(L), dz(L);

    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (loss_mask && !loss_mask->at(y, x)) continue;
        const size_t base = st.idx(y, x, 0);
        int count = 0;
        while (count < L && st.tri[base + count] >= 0) ++count;

        const bool pho = photo_mask.at(y, x), dep = depth_mask.at(y, x),
                   nor = normal_mask.at(y, x);
        const bool dist_on = w_dist != 0 && count >= 2;
        if (count == 0 || (!pho && !dep && !nor && !dist_on && w_ainv == 0)) continue;

        // Forward per-pixel recap.
        T[0] = 1.0;
        for (int l = 0; l < count; ++l) T[l + 1] = T[l] * (1.0 - st.alpha[base + l]);
        const double T_res = T[count];
        const double A = 1.0 - T_res;

        double d_r = 0;
        Vec3 n_r{}, c_out{};
        for (int l = 0; l < count; ++l) {
          const double w = T[l] * st.alpha[base + l];
          d_r += w * st.z[base + l];
          n_r += st.normal[base + l] * w;
          c_out += st.color[base + l] * w;
        }
        c_out += raster_config.background * T_res;
        const double d_denom = std::max(A, eps8);
        const double n_len = norm(n_r);

        for (int l = 0; l <= count; ++l) dT[l] = 0;
        for (int l = 0; l < count; ++l) {
          dc_post[l] = Vec3{};
          dc_raw[l] = Vec3{};
          dp[l] = Vec3{};
          dn[l] = Vec3{};
          dalpha[l] = 0;
          dz[l] = 0;
        }

        // Photometric.
        if (pho && counts.photo) {
          const Vec3 dc_out =
              (c_out - view.image.at(y, x)) * (2.0 * w_pho * view_scale / double(counts.photo));
          for (int l = 0; l < count; ++l) {
            const double a = st.alpha[base + l];
            dc_post[l] += dc_out * (T[l] * a);
            dalpha[l] += dot(dc_out, st.color[base + l]) * T[l];
            dT[l] += dot(dc_out, st.color[base + l]) * a;
          }
          dT[count] += dot(dc_out, raster_config.background);
        }

        // Alpha inverse: mean of T_res over covered pixels.
        if (w_ainv != 0 && counts.covered) dT[count] += w_ainv * view_scale / double(counts.covered);

        // Depth: d = d_r / max(A, eps).
        if (dep && counts.depth) {
          const double d_norm = d_r / d_denom;
          const double dd_norm = 2.0 * (d_norm - view.depth_supervision.at(y, x)) * w_dep *
                                 view_scale / double(counts.depth);
          const double dd_r = dd_norm / d_denom;
          if (A > eps8) {
            const double dA = -dd_norm * d_r / (d_denom * d_denom);
            dT[count] += -dA;
          }
          for (int l = 0; l < count; ++l) {
            const double a = st.alpha[base + l];
            dz[l] += dd_r * T[l] * a;
            dalpha[l] += dd_r * T[l] * st.z[base + l];
            dT[l] += dd_r * a * st.z[base + l];
          }
        }

        // Normal map: n = n_r / ||n_r||.
        if (nor && counts.normal && n_len > eps8) {
          const Vec3 n_out = n_r / n_len;
          const Vec3 dn_out = (n_out - view.normal_supervision.at(y, x)) *
                              (2.0 * w_nor * view_scale / double(counts.normal));
          const Vec3 dn_r = normalize_backward(n_out, n_len, dn_out);
          for (int l = 0; l < count; ++l) {
            const double a = st.alpha[base + l];
            dn[l] += dn_r * (T[l] * a);
            dalpha[l] += dot(dn_r, st.normal[base + l]) * T[l];
            dT[l] += dot(dn_r, st.normal[base + l]) * a;
          }
        }

        // Distortion over consecutive pairs of layers with alpha > 0 (zero-alpha
        // layers are empty and sit outside the chain).
        if (dist_on && counts.pixels) {
          const double coeff = w_dist * view_scale / double(counts.pixels);
          int prev = -1;
          for (int cur = 0; cur < count; ++cur) {
            if (st.alpha[base + cur] <= 0) continue;
            if (prev >= 0) {
              const int i = prev, j = cur;
              const Vec3 delta = st.point[base + i] - st.point[base + j];
              const double dist = norm(delta);
              if (!loss_config.distortion_blending_weights) {
                dT[i] += coeff * T[j] * dist;
                dT[j] += coeff * T[i] * dist;
                if (dist > 1e-12) {
                  const Vec3 g = delta * (coeff * T[i] * T[j] / dist);
                  dp[i] += g;
                  dp[j] -= g;
                }
              } else {
                const double ai = st.alpha[base + i], aj = st.alpha[base + j];
                const double wi = T[i] * ai, wj = T[j] * aj;
                dT[i] += coeff * ai * wj * dist;
                dalpha[i] += coeff * T[i] * wj * dist;
                dT[j] += coeff * wi * aj * dist;
                dalpha[j] += coeff * wi * T[j] * dist;
                if (dist > 1e-12) {
                  const Vec3 g = delta * (coeff * wi * wj / dist);
                  dp[i] += g;
                  dp[j] -= g;
                }
              }
            }
            prev = cur;
          }
        }

        // Transmittance chain: T_k = prod_{j<k}(1 - alpha_j). Exact also at alpha == 1.
        double prefix = 1.0;
        for (int m = 0; m < count; ++m) {
          double q = 1.0, s = 0.0;
          for (int k = m + 1; k <= count; ++k) {
            s += dT[k] * prefix * q;
            if (k < count) q *= 1.0 - st.alpha[base + k];
          }
          dalpha[m] -= s;
          prefix *= 1.0 - st.alpha[base + m];
        }

        // Anti-aliasing backward (coverage w constant; alpha untouched in tablet mode).
        if (raster_config.aa == AAMode::tablet) {
          for (int l = 0; l < count; ++l) {
            const double w = st.coverage[base + l];
            if (w >= 1.0 - 1e-12) {
              dc_raw[l] += dc_post[l];
              continue;
            }
            const Vec3 c1 = raw_color[base + l];
            const double a1 = st.alpha[base + l];
            Vec3 c2{};
            double a2 = 0;
            const bool has_next = l + 1 < count;
            if (has_next) {
              c2 = raw_color[base + l + 1];
              a2 = st.alpha[base + l + 1];
            }
            const double denom_raw = a1 * w + a2 * (1.0 - w);
            const double denom = std::max(denom_raw, eps8);
            const Vec3 c_aa = (c1 * (a1 * w) + c2 * (a2 * (1.0 - w))) / denom;

            const Vec3 dnum = dc_post[l] / denom;
            const double ddenom = denom_raw > eps8 ? -dot(dc_post[l], c_aa) / denom : 0.0;
            dc_raw[l] += dnum * (a1 * w);
            dalpha[l] += dot(dnum, c1) * w + ddenom * w;
            if (has_next) {
              dc_raw[l + 1] += dnum * (a2 * (1.0 - w));
              dalpha[l + 1] += dot(dnum, c2) * (1.0 - w) + ddenom * (1.0 - w);
            }
          }
        } else {
          for (int l = 0; l < count; ++l) dc_raw[l] += dc_post[l];
        }

        // Per-slot: sampling, intersection, and normal-flip backward.
        const Vec3 ray = view.pixel_ray(x + 0.5, y + 0.5);
        for (int l = 0; l < count; ++l) {
          const size_t s = base + l;
          const int face = st.tri[s];
          const int tablet_id = face / 2;
          const Tablet& t = scene.tablets[tablet_id];
          TabletGrads& tg = result.grads.tablets[tablet_id];

          // Bilinear tile sample backward.
          const auto& fv = mesh.faces[face];
          const double b1v = st.b1[s], b2v = st.b2[s];
          const Vec2 uv = mesh.uv[fv[0]] * (1.0 - b1v - b2v) + mesh.uv[fv[1]] * b1v +
                          mesh.uv[fv[2]] * b2v;
          const int rows = t.tex_rows(), cols = t.tex_cols();
          const double su_raw = uv.x - 0.5, sv_raw = uv.y - 0.5;
          const double su = std::clamp(su_raw, 0.0, double(rows - 1));
          const double sv = std::clamp(sv_raw, 0.0, double(cols - 1));
          const int i0 = std::min(int(su), std::max(rows - 2, 0));
          const int j0 = std::min(int(sv), std::max(cols - 2, 0));
          const int i1 = std::min(i0 + 1, rows - 1);
          const int j1 = std::min(j0 + 1, cols - 1);
          const double fu = su - i0, fv_frac = sv - j0;

          const double w00 = (1 - fu) * (1 - fv_frac), w01 = (1 - fu) * fv_frac;
          const double w10 = fu * (1 - fv_frac), w11 = fu * fv_frac;
          const Vec3& dc = dc_raw[l];
          const double da = dalpha[l];
          tg.texture.at(i0, j0) += dc * w00;
          tg.texture.at(i0, j1) += dc * w01;
          tg.texture.at(i1, j0) += dc * w10;
          tg.texture.at(i1, j1) += dc * w11;
          tg.alpha.at(i0, j0) += da * w00;
          tg.alpha.at(i0, j1) += da * w01;
          tg.alpha.at(i1, j0) += da * w10;
          tg.alpha.at(i1, j1) += da * w11;

          double dsu = dot(dc, (t.texture.at(i1, j0) - t.texture.at(i0, j0)) * (1 - fv_frac) +
                                   (t.texture.at(i1, j1) - t.texture.at(i0, j1)) * fv_frac) +
                       da * ((t.alpha.at(i1, j0) - t.alpha.at(i0, j0)) * (1 - fv_frac) +
                             (t.alpha.at(i1, j1) - t.alpha.at(i0, j1)) * fv_frac);
          double dsv = dot(dc, (t.texture.at(i0, j1) - t.texture.at(i0, j0)) * (1 - fu) +
                                   (t.texture.at(i1, j1) - t.texture.at(i1, j0)) * fu) +
                       da * ((t.alpha.at(i0, j1) - t.alpha.at(i0, j0)) * (1 - fu) +
                             (t.alpha.at(i1, j1) - t.alpha.at(i1, j0)) * fu);
          if (su_raw < 0.0 || su_raw > double(rows - 1)) dsu = 0;  // edge clamp
          if (sv_raw < 0.0 || sv_raw > double(cols - 1)) dsv = 0;

          double db1 = dsu * (mesh.uv[fv[1]].x - mesh.uv[fv[0]].x) +
                       dsv * (mesh.uv[fv[1]].y - mesh.uv[fv[0]].y);
          double db2 = dsu * (mesh.uv[fv[2]].x - mesh.uv[fv[0]].x) +
                       dsv * (mesh.uv[fv[2]].y - mesh.uv[fv[0]].y);

          // Depth and intersection point: point = ray * t_ray.
          const double dt_ray = dz[l] + dot(dp[l], ray);

          // Normal flip sign frozen from the forward raster.
          if (norm2(dn[l]) > 0) {
            const Vec3& nc = normal_cam[tablet_id];
            const double flip = dot(nc, ray) > 0 ? -1.0 : 1.0;
            d_nh_world[tablet_id] += view.pose.rotate_to_world(dn[l]) * flip;
          }

          if (dt_ray != 0 || db1 != 0 || db2 != 0) {
            const int local[3] = {fv[0] - tablet_id * 4, fv[1] - tablet_id * 4,
                                  fv[2] - tablet_id * 4};
            const FrameChain fc = forward_frame(t, view.pose);
            Vec3 da3{}, db3{}, dc3{};
            ray_triangle_backward(ray, fc.v_cam[local[0]], fc.v_cam[local[1]], fc.v_cam[local[2]],
                                  dt_ray, db1, db2, da3, db3, dc3);
            dv_cam[tablet_id][local[0]] += da3;
            dv_cam[tablet_id][local[1]] += db3;
            dv_cam[tablet_id][local[2]] += dc3;
          }
        }
      }
    }

    // Fold the per-tablet geometry cotangents down to (normal, distance).
    for (size_t i = 0; i < n_tablets; ++i) {
      const bool any = norm2(d_nh_world[i]) > 0 || norm2(dv_cam[i][0]) > 0 ||
                       norm2(dv_cam[i][1]) > 0 || norm2(dv_cam[i][2]) > 0 ||
                       norm2(dv_cam[i][3]) > 0;
      if (!any) continue;
      const FrameChain fc = forward_frame(scene.tablets[i], view.pose);
      backward_frame(scene.tablets[i], fc, view.pose, dv_cam[i], d_nh_world[i],
                     result.grads.tablets[i].normal, result.grads.tablets[i].distance);
    }
  }

  result.total = total_loss(result.losses, weights);

  for (size_t i = 0; i < n_tablets; ++i) {
    const TabletGrads& g = result.grads.tablets[i];
    bool ok = finite(g.normal) && std::isfinite(g.distance);
    for (const Vec3& v : g.texture.data)
      if (!finite(v)) ok = false;
    for (double a : g.alpha.data)
      if (!std::isfinite(a)) ok = false;
    if (!ok) throw NonFiniteGradient(int(i));
  }
  return result;
}

namespace {

// Discrete structure within a mask: per-slot face ids, edge flags, and
// distortion-chain membership (alpha > 0) plus the validity byte. Any change
// marks a perturbation as having flipped a discrete decision.
std::vector<int32_t> structure_signature(const RenderOutput& render, const GridU8& mask) {
  std::vector<int32_t> sig;
  const LayerStack& st = render.stack;
  sig.reserve(size_t(st.width) * st.height);
  for (int y = 0; y < st.height; ++y)
    for (int x = 0; x < st.width; ++x) {
      if (!mask.at(y, x)) continue;
      sig.push_back(render.valid.at(y, x));
      for (int l = 0; l < st.layers; ++l) {
        const size_t s = st.idx(y, x, l);
        if (st.tri[s] < 0) break;
        sig.push_back(st.tri[s]);
        const int edge_bit = st.coverage[s] < 1.0 - 1e-12 ? 1 : 0;
        const int chain_bit = st.alpha[s] > 0 ? 2 : 0;
        sig.push_back(-(edge_bit + chain_bit) - 3);
      }
      sig.push_back(-2);
    }
  return sig;
}

GridU8 geometry_fd_mask(const RenderOutput& render) {
  const LayerStack& st = render.stack;
  GridU8 edge(st.height, st.width, 0);
  for (int y = 0; y < st.height; ++y)
    for (int x = 0; x < st.width; ++x)
      for (int l = 0; l < st.layers; ++l) {
        const size_t s = st.idx(y, x, l);
        if (st.tri[s] < 0) break;
        if (st.coverage[s] < 1.0 - 1e-12) {
          edge.at(y, x) = 1;
          break;
        }
      }
  GridU8 mask(st.height, st.width, 1);
  for (int y = 0; y < st.height; ++y)
    for (int x = 0; x < st.width; ++x) {
      if (!edge.at(y, x)) continue;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (mask.in_bounds(y + dy, x + dx)) mask.at(y + dy, x + dx) = 0;
    }
  return mask;
}

double masked_total(const Scene& scene, const CameraView& view, const FdOptions& opt,
                    const GridU8& mask, std::vector<int32_t>* sig) {
  const RenderOutput render = render_view(scene, view, opt.raster);
  if (sig) *sig = structure_signature(render, mask);
  return total_loss(compute_losses(render, view, opt.loss, &mask), opt.weights);
}

}  // namespace

FdReport finite_difference_check(const Scene& scene, const CameraView& view, ParamKind kind,
                                 const FdOptions& options) {
  FdOptions opt = options;
  if (opt.epsilon == 0)
    opt.epsilon = (kind == ParamKind::texture || kind == ParamKind::alpha) ? 1e-3 : 1e-4;
  const double eps = opt.epsilon;

  const RenderOutput base_render = render_view(scene, view, opt.raster);
  const bool geometric = kind == ParamKind::normal || kind == ParamKind::distance;
  const GridU8 mask = geometric
                          ? geometry_fd_mask(base_render)
                          : GridU8(base_render.color.height, base_render.color.width, 1);

  const CameraView* views = &view;
  const BackwardResult analytic =
      backward_render(scene, std::span(views, 1), opt.weights, opt.raster, opt.loss, &mask);
  std::vector<int32_t> base_sig = structure_signature(base_render, mask);

  // Scalar parameter handles: (tablet, texel, channel) with channel 0..2 texture RGB.
  struct Param {
    int tablet, row, col, channel;
    double analytic;
  };
  std::vector<Param> params;
  std::mt19937_64 rng(opt.seed);

  for (size_t i = 0; i < scene.tablets.size(); ++i) {
    const TabletGrads& g = analytic.grads.tablets[i];
    if (kind == ParamKind::normal) {
      for (int c = 0; c < 3; ++c) params.push_back({int(i), 0, 0, c, g.normal[c]});
    } else if (kind == ParamKind::distance) {
      params.push_back({int(i), 0, 0, 0, g.distance});
    } else {
      // Rank texel scalars by |gradient| so the comparison is meaningful, and mix
      // in a couple of random picks.
      struct Scored {
        double mag;
        int row, col, channel;
      };
      std::vector<Scored> scored;
      const int rows = scene.tablets[i].tex_rows(), cols = scene.tablets[i].tex_cols();
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          if (kind == ParamKind::texture) {
            for (int ch = 0; ch < 3; ++ch)
              scored.push_back({std::fabs(g.texture.at(r, c)[ch]), r, c, ch});
          } else {
            scored.push_back({std::fabs(g.alpha.at(r, c)), r, c, 0});
          }
        }
      std::stable_sort(scored.begin(), scored.end(),
                       [](const Scored& a, const Scored& b) { return a.mag > b.mag; });
      const int top = std::min<int>(std::max(opt.max_params_per_tablet - 2, 1),
                                    int(scored.size()));
      for (int k = 0; k < top; ++k)
        params.push_back({int(i), scored[k].row, scored[k].col, scored[k].channel,
                          kind == ParamKind::texture
                              ? g.texture.at(scored[k].row, scored[k].col)[scored[k].channel]
                              : g.alpha.at(scored[k].row, scored[k].col)});
      for (int k = 0; k < 2 && !scored.empty(); ++k) {
        const Scored& pick = scored[rng() % scored.size()];
        params.push_back({int(i), pick.row, pick.col, pick.channel,
                          kind == ParamKind::texture
                              ? g.texture.at(pick.row, pick.col)[pick.channel]
                              : g.alpha.at(pick.row, pick.col)});
      }
    }
  }

  FdReport report;
  Scene work = scene;
  for (const Param& p : params) {
    Tablet& t = work.tablets[p.tablet];
    auto nudge = [&](double delta) {
      switch (kind) {
        case ParamKind::texture:
          t.texture.at(p.row, p.col)[p.channel] += delta;
          break;
        case ParamKind::alpha:
          t.alpha.at(p.row, p.col) += delta;
          break;
        case ParamKind::normal:
          t.normal[p.channel] += delta;
          break;
        case ParamKind::distance:
          t.center += t.ray_dir * delta;  // keep p = cam + d * ray in sync
          t.cam_distance += delta;
          break;
      }
    };

    std::vector<int32_t> sig_plus, sig_minus;
    nudge(eps);
    const double loss_plus = masked_total(work, view, opt, mask, &sig_plus);
    nudge(-2 * eps);
    const double loss_minus = masked_total(work, view, opt, mask, &sig_minus);
    nudge(eps);  // restore

    if (sig_plus != base_sig || sig_minus != base_sig) {
      ++report.skipped_discrete;
      continue;
    }
    const double fd = (loss_plus - loss_minus) / (2 * eps);
    const double rel =
        std::fabs(fd - p.analytic) / std::max({std::fabs(fd), std::fabs(p.analytic), 1e-6});
    report.max_rel_error = std::max(report.max_rel_error, rel);
    ++report.evaluated;
  }
  return report;
}

}  // namespace tabletrec
