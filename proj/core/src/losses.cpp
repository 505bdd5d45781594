#include "tabletrec/losses.hpp"

#include <cmath>

namespace tabletrec {

double photometric_loss(const Image& rendered, const Image& observed, const GridU8& valid,
                        bool* empty_mask) {
  double sum = 0;
  size_t n = 0;
  for (int y = 0; y < rendered.height; ++y)
    for (int x = 0; x < rendered.width; ++x) {
      if (!valid.at(y, x)) continue;
      sum += norm2(rendered.at(y, x) - observed.at(y, x));
      ++n;
    }
  if (empty_mask) *empty_mask = n == 0;
  return n ? sum / double(n) : 0.0;
}

double alpha_inverse_loss(const LayerStack& stack, const GridU8* restrict_mask) {
  double sum = 0;
  size_t n = 0;
  const int L = stack.layers;
  for (int y = 0; y < stack.height; ++y)
    for (int x = 0; x < stack.width; ++x) {
      if (restrict_mask && !restrict_mask->at(y, x)) continue;
      const size_t base = stack.idx(y, x, 0);
      if (stack.tri[base] < 0) continue;  // uncovered pixels are excluded
      double prod = 1.0;
      for (int l = 0; l < L && stack.tri[base + l] >= 0; ++l) prod *= 1.0 - stack.alpha[base + l];
      sum += prod;
      ++n;
    }
  return n ? sum / double(n) : 0.0;
}

double distortion_loss(const LayerStack& stack, bool use_blending_weights,
                       const GridU8* restrict_mask) {
  double sum = 0;
  size_t n = 0;
  const int L = stack.layers;
  for (int y = 0; y < stack.height; ++y)
    for (int x = 0; x < stack.width; ++x) {
      if (restrict_mask && !restrict_mask->at(y, x)) continue;
      ++n;
      const size_t base = stack.idx(y, x, 0);
      double transmittance = 1.0;
      double prev_w = 0.0;
      Vec3 prev_point{};
      bool have_prev = false;
      for (int l = 0; l < L && stack.tri[base + l] >= 0; ++l) {
        const double a = stack.alpha[base + l];
        if (a > 0) {  // zero-alpha layers are empty and contribute nothing
          const double w = use_blending_weights ? transmittance * a : transmittance;
          if (have_prev) sum += prev_w * w * norm(stack.point[base + l] - prev_point);
          prev_w = w;
          prev_point = stack.point[base + l];
          have_prev = true;
        }
        transmittance *= 1.0 - a;
      }
    }
  return n ? sum / double(n) : 0.0;
}

double depth_loss(const GridF& rendered, const GridF& supervision, const GridU8& valid,
                  bool* empty_mask) {
  double sum = 0;
  size_t n = 0;
  for (int y = 0; y < rendered.height; ++y)
    for (int x = 0; x < rendered.width; ++x) {
      if (!valid.at(y, x)) continue;
      const double d = rendered.at(y, x) - supervision.at(y, x);
      sum += d * d;
      ++n;
    }
  if (empty_mask) *empty_mask = n == 0;
  return n ? sum / double(n) : 0.0;
}

double normal_loss(const Image& rendered, const Image& supervision, const GridU8& valid,
                   bool* empty_mask) {
  double sum = 0;
  size_t n = 0;
  for (int y = 0; y < rendered.height; ++y)
    for (int x = 0; x < rendered.width; ++x) {
      if (!valid.at(y, x)) continue;
      sum += norm2(rendered.at(y, x) - supervision.at(y, x));
      ++n;
    }
  if (empty_mask) *empty_mask = n == 0;
  return n ? sum / double(n) : 0.0;
}

double total_loss(const LossValues& v, const LossWeights& w) {
  return w.photometric * v.photometric + w.alpha_inverse * v.alpha_inverse +
         w.distortion * v.distortion + w.depth * v.depth + w.normal * v.normal;
}

LossValues compute_losses(const RenderOutput& render, const CameraView& view,
                          const LossConfig& config, const GridU8* restrict_mask) {
  LossValues out;
  const int H = render.color.height, W = render.color.width;

  GridU8 photo_mask(H, W, 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      photo_mask.at(y, x) =
          render.valid.at(y, x) && (!restrict_mask || restrict_mask->at(y, x)) ? 1 : 0;
  out.photometric =
      photometric_loss(render.color, view.image, photo_mask, &out.empty_photometric_mask);
  out.alpha_inverse = alpha_inverse_loss(render.stack, restrict_mask);
  out.distortion =
      distortion_loss(render.stack, config.distortion_blending_weights, restrict_mask);

  if (view.has_depth()) {
    GridU8 mask(H, W, 0);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        mask.at(y, x) = photo_mask.at(y, x) && view.depth_supervision.at(y, x) > 0 ? 1 : 0;
    out.depth = depth_loss(render.depth, view.depth_supervision, mask, &out.empty_depth_mask);
  }
  if (view.has_normal()) {
    GridU8 mask(H, W, 0);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        mask.at(y, x) =
            photo_mask.at(y, x) && norm2(view.normal_supervision.at(y, x)) > 0.25 ? 1 : 0;
    out.normal = normal_loss(render.normal, view.normal_supervision, mask, &out.empty_normal_mask);
  }
  return out;
}

}  // namespace tabletrec
