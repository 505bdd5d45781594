#pragma once

#include "tabletrec/raster.hpp"

namespace tabletrec {

struct LossWeights {
  double photometric = 1.0;
  double alpha_inverse = 1.0;
  double distortion = 20.0;
  double depth = 4.0;
  double normal = 4.0;
};

struct LossConfig {
  // The default pairs consecutive transmittances T_i*T_{i+1}; the alternative uses
  // blending weights (T*alpha) instead.
  bool distortion_blending_weights = false;
  double min_opacity = 0.05;
};

struct LossValues {
  double photometric = 0, alpha_inverse = 0, distortion = 0, depth = 0, normal = 0;
  bool empty_photometric_mask = false;
  bool empty_depth_mask = false;
  bool empty_normal_mask = false;
};

// Masked mean over pixels of ||c - c_gt||^2 (squared L2 across channels).
double photometric_loss(const Image& rendered, const Image& observed, const GridU8& valid,
                        bool* empty_mask = nullptr);

// Mean over geometry-covered pixels of prod_l (1 - alpha_l). `restrict_mask`
// (used by the gradient harness) limits the pixels considered.
double alpha_inverse_loss(const LayerStack& stack, const GridU8* restrict_mask = nullptr);

// Mean over pixels of sum_i T_i T_{i+1} ||p_i - p_{i+1}|| on consecutive layers.
double distortion_loss(const LayerStack& stack, bool use_blending_weights = false,
                       const GridU8* restrict_mask = nullptr);

double depth_loss(const GridF& rendered, const GridF& supervision, const GridU8& valid,
                  bool* empty_mask = nullptr);

// Unit-vector MSE: mean over the mask of ||n - n_m||^2.
double normal_loss(const Image& rendered, const Image& supervision, const GridU8& valid,
                   bool* empty_mask = nullptr);

double total_loss(const LossValues& values, const LossWeights& weights);

// Everything at once from a render and its view; masks combine rendered validity
// with available supervision (and `restrict_mask` when given).
LossValues compute_losses(const RenderOutput& render, const CameraView& view,
                          const LossConfig& config, const GridU8* restrict_mask = nullptr);

}  // namespace tabletrec
