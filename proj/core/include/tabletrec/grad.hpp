#pragma once

#include <span>

#include "tabletrec/losses.hpp"
#include "tabletrec/raster.hpp"
#include "tabletrec/scene.hpp"

namespace tabletrec {

// Reverse-mode gradients of the weighted total loss with respect to each
// tablet's texture texels, alpha texels, raw normal vector, and camera distance.
struct TabletGrads {
  Grid<Vec3> texture;
  GridF alpha;
  Vec3 normal{};
  double distance = 0;
};

struct SceneGrads {
  std::vector<TabletGrads> tablets;
  void init(const Scene& scene);
  void scale(double s);
};

struct BackwardResult {
  LossValues losses;  // averaged over the batch
  double total = 0;
  SceneGrads grads;
};

// Renders every view in the batch, evaluates the five losses, and accumulates
// exact gradients through composition, anti-aliasing (coverage weights held
// constant), bilinear sampling, barycentric interpolation, the ray-constrained
// center, and normal normalization. Discrete rasterization decisions (layer
// membership and order, coverage, loss masks) are held fixed.
//
// `loss_mask`, when given, restricts every per-pixel loss to the masked pixels
// (used by the finite-difference harness). Throws NonFiniteGradient.
BackwardResult backward_render(const Scene& scene, std::span<const CameraView> views,
                               const LossWeights& weights, const RasterConfig& raster_config,
                               const LossConfig& loss_config,
                               const GridU8* loss_mask = nullptr);

enum class ParamKind { texture, alpha, normal, distance };

struct FdOptions {
  double epsilon = 0;           // 0 picks the built-in default for the kind
  int max_params_per_tablet = 6;
  uint64_t seed = 7;
  LossWeights weights;
  RasterConfig raster;
  LossConfig loss;
};

struct FdReport {
  double max_rel_error = 0;
  int evaluated = 0;
  int skipped_discrete = 0;  // parameters whose perturbation flipped a discrete decision
};

// Central finite differences of the total loss against the analytic gradients on a
// deterministic sample of parameters of the given kind. Geometry parameters are
// checked on a loss mask that excludes silhouette-edge pixels (coverage weights are
// piecewise in the geometry); texel parameters use the full mask. Parameters whose
// perturbation changes the discrete rasterization structure are skipped and counted.
FdReport finite_difference_check(const Scene& scene, const CameraView& view, ParamKind kind,
                                 const FdOptions& options = {});

}  // namespace tabletrec
