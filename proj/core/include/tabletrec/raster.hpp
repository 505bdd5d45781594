#pragma once

#include <span>
#include <vector>

#include "tabletrec/scene.hpp"
#include "tabletrec/tablet.hpp"

namespace tabletrec {

enum class AAMode {
  tablet,  // alpha-weighted color blend, alpha untouched
  naive,   // per-layer coverage blend of both color and alpha (test/ablation path)
  off
};

struct RasterConfig {
  int layers = 13;
  AAMode aa = AAMode::tablet;
  Vec3 background{0, 0, 0};
  double near_clip = 1e-4;
  double min_opacity = 0.05;  // validity threshold on accumulated opacity
};

// Depth-peeled per-pixel layers, strictly depth-sorted (ties broken by triangle id).
// Slot (y, x, l) lives at index ((y*width + x) * layers + l); tri == -1 marks empty.
struct LayerStack {
  int width = 0, height = 0, layers = 0;

  std::vector<int32_t> tri;
  std::vector<double> b1, b2;     // barycentrics of face vertices 1 and 2 (b0 = 1-b1-b2)
  std::vector<double> z;          // camera-space depth of the intersection
  std::vector<Vec3> point;        // camera-space intersection point
  std::vector<Vec3> normal;       // camera-frame tablet normal, flipped toward the camera
  std::vector<Vec3> color;        // sampled from the tablet tile
  std::vector<double> alpha;      // sampled
  std::vector<double> coverage;   // AA pixel coverage of this layer's tablet; 1 off-edge

  size_t idx(int y, int x, int l) const { return (size_t(y) * width + x) * layers + l; }
  int hit_count(int y, int x) const {
    int n = 0;
    while (n < layers && tri[idx(y, x, n)] >= 0) ++n;
    return n;
  }
  bool covered(int y, int x) const { return layers > 0 && tri[idx(y, x, 0)] >= 0; }

  void resize(int h, int w, int l);
};

struct RenderOutput {
  Image color;
  GridF depth;      // expected depth, normalized by accumulated opacity
  Image normal;     // unit camera-frame normals (zero where invalid)
  GridF opacity;    // accumulated opacity A = 1 - prod(1 - alpha)
  GridU8 valid;     // A >= min_opacity
  LayerStack stack;
};

// Ray/triangle intersection (Moeller-Trumbore) against the ray t*dir from the origin.
// Returns false for near-degenerate configurations. Outputs are exact barycentrics
// (b1, b2 for vertices b and c) and the ray parameter t (camera depth when dir.z == 1).
bool ray_triangle(const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c, double& t,
                  double& b1, double& b2);

// Depth peeling of the pseudo mesh: fills tri/b1/b2/z/point/normal/coverage.
LayerStack rasterize_peeled(std::span<const Tablet> tablets, const PseudoMesh& mesh,
                            const CameraView& view, const RasterConfig& config);

// Fills per-layer color/alpha from the tablet tiles (bilinear, edge-clamped).
void sample_atlas(std::span<const Tablet> tablets, const PseudoMesh& mesh, LayerStack& stack);

// Single-sample form of the atlas lookup for a face and barycentrics.
void sample_atlas(std::span<const Tablet> tablets, const PseudoMesh& mesh, int face, double b1,
                  double b2, Vec3& color, double& alpha);

// Applies the silhouette-edge color correction in place. Each edge layer is blended
// against the next layer behind it (or an alpha-0 background); non-edge pixels are
// untouched and alpha is never anti-aliased in tablet mode.
void antialias(LayerStack& stack, AAMode mode);

Image composite_color(const LayerStack& stack, const Vec3& background);

void composite_geometry(const LayerStack& stack, double min_opacity, GridF& depth, Image& normal,
                        GridF& opacity, GridU8& valid);

RenderOutput render_view(const Scene& scene, const CameraView& view, const RasterConfig& config);

// Blending weights T_l * alpha_l for one pixel plus the residual transmittance,
// in layer order; weights.size() == hit_count, residual = prod(1 - alpha).
void layer_weights(const LayerStack& stack, int y, int x, std::vector<double>& weights,
                   double& residual);

}  // namespace tabletrec
