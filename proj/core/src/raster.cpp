#include "tabletrec/raster.hpp"

#include <algorithm>
#include <cmath>

#include "tabletrec/texture_atlas.hpp"

namespace tabletrec {

void LayerStack::resize(int h, int w, int l) {
  width = w;
  height = h;
  layers = l;
  const size_t n = size_t(w) * h * l;
  tri.assign(n, -1);
  b1.assign(n, 0.0);
  b2.assign(n, 0.0);
  z.assign(n, 0.0);
  point.assign(n, Vec3{});
  normal.assign(n, Vec3{});
  color.assign(n, Vec3{});
  alpha.assign(n, 0.0);
  coverage.assign(n, 1.0);
}

bool ray_triangle(const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c, double& t,
                  double& b1, double& b2) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pvec = cross(dir, e2);
  const double det = dot(e1, pvec);
  if (std::fabs(det) < 1e-16) return false;
  const double inv_det = 1.0 / det;
  const Vec3 tvec = -a;  // ray origin is the camera origin
  b1 = dot(tvec, pvec) * inv_det;
  const Vec3 qvec = cross(tvec, e1);
  b2 = dot(dir, qvec) * inv_det;
  t = dot(e2, qvec) * inv_det;
  return true;
}

namespace {

struct ClipVertex {
  Vec3 cam;
};

// Sutherland-Hodgman against z >= near. Writes up to n+1 vertices.
int clip_near_plane(const ClipVertex* in, int n, double near, ClipVertex* out) {
  int m = 0;
  for (int i = 0; i < n; ++i) {
    const ClipVertex& cur = in[i];
    const ClipVertex& nxt = in[(i + 1) % n];
    const bool cur_in = cur.cam.z >= near;
    const bool nxt_in = nxt.cam.z >= near;
    if (cur_in) out[m++] = cur;
    if (cur_in != nxt_in) {
      const double s = (near - cur.cam.z) / (nxt.cam.z - cur.cam.z);
      out[m++] = {cur.cam + (nxt.cam - cur.cam) * s};
    }
  }
  return m;
}

// Shared-edge tie rule; exactly one of d and -d is accepted.
bool accepts_tie(double dx, double dy) { return dy > 0 || (dy == 0 && dx < 0); }

struct EdgeFn {
  double a, b, c;  // E(p) = a*p.x + b*p.y + c
  bool tie;
  double eval(double x, double y) const { return a * x + b * y + c; }
};

EdgeFn make_edge(const Vec2& from, const Vec2& to, double orient_sign) {
  const double dx = (to.x - from.x) * orient_sign;
  const double dy = (to.y - from.y) * orient_sign;
  EdgeFn e;
  e.a = -dy;
  e.b = dx;
  e.c = dy * from.x - dx * from.y;
  e.tie = accepts_tie(dx, dy);
  return e;
}

// Visits every grid cell crossed by the segment, clamped to [0,w)x[0,h).
template <class Fn>
void walk_segment_cells(Vec2 p0, Vec2 p1, int w, int h, Fn&& visit) {
  if (p0.x > p1.x) std::swap(p0, p1);
  const double dx = p1.x - p0.x;
  const int col0 = std::max(int(std::floor(p0.x)), 0);
  const int col1 = std::min(int(std::floor(p1.x)), w - 1);
  for (int cx = col0; cx <= col1; ++cx) {
    double y_lo, y_hi;
    if (dx < 1e-300) {  // vertical segment: one column, full row span
      y_lo = std::min(p0.y, p1.y);
      y_hi = std::max(p0.y, p1.y);
    } else {
      const double t0 = std::clamp((cx - p0.x) / dx, 0.0, 1.0);
      const double t1 = std::clamp((cx + 1 - p0.x) / dx, 0.0, 1.0);
      const double ya = p0.y + t0 * (p1.y - p0.y);
      const double yb = p0.y + t1 * (p1.y - p0.y);
      y_lo = std::min(ya, yb);
      y_hi = std::max(ya, yb);
    }
    int row0 = std::max(int(std::floor(y_lo)), 0);
    int row1 = std::min(int(std::floor(y_hi)), h - 1);
    for (int cy = row0; cy <= row1; ++cy) visit(cx, cy);
  }
}

// Area of the pixel square [x,x+1]x[y,y+1] covered by the convex screen quad.
double quad_pixel_coverage(const Vec2 quad[4], double orient_sign, int x, int y) {
  Vec2 poly[12] = {{double(x), double(y)},
                   {double(x + 1), double(y)},
                   {double(x + 1), double(y + 1)},
                   {double(x), double(y + 1)}};
  int n = 4;
  Vec2 tmp[12];
  for (int e = 0; e < 4 && n > 0; ++e) {
    const Vec2& qa = quad[e];
    const Vec2& qb = quad[(e + 1) % 4];
    const Vec2 d{(qb.x - qa.x) * orient_sign, (qb.y - qa.y) * orient_sign};
    int m = 0;
    for (int i = 0; i < n; ++i) {
      const Vec2& cur = poly[i];
      const Vec2& nxt = poly[(i + 1) % n];
      const double ec = cross2(d, cur - qa);
      const double en = cross2(d, nxt - qa);
      if (ec >= 0) tmp[m++] = cur;
      if ((ec >= 0) != (en >= 0)) {
        const double s = ec / (ec - en);
        tmp[m++] = cur + (nxt - cur) * s;
      }
    }
    n = m;
    std::copy(tmp, tmp + n, poly);
  }
  double area2 = 0;
  for (int i = 0; i < n; ++i) area2 += cross2(poly[i], poly[(i + 1) % n]);
  return std::clamp(std::fabs(area2) * 0.5, 0.0, 1.0);
}

struct PixelInserter {
  LayerStack& stack;
  std::vector<int16_t>& counts;

  void insert(int yx, double depth, int face, double bb1, double bb2) {
    const int L = stack.layers;
    const size_t base = size_t(yx) * L;
    int count = counts[yx];
    int pos = 0;
    while (pos < count &&
           (stack.z[base + pos] < depth ||
            (stack.z[base + pos] == depth && stack.tri[base + pos] < face)))
      ++pos;
    if (pos >= L) return;
    const int last = std::min(count, L - 1);
    for (int i = last; i > pos; --i) {
      const size_t d = base + i, s = base + i - 1;
      stack.tri[d] = stack.tri[s];
      stack.b1[d] = stack.b1[s];
      stack.b2[d] = stack.b2[s];
      stack.z[d] = stack.z[s];
    }
    stack.tri[base + pos] = face;
    stack.b1[base + pos] = bb1;
    stack.b2[base + pos] = bb2;
    stack.z[base + pos] = depth;
    counts[yx] = int16_t(std::min(count + 1, L));
  }
};

}  // namespace

LayerStack rasterize_peeled(std::span<const Tablet> tablets, const PseudoMesh& mesh,
                            const CameraView& view, const RasterConfig& config) {
  LayerStack stack;
  stack.resize(view.K.height, view.K.width, std::max(config.layers, 1));
  const int W = stack.width, H = stack.height;
  std::vector<int16_t> counts(size_t(W) * H, 0);
  PixelInserter inserter{stack, counts};

  // Vertices in camera space, shared across faces.
  std::vector<Vec3> cam(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i) cam[i] = view.pose.to_camera(mesh.vertices[i]);

  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    const Vec3& a = cam[face[0]];
    const Vec3& b = cam[face[1]];
    const Vec3& c = cam[face[2]];
    if (a.z < config.near_clip || b.z < config.near_clip || c.z < config.near_clip) {
      if (a.z < config.near_clip && b.z < config.near_clip && c.z < config.near_clip) continue;
    }

    ClipVertex tri_poly[3] = {{a}, {b}, {c}};
    ClipVertex clipped[5];
    const int n = clip_near_plane(tri_poly, 3, config.near_clip, clipped);
    if (n < 3) continue;

    Vec2 screen[5];
    for (int i = 0; i < n; ++i) screen[i] = view.project(clipped[i].cam);

    for (int k = 1; k + 1 < n; ++k) {
      const Vec2 s0 = screen[0], s1 = screen[k], s2 = screen[k + 1];
      const double orient = cross2(s1 - s0, s2 - s0);
      if (orient == 0) continue;
      const double sign = orient > 0 ? 1.0 : -1.0;
      const EdgeFn edges[3] = {make_edge(s0, s1, sign), make_edge(s1, s2, sign),
                               make_edge(s2, s0, sign)};

      const double min_x = std::min({s0.x, s1.x, s2.x});
      const double max_x = std::max({s0.x, s1.x, s2.x});
      const double min_y = std::min({s0.y, s1.y, s2.y});
      const double max_y = std::max({s0.y, s1.y, s2.y});
      const int x0 = std::max(int(std::ceil(min_x - 0.5)), 0);
      const int x1 = std::min(int(std::floor(max_x - 0.5)), W - 1);
      const int y0 = std::max(int(std::ceil(min_y - 0.5)), 0);
      const int y1 = std::min(int(std::floor(max_y - 0.5)), H - 1);

      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double px = x + 0.5, py = y + 0.5;
          bool inside = true;
          for (const EdgeFn& e : edges) {
            const double v = e.eval(px, py);
            if (v < 0 || (v == 0 && !e.tie)) {
              inside = false;
              break;
            }
          }
          if (!inside) continue;
          const Vec3 ray = view.pixel_ray(px, py);
          double t, w1, w2;
          if (!ray_triangle(ray, a, b, c, t, w1, w2)) continue;
          if (t < config.near_clip) continue;
          inserter.insert(y * W + x, t, int(f), w1, w2);
        }
      }
    }
  }

  // Camera-frame tablet normals (renormalized at use), flipped per pixel.
  std::vector<Vec3> normal_cam(tablets.size());
  for (size_t i = 0; i < tablets.size(); ++i)
    normal_cam[i] = view.pose.rotate_to_camera(normalized(tablets[i].normal));

  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const Vec3 ray = view.pixel_ray(x + 0.5, y + 0.5);
      const size_t base = stack.idx(y, x, 0);
      const int count = counts[size_t(y) * W + x];
      for (int l = 0; l < count; ++l) {
        const size_t s = base + l;
        stack.point[s] = ray * stack.z[s];
        const Vec3& n = normal_cam[stack.tri[s] / 2];
        stack.normal[s] = dot(n, ray) > 0 ? -n : n;
      }
    }
  }

  // Silhouette coverage: walk every projected rectangle edge and measure the
  // pixel-square overlap of the quad wherever that tablet owns a layer.
  for (size_t tt = 0; tt < tablets.size(); ++tt) {
    const size_t vb = tt * 4;
    bool in_front = true;
    for (int i = 0; i < 4; ++i) in_front = in_front && cam[vb + i].z >= config.near_clip;
    if (!in_front) continue;  // near-crossing tablets keep full coverage

    Vec2 quad[4];
    for (int i = 0; i < 4; ++i) quad[i] = view.project(cam[vb + i]);
    const double orient =
        cross2(quad[1] - quad[0], quad[2] - quad[0]) + cross2(quad[2] - quad[0], quad[3] - quad[0]);
    if (orient == 0) continue;
    const double sign = orient > 0 ? 1.0 : -1.0;

    const int face0 = int(tt) * 2, face1 = face0 + 1;
    for (int e = 0; e < 4; ++e) {
      walk_segment_cells(quad[e], quad[(e + 1) % 4], W, H, [&](int x, int y) {
        const size_t base = stack.idx(y, x, 0);
        for (int l = 0; l < stack.layers; ++l) {
          const int id = stack.tri[base + l];
          if (id < 0) break;
          if (id != face0 && id != face1) continue;
          const double w = quad_pixel_coverage(quad, sign, x, y);
          if (w < 1.0 - 1e-12) stack.coverage[base + l] = w;
          break;
        }
      });
    }
  }
  return stack;
}

void sample_atlas(std::span<const Tablet> tablets, const PseudoMesh& mesh, int face, double b1,
                  double b2, Vec3& color, double& alpha) {
  const auto& fv = mesh.faces[face];
  const Vec2 uv = mesh.uv[fv[0]] * (1.0 - b1 - b2) + mesh.uv[fv[1]] * b1 + mesh.uv[fv[2]] * b2;
  sample_tile(tablets[face / 2], uv.x, uv.y, color, alpha);
}

void sample_atlas(std::span<const Tablet> tablets, const PseudoMesh& mesh, LayerStack& stack) {
  const size_t n = stack.tri.size();
  for (size_t s = 0; s < n; ++s) {
    if (stack.tri[s] < 0) continue;
    sample_atlas(tablets, mesh, stack.tri[s], stack.b1[s], stack.b2[s], stack.color[s],
                 stack.alpha[s]);
  }
}

void antialias(LayerStack& stack, AAMode mode) {
  if (mode == AAMode::off) return;
  struct Patch {
    size_t slot;
    Vec3 color;
    double alpha;
  };
  std::vector<Patch> patches;
  const int L = stack.layers;
  const size_t pixels = size_t(stack.width) * stack.height;
  for (size_t p = 0; p < pixels; ++p) {
    const size_t base = p * L;
    for (int l = 0; l < L; ++l) {
      const size_t s = base + l;
      if (stack.tri[s] < 0) break;
      const double w = stack.coverage[s];
      if (w >= 1.0 - 1e-12) continue;
      const Vec3 c1 = stack.color[s];
      const double a1 = stack.alpha[s];
      Vec3 c2{};
      double a2 = 0.0;
      if (l + 1 < L && stack.tri[s + 1] >= 0) {
        c2 = stack.color[s + 1];
        a2 = stack.alpha[s + 1];
      }
      if (mode == AAMode::tablet) {
        if (a2 == 0.0) continue;  // nothing behind contributes; c1 passes through exactly
        const double denom = std::max(a1 * w + a2 * (1.0 - w), 1e-8);
        const Vec3 c = (c1 * (a1 * w) + c2 * (a2 * (1.0 - w))) / denom;
        patches.push_back({s, c, a1});
      } else {  // naive per-layer blend of both color and alpha
        patches.push_back({s, c1 * w + c2 * (1.0 - w), a1 * w + a2 * (1.0 - w)});
      }
    }
  }
  for (const Patch& patch : patches) {
    stack.color[patch.slot] = patch.color;
    stack.alpha[patch.slot] = patch.alpha;
  }
}

Image composite_color(const LayerStack& stack, const Vec3& background) {
  Image out(stack.height, stack.width, Vec3{});
  const int L = stack.layers;
  for (int y = 0; y < stack.height; ++y)
    for (int x = 0; x < stack.width; ++x) {
      const size_t base = stack.idx(y, x, 0);
      Vec3 c{};
      double transmittance = 1.0;
      for (int l = 0; l < L; ++l) {
        if (stack.tri[base + l] < 0) break;
        const double a = stack.alpha[base + l];
        c += stack.color[base + l] * (transmittance * a);
        transmittance *= 1.0 - a;
      }
      out.at(y, x) = c + background * transmittance;
    }
  return out;
}

void composite_geometry(const LayerStack& stack, double min_opacity, GridF& depth, Image& normal,
                        GridF& opacity, GridU8& valid) {
  depth = GridF(stack.height, stack.width, 0.0);
  normal = Image(stack.height, stack.width, Vec3{});
  opacity = GridF(stack.height, stack.width, 0.0);
  valid = GridU8(stack.height, stack.width, 0);
  const int L = stack.layers;
  const double eps = 1e-8;
  for (int y = 0; y < stack.height; ++y)
    for (int x = 0; x < stack.width; ++x) {
      const size_t base = stack.idx(y, x, 0);
      double d_acc = 0.0, transmittance = 1.0;
      Vec3 n_acc{};
      for (int l = 0; l < L; ++l) {
        if (stack.tri[base + l] < 0) break;
        const double a = stack.alpha[base + l];
        d_acc += transmittance * a * stack.z[base + l];
        n_acc += stack.normal[base + l] * (transmittance * a);
        transmittance *= 1.0 - a;
      }
      const double acc_opacity = 1.0 - transmittance;
      opacity.at(y, x) = acc_opacity;
      depth.at(y, x) = d_acc / std::max(acc_opacity, eps);
      const double nn = norm(n_acc);
      normal.at(y, x) = nn > eps ? n_acc / nn : Vec3{};
      valid.at(y, x) = acc_opacity >= min_opacity ? 1 : 0;
    }
}

RenderOutput render_view(const Scene& scene, const CameraView& view, const RasterConfig& config) {
  RenderOutput out;
  const PseudoMesh mesh = pseudo_mesh(std::span<const Tablet>(scene.tablets));
  out.stack = rasterize_peeled(scene.tablets, mesh, view, config);
  sample_atlas(scene.tablets, mesh, out.stack);
  antialias(out.stack, config.aa);
  out.color = composite_color(out.stack, config.background);
  composite_geometry(out.stack, config.min_opacity, out.depth, out.normal, out.opacity, out.valid);
  return out;
}

void layer_weights(const LayerStack& stack, int y, int x, std::vector<double>& weights,
                   double& residual) {
  weights.clear();
  double transmittance = 1.0;
  const size_t base = stack.idx(y, x, 0);
  for (int l = 0; l < stack.layers; ++l) {
    if (stack.tri[base + l] < 0) break;
    const double a = stack.alpha[base + l];
    weights.push_back(transmittance * a);
    transmittance *= 1.0 - a;
  }
  residual = transmittance;
}

}  // namespace tabletrec
