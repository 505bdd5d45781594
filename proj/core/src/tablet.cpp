#include "tabletrec/tablet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tabletrec/errors.hpp"

namespace tabletrec {

Frame Tablet::frame() const {
  const Vec3 nh = normalized(normal);
  Vec3 raw_right = cross(nh, up);
  if (norm2(raw_right) < 1e-18) raw_right = cross(nh, std::fabs(nh.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0});
  const Vec3 rh = normalized(raw_right);
  return {nh, cross(rh, nh), rh};
}

std::array<Vec3, 4> Tablet::corners() const {
  const Frame f = frame();
  const Vec3 du = f.up * half_extent_u();
  const Vec3 dv = f.right * half_extent_v();
  return {center - du - dv, center - du + dv, center + du + dv, center + du - dv};
}

Vec3 Tablet::grid_point(double qu, double qv) const {
  const Frame f = frame();
  const double ou = (qu - pixel_range_u) / ratio_u;
  const double ov = (qv - pixel_range_v) / ratio_v;
  return center + f.up * ou + f.right * ov;
}

void Tablet::allocate_tiles(const Vec3& color, double a) {
  texture = Grid<Vec3>(tex_rows(), tex_cols(), color);
  alpha = GridF(tex_rows(), tex_cols(), a);
}

Basis orthonormalize_basis(const Vec3& n, const Vec3& u) {
  const double nn = norm(n);
  if (nn < 1e-9) throw DegenerateBasis("normal has near-zero length");
  const Vec3 nh = n / nn;
  const double un = norm(u);
  if (un < 1e-9 || std::fabs(dot(nh, u)) / un > 1.0 - 1e-9)
    throw DegenerateBasis("up vector is parallel to the normal");
  Vec3 uh = u - nh * dot(nh, u);
  uh = normalized(uh);
  return {nh, uh, cross(nh, uh)};
}

Vec3 update_up_vector(const Vec3& n_old, const Vec3& n_new, const Vec3& u_old) {
  const double c = std::clamp(dot(n_old, n_new), -1.0, 1.0);
  if (c <= -1.0 + 1e-6) throw AntiparallelNormals("normals are antiparallel");

  Vec3 axis = cross(n_old, n_new);
  const double s = norm(axis);
  Vec3 u_new = u_old;
  if (s > 1e-12) {
    axis = axis / s;
    const double angle = std::atan2(s, c);
    u_new = axis_angle_rotation(axis, angle) * u_old;
  }
  // Absorb float drift: keep u_new unit and orthogonal to n_new.
  u_new = u_new - n_new * dot(n_new, u_new);
  return normalized(u_new);
}

Vec3 center_on_ray(const Vec3& camera_center, const Vec3& ray_dir, double d) {
  if (d <= 0.0) throw InvalidDistance("cam_distance must be positive");
  return camera_center + ray_dir * d;
}

Vec3 center_on_ray(const CameraView& view, const Vec3& ray_dir, double d) {
  return center_on_ray(view.pose.center(), ray_dir, d);
}

PseudoMesh pseudo_mesh(std::span<const Tablet> tablets) {
  PseudoMesh mesh;
  mesh.vertices.reserve(tablets.size() * 4);
  mesh.faces.reserve(tablets.size() * 2);
  mesh.uv.reserve(tablets.size() * 4);
  int base = 0;
  for (const Tablet& t : tablets) {
    const auto c = t.corners();
    mesh.vertices.insert(mesh.vertices.end(), c.begin(), c.end());
    mesh.faces.push_back({base + 0, base + 1, base + 2});
    mesh.faces.push_back({base + 0, base + 2, base + 3});
    const double hu = 2.0 * t.pixel_range_u, hv = 2.0 * t.pixel_range_v;
    mesh.uv.push_back({0.0, 0.0});
    mesh.uv.push_back({0.0, hv});
    mesh.uv.push_back({hu, hv});
    mesh.uv.push_back({hu, 0.0});
    base += 4;
  }
  return mesh;
}

PseudoMesh pseudo_mesh(const Tablet& tablet) { return pseudo_mesh(std::span(&tablet, 1)); }

void reanchor_ray(Tablet& t, const CameraView& source_view) {
  const Vec3 cam = source_view.pose.center();
  const Vec3 delta = t.center - cam;
  const double d = norm(delta);
  if (d <= 1e-12) throw InvalidDistance("tablet center coincides with the camera center");
  t.ray_dir = delta / d;
  t.cam_distance = d;
}

namespace {

// Intersection of the pixel ray with the tablet plane, in camera space.
Vec3 ray_on_plane(const CameraView& view, double px, double py, const Vec3& plane_point_cam,
                  const Vec3& plane_normal_cam) {
  const Vec3 dir = view.pixel_ray(px, py);
  const double denom = dot(dir, plane_normal_cam);
  const double t = dot(plane_point_cam, plane_normal_cam) / denom;
  return dir * t;
}

}  // namespace

Tablet backproject_superpixel(const std::vector<PixelCoord>& mask, double depth,
                              const Vec3& normal_cam_in, const CameraView& view, int view_index) {
  if (mask.empty()) throw EmptySuperpixel("superpixel mask is empty");
  if (depth <= 0.0) throw InvalidDistance("pooled depth must be positive");

  // Normal must face the camera (z < 0 under the +z viewing direction).
  Vec3 normal_cam = normalized(normal_cam_in);
  if (normal_cam.z > 0) normal_cam = -normal_cam;

  // Center ray through the mask centroid, at the pooled z-depth.
  double mx = 0, my = 0;
  for (const PixelCoord& p : mask) {
    mx += p.col + 0.5;
    my += p.row + 0.5;
  }
  mx /= double(mask.size());
  my /= double(mask.size());
  const Vec3 center_cam = view.pixel_ray(mx, my) * depth;

  Tablet t;
  t.source_camera = view_index;
  t.center = view.pose.to_world(center_cam);
  t.normal = view.pose.rotate_to_world(normal_cam);

  // Up: world +y projected into the plane; camera up when the plane is near-horizontal.
  const Vec3 world_up{0, 1, 0};
  Vec3 u_seed = world_up;
  if (std::fabs(dot(t.normal, world_up)) > 0.99) u_seed = view.pose.rotate_to_world({0, -1, 0});
  const Basis basis = orthonormalize_basis(t.normal, u_seed);
  t.normal = basis.normal;
  t.up = basis.up;
  t.right = basis.right;

  // Texel density: focal length over the pooled distance.
  t.ratio_u = view.K.fx / depth;
  t.ratio_v = view.K.fx / depth;

  // Bounding rectangle: min/max of the mask pixel footprints cast onto the plane axes.
  const Vec3 n_cam = normal_cam;
  const Vec3 u_cam = view.pose.rotate_to_camera(t.up);
  const Vec3 r_cam = view.pose.rotate_to_camera(t.right);
  double min_u = std::numeric_limits<double>::max(), max_u = -min_u;
  double min_v = min_u, max_v = max_u;
  for (const PixelCoord& p : mask) {
    for (int corner = 0; corner < 4; ++corner) {
      const double px = p.col + (corner & 1 ? 1.0 : 0.0);
      const double py = p.row + (corner & 2 ? 1.0 : 0.0);
      const Vec3 q = ray_on_plane(view, px, py, center_cam, n_cam);
      const Vec3 rel = q - center_cam;
      min_u = std::min(min_u, dot(rel, u_cam));
      max_u = std::max(max_u, dot(rel, u_cam));
      min_v = std::min(min_v, dot(rel, r_cam));
      max_v = std::max(max_v, dot(rel, r_cam));
    }
  }

  // Re-center on the rectangle midpoint and snap half-extents up to whole texels.
  const double mid_u = 0.5 * (min_u + max_u), mid_v = 0.5 * (min_v + max_v);
  t.center = t.center + t.up * mid_u + t.right * mid_v;
  t.pixel_range_u = std::max(1, int(std::ceil(t.ratio_u * 0.5 * (max_u - min_u) - 1e-9)));
  t.pixel_range_v = std::max(1, int(std::ceil(t.ratio_v * 0.5 * (max_v - min_v) - 1e-9)));
  reanchor_ray(t, view);

  // Texture from the source image; alpha 1 inside the mask, 0 outside.
  int min_row = mask[0].row, max_row = mask[0].row, min_col = mask[0].col, max_col = mask[0].col;
  for (const PixelCoord& p : mask) {
    min_row = std::min(min_row, p.row);
    max_row = std::max(max_row, p.row);
    min_col = std::min(min_col, p.col);
    max_col = std::max(max_col, p.col);
  }
  GridU8 in_mask(max_row - min_row + 1, max_col - min_col + 1, 0);
  for (const PixelCoord& p : mask) in_mask.at(p.row - min_row, p.col - min_col) = 1;

  t.allocate_tiles();
  for (int i = 0; i < t.tex_rows(); ++i) {
    for (int j = 0; j < t.tex_cols(); ++j) {
      const Vec3 world = t.grid_point(i + 0.5, j + 0.5);
      const Vec3 cam = view.pose.to_camera(world);
      if (cam.z <= 1e-9) continue;
      const Vec2 px = view.project(cam);
      // Bilinear image sample, clamped to the frame.
      const double sx = std::clamp(px.x - 0.5, 0.0, double(view.image.width - 1));
      const double sy = std::clamp(px.y - 0.5, 0.0, double(view.image.height - 1));
      const int x0 = std::min(int(sx), view.image.width - 2 < 0 ? 0 : view.image.width - 2);
      const int y0 = std::min(int(sy), view.image.height - 2 < 0 ? 0 : view.image.height - 2);
      const int x1 = std::min(x0 + 1, view.image.width - 1);
      const int y1 = std::min(y0 + 1, view.image.height - 1);
      const double fx = sx - x0, fy = sy - y0;
      const Vec3 c = view.image.at(y0, x0) * ((1 - fx) * (1 - fy)) +
                     view.image.at(y0, x1) * (fx * (1 - fy)) +
                     view.image.at(y1, x0) * ((1 - fx) * fy) + view.image.at(y1, x1) * (fx * fy);
      t.texture.at(i, j) = c;

      const int nx = std::clamp(int(std::floor(px.x)), 0, view.image.width - 1);
      const int ny = std::clamp(int(std::floor(px.y)), 0, view.image.height - 1);
      const bool inside = ny >= min_row && ny <= max_row && nx >= min_col && nx <= max_col &&
                          in_mask.at(ny - min_row, nx - min_col);
      t.alpha.at(i, j) = inside ? 1.0 : 0.0;
    }
  }
  return t;
}

}  // namespace tabletrec
