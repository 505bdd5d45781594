#pragma once

#include <array>
#include <span>
#include <vector>

#include "tabletrec/camera.hpp"
#include "tabletrec/grid.hpp"

namespace tabletrec {

// A tablet is a textured, semi-transparent 3D rectangle:
//   center p, orthonormal frame (normal n, up u, right r = n x u),
//   a texture/alpha tile of (2*pixel_range_u) x (2*pixel_range_v) texels,
//   and texel densities ratio_u/ratio_v (texels per world unit).
// The center always satisfies p = camera_center(source_camera) + cam_distance * ray_dir.
struct Frame {
  Vec3 normal, up, right;
};

struct Tablet {
  Vec3 center;
  Vec3 normal;  // unit (may be unnormalized transiently while acting as a parameter)
  Vec3 up;      // unit, orthogonal to normal
  Vec3 right;   // normal x up, kept in sync with frame()

  Grid<Vec3> texture;  // rows follow the up axis, columns the right axis
  GridF alpha;         // same resolution as texture, values in [0,1]

  int pixel_range_u = 1;  // texture half-extent in texels along up
  int pixel_range_v = 1;  // texture half-extent in texels along right
  double ratio_u = 1.0;   // texels per world unit along up
  double ratio_v = 1.0;   // texels per world unit along right

  int source_camera = 0;
  Vec3 ray_dir{0, 0, 1};     // unit direction from the source camera center
  double cam_distance = 1.0;  // learnable distance along ray_dir

  double half_extent_u() const { return pixel_range_u / ratio_u; }
  double half_extent_v() const { return pixel_range_v / ratio_v; }
  int tex_rows() const { return 2 * pixel_range_u; }
  int tex_cols() const { return 2 * pixel_range_v; }

  // Orthonormal right-handed frame rebuilt from (normal, up). All geometry goes
  // through this, so a raw (unnormalized) normal still yields a valid rectangle.
  Frame frame() const;

  // Corner order matches the pseudo-mesh vertex order: (-u,-r), (-u,+r), (+u,+r), (+u,-r).
  std::array<Vec3, 4> corners() const;

  // World point of the texel-grid position (qu, qv), qu in [0, 2*ru], qv in [0, 2*rv].
  Vec3 grid_point(double qu, double qv) const;

  // Allocates texture/alpha to the current pixel range.
  void allocate_tiles(const Vec3& color = {}, double a = 0.0);
};

struct PseudoMesh {
  std::vector<Vec3> vertices;              // 4 per tablet
  std::vector<std::array<int, 3>> faces;   // 2 per tablet: {0,1,2}, {0,2,3} in local indices
  std::vector<Vec2> uv;                    // tile-local texel coords, 4 per tablet:
                                           // x along up in [0, 2*ru], y along right in [0, 2*rv]
  int tablet_of_face(int face) const { return face / 2; }
};

struct Basis {
  Vec3 normal, up, right;
};

// Gram-Schmidt: unit n, u projected orthogonal to n, r = n x u.
// Throws DegenerateBasis when n is near zero or u is near parallel to n.
Basis orthonormalize_basis(const Vec3& n, const Vec3& u);

// Minimal rotation taking n_old to n_new (axis n_old x n_new), applied to u_old.
// The result is re-orthonormalized against n_new. Throws AntiparallelNormals.
Vec3 update_up_vector(const Vec3& n_old, const Vec3& n_new, const Vec3& u_old);

// p = camera_center + d * ray_dir. Throws InvalidDistance for d <= 0.
Vec3 center_on_ray(const Vec3& camera_center, const Vec3& ray_dir, double d);
Vec3 center_on_ray(const CameraView& view, const Vec3& ray_dir, double d);

// Two triangles per tablet, sign-ordered vertices and corner-to-corner uv.
PseudoMesh pseudo_mesh(std::span<const Tablet> tablets);
PseudoMesh pseudo_mesh(const Tablet& tablet);

struct PixelCoord {
  int row = 0, col = 0;
};

// Builds the initial tablet for one superpixel: pooled depth/normal are camera-frame,
// the tablet frame and texture sampling come from `view` (which becomes source_camera
// `view_index`). Throws EmptySuperpixel on an empty mask.
Tablet backproject_superpixel(const std::vector<PixelCoord>& mask, double depth,
                              const Vec3& normal_cam, const CameraView& view, int view_index);

// Re-anchors the center ray on the (possibly different) source camera, preserving center.
void reanchor_ray(Tablet& t, const CameraView& source_view);

}  // namespace tabletrec
