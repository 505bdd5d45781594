#include "tabletrec/camera.hpp"

#include <algorithm>
#include <cmath>

namespace tabletrec {

bool pose_rotation_valid(const Mat3& R, double tol) {
  const Mat3 should_be_identity = R * R.transposed();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const double want = r == c ? 1.0 : 0.0;
      if (std::fabs(should_be_identity(r, c) - want) > tol) return false;
    }
  return R.determinant() > 0;
}

double relative_translation(const Pose& a, const Pose& b) { return norm(a.t - b.t); }

double relative_rotation_angle(const Pose& a, const Pose& b) {
  const Mat3 rel = a.R.transposed() * b.R;
  const double trace = rel(0, 0) + rel(1, 1) + rel(2, 2);
  const double c = std::clamp((trace - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up) {
  const Vec3 forward = normalized(target - eye);  // camera +z
  Vec3 right = cross(forward, world_up);          // camera +x under the y-down convention
  if (norm(right) < 1e-9) right = cross(forward, Vec3{1, 0, 0});
  right = normalized(right);
  const Vec3 down = cross(forward, right);  // camera +y
  // Columns are the camera axes expressed in world coordinates.
  return {Mat3::from_cols(right, down, forward), eye};
}

}  // namespace tabletrec
