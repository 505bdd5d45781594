#pragma once

#include "tabletrec/grid.hpp"
#include "tabletrec/vec.hpp"

namespace tabletrec {

struct Intrinsics {
  double fx = 1, fy = 1;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
};

// world_from_camera rigid transform: x_world = R * x_camera + t.
// The camera looks along +z in its own frame; +x right, +y down (image rows).
struct Pose {
  Mat3 R;
  Vec3 t;

  Vec3 to_world(const Vec3& cam) const { return R * cam + t; }
  Vec3 to_camera(const Vec3& world) const { return R.transposed() * (world - t); }
  Vec3 rotate_to_world(const Vec3& cam) const { return R * cam; }
  Vec3 rotate_to_camera(const Vec3& world) const { return R.transposed() * world; }
  Vec3 center() const { return t; }
};

struct CameraView {
  Intrinsics K;
  Pose pose;
  Image image;
  GridF depth_supervision;   // meters, <=0 marks invalid; empty if absent
  Image normal_supervision;  // camera-frame unit vectors; zero marks invalid

  bool has_depth() const { return !depth_supervision.empty(); }
  bool has_normal() const { return !normal_supervision.empty(); }

  // Camera-space direction of the ray through pixel coordinates (px, py),
  // scaled so that z == 1. Pixel (i, j) has center (j + 0.5, i + 0.5).
  Vec3 pixel_ray(double px, double py) const {
    return {(px - K.cx) / K.fx, (py - K.cy) / K.fy, 1.0};
  }

  // Projects a camera-space point (z > 0) to pixel coordinates.
  Vec2 project(const Vec3& cam) const {
    return {K.fx * cam.x / cam.z + K.cx, K.fy * cam.y / cam.z + K.cy};
  }
};

// Checks rotation orthonormality (tolerance 1e-3, det +1). Returns false on failure.
bool pose_rotation_valid(const Mat3& R, double tol = 1e-3);

// Relative motion between two poses: translation distance and rotation angle (radians).
double relative_translation(const Pose& a, const Pose& b);
double relative_rotation_angle(const Pose& a, const Pose& b);

// Camera pointed from `eye` toward `target`; `world_up` breaks the roll ambiguity.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up = {0, 1, 0});

}  // namespace tabletrec
