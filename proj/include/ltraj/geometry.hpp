#pragma once

#include <filesystem>

namespace ltraj {

/// Pinhole camera parameters, in pixels.
struct CameraIntrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Default intrinsics for a given image size: fx=fy=525, principal point
  /// at the image center.
  static CameraIntrinsics defaults_for(int width, int height);
};

/// 3D point in camera coordinates, meters. Z > 0 in front of the camera.
struct Point3 {
  double X = 0.0;
  double Y = 0.0;
  double Z = 0.0;
};

/// 3D displacement, meters.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Continuous pixel position with a depth value in meters.
struct PixelDepth {
  double x = 0.0;
  double y = 0.0;
  double D = 0.0;
};

/// Lifts a pixel with depth to 3D camera coordinates. Throws
/// std::invalid_argument on non-positive depth.
Point3 back_project(const PixelDepth& p, const CameraIntrinsics& k);

/// Projects a 3D point back to pixel coordinates with its depth; exact
/// inverse of back_project. Throws std::invalid_argument when Z <= 0.
PixelDepth project(const Point3& q, const CameraIntrinsics& k);

/// Maps a per-pixel motion sample (u, v in pixels/frame, w range flow in
/// meters/frame) at 3D point q to a 3D displacement in meters. The matrix
/// uses the pre-motion point coordinates.
Vec3 scene_flow_from_motion_field(const Vec3& s, const Point3& q,
                                  const CameraIntrinsics& k);

CameraIntrinsics load_intrinsics(const std::filesystem::path& path);
void save_intrinsics(const std::filesystem::path& path,
                     const CameraIntrinsics& k);

}  // namespace ltraj
