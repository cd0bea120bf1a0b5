#pragma once

#include <array>
#include <optional>
#include <vector>

#include "ltraj/flow.hpp"
#include "ltraj/geometry.hpp"

namespace ltraj {

/// Fixed-length 2D trajectory: L+1 pixel positions starting at frame t0.
struct Trajectory2D {
  int t0 = 0;
  std::vector<std::array<double, 2>> points;
};

/// Fixed-length 3D trajectory with its pixel-space shadow.
struct Trajectory3D {
  int t0 = 0;
  std::vector<std::array<double, 3>> points;        // meters
  std::vector<std::array<double, 2>> pixel_track;   // projections
};

struct TrackerConfig {
  int L = 15;              // trajectory length in steps (L+1 points)
  int grid_step = 5;       // sampling stride, pixels
  int median_radius = 1;   // advection filter window radius
  double homogeneity_threshold = 1e-3;  // min eigenvalue of gradient tensor
  double min_variance = 1.0;  // positional variance floor (px^2 / m^2)
  double max_step = 20.0;     // single-step displacement cap (px / m)

  static TrackerConfig defaults_2d() { return {}; }
  static TrackerConfig defaults_3d() {
    TrackerConfig c;
    c.min_variance = 1e-4;
    c.max_step = 0.5;
    return c;
  }
};

/// Dense grid sampling over well-textured, unoccupied positions.
/// `occupied` lists positions of currently tracked points; candidates within
/// grid_step/2 (Chebyshev) of one are skipped.
std::vector<std::array<double, 2>> sample_points(
    const FrameGray& frame, const TrackerConfig& cfg,
    const std::vector<std::array<double, 2>>& occupied);

/// One advection step: naive estimate from the flow at the nearest pixel,
/// then a component-wise median over the window centered at the estimate.
/// Empty window (fully outside the frame) terminates the trajectory.
std::optional<std::array<double, 2>> advect_2d(const std::array<double, 2>& p,
                                               const FlowField2D& flow,
                                               const TrackerConfig& cfg);

/// 3D advection by the median scene flow around the point's projection.
/// Invalid (sentinel) pixels are excluded; an all-invalid window terminates.
std::optional<Point3> advect_3d(const Point3& q, const SceneFlowField& sf,
                                const CameraIntrinsics& k,
                                const TrackerConfig& cfg);

/// Tracks through a whole sequence. flows[t] maps frame t to t+1; frames are
/// used for (re)sampling. Emitted trajectories have exactly L+1 points and
/// survive the displacement/variance/bounds pruning rules.
std::vector<Trajectory2D> track_2d(const std::vector<FlowField2D>& flows,
                                   const std::vector<FrameGray>& frames,
                                   const TrackerConfig& cfg);

/// 3D variant: sampling positions are lifted through the depth maps; points
/// advance by scene flow. Depth-invalid samples are skipped.
std::vector<Trajectory3D> track_3d(const std::vector<SceneFlowField>& flows,
                                   const std::vector<FrameGray>& frames,
                                   const std::vector<DepthFrame>& depths,
                                   const CameraIntrinsics& k,
                                   const TrackerConfig& cfg);

}  // namespace ltraj
