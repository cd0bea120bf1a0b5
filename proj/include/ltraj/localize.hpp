#pragma once

#include <array>
#include <vector>

#include "ltraj/skeleton.hpp"
#include "ltraj/tracking.hpp"

namespace ltraj {

/// One joint's position over every frame of a video, in the coordinate
/// space matching the trajectories being clustered (pixels or meters).
struct JointTrack {
  int joint_id = 0;
  std::vector<std::array<double, 3>> positions;  // [2] unused for 2D tracks
};

constexpr int kRejected = -1;

struct LocalizeConfig {
  /// Maximum accepted trajectory-joint distance. 2D distances are computed
  /// on coordinates normalized by the frame diagonal; 3D distances on
  /// meters.
  double distance_threshold = 0.02;

  static LocalizeConfig defaults_2d() { return {0.02}; }
  static LocalizeConfig defaults_3d() { return {0.05}; }
};

/// Spatio-temporal trajectory-to-joint distance:
///   d = max_t ||p_t - q_t|| * (1/L) * sum_t ||(p_t - p_{t-1}) - (q_t - q_{t-1})||
/// over the trajectory's span. `traj` holds L+1 positions; `joint` holds the
/// matching L+1 positions. `coords` is 2 or 3.
double traj_joint_distance(const std::vector<std::array<double, 3>>& traj,
                           const std::vector<std::array<double, 3>>& joint,
                           int coords);

/// exp(-d); in (0,1].
double affinity(double distance);

/// Joint tracks in pixel / meter space from per-frame skeletons.
/// Joint ids are returned sorted ascending; every frame must list the same
/// joint set.
std::vector<JointTrack> joint_tracks_2d(
    const std::vector<SkeletonFrame>& skeleton);
std::vector<JointTrack> joint_tracks_3d(
    const std::vector<SkeletonFrame>& skeleton);

/// Nearest-joint assignment with threshold rejection. Returns one entry per
/// trajectory: the winning joint id, or kRejected when min distance exceeds
/// the threshold. Ties break by smaller mean spatial distance, then lower
/// joint id. frame_diagonal scales 2D coordinates (pass 1.0 for 3D).
std::vector<int> assign_2d(const std::vector<Trajectory2D>& trajectories,
                           const std::vector<JointTrack>& joints,
                           const LocalizeConfig& cfg, double frame_diagonal);
std::vector<int> assign_3d(const std::vector<Trajectory3D>& trajectories,
                           const std::vector<JointTrack>& joints,
                           const LocalizeConfig& cfg);

}  // namespace ltraj
