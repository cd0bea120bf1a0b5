#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltraj/flow.hpp"
#include "ltraj/geometry.hpp"
#include "ltraj/skeleton.hpp"

namespace ltraj {

/// Per-joint / per-patch motion program; offsets are relative to the anchor.
struct MotionProgram {
  enum class Type { Static, LateralSin, RadialSin, LinearVel, ZigzagX };
  Type type = Type::Static;
  int axis = 0;            // LateralSin: 0 = X, 1 = Y
  double amplitude = 0.0;  // meters
  int period = 16;         // frames per cycle
  double phase = 0.0;      // radians
  Vec3 velocity;           // LinearVel only, meters/frame
};

Vec3 motion_offset(const MotionProgram& m, int frame);

/// Textured square planar patch, perpendicular to the optical axis.
/// joint_id >= 0 ties the patch to a skeleton joint; -1 marks scenery
/// (e.g. a moving background distractor).
struct PatchSpec {
  int joint_id = -1;
  Vec3 anchor;         // patch center at frame 0, meters
  double size = 0.42;  // square side, meters
  /// Outer band painted flat at the background intensity (meters). The band
  /// still moves with the patch; it just carries no texture, which keeps
  /// point sampling away from the patch boundary.
  double texture_margin = 0.0;
  MotionProgram motion;
};

struct JointSpec {
  int id = 0;
  Vec3 anchor;
  MotionProgram motion;
};

struct SynthSpec {
  int width = 160;
  int height = 120;
  CameraIntrinsics intrinsics;
  int frames = 48;
  double background_depth = 4.0;
  double background_intensity = 0.5;
  double texture_freq_min = 3.0;  // cycles/meter
  double texture_freq_max = 5.0;
  std::vector<JointSpec> joints;
  std::vector<PatchSpec> patches;
  std::string label;
};

/// A rendered sequence with exact ground-truth motion fields. Flow fields
/// describe frame t -> t+1 (frames-1 entries each).
struct SynthVideo {
  std::vector<FrameGray> frames;
  std::vector<DepthFrame> depths;
  std::vector<FlowField2D> gt_flow;
  std::vector<SceneFlowField> gt_scene_flow;
  std::vector<SkeletonFrame> skeleton;
  std::string label;
};

/// Renders the sequence deterministically for the given seed (the seed only
/// drives texture synthesis; motion follows the programs exactly).
SynthVideo synth_sequence(const SynthSpec& spec, uint64_t seed);

}  // namespace ltraj
