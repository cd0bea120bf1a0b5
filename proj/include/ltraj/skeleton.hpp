#pragma once

#include <filesystem>
#include <vector>

namespace ltraj {

/// One body joint at one frame: pixel coordinates plus 3D camera-space
/// coordinates in meters.
struct SkeletonJoint {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  double X = 0.0;
  double Y = 0.0;
  double Z = 0.0;
};

struct SkeletonFrame {
  int frame = 0;
  std::vector<SkeletonJoint> joints;
};

/// Line-delimited JSON, one object per frame:
/// {"frame":t,"joints":[{"id":j,"x":..,"y":..,"X":..,"Y":..,"Z":..},...]}
std::vector<SkeletonFrame> read_skeleton(const std::filesystem::path& path);
void write_skeleton(const std::filesystem::path& path,
                    const std::vector<SkeletonFrame>& frames);

}  // namespace ltraj
