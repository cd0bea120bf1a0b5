#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ltraj/descriptors.hpp"

namespace ltraj {

/// One tracked trajectory with its joint assignment and descriptor blocks.
/// Coordinates are stored flat: (L+1)*2 floats in 2D mode, (L+1)*3 in 3D
/// (meters) plus the (L+1)*2 pixel-space shadow.
struct TrajectoryRecord {
  int32_t t0 = 0;
  int32_t joint = -1;  // -1 = rejected by localization
  std::vector<float> points;
  std::vector<float> pixel_track;  // 3D mode only
  std::vector<DescriptorBlock> blocks;
};

/// Per-video container of everything the encoder needs downstream.
struct VideoArchive {
  int mode = 2;  // 2 or 3
  int L = 15;
  std::vector<TrajectoryRecord> records;
};

void write_archive(const std::filesystem::path& path, const VideoArchive& a);
VideoArchive read_archive(const std::filesystem::path& path);

}  // namespace ltraj
