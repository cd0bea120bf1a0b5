#pragma once

#include <cstdint>
#include <vector>

#include "ltraj/flow.hpp"
#include "ltraj/tracking.hpp"

namespace ltraj {

/// Spatio-temporal sampling volume around a trajectory: width x height
/// pixels per slice, one slice per trajectory step, partitioned into
/// cells_x * cells_y * cells_t cells. Cell vectors are laid out
/// temporal-major: cell = (tcell * cells_y + ycell) * cells_x + xcell.
struct VolumeSpec {
  int width = 32;
  int height = 32;
  int cells_x = 2;
  int cells_y = 2;
  int cells_t = 3;

  int cell_count() const { return cells_x * cells_y * cells_t; }
};

enum class DescriptorKind : uint8_t {
  TSD = 0,
  HOG = 1,
  HOF = 2,
  MBH = 3,
  TSD3D = 4,
  HSF = 5,
  MBH3D = 6,
};

const char* kind_name(DescriptorKind k);

/// Kinds used per pipeline mode, in histogram-layout order.
std::vector<DescriptorKind> kinds_2d();
std::vector<DescriptorKind> kinds_3d();

struct DescriptorBlock {
  DescriptorKind kind;
  std::vector<float> values;
};

/// Dimension of a kind for trajectory length L (steps) under `vs`.
int descriptor_dim(DescriptorKind kind, int L, const VolumeSpec& vs);

/// Trajectory shape: step vectors normalized by the summed step magnitude.
DescriptorBlock tsd(const Trajectory2D& traj);
DescriptorBlock tsd3d(const Trajectory3D& traj);

/// Oriented image-gradient histograms (8 unsigned bins, L2 per cell).
DescriptorBlock hog(const std::vector<FrameGray>& frames,
                    const Trajectory2D& traj, const VolumeSpec& vs);

/// Flow-orientation histograms (8 signed bins + zero-motion bin for
/// magnitudes < 0.25 px/frame, L1 per cell).
DescriptorBlock hof(const std::vector<FlowField2D>& flows,
                    const Trajectory2D& traj, const VolumeSpec& vs);

/// Flow-derivative histograms: the u and v channels each yield 8 unsigned
/// bins per cell (L2), concatenated u-part then v-part.
DescriptorBlock mbh(const std::vector<FlowField2D>& flows,
                    const Trajectory2D& traj, const VolumeSpec& vs);

/// Scene-flow orientation histograms: 8 bins from azimuth quadrant x
/// elevation sign plus a zero-motion bin (|flow| < 1e-3 m), L1 per cell.
/// Quadrant boundaries are rotated 45 degrees so axis-aligned motions fall
/// mid-bin. Invalid pixels are skipped.
DescriptorBlock hsf(const std::vector<SceneFlowField>& flows,
                    const Trajectory3D& traj, const VolumeSpec& vs);

/// Scene-flow spatial-derivative histograms per channel (dX,dY,dZ): 8 signed
/// orientation bins + zero bin (derivative magnitude < 1e-4), L1 per cell.
DescriptorBlock mbh3d(const std::vector<SceneFlowField>& flows,
                      const Trajectory3D& traj, const VolumeSpec& vs);

/// All kinds for one trajectory, in layout order.
std::vector<DescriptorBlock> describe_2d(const std::vector<FrameGray>& frames,
                                         const std::vector<FlowField2D>& flows,
                                         const Trajectory2D& traj,
                                         const VolumeSpec& vs);
std::vector<DescriptorBlock> describe_3d(
    const std::vector<SceneFlowField>& flows, const Trajectory3D& traj,
    const VolumeSpec& vs);

}  // namespace ltraj
