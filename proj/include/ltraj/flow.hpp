#pragma once

#include "ltraj/geometry.hpp"
#include "ltraj/grid.hpp"
#include "ltraj/image_io.hpp"

namespace ltraj {

/// Dense 2D motion field, pixels/frame.
struct FlowField2D {
  Grid<float> u;
  Grid<float> v;

  FlowField2D() = default;
  FlowField2D(int width, int height) : u(width, height), v(width, height) {}
  int width() const { return u.width(); }
  int height() const { return u.height(); }
};

/// Dense 3D motion field, meters/frame. Invalid pixels are NaN in all three
/// channels.
struct SceneFlowField {
  Grid<float> dX;
  Grid<float> dY;
  Grid<float> dZ;

  SceneFlowField() = default;
  SceneFlowField(int width, int height)
      : dX(width, height), dY(width, height), dZ(width, height) {}
  int width() const { return dX.width(); }
  int height() const { return dX.height(); }
  bool valid_at(int x, int y) const { return !std::isnan(dX.at(x, y)); }
};

struct FlowConfig {
  int levels = 3;        // coarse-to-fine pyramid depth
  int window_radius = 2; // 5x5 local least-squares window
  int warp_iterations = 3;
};

/// Baseline dense flow: coarse-to-fine local least squares on image
/// gradients with median post-filtering. Deterministic.
FlowField2D estimate_flow_2d(const FrameGray& prev, const FrameGray& next,
                             const FlowConfig& cfg = {});

/// Range flow w(x,y) = nextD(x+u, y+v) - prevD(x,y) with bilinear sampling.
/// NaN where either depth is invalid or the advected sample leaves the frame.
Grid<float> range_flow_from_depth(const DepthFrame& prevD,
                                  const DepthFrame& nextD,
                                  const FlowField2D& flow);

/// Per-pixel composition of 2D flow, range flow and the pinhole model into a
/// scene-flow field. Pixels lacking valid depth or range flow become NaN.
SceneFlowField compose_scene_flow(const FlowField2D& flow,
                                  const Grid<float>& range_flow,
                                  const DepthFrame& prevD,
                                  const CameraIntrinsics& k);

}  // namespace ltraj
