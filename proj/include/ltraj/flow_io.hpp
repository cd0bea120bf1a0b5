#pragma once

#include <filesystem>

#include "ltraj/flow.hpp"

namespace ltraj {

/// Middlebury .flo: float magic 202021.25, i32 width, i32 height, then
/// interleaved (u,v) float pairs, row-major. All little-endian.
FlowField2D read_flo(const std::filesystem::path& path);
void write_flo(const std::filesystem::path& path, const FlowField2D& flow);

/// Scene-flow file: magic "SF3\0", u32 width, u32 height, then (dX,dY,dZ)
/// float triples, row-major, little-endian. NaN triples mark invalid pixels.
SceneFlowField read_sf3(const std::filesystem::path& path);
void write_sf3(const std::filesystem::path& path, const SceneFlowField& sf);

}  // namespace ltraj
