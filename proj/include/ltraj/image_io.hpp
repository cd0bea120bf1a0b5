#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ltraj/grid.hpp"

namespace ltraj {

/// Grayscale frame, intensities in [0,1].
using FrameGray = Grid<float>;
/// Depth map in meters; NaN marks invalid pixels.
using DepthFrame = Grid<float>;

/// 8-bit binary PGM (P5). Intensities map [0,1] <-> 0..maxval.
FrameGray read_pgm8(const std::filesystem::path& path);
void write_pgm8(const std::filesystem::path& path, const FrameGray& img);

/// 16-bit binary PGM (P5, big-endian samples per the format), millimeters.
/// 0 in the file <-> NaN in memory (invalid depth).
DepthFrame read_pgm16_depth(const std::filesystem::path& path);
void write_pgm16_depth(const std::filesystem::path& path,
                       const DepthFrame& depth);

/// Binary PPM (P6), 8-bit RGB.
void write_ppm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::array<uint8_t, 3>>& rgb);

}  // namespace ltraj
