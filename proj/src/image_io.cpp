#include "ltraj/image_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include "ltraj/fsutil.hpp"

namespace ltraj {

namespace {

struct PnmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  size_t data_offset = 0;
};

// Parses "P5" headers with whitespace and '#' comments.
PnmHeader parse_pgm_header(const std::string& data, const std::string& what) {
  if (data.size() < 2 || data[0] != 'P' || data[1] != '5')
    throw std::runtime_error(what + ": not a binary PGM");
  size_t pos = 2;
  auto next_int = [&]() -> int {
    while (pos < data.size()) {
      char c = data[pos];
      if (c == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= data.size() || !std::isdigit(static_cast<unsigned char>(data[pos])))
      throw std::runtime_error(what + ": malformed header");
    int v = 0;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos])))
      v = v * 10 + (data[pos++] - '0');
    return v;
  };
  PnmHeader h;
  h.width = next_int();
  h.height = next_int();
  h.maxval = next_int();
  if (pos >= data.size() ||
      !std::isspace(static_cast<unsigned char>(data[pos])))
    throw std::runtime_error(what + ": malformed header");
  h.data_offset = pos + 1;  // single whitespace before raster
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0)
    throw std::runtime_error(what + ": bad dimensions");
  return h;
}

}  // namespace

FrameGray read_pgm8(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const auto h = parse_pgm_header(data, path.string());
  if (h.maxval > 255)
    throw std::runtime_error(path.string() + ": expected 8-bit PGM");
  const size_t n = static_cast<size_t>(h.width) * h.height;
  if (data.size() < h.data_offset + n)
    throw std::runtime_error(path.string() + ": truncated raster");
  FrameGray img(h.width, h.height);
  for (size_t i = 0; i < n; ++i) {
    img.data()[i] = static_cast<float>(
        static_cast<uint8_t>(data[h.data_offset + i]) / double(h.maxval));
  }
  return img;
}

void write_pgm8(const std::filesystem::path& path, const FrameGray& img) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.data().size());
  for (float v : img.data()) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    out.push_back(static_cast<char>(std::lround(c * 255.0)));
  }
  atomic_write(path, out);
}

DepthFrame read_pgm16_depth(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const auto h = parse_pgm_header(data, path.string());
  if (h.maxval < 256 || h.maxval > 65535)
    throw std::runtime_error(path.string() + ": expected 16-bit PGM");
  const size_t n = static_cast<size_t>(h.width) * h.height;
  if (data.size() < h.data_offset + 2 * n)
    throw std::runtime_error(path.string() + ": truncated raster");
  DepthFrame depth(h.width, h.height);
  for (size_t i = 0; i < n; ++i) {
    const uint8_t hi = static_cast<uint8_t>(data[h.data_offset + 2 * i]);
    const uint8_t lo = static_cast<uint8_t>(data[h.data_offset + 2 * i + 1]);
    const unsigned mm = (static_cast<unsigned>(hi) << 8) | lo;
    depth.data()[i] = mm == 0 ? std::numeric_limits<float>::quiet_NaN()
                              : static_cast<float>(mm / 1000.0);
  }
  return depth;
}

void write_pgm16_depth(const std::filesystem::path& path,
                       const DepthFrame& depth) {
  std::string out = "P5\n" + std::to_string(depth.width()) + " " +
                    std::to_string(depth.height()) + "\n65535\n";
  out.reserve(out.size() + 2 * depth.data().size());
  for (float v : depth.data()) {
    unsigned mm = 0;
    if (std::isfinite(v) && v > 0.0f) {
      const long r = std::lround(static_cast<double>(v) * 1000.0);
      mm = static_cast<unsigned>(std::clamp<long>(r, 0, 65535));
    }
    out.push_back(static_cast<char>((mm >> 8) & 0xff));
    out.push_back(static_cast<char>(mm & 0xff));
  }
  atomic_write(path, out);
}

void write_ppm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::array<uint8_t, 3>>& rgb) {
  if (rgb.size() != static_cast<size_t>(width) * height)
    throw std::invalid_argument("write_ppm: pixel count mismatch");
  std::string out = "P6\n" + std::to_string(width) + " " +
                    std::to_string(height) + "\n255\n";
  out.reserve(out.size() + rgb.size() * 3);
  for (const auto& px : rgb)
    for (uint8_t c : px) out.push_back(static_cast<char>(c));
  atomic_write(path, out);
}

}  // namespace ltraj
