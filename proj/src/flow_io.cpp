#include "ltraj/flow_io.hpp"

#include <stdexcept>

#include "ltraj/fsutil.hpp"
#include "ltraj/serialize.hpp"

namespace ltraj {

namespace {
constexpr float kFloMagic = 202021.25f;
}

FlowField2D read_flo(const std::filesystem::path& path) {
  ByteReader r(read_file(path));
  if (r.f32() != kFloMagic)
    throw std::runtime_error(path.string() + ": bad .flo magic");
  const int w = r.i32();
  const int h = r.i32();
  if (w <= 0 || h <= 0)
    throw std::runtime_error(path.string() + ": bad .flo dimensions");
  FlowField2D f(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.u.at(x, y) = r.f32();
      f.v.at(x, y) = r.f32();
    }
  }
  return f;
}

void write_flo(const std::filesystem::path& path, const FlowField2D& flow) {
  ByteWriter w;
  w.f32(kFloMagic);
  w.i32(flow.width());
  w.i32(flow.height());
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      w.f32(flow.u.at(x, y));
      w.f32(flow.v.at(x, y));
    }
  }
  atomic_write(path, w.str());
}

SceneFlowField read_sf3(const std::filesystem::path& path) {
  ByteReader r(read_file(path));
  r.expect_magic(std::string_view("SF3\0", 4), path.string().c_str());
  const int w = static_cast<int>(r.u32());
  const int h = static_cast<int>(r.u32());
  if (w <= 0 || h <= 0)
    throw std::runtime_error(path.string() + ": bad .sf3 dimensions");
  SceneFlowField sf(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      sf.dX.at(x, y) = r.f32();
      sf.dY.at(x, y) = r.f32();
      sf.dZ.at(x, y) = r.f32();
    }
  }
  return sf;
}

void write_sf3(const std::filesystem::path& path, const SceneFlowField& sf) {
  ByteWriter w;
  w.magic(std::string_view("SF3\0", 4));
  w.u32(static_cast<uint32_t>(sf.width()));
  w.u32(static_cast<uint32_t>(sf.height()));
  for (int y = 0; y < sf.height(); ++y) {
    for (int x = 0; x < sf.width(); ++x) {
      w.f32(sf.dX.at(x, y));
      w.f32(sf.dY.at(x, y));
      w.f32(sf.dZ.at(x, y));
    }
  }
  atomic_write(path, w.str());
}

}  // namespace ltraj
