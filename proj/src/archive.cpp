#include "ltraj/archive.hpp"

#include <stdexcept>

#include "ltraj/fsutil.hpp"
#include "ltraj/serialize.hpp"

namespace ltraj {

void write_archive(const std::filesystem::path& path, const VideoArchive& a) {
  if (a.mode != 2 && a.mode != 3)
    throw std::invalid_argument("archive: mode must be 2 or 3");
  const size_t coords = (size_t)(a.L + 1) * a.mode;
  const size_t shadow = (size_t)(a.L + 1) * 2;

  ByteWriter w;
  w.magic("TLAR");
  w.u32(1);
  w.u8((uint8_t)a.mode);
  w.u32((uint32_t)a.L);
  w.u32((uint32_t)a.records.size());
  for (const auto& rec : a.records) {
    if (rec.points.size() != coords)
      throw std::invalid_argument("archive: record point count mismatch");
    if (a.mode == 3 && rec.pixel_track.size() != shadow)
      throw std::invalid_argument("archive: record pixel track mismatch");
    w.i32(rec.t0);
    w.i32(rec.joint);
    for (float v : rec.points) w.f32(v);
    if (a.mode == 3)
      for (float v : rec.pixel_track) w.f32(v);
    w.u8((uint8_t)rec.blocks.size());
    for (const auto& blk : rec.blocks) {
      w.u8((uint8_t)blk.kind);
      w.u32((uint32_t)blk.values.size());
      for (float v : blk.values) w.f32(v);
    }
  }
  atomic_write(path, w.str());
}

VideoArchive read_archive(const std::filesystem::path& path) {
  ByteReader r(read_file(path));
  r.expect_magic("TLAR", "trajectory archive");
  if (r.u32() != 1)
    throw std::runtime_error("trajectory archive: unknown version");
  VideoArchive a;
  a.mode = r.u8();
  if (a.mode != 2 && a.mode != 3)
    throw std::runtime_error("trajectory archive: bad mode");
  a.L = (int)r.u32();
  const uint32_t count = r.u32();
  const size_t coords = (size_t)(a.L + 1) * a.mode;
  const size_t shadow = (size_t)(a.L + 1) * 2;
  a.records.resize(count);
  for (auto& rec : a.records) {
    rec.t0 = r.i32();
    rec.joint = r.i32();
    rec.points.resize(coords);
    for (auto& v : rec.points) v = r.f32();
    if (a.mode == 3) {
      rec.pixel_track.resize(shadow);
      for (auto& v : rec.pixel_track) v = r.f32();
    }
    const uint8_t nblocks = r.u8();
    rec.blocks.resize(nblocks);
    for (auto& blk : rec.blocks) {
      blk.kind = (DescriptorKind)r.u8();
      blk.values.resize(r.u32());
      for (auto& v : blk.values) v = r.f32();
    }
  }
  if (!r.at_end())
    throw std::runtime_error("trajectory archive: trailing bytes");
  return a;
}

}  // namespace ltraj
