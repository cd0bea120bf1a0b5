#include "ltraj/geometry.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ltraj {

CameraIntrinsics CameraIntrinsics::defaults_for(int width, int height) {
  CameraIntrinsics k;
  k.fx = 525.0;
  k.fy = 525.0;
  k.cx = (width - 1) / 2.0;
  k.cy = (height - 1) / 2.0;
  return k;
}

Point3 back_project(const PixelDepth& p, const CameraIntrinsics& k) {
  if (!(p.D > 0.0))
    throw std::invalid_argument("back_project: non-positive depth");
  Point3 q;
  q.X = (p.x - k.cx) * p.D / k.fx;
  q.Y = (p.y - k.cy) * p.D / k.fy;
  q.Z = p.D;
  return q;
}

PixelDepth project(const Point3& q, const CameraIntrinsics& k) {
  if (!(q.Z > 0.0))
    throw std::invalid_argument("project: point behind camera");
  PixelDepth p;
  p.x = q.X * k.fx / q.Z + k.cx;
  p.y = q.Y * k.fy / q.Z + k.cy;
  p.D = q.Z;
  return p;
}

Vec3 scene_flow_from_motion_field(const Vec3& s, const Point3& q,
                                  const CameraIntrinsics& k) {
  if (!(q.Z > 0.0))
    throw std::invalid_argument("scene_flow_from_motion_field: Z <= 0");
  Vec3 d;
  d.x = (q.Z / k.fx) * s.x + (q.X / q.Z) * s.z;
  d.y = (q.Z / k.fy) * s.y + (q.Y / q.Z) * s.z;
  d.z = s.z;
  return d;
}

CameraIntrinsics load_intrinsics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open intrinsics: " + path.string());
  nlohmann::json j;
  in >> j;
  CameraIntrinsics k;
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  if (!(k.fx > 0.0) || !(k.fy > 0.0))
    throw std::runtime_error("intrinsics: focal lengths must be positive");
  return k;
}

void save_intrinsics(const std::filesystem::path& path,
                     const CameraIntrinsics& k) {
  nlohmann::json j;
  j["fx"] = k.fx;
  j["fy"] = k.fy;
  j["cx"] = k.cx;
  j["cy"] = k.cy;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write intrinsics: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace ltraj
