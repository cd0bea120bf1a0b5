#include "ltraj/localize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ltraj/fsutil.hpp"

namespace ltraj {

namespace {

double norm_diff(const std::array<double, 3>& a, const std::array<double, 3>& b,
                 int coords) {
  double s = 0;
  for (int c = 0; c < coords; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(s);
}

struct Score {
  double d;
  double mean_s;
  int joint;
  bool operator<(const Score& o) const {
    if (d != o.d) return d < o.d;
    if (mean_s != o.mean_s) return mean_s < o.mean_s;
    return joint < o.joint;
  }
};

// Shared assignment body once trajectories are expressed as 3-wide arrays.
std::vector<int> assign_impl(
    const std::vector<std::vector<std::array<double, 3>>>& tracks,
    const std::vector<int>& start_frames,
    const std::vector<JointTrack>& joints, int coords, double threshold) {
  if (joints.empty())
    throw std::invalid_argument("assign: no joints to cluster around");

  std::vector<int> out;
  out.reserve(tracks.size());
  for (size_t m = 0; m < tracks.size(); ++m) {
    const auto& P = tracks[m];
    const int t0 = start_frames[m];
    Score best{0, 0, -1};
    bool first = true;
    for (const auto& J : joints) {
      if (t0 < 0 || static_cast<size_t>(t0) + P.size() > J.positions.size())
        throw std::invalid_argument("assign: joint track does not cover trajectory");
      std::vector<std::array<double, 3>> Q(J.positions.begin() + t0,
                                           J.positions.begin() + t0 + P.size());
      const double d = traj_joint_distance(P, Q, coords);
      double mean_s = 0;
      for (size_t t = 0; t < P.size(); ++t) mean_s += norm_diff(P[t], Q[t], coords);
      mean_s /= P.size();
      const Score sc{d, mean_s, J.joint_id};
      if (first || sc < best) {
        best = sc;
        first = false;
      }
    }
    out.push_back(best.d <= threshold ? best.joint : kRejected);
  }
  return out;
}

}  // namespace

double traj_joint_distance(const std::vector<std::array<double, 3>>& traj,
                           const std::vector<std::array<double, 3>>& joint,
                           int coords) {
  if (traj.empty() || traj.size() != joint.size())
    throw std::invalid_argument("traj_joint_distance: empty or mismatched overlap");
  const size_t n = traj.size();
  double max_s = 0;
  for (size_t t = 0; t < n; ++t)
    max_s = std::max(max_s, norm_diff(traj[t], joint[t], coords));
  if (n == 1) return 0.0;
  double sum_r = 0;
  for (size_t t = 1; t < n; ++t) {
    double s = 0;
    for (int c = 0; c < coords; ++c) {
      const double dp = traj[t][c] - traj[t - 1][c];
      const double dq = joint[t][c] - joint[t - 1][c];
      s += (dp - dq) * (dp - dq);
    }
    sum_r += std::sqrt(s);
  }
  return max_s * (sum_r / (n - 1));
}

double affinity(double distance) { return std::exp(-distance); }

namespace {

std::vector<JointTrack> joint_tracks(const std::vector<SkeletonFrame>& skeleton,
                                     bool use_3d) {
  if (skeleton.empty()) return {};
  std::map<int, JointTrack> tracks;
  for (size_t f = 0; f < skeleton.size(); ++f) {
    if (skeleton[f].joints.empty())
      throw std::invalid_argument("skeleton frame without joints");
    for (const auto& j : skeleton[f].joints) {
      auto [it, inserted] = tracks.try_emplace(j.id, JointTrack{j.id, {}});
      if (it->second.positions.size() != f)
        throw std::invalid_argument("skeleton joint set varies across frames");
      if (use_3d)
        it->second.positions.push_back({j.X, j.Y, j.Z});
      else
        it->second.positions.push_back({j.x, j.y, 0.0});
    }
  }
  std::vector<JointTrack> out;
  for (auto& [id, tr] : tracks) {
    if (tr.positions.size() != skeleton.size())
      throw std::invalid_argument("skeleton joint set varies across frames");
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace

std::vector<JointTrack> joint_tracks_2d(
    const std::vector<SkeletonFrame>& skeleton) {
  return joint_tracks(skeleton, false);
}

std::vector<JointTrack> joint_tracks_3d(
    const std::vector<SkeletonFrame>& skeleton) {
  return joint_tracks(skeleton, true);
}

std::vector<int> assign_2d(const std::vector<Trajectory2D>& trajectories,
                           const std::vector<JointTrack>& joints,
                           const LocalizeConfig& cfg, double frame_diagonal) {
  if (frame_diagonal <= 0)
    throw std::invalid_argument("assign_2d: non-positive frame diagonal");
  const double inv = 1.0 / frame_diagonal;
  std::vector<std::vector<std::array<double, 3>>> tracks;
  std::vector<int> starts;
  tracks.reserve(trajectories.size());
  for (const auto& tr : trajectories) {
    std::vector<std::array<double, 3>> p;
    p.reserve(tr.points.size());
    for (const auto& q : tr.points) p.push_back({q[0] * inv, q[1] * inv, 0.0});
    tracks.push_back(std::move(p));
    starts.push_back(tr.t0);
  }
  std::vector<JointTrack> scaled = joints;
  for (auto& j : scaled)
    for (auto& q : j.positions) {
      q[0] *= inv;
      q[1] *= inv;
      q[2] = 0.0;
    }
  return assign_impl(tracks, starts, scaled, 2, cfg.distance_threshold);
}

std::vector<int> assign_3d(const std::vector<Trajectory3D>& trajectories,
                           const std::vector<JointTrack>& joints,
                           const LocalizeConfig& cfg) {
  std::vector<std::vector<std::array<double, 3>>> tracks;
  std::vector<int> starts;
  tracks.reserve(trajectories.size());
  for (const auto& tr : trajectories) {
    std::vector<std::array<double, 3>> p(tr.points.begin(), tr.points.end());
    tracks.push_back(std::move(p));
    starts.push_back(tr.t0);
  }
  return assign_impl(tracks, starts, joints, 3, cfg.distance_threshold);
}

std::vector<SkeletonFrame> read_skeleton(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open skeleton: " + path.string());
  std::vector<SkeletonFrame> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    SkeletonFrame f;
    f.frame = j.at("frame").get<int>();
    for (const auto& joint : j.at("joints")) {
      f.joints.push_back({joint.at("id").get<int>(), joint.at("x").get<double>(),
                          joint.at("y").get<double>(), joint.at("X").get<double>(),
                          joint.at("Y").get<double>(), joint.at("Z").get<double>()});
    }
    out.push_back(std::move(f));
  }
  return out;
}

void write_skeleton(const std::filesystem::path& path,
                    const std::vector<SkeletonFrame>& frames) {
  std::ostringstream out;
  for (const auto& f : frames) {
    nlohmann::json j;
    j["frame"] = f.frame;
    auto& joints = j["joints"] = nlohmann::json::array();
    for (const auto& joint : f.joints) {
      joints.push_back({{"id", joint.id},
                        {"x", joint.x},
                        {"y", joint.y},
                        {"X", joint.X},
                        {"Y", joint.Y},
                        {"Z", joint.Z}});
    }
    out << j.dump() << "\n";
  }
  atomic_write(path, out.str());
}

}  // namespace ltraj
