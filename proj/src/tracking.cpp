#include "ltraj/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ltraj {

namespace {

// Smaller eigenvalue of the 2x2 gradient autocorrelation over a 3x3 window.
double min_eigenvalue(const FrameGray& f, int x, int y) {
  double a = 0, b = 0, c = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int px = x + dx;
      const int py = y + dy;
      const double gx =
          0.5 * (f.at_clamped(px + 1, py) - f.at_clamped(px - 1, py));
      const double gy =
          0.5 * (f.at_clamped(px, py + 1) - f.at_clamped(px, py - 1));
      a += gx * gx;
      b += gx * gy;
      c += gy * gy;
    }
  }
  const double half_tr = 0.5 * (a + c);
  const double half_diff = 0.5 * (a - c);
  return half_tr - std::sqrt(half_diff * half_diff + b * b);
}

double lower_median(std::vector<float>& v) {
  const size_t k = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[k];
}

bool inside(const Grid<float>& g, double x, double y) {
  return x >= 0.0 && x <= g.width() - 1.0 && y >= 0.0 && y <= g.height() - 1.0;
}

double positional_variance_2d(const std::vector<std::array<double, 2>>& p) {
  double mx = 0, my = 0;
  for (const auto& q : p) {
    mx += q[0];
    my += q[1];
  }
  mx /= p.size();
  my /= p.size();
  double v = 0;
  for (const auto& q : p)
    v += (q[0] - mx) * (q[0] - mx) + (q[1] - my) * (q[1] - my);
  return v / p.size();
}

double positional_variance_3d(const std::vector<std::array<double, 3>>& p) {
  double m[3] = {0, 0, 0};
  for (const auto& q : p)
    for (int i = 0; i < 3; ++i) m[i] += q[i];
  for (double& x : m) x /= p.size();
  double v = 0;
  for (const auto& q : p)
    for (int i = 0; i < 3; ++i) v += (q[i] - m[i]) * (q[i] - m[i]);
  return v / p.size();
}

}  // namespace

std::vector<std::array<double, 2>> sample_points(
    const FrameGray& frame, const TrackerConfig& cfg,
    const std::vector<std::array<double, 2>>& occupied) {
  const int w = frame.width();
  const int h = frame.height();
  Grid<uint8_t> mask(w, h, 0);
  const double r = cfg.grid_step / 2.0;
  for (const auto& p : occupied) {
    const int x0 = std::max(0, (int)std::ceil(p[0] - r));
    const int x1 = std::min(w - 1, (int)std::floor(p[0] + r));
    const int y0 = std::max(0, (int)std::ceil(p[1] - r));
    const int y1 = std::min(h - 1, (int)std::floor(p[1] + r));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) mask.at(x, y) = 1;
  }

  std::vector<std::array<double, 2>> out;
  const int off = cfg.grid_step / 2;
  for (int y = off; y < h; y += cfg.grid_step) {
    for (int x = off; x < w; x += cfg.grid_step) {
      if (mask.at(x, y)) continue;
      if (min_eigenvalue(frame, x, y) < cfg.homogeneity_threshold) continue;
      out.push_back({(double)x, (double)y});
    }
  }
  return out;
}

std::optional<std::array<double, 2>> advect_2d(const std::array<double, 2>& p,
                                               const FlowField2D& flow,
                                               const TrackerConfig& cfg) {
  const int px = (int)std::lround(p[0]);
  const int py = (int)std::lround(p[1]);
  if (!flow.u.in_bounds(px, py)) return std::nullopt;

  const double nx = p[0] + flow.u.at(px, py);
  const double ny = p[1] + flow.v.at(px, py);
  const int cx = (int)std::lround(nx);
  const int cy = (int)std::lround(ny);

  std::vector<float> us, vs;
  const int r = cfg.median_radius;
  us.reserve((2 * r + 1) * (2 * r + 1));
  vs.reserve((2 * r + 1) * (2 * r + 1));
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const int x = cx + dx;
      const int y = cy + dy;
      if (!flow.u.in_bounds(x, y)) continue;
      us.push_back(flow.u.at(x, y));
      vs.push_back(flow.v.at(x, y));
    }
  }
  if (us.empty()) return std::nullopt;
  return std::array<double, 2>{p[0] + lower_median(us),
                               p[1] + lower_median(vs)};
}

std::optional<Point3> advect_3d(const Point3& q, const SceneFlowField& sf,
                                const CameraIntrinsics& k,
                                const TrackerConfig& cfg) {
  if (!(q.Z > 0.0)) return std::nullopt;
  const PixelDepth pp = project(q, k);
  if (!inside(sf.dX, pp.x, pp.y)) return std::nullopt;
  const int cx = (int)std::lround(pp.x);
  const int cy = (int)std::lround(pp.y);

  std::vector<float> xs, ys, zs;
  const int r = cfg.median_radius;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const int x = cx + dx;
      const int y = cy + dy;
      if (!sf.dX.in_bounds(x, y)) continue;
      if (!sf.valid_at(x, y)) continue;
      xs.push_back(sf.dX.at(x, y));
      ys.push_back(sf.dY.at(x, y));
      zs.push_back(sf.dZ.at(x, y));
    }
  }
  if (xs.empty()) return std::nullopt;
  return Point3{q.X + lower_median(xs), q.Y + lower_median(ys),
                q.Z + lower_median(zs)};
}

std::vector<Trajectory2D> track_2d(const std::vector<FlowField2D>& flows,
                                   const std::vector<FrameGray>& frames,
                                   const TrackerConfig& cfg) {
  const int n = (int)frames.size();
  if (n < cfg.L + 1)
    throw std::invalid_argument("track_2d: sequence shorter than L+1 frames");
  if ((int)flows.size() < n - 1)
    throw std::invalid_argument("track_2d: missing flow fields");

  struct Active {
    int t0;
    std::vector<std::array<double, 2>> pts;
  };
  std::vector<Active> active;
  std::vector<Trajectory2D> out;

  for (int t = 0; t < n; ++t) {
    if (t > 0) {
      std::vector<Active> kept;
      kept.reserve(active.size());
      for (auto& a : active) {
        const auto& cur = a.pts.back();
        const auto nx = advect_2d(cur, flows[t - 1], cfg);
        if (!nx) continue;
        const double dx = (*nx)[0] - cur[0];
        const double dy = (*nx)[1] - cur[1];
        if (std::sqrt(dx * dx + dy * dy) > cfg.max_step) continue;
        if (!inside(frames[t], (*nx)[0], (*nx)[1])) continue;
        a.pts.push_back(*nx);
        if ((int)a.pts.size() == cfg.L + 1) {
          if (positional_variance_2d(a.pts) >= cfg.min_variance)
            out.push_back({a.t0, std::move(a.pts)});
        } else {
          kept.push_back(std::move(a));
        }
      }
      active = std::move(kept);
    }
    if (t + cfg.L <= n - 1) {  // a point sampled now can still complete
      std::vector<std::array<double, 2>> occupied;
      occupied.reserve(active.size());
      for (const auto& a : active) occupied.push_back(a.pts.back());
      for (const auto& p : sample_points(frames[t], cfg, occupied))
        active.push_back({t, {p}});
    }
  }
  return out;
}

std::vector<Trajectory3D> track_3d(const std::vector<SceneFlowField>& flows,
                                   const std::vector<FrameGray>& frames,
                                   const std::vector<DepthFrame>& depths,
                                   const CameraIntrinsics& k,
                                   const TrackerConfig& cfg) {
  const int n = (int)frames.size();
  if (n < cfg.L + 1)
    throw std::invalid_argument("track_3d: sequence shorter than L+1 frames");
  if ((int)flows.size() < n - 1 || (int)depths.size() < n)
    throw std::invalid_argument("track_3d: missing fields");

  struct Active {
    int t0;
    std::vector<std::array<double, 3>> pts;
    std::vector<std::array<double, 2>> px;
  };
  std::vector<Active> active;
  std::vector<Trajectory3D> out;

  for (int t = 0; t < n; ++t) {
    if (t > 0) {
      std::vector<Active> kept;
      kept.reserve(active.size());
      for (auto& a : active) {
        const auto& cur = a.pts.back();
        const auto nq =
            advect_3d({cur[0], cur[1], cur[2]}, flows[t - 1], k, cfg);
        if (!nq || !(nq->Z > 0.0)) continue;
        const double dx = nq->X - cur[0];
        const double dy = nq->Y - cur[1];
        const double dz = nq->Z - cur[2];
        if (std::sqrt(dx * dx + dy * dy + dz * dz) > cfg.max_step) continue;
        const PixelDepth pp = project(*nq, k);
        if (!inside(frames[t], pp.x, pp.y)) continue;
        a.pts.push_back({nq->X, nq->Y, nq->Z});
        a.px.push_back({pp.x, pp.y});
        if ((int)a.pts.size() == cfg.L + 1) {
          if (positional_variance_3d(a.pts) >= cfg.min_variance)
            out.push_back({a.t0, std::move(a.pts), std::move(a.px)});
        } else {
          kept.push_back(std::move(a));
        }
      }
      active = std::move(kept);
    }
    if (t + cfg.L <= n - 1) {
      std::vector<std::array<double, 2>> occupied;
      occupied.reserve(active.size());
      for (const auto& a : active) occupied.push_back(a.px.back());
      for (const auto& p : sample_points(frames[t], cfg, occupied)) {
        const float D = depths[t].at((int)p[0], (int)p[1]);
        if (std::isnan(D) || D <= 0.0f) continue;
        const Point3 q = back_project({p[0], p[1], (double)D}, k);
        active.push_back({t, {{q.X, q.Y, q.Z}}, {p}});
      }
    }
  }
  return out;
}

}  // namespace ltraj
