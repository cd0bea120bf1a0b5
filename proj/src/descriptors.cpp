#include "ltraj/descriptors.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ltraj {

namespace {

constexpr double kPi = std::numbers::pi;

// Accumulates magnitude-weighted votes into per-cell orientation histograms.
struct CellHist {
  const VolumeSpec& vs;
  int L;
  int bins;
  std::vector<float> values;

  CellHist(const VolumeSpec& vs_, int L_, int bins_)
      : vs(vs_), L(L_), bins(bins_),
        values(static_cast<size_t>(vs_.cell_count()) * bins_, 0.0f) {}

  int cell_of(int s, int ix, int iy) const {
    const int xc = ix * vs.cells_x / vs.width;
    const int yc = iy * vs.cells_y / vs.height;
    const int tc = s * vs.cells_t / L;
    return (tc * vs.cells_y + yc) * vs.cells_x + xc;
  }

  void vote(int cell, int bin, double w) {
    values[static_cast<size_t>(cell) * bins + bin] += static_cast<float>(w);
  }

  // Splits a vote between the two nearest orientation-bin centers
  // (centers at k * 2pi/n or k * pi/n for the unsigned case).
  void vote_oriented(int cell, double angle, double span, int nbins,
                     double mag) {
    const double base = span / nbins;
    double a = std::fmod(angle, span);
    if (a < 0) a += span;
    const double fbin = a / base;
    int i0 = static_cast<int>(std::floor(fbin));
    const double frac = fbin - i0;
    i0 %= nbins;
    vote(cell, i0, mag * (1.0 - frac));
    vote(cell, (i0 + 1) % nbins, mag * frac);
  }

  void normalize_l1() {
    for (int c = 0; c < vs.cell_count(); ++c) {
      double s = 0;
      for (int b = 0; b < bins; ++b) s += values[(size_t)c * bins + b];
      if (s > 0)
        for (int b = 0; b < bins; ++b)
          values[(size_t)c * bins + b] = (float)(values[(size_t)c * bins + b] / s);
    }
  }

  void normalize_l2() {
    for (int c = 0; c < vs.cell_count(); ++c) {
      double s = 0;
      for (int b = 0; b < bins; ++b) {
        const double v = values[(size_t)c * bins + b];
        s += v * v;
      }
      if (s > 0) {
        const double inv = 1.0 / std::sqrt(s);
        for (int b = 0; b < bins; ++b)
          values[(size_t)c * bins + b] = (float)(values[(size_t)c * bins + b] * inv);
      }
    }
  }
};

int traj_steps_2d(const Trajectory2D& t) { return (int)t.points.size() - 1; }
int traj_steps_3d(const Trajectory3D& t) { return (int)t.points.size() - 1; }

// Iterates the volume: for slice s and window offset (dx,dy) around the
// trajectory point at that slice, calls fn(s, ix, iy, px, py) where (ix,iy)
// index the window and (px,py) is the integer frame pixel (clamp applied by
// the callers when sampling).
template <typename Fn>
void for_volume(const std::vector<std::array<double, 2>>& track, int L,
                const VolumeSpec& vs, Fn&& fn) {
  for (int s = 0; s < L; ++s) {
    const int cx = (int)std::lround(track[s][0]);
    const int cy = (int)std::lround(track[s][1]);
    for (int iy = 0; iy < vs.height; ++iy) {
      for (int ix = 0; ix < vs.width; ++ix) {
        const int px = cx + ix - vs.width / 2;
        const int py = cy + iy - vs.height / 2;
        fn(s, ix, iy, px, py);
      }
    }
  }
}

DescriptorBlock shape_descriptor(DescriptorKind kind,
                                 const std::vector<double>& flat, int coords) {
  const int steps = (int)flat.size() / coords - 1;
  std::vector<float> out((size_t)steps * coords, 0.0f);
  double total = 0;
  for (int t = 0; t < steps; ++t) {
    double sq = 0;
    for (int c = 0; c < coords; ++c) {
      const double d = flat[(t + 1) * coords + c] - flat[t * coords + c];
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  if (total > 0) {
    for (int t = 0; t < steps; ++t)
      for (int c = 0; c < coords; ++c)
        out[(size_t)t * coords + c] = (float)(
            (flat[(t + 1) * coords + c] - flat[t * coords + c]) / total);
  }
  return {kind, std::move(out)};
}

}  // namespace

const char* kind_name(DescriptorKind k) {
  switch (k) {
    case DescriptorKind::TSD: return "TSD";
    case DescriptorKind::HOG: return "HOG";
    case DescriptorKind::HOF: return "HOF";
    case DescriptorKind::MBH: return "MBH";
    case DescriptorKind::TSD3D: return "TSD3D";
    case DescriptorKind::HSF: return "HSF";
    case DescriptorKind::MBH3D: return "MBH3D";
  }
  return "?";
}

std::vector<DescriptorKind> kinds_2d() {
  return {DescriptorKind::TSD, DescriptorKind::HOG, DescriptorKind::HOF,
          DescriptorKind::MBH};
}
std::vector<DescriptorKind> kinds_3d() {
  return {DescriptorKind::TSD3D, DescriptorKind::HSF, DescriptorKind::MBH3D};
}

int descriptor_dim(DescriptorKind kind, int L, const VolumeSpec& vs) {
  const int cells = vs.cell_count();
  switch (kind) {
    case DescriptorKind::TSD: return 2 * L;
    case DescriptorKind::HOG: return cells * 8;
    case DescriptorKind::HOF: return cells * 9;
    case DescriptorKind::MBH: return 2 * cells * 8;
    case DescriptorKind::TSD3D: return 3 * L;
    case DescriptorKind::HSF: return cells * 9;
    case DescriptorKind::MBH3D: return 3 * cells * 9;
  }
  throw std::invalid_argument("descriptor_dim: unknown kind");
}

DescriptorBlock tsd(const Trajectory2D& traj) {
  std::vector<double> flat;
  for (const auto& p : traj.points) {
    flat.push_back(p[0]);
    flat.push_back(p[1]);
  }
  return shape_descriptor(DescriptorKind::TSD, flat, 2);
}

DescriptorBlock tsd3d(const Trajectory3D& traj) {
  std::vector<double> flat;
  for (const auto& p : traj.points) {
    flat.push_back(p[0]);
    flat.push_back(p[1]);
    flat.push_back(p[2]);
  }
  return shape_descriptor(DescriptorKind::TSD3D, flat, 3);
}

DescriptorBlock hog(const std::vector<FrameGray>& frames,
                    const Trajectory2D& traj, const VolumeSpec& vs) {
  const int L = traj_steps_2d(traj);
  CellHist h(vs, L, 8);
  for_volume(traj.points, L, vs, [&](int s, int ix, int iy, int px, int py) {
    const FrameGray& f = frames[traj.t0 + s];
    const double gx = 0.5 * (f.at_clamped(px + 1, py) - f.at_clamped(px - 1, py));
    const double gy = 0.5 * (f.at_clamped(px, py + 1) - f.at_clamped(px, py - 1));
    const double mag = std::sqrt(gx * gx + gy * gy);
    if (mag <= 0) return;
    h.vote_oriented(h.cell_of(s, ix, iy), std::atan2(gy, gx), kPi, 8, mag);
  });
  h.normalize_l2();
  return {DescriptorKind::HOG, std::move(h.values)};
}

DescriptorBlock hof(const std::vector<FlowField2D>& flows,
                    const Trajectory2D& traj, const VolumeSpec& vs) {
  const int L = traj_steps_2d(traj);
  CellHist h(vs, L, 9);
  for_volume(traj.points, L, vs, [&](int s, int ix, int iy, int px, int py) {
    const FlowField2D& f = flows[traj.t0 + s];
    const double u = f.u.at_clamped(px, py);
    const double v = f.v.at_clamped(px, py);
    const double mag = std::sqrt(u * u + v * v);
    const int cell = h.cell_of(s, ix, iy);
    if (mag < 0.25)
      h.vote(cell, 8, 1.0);
    else
      h.vote_oriented(cell, std::atan2(v, u), 2 * kPi, 8, mag);
  });
  h.normalize_l1();
  return {DescriptorKind::HOF, std::move(h.values)};
}

DescriptorBlock mbh(const std::vector<FlowField2D>& flows,
                    const Trajectory2D& traj, const VolumeSpec& vs) {
  const int L = traj_steps_2d(traj);
  CellHist hu(vs, L, 8), hv(vs, L, 8);
  auto accumulate = [&](CellHist& h, const Grid<float>& ch, int s, int ix,
                        int iy, int px, int py) {
    const double gx = 0.5 * (ch.at_clamped(px + 1, py) - ch.at_clamped(px - 1, py));
    const double gy = 0.5 * (ch.at_clamped(px, py + 1) - ch.at_clamped(px, py - 1));
    const double mag = std::sqrt(gx * gx + gy * gy);
    if (mag <= 0) return;
    h.vote_oriented(h.cell_of(s, ix, iy), std::atan2(gy, gx), kPi, 8, mag);
  };
  for_volume(traj.points, L, vs, [&](int s, int ix, int iy, int px, int py) {
    const FlowField2D& f = flows[traj.t0 + s];
    accumulate(hu, f.u, s, ix, iy, px, py);
    accumulate(hv, f.v, s, ix, iy, px, py);
  });
  hu.normalize_l2();
  hv.normalize_l2();
  std::vector<float> values = std::move(hu.values);
  values.insert(values.end(), hv.values.begin(), hv.values.end());
  return {DescriptorKind::MBH, std::move(values)};
}

DescriptorBlock hsf(const std::vector<SceneFlowField>& flows,
                    const Trajectory3D& traj, const VolumeSpec& vs) {
  const int L = traj_steps_3d(traj);
  CellHist h(vs, L, 9);
  for_volume(traj.pixel_track, L, vs, [&](int s, int ix, int iy, int px, int py) {
    const SceneFlowField& f = flows[traj.t0 + s];
    const int sx = std::clamp(px, 0, f.width() - 1);
    const int sy = std::clamp(py, 0, f.height() - 1);
    if (!f.valid_at(sx, sy)) return;  // sentinel pixels carry no vote
    const double dX = f.dX.at(sx, sy);
    const double dY = f.dY.at(sx, sy);
    const double dZ = f.dZ.at(sx, sy);
    const double mag = std::sqrt(dX * dX + dY * dY + dZ * dZ);
    const int cell = h.cell_of(s, ix, iy);
    if (mag < 1e-3) {
      h.vote(cell, 8, 1.0);
      return;
    }
    const double az = std::atan2(dY, dX);
    const double elev = std::atan2(dZ, std::sqrt(dX * dX + dY * dY));
    // Quadrants centered on the +/-X, +/-Y axes.
    double rot = std::fmod(az + kPi / 4, 2 * kPi);
    if (rot < 0) rot += 2 * kPi;
    const int quadrant = std::min(3, (int)(rot / (kPi / 2)));
    const int bin = quadrant * 2 + (elev < 0 ? 1 : 0);
    h.vote(cell, bin, mag);
  });
  h.normalize_l1();
  return {DescriptorKind::HSF, std::move(h.values)};
}

DescriptorBlock mbh3d(const std::vector<SceneFlowField>& flows,
                      const Trajectory3D& traj, const VolumeSpec& vs) {
  const int L = traj_steps_3d(traj);
  CellHist hx(vs, L, 9), hy(vs, L, 9), hz(vs, L, 9);
  auto accumulate = [&](CellHist& h, const Grid<float>& ch, int s, int ix,
                        int iy, int px, int py) {
    const double gx = 0.5 * (ch.at_clamped(px + 1, py) - ch.at_clamped(px - 1, py));
    const double gy = 0.5 * (ch.at_clamped(px, py + 1) - ch.at_clamped(px, py - 1));
    if (std::isnan(gx) || std::isnan(gy)) return;  // touches a sentinel
    const double mag = std::sqrt(gx * gx + gy * gy);
    const int cell = h.cell_of(s, ix, iy);
    if (mag < 1e-4)
      h.vote(cell, 8, 1.0);
    else
      h.vote_oriented(cell, std::atan2(gy, gx), 2 * kPi, 8, mag);
  };
  for_volume(traj.pixel_track, L, vs, [&](int s, int ix, int iy, int px, int py) {
    const SceneFlowField& f = flows[traj.t0 + s];
    accumulate(hx, f.dX, s, ix, iy, px, py);
    accumulate(hy, f.dY, s, ix, iy, px, py);
    accumulate(hz, f.dZ, s, ix, iy, px, py);
  });
  hx.normalize_l1();
  hy.normalize_l1();
  hz.normalize_l1();
  std::vector<float> values = std::move(hx.values);
  values.insert(values.end(), hy.values.begin(), hy.values.end());
  values.insert(values.end(), hz.values.begin(), hz.values.end());
  return {DescriptorKind::MBH3D, std::move(values)};
}

std::vector<DescriptorBlock> describe_2d(const std::vector<FrameGray>& frames,
                                         const std::vector<FlowField2D>& flows,
                                         const Trajectory2D& traj,
                                         const VolumeSpec& vs) {
  std::vector<DescriptorBlock> out;
  out.push_back(tsd(traj));
  out.push_back(hog(frames, traj, vs));
  out.push_back(hof(flows, traj, vs));
  out.push_back(mbh(flows, traj, vs));
  return out;
}

std::vector<DescriptorBlock> describe_3d(
    const std::vector<SceneFlowField>& flows, const Trajectory3D& traj,
    const VolumeSpec& vs) {
  std::vector<DescriptorBlock> out;
  out.push_back(tsd3d(traj));
  out.push_back(hsf(flows, traj, vs));
  out.push_back(mbh3d(flows, traj, vs));
  return out;
}

}  // namespace ltraj
