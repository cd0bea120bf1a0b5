#include "ltraj/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ltraj {

namespace {

constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

Grid<float> downsample2(const Grid<float>& g) {
  const int w = (g.width() + 1) / 2;
  const int h = (g.height() + 1) / 2;
  Grid<float> out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float a = g.at_clamped(2 * x, 2 * y);
      const float b = g.at_clamped(2 * x + 1, 2 * y);
      const float c = g.at_clamped(2 * x, 2 * y + 1);
      const float d = g.at_clamped(2 * x + 1, 2 * y + 1);
      out.at(x, y) = 0.25f * (a + b + c + d);
    }
  }
  return out;
}

// Resizes a flow component to (w,h), scaling values by the width ratio of the
// level change (a factor of 2 between adjacent pyramid levels).
Grid<float> upsample_flow(const Grid<float>& g, int w, int h, double gain) {
  Grid<float> out(w, h);
  const double sx = static_cast<double>(g.width()) / w;
  const double sy = static_cast<double>(g.height()) / h;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double ox = (x + 0.5) * sx - 0.5;
      const double oy = (y + 0.5) * sy - 0.5;
      out.at(x, y) = static_cast<float>(gain * bilinear(g, ox, oy));
    }
  }
  return out;
}

Grid<float> median3x3(const Grid<float>& g) {
  Grid<float> out(g.width(), g.height());
  std::array<float, 9> win;
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          win[n++] = g.at_clamped(x + dx, y + dy);
      std::nth_element(win.begin(), win.begin() + 4, win.end());
      out.at(x, y) = win[4];
    }
  }
  return out;
}

// One local least-squares refinement pass at a single pyramid level.
void refine_level(const Grid<float>& prev, const Grid<float>& next,
                  Grid<float>& u, Grid<float>& v, int radius) {
  const int w = prev.width();
  const int h = prev.height();
  const double damp = 1e-3;           // keeps textureless regions at zero
  const double max_update = radius + 1.0;

  Grid<float> ix(w, h), iy(w, h), it(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      ix.at(x, y) =
          0.5f * (prev.at_clamped(x + 1, y) - prev.at_clamped(x - 1, y));
      iy.at(x, y) =
          0.5f * (prev.at_clamped(x, y + 1) - prev.at_clamped(x, y - 1));
      const double warped =
          bilinear(next, x + (double)u.at(x, y), y + (double)v.at(x, y));
      it.at(x, y) = static_cast<float>(warped - prev.at(x, y));
    }
  }

  Grid<float> du(w, h), dv(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double a = 0, b = 0, c = 0, d = 0, e = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const double gx = ix.at_clamped(x + dx, y + dy);
          const double gy = iy.at_clamped(x + dx, y + dy);
          const double gt = it.at_clamped(x + dx, y + dy);
          a += gx * gx;
          b += gx * gy;
          c += gy * gy;
          d += gx * gt;
          e += gy * gt;
        }
      }
      const double det = (a + damp) * (c + damp) - b * b;
      double su = (-d * (c + damp) + b * e) / det;
      double sv = (b * d - (a + damp) * e) / det;
      su = std::clamp(su, -max_update, max_update);
      sv = std::clamp(sv, -max_update, max_update);
      du.at(x, y) = static_cast<float>(su);
      dv.at(x, y) = static_cast<float>(sv);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      u.at(x, y) += du.at(x, y);
      v.at(x, y) += dv.at(x, y);
    }
  }
}

}  // namespace

FlowField2D estimate_flow_2d(const FrameGray& prev, const FrameGray& next,
                             const FlowConfig& cfg) {
  if (prev.width() != next.width() || prev.height() != next.height())
    throw std::invalid_argument("estimate_flow_2d: frame size mismatch");
  if (prev.width() < 16 || prev.height() < 16)
    throw std::invalid_argument("estimate_flow_2d: frames below 16x16");

  int levels = 1;
  while (levels < cfg.levels &&
         (std::min(prev.width(), prev.height()) >> levels) >= 8)
    ++levels;

  std::vector<Grid<float>> pp{prev}, np{next};
  for (int l = 1; l < levels; ++l) {
    pp.push_back(downsample2(pp.back()));
    np.push_back(downsample2(np.back()));
  }

  Grid<float> u(pp.back().width(), pp.back().height());
  Grid<float> v(pp.back().width(), pp.back().height());
  for (int l = levels - 1; l >= 0; --l) {
    if (l != levels - 1) {
      u = upsample_flow(u, pp[l].width(), pp[l].height(), 2.0);
      v = upsample_flow(v, pp[l].width(), pp[l].height(), 2.0);
    }
    for (int it = 0; it < cfg.warp_iterations; ++it)
      refine_level(pp[l], np[l], u, v, cfg.window_radius);
  }
  u = median3x3(u);
  v = median3x3(v);

  FlowField2D out;
  out.u = std::move(u);
  out.v = std::move(v);
  return out;
}

Grid<float> range_flow_from_depth(const DepthFrame& prevD,
                                  const DepthFrame& nextD,
                                  const FlowField2D& flow) {
  const int w = prevD.width();
  const int h = prevD.height();
  if (nextD.width() != w || nextD.height() != h || flow.width() != w ||
      flow.height() != h)
    throw std::invalid_argument("range_flow_from_depth: size mismatch");
  Grid<float> out(w, h, kNaN);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float pd = prevD.at(x, y);
      if (std::isnan(pd)) continue;
      const double tx = x + flow.u.at(x, y);
      const double ty = y + flow.v.at(x, y);
      if (tx < 0.0 || tx > w - 1.0 || ty < 0.0 || ty > h - 1.0) continue;
      const double nd = bilinear(nextD, tx, ty);
      if (std::isnan(nd)) continue;
      out.at(x, y) = static_cast<float>(nd - pd);
    }
  }
  return out;
}

SceneFlowField compose_scene_flow(const FlowField2D& flow,
                                  const Grid<float>& range_flow,
                                  const DepthFrame& prevD,
                                  const CameraIntrinsics& k) {
  const int w = flow.width();
  const int h = flow.height();
  if (range_flow.width() != w || range_flow.height() != h ||
      prevD.width() != w || prevD.height() != h)
    throw std::invalid_argument("compose_scene_flow: size mismatch");
  SceneFlowField sf(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float D = prevD.at(x, y);
      const float rf = range_flow.at(x, y);
      if (std::isnan(D) || std::isnan(rf) || D <= 0.0f) {
        sf.dX.at(x, y) = kNaN;
        sf.dY.at(x, y) = kNaN;
        sf.dZ.at(x, y) = kNaN;
        continue;
      }
      const Point3 q = back_project({(double)x, (double)y, (double)D}, k);
      const Vec3 d = scene_flow_from_motion_field(
          {flow.u.at(x, y), flow.v.at(x, y), rf}, q, k);
      sf.dX.at(x, y) = static_cast<float>(d.x);
      sf.dY.at(x, y) = static_cast<float>(d.y);
      sf.dZ.at(x, y) = static_cast<float>(d.z);
    }
  }
  return sf;
}

}  // namespace ltraj
