#include "ltraj/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ltraj/rng.hpp"

namespace ltraj {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// Smooth band-limited patch texture: three oriented sinusoids over
// patch-local metric coordinates.
struct PatchTexture {
  double freq[3];
  double dirx[3];
  double diry[3];
  double phase[3];
  double amp[3] = {0.18, 0.14, 0.10};

  static PatchTexture make(Rng& rng, double fmin, double fmax) {
    PatchTexture t;
    for (int i = 0; i < 3; ++i) {
      t.freq[i] = rng.uniform(fmin, fmax);
      const double ang = rng.uniform(0.0, kTau);
      t.dirx[i] = std::cos(ang);
      t.diry[i] = std::sin(ang);
      t.phase[i] = rng.uniform(0.0, kTau);
    }
    return t;
  }

  double eval(double a, double b) const {
    double v = 0.5;
    for (int i = 0; i < 3; ++i)
      v += amp[i] *
           std::sin(kTau * freq[i] * (a * dirx[i] + b * diry[i]) + phase[i]);
    return std::clamp(v, 0.02, 0.98);
  }
};

}  // namespace

Vec3 motion_offset(const MotionProgram& m, int frame) {
  switch (m.type) {
    case MotionProgram::Type::Static:
      return {};
    case MotionProgram::Type::LateralSin: {
      const double o =
          m.amplitude * std::sin(kTau * frame / m.period + m.phase);
      return m.axis == 0 ? Vec3{o, 0.0, 0.0} : Vec3{0.0, o, 0.0};
    }
    case MotionProgram::Type::RadialSin:
      return {0.0, 0.0,
              m.amplitude * std::sin(kTau * frame / m.period + m.phase)};
    case MotionProgram::Type::LinearVel:
      return {m.velocity.x * frame, m.velocity.y * frame,
              m.velocity.z * frame};
    case MotionProgram::Type::ZigzagX: {
      // Triangle wave along X with constant per-frame speed: offsets cycle
      // 0, +A, 0, -A, so every step has magnitude A.
      static constexpr double tri[4] = {0.0, 1.0, 0.0, -1.0};
      return {m.amplitude * tri[frame & 3], 0.0, 0.0};
    }
  }
  return {};
}

SynthVideo synth_sequence(const SynthSpec& spec, uint64_t seed) {
  // 16 frames is the shortest sequence a default-length trajectory can span.
  if (spec.frames < 16)
    throw std::invalid_argument("synth_sequence: sequence too short");
  const auto& k = spec.intrinsics;
  const int w = spec.width;
  const int h = spec.height;

  std::vector<PatchTexture> textures;
  {
    Rng rng(seed);
    for (size_t i = 0; i < spec.patches.size(); ++i)
      textures.push_back(
          PatchTexture::make(rng, spec.texture_freq_min, spec.texture_freq_max));
  }

  auto patch_center = [&](size_t pi, int t) -> Vec3 {
    const auto& p = spec.patches[pi];
    const Vec3 o = motion_offset(p.motion, t);
    return {p.anchor.x + o.x, p.anchor.y + o.y, p.anchor.z + o.z};
  };

  SynthVideo out;
  out.label = spec.label;

  // Per-frame patch ownership, used for exact ground-truth fields.
  std::vector<Grid<int>> owners;

  for (int t = 0; t < spec.frames; ++t) {
    FrameGray frame(w, h, static_cast<float>(spec.background_intensity));
    DepthFrame depth(w, h, static_cast<float>(spec.background_depth));
    Grid<int> owner(w, h, -1);

    // Far-to-near painter's order.
    std::vector<size_t> order(spec.patches.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return patch_center(a, t).z > patch_center(b, t).z;
    });

    for (size_t pi : order) {
      const auto& p = spec.patches[pi];
      const Vec3 c = patch_center(pi, t);
      if (c.z <= 0.0)
        throw std::invalid_argument("synth_sequence: patch behind camera");
      const double half = p.size / 2.0;
      const PixelDepth cp = project({c.x, c.y, c.z}, k);
      const double half_px_x = half * k.fx / c.z + 1.0;
      const double half_px_y = half * k.fy / c.z + 1.0;
      const int x0 = std::max(0, (int)std::floor(cp.x - half_px_x));
      const int x1 = std::min(w - 1, (int)std::ceil(cp.x + half_px_x));
      const int y0 = std::max(0, (int)std::floor(cp.y - half_px_y));
      const int y1 = std::min(h - 1, (int)std::ceil(cp.y + half_px_y));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double X = (x - k.cx) * c.z / k.fx;
          const double Y = (y - k.cy) * c.z / k.fy;
          const double a = X - c.x;
          const double b = Y - c.y;
          if (std::abs(a) > half || std::abs(b) > half) continue;
          const double inner = half - p.texture_margin;
          const bool flat = std::abs(a) > inner || std::abs(b) > inner;
          frame.at(x, y) = flat
                               ? static_cast<float>(spec.background_intensity)
                               : static_cast<float>(textures[pi].eval(a, b));
          depth.at(x, y) = static_cast<float>(c.z);
          owner.at(x, y) = static_cast<int>(pi);
        }
      }
    }

    out.frames.push_back(std::move(frame));
    out.depths.push_back(std::move(depth));
    owners.push_back(std::move(owner));

    SkeletonFrame sk;
    sk.frame = t;
    for (const auto& j : spec.joints) {
      const Vec3 o = motion_offset(j.motion, t);
      const Vec3 pos{j.anchor.x + o.x, j.anchor.y + o.y, j.anchor.z + o.z};
      const PixelDepth px = project({pos.x, pos.y, pos.z}, k);
      sk.joints.push_back({j.id, px.x, px.y, pos.x, pos.y, pos.z});
    }
    out.skeleton.push_back(std::move(sk));
  }

  // Exact forward fields from the frame-t owner of each pixel.
  for (int t = 0; t + 1 < spec.frames; ++t) {
    FlowField2D flow(w, h);
    SceneFlowField sf(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int pi = owners[t].at(x, y);
        if (pi < 0) continue;  // static background: zero motion
        const Vec3 c0 = patch_center(pi, t);
        const Vec3 c1 = patch_center(pi, t + 1);
        const double X = (x - k.cx) * c0.z / k.fx;
        const double Y = (y - k.cy) * c0.z / k.fy;
        const double a = X - c0.x;
        const double b = Y - c0.y;
        const PixelDepth np = project({c1.x + a, c1.y + b, c1.z}, k);
        flow.u.at(x, y) = static_cast<float>(np.x - x);
        flow.v.at(x, y) = static_cast<float>(np.y - y);
        sf.dX.at(x, y) = static_cast<float>(c1.x - c0.x);
        sf.dY.at(x, y) = static_cast<float>(c1.y - c0.y);
        sf.dZ.at(x, y) = static_cast<float>(c1.z - c0.z);
      }
    }
    out.gt_flow.push_back(std::move(flow));
    out.gt_scene_flow.push_back(std::move(sf));
  }

  return out;
}

}  // namespace ltraj
