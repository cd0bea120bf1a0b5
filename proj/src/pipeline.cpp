#include "ltraj/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "ltraj/flow_io.hpp"
#include "ltraj/fsutil.hpp"
#include "ltraj/image_io.hpp"
#include "ltraj/rng.hpp"
#include "ltraj/skeleton.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ltraj {

namespace {

// Seed-stream tags. One tag per consumer keeps every random decision on its
// own splitmix64 stream, so adding a consumer never perturbs the others.
constexpr uint64_t kStreamKmeans = 0x4B00;     // + (joint+1)*8 + kind
constexpr uint64_t kStreamHoldout = 0x4F00;
constexpr uint64_t kStreamPool = 0x5E00;       // + candidate, then mixed per video

std::string frame_name(const char* prefix, int t, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.%s", prefix, t, ext);
  return buf;
}

void run_parallel(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

const VideoEntry* DatasetManifest::find(const std::string& id) const {
  for (const auto& v : videos)
    if (v.id == id) return &v;
  return nullptr;
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& v : videos) {
    if (v.id.empty()) throw std::runtime_error("manifest: empty video id");
    if (!ids.insert(v.id).second)
      throw std::runtime_error("manifest: duplicate video id " + v.id);
    if (v.label.empty())
      throw std::runtime_error("manifest: video " + v.id + " has no label");
    if (!fs::is_directory(v.frame_dir))
      throw std::runtime_error("manifest: missing frame dir " +
                               v.frame_dir.string());
    if (!fs::exists(v.frame_dir / frame_name("frame", 0, "pgm")))
      throw std::runtime_error("manifest: video " + v.id + " has no frames");
    if (!v.skeleton.empty() && !fs::exists(v.skeleton))
      throw std::runtime_error("manifest: missing skeleton " +
                               v.skeleton.string());
  }
  std::set<std::string> train(train_ids.begin(), train_ids.end());
  for (const auto& id : test_ids)
    if (train.count(id))
      throw std::runtime_error("manifest: video in both splits: " + id);
  for (const auto& id : train_ids)
    if (!find(id)) throw std::runtime_error("manifest: unknown train id " + id);
  for (const auto& id : test_ids)
    if (!find(id)) throw std::runtime_error("manifest: unknown test id " + id);
}

DatasetManifest load_manifest(const fs::path& manifest_path) {
  const json j = json::parse(read_file(manifest_path));
  DatasetManifest m;
  m.root = manifest_path.parent_path();
  m.intrinsics =
      load_intrinsics(m.root / j.at("intrinsics").get<std::string>());

  for (const auto& v : j.at("videos")) {
    VideoEntry e;
    e.id = v.at("id").get<std::string>();
    e.frame_dir = m.root / v.at("frames").get<std::string>();
    const std::string depth = v.value("depth", "");
    if (!depth.empty()) e.depth_dir = m.root / depth;
    const std::string skel = v.value("skeleton", "");
    if (!skel.empty()) e.skeleton = m.root / skel;
    e.label = v.at("label").get<std::string>();
    m.videos.push_back(std::move(e));
  }

  json splits = j.at("splits");
  if (splits.is_string())
    splits = json::parse(read_file(m.root / splits.get<std::string>()));
  for (const auto& id : splits.at("train"))
    m.train_ids.push_back(id.get<std::string>());
  for (const auto& id : splits.at("test"))
    m.test_ids.push_back(id.get<std::string>());

  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Config

PipelineConfig PipelineConfig::defaults_for_mode(int mode) {
  if (mode != 2 && mode != 3)
    throw std::invalid_argument("config: mode must be 2 or 3");
  PipelineConfig c;
  c.mode = mode;
  if (mode == 3) {
    c.tracker = TrackerConfig::defaults_3d();
    c.localize = LocalizeConfig::defaults_3d();
  } else {
    c.tracker = TrackerConfig::defaults_2d();
    c.localize = LocalizeConfig::defaults_2d();
  }
  return c;
}

namespace {

json config_to_json(const PipelineConfig& c) {
  json j;
  j["mode"] = c.mode;
  j["seed"] = c.seed;
  j["global_bow"] = c.global_bow;
  j["flow"] = {{"levels", c.flow.levels},
               {"window_radius", c.flow.window_radius},
               {"warp_iterations", c.flow.warp_iterations}};
  j["tracker"] = {{"length", c.tracker.L},
                  {"grid_step", c.tracker.grid_step},
                  {"median_radius", c.tracker.median_radius},
                  {"homogeneity_threshold", c.tracker.homogeneity_threshold},
                  {"min_variance", c.tracker.min_variance},
                  {"max_step", c.tracker.max_step}};
  j["localize"] = {{"distance_threshold", c.localize.distance_threshold}};
  j["volume"] = {{"width", c.volume.width},
                 {"height", c.volume.height},
                 {"cells_x", c.volume.cells_x},
                 {"cells_y", c.volume.cells_y},
                 {"cells_t", c.volume.cells_t}};
  j["encode"] = {{"codebook_size", c.codebook_size}};
  j["selection"] = {{"enabled", c.selection.enabled},
                    {"sample_size", c.selection.sample_size},
                    {"candidates", c.selection.candidates},
                    {"holdout_fraction", c.selection.holdout_fraction},
                    {"lambda", c.selection.lambda}};
  j["classifier"] = {{"C", c.svm_c}, {"epochs", c.svm_epochs}};
  return j;
}

void check_config(const PipelineConfig& c) {
  if (c.mode != 2 && c.mode != 3)
    throw std::invalid_argument("config: mode must be 2 or 3");
  if (c.tracker.L < 1 || c.tracker.grid_step < 1 || c.tracker.median_radius < 0)
    throw std::invalid_argument("config: bad tracker values");
  if (c.volume.width < 1 || c.volume.height < 1 || c.volume.cells_x < 1 ||
      c.volume.cells_y < 1 || c.volume.cells_t < 1)
    throw std::invalid_argument("config: bad volume values");
  if (c.localize.distance_threshold <= 0)
    throw std::invalid_argument("config: distance threshold must be positive");
  if (c.codebook_size < 1)
    throw std::invalid_argument("config: codebook_size must be >= 1");
  if (c.selection.sample_size < 1 || c.selection.candidates < 1)
    throw std::invalid_argument("config: bad selection values");
  if (c.selection.holdout_fraction <= 0 || c.selection.holdout_fraction >= 1)
    throw std::invalid_argument("config: holdout_fraction must be in (0,1)");
  if (c.svm_c <= 0 || c.svm_epochs < 1)
    throw std::invalid_argument("config: bad classifier values");
  if (c.jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
}

}  // namespace

std::string default_config_json(int mode) {
  return config_to_json(PipelineConfig::defaults_for_mode(mode)).dump(2) + "\n";
}

PipelineConfig load_config(const fs::path& path, int cli_mode) {
  json j = json::object();
  if (!path.empty()) j = json::parse(read_file(path));

  const int mode = cli_mode != 0 ? cli_mode : j.value("mode", 2);
  PipelineConfig c = PipelineConfig::defaults_for_mode(mode);
  c.seed = j.value("seed", c.seed);
  c.global_bow = j.value("global_bow", c.global_bow);

  if (j.contains("flow")) {
    const auto& f = j["flow"];
    c.flow.levels = f.value("levels", c.flow.levels);
    c.flow.window_radius = f.value("window_radius", c.flow.window_radius);
    c.flow.warp_iterations = f.value("warp_iterations", c.flow.warp_iterations);
  }
  if (j.contains("tracker")) {
    const auto& t = j["tracker"];
    c.tracker.L = t.value("length", c.tracker.L);
    c.tracker.grid_step = t.value("grid_step", c.tracker.grid_step);
    c.tracker.median_radius = t.value("median_radius", c.tracker.median_radius);
    c.tracker.homogeneity_threshold =
        t.value("homogeneity_threshold", c.tracker.homogeneity_threshold);
    c.tracker.min_variance = t.value("min_variance", c.tracker.min_variance);
    c.tracker.max_step = t.value("max_step", c.tracker.max_step);
  }
  if (j.contains("localize"))
    c.localize.distance_threshold = j["localize"].value(
        "distance_threshold", c.localize.distance_threshold);
  if (j.contains("volume")) {
    const auto& v = j["volume"];
    c.volume.width = v.value("width", c.volume.width);
    c.volume.height = v.value("height", c.volume.height);
    c.volume.cells_x = v.value("cells_x", c.volume.cells_x);
    c.volume.cells_y = v.value("cells_y", c.volume.cells_y);
    c.volume.cells_t = v.value("cells_t", c.volume.cells_t);
  }
  if (j.contains("encode"))
    c.codebook_size = j["encode"].value("codebook_size", c.codebook_size);
  if (j.contains("selection")) {
    const auto& s = j["selection"];
    c.selection.enabled = s.value("enabled", c.selection.enabled);
    c.selection.sample_size = s.value("sample_size", c.selection.sample_size);
    c.selection.candidates = s.value("candidates", c.selection.candidates);
    c.selection.holdout_fraction =
        s.value("holdout_fraction", c.selection.holdout_fraction);
    c.selection.lambda = s.value("lambda", c.selection.lambda);
  }
  if (j.contains("classifier")) {
    const auto& s = j["classifier"];
    c.svm_c = s.value("C", c.svm_c);
    c.svm_epochs = s.value("epochs", c.svm_epochs);
  }

  check_config(c);
  return c;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

Vec3 world_at(double px, double py, double Z, const CameraIntrinsics& k) {
  return {(px - k.cx) * Z / k.fx, (py - k.cy) * Z / k.fy, Z};
}

MotionProgram lateral(int axis, double amplitude, int period) {
  MotionProgram m;
  m.type = MotionProgram::Type::LateralSin;
  m.axis = axis;
  m.amplitude = amplitude;
  m.period = period;
  return m;
}

MotionProgram radial(double amplitude, int period) {
  MotionProgram m;
  m.type = MotionProgram::Type::RadialSin;
  m.amplitude = amplitude;
  m.period = period;
  return m;
}

MotionProgram approach(double vz) {
  MotionProgram m;
  m.type = MotionProgram::Type::LinearVel;
  m.velocity = {0.0, 0.0, vz};
  return m;
}

MotionProgram zigzag(double amplitude) {
  MotionProgram m;
  m.type = MotionProgram::Type::ZigzagX;
  m.amplitude = amplitude;
  return m;
}

SynthSpec scene_base(int w, int h, int frames) {
  SynthSpec s;
  s.width = w;
  s.height = h;
  s.intrinsics = {140.0, 140.0, (w - 1) / 2.0, (h - 1) / 2.0};
  s.frames = frames;
  return s;
}

constexpr double kStageZ = 2.4;  // acting plane, meters

// Six classes over four joints: pair members share the motion and differ by
// joint; same-joint classes differ by motion axis. Only the acting joint's
// patch is rendered.
DatasetSpec make_local6() {
  DatasetSpec d;
  d.name = "local6";
  d.videos_per_class = 10;
  d.train_per_class = 5;

  const SynthSpec base = scene_base(160, 120, 48);
  const auto& k = base.intrinsics;
  const Vec3 anchors[4] = {
      world_at(40, 30, kStageZ, k), world_at(120, 30, kStageZ, k),
      world_at(40, 90, kStageZ, k), world_at(120, 90, kStageZ, k)};
  const MotionProgram slide = lateral(0, 0.06, 16);
  const MotionProgram raise = lateral(1, 0.06, 16);
  const MotionProgram shake = lateral(1, 0.06, 8);

  struct ClassDef {
    const char* label;
    int joint;
    MotionProgram motion;
  };
  const ClassDef defs[] = {{"raise_a", 2, raise}, {"raise_b", 3, raise},
                           {"shake_a", 0, shake}, {"shake_b", 1, shake},
                           {"slide_a", 0, slide}, {"slide_b", 1, slide}};

  for (const auto& def : defs) {
    SynthSpec s = base;
    s.label = def.label;
    for (int ji = 0; ji < 4; ++ji) {
      JointSpec j;
      j.id = ji;
      j.anchor = anchors[ji];
      if (ji == def.joint) j.motion = def.motion;
      s.joints.push_back(j);
    }
    PatchSpec p;
    p.joint_id = def.joint;
    p.anchor = anchors[def.joint];
    p.motion = def.motion;
    s.patches.push_back(p);
    d.classes.push_back(std::move(s));
  }
  return d;
}

// One centered joint; two lateral classes and two radial ones that a 2D
// tracker cannot separate. Ground-truth motion caches are emitted.
DatasetSpec make_radial4() {
  DatasetSpec d;
  d.name = "radial4";
  d.videos_per_class = 8;
  d.train_per_class = 4;
  d.emit_gt_flow = true;
  d.emit_gt_scene_flow = true;

  const SynthSpec base = scene_base(160, 120, 36);
  const Vec3 center = world_at(79.5, 59.5, kStageZ, base.intrinsics);

  struct ClassDef {
    const char* label;
    MotionProgram motion;
  };
  const ClassDef defs[] = {{"lat_x", lateral(0, 0.06, 16)},
                           {"lat_y", lateral(1, 0.06, 16)},
                           {"rad_app", approach(-0.012)},
                           {"rad_osc", radial(0.15, 16)}};

  for (const auto& def : defs) {
    SynthSpec s = base;
    s.label = def.label;
    JointSpec j;
    j.id = 0;
    j.anchor = center;
    j.motion = def.motion;
    s.joints.push_back(j);
    PatchSpec p;
    p.joint_id = 0;
    p.anchor = center;
    p.motion = def.motion;
    s.patches.push_back(p);
    d.classes.push_back(std::move(s));
  }
  return d;
}

// Four joint-localized classes, optionally sharing the frame with a briskly
// zigzagging scenery patch on the right. The scenery patch's wide flat rim
// keeps point births near its center, far enough from the boundary that the
// advection filter window always lands on the patch, so its trajectories
// carry the full 12 px/frame zigzag. Ground-truth flow is emitted.
DatasetSpec make_distract4(bool with_distractor) {
  DatasetSpec d;
  d.name = with_distractor ? "distract4" : "distract4_clean";
  d.videos_per_class = 6;
  d.train_per_class = 3;
  d.emit_gt_flow = true;

  const SynthSpec base = scene_base(128, 96, 32);
  const auto& k = base.intrinsics;
  const Vec3 anchors[4] = {
      world_at(20, 18, kStageZ, k), world_at(40, 18, kStageZ, k),
      world_at(20, 40, kStageZ, k), world_at(40, 40, kStageZ, k)};
  const MotionProgram slide = lateral(0, 0.06, 16);
  const MotionProgram raise = lateral(1, 0.06, 16);

  struct ClassDef {
    const char* label;
    int joint;
    MotionProgram motion;
  };
  const ClassDef defs[] = {{"raise_a", 2, raise},
                           {"raise_b", 3, raise},
                           {"slide_a", 0, slide},
                           {"slide_b", 1, slide}};

  for (const auto& def : defs) {
    SynthSpec s = base;
    s.label = def.label;
    for (int ji = 0; ji < 4; ++ji) {
      JointSpec j;
      j.id = ji;
      j.anchor = anchors[ji];
      if (ji == def.joint) j.motion = def.motion;
      s.joints.push_back(j);
    }
    PatchSpec p;
    p.joint_id = def.joint;
    p.anchor = anchors[def.joint];
    p.motion = def.motion;
    s.patches.push_back(p);
    if (with_distractor) {
      PatchSpec bg;
      bg.joint_id = -1;
      bg.anchor = world_at(95, 70, kStageZ, k);
      bg.size = 38.0 * kStageZ / 140.0;           // 19 px half-width
      bg.texture_margin = 14.0 * kStageZ / 140.0; // births within 5 px of center
      bg.motion = zigzag(12.0 * kStageZ / 140.0); // 12 px steps
      s.patches.push_back(bg);
    }
    d.classes.push_back(std::move(s));
  }
  return d;
}

// Two joints, classes crossed (joint x motion); used with injected archive
// noise to exercise codebook pool selection.
DatasetSpec make_noisy4() {
  DatasetSpec d;
  d.name = "noisy4";
  d.videos_per_class = 6;
  d.train_per_class = 3;

  const SynthSpec base = scene_base(128, 96, 32);
  const auto& k = base.intrinsics;
  const Vec3 anchors[2] = {world_at(40, 48, kStageZ, k),
                           world_at(88, 48, kStageZ, k)};
  const MotionProgram slow = lateral(0, 0.06, 16);
  const MotionProgram fast = lateral(1, 0.06, 8);

  struct ClassDef {
    const char* label;
    int joint;
    MotionProgram motion;
  };
  const ClassDef defs[] = {{"a_fast", 0, fast},
                           {"a_slow", 0, slow},
                           {"b_fast", 1, fast},
                           {"b_slow", 1, slow}};

  for (const auto& def : defs) {
    SynthSpec s = base;
    s.label = def.label;
    for (int ji = 0; ji < 2; ++ji) {
      JointSpec j;
      j.id = ji;
      j.anchor = anchors[ji];
      if (ji == def.joint) j.motion = def.motion;
      s.joints.push_back(j);
    }
    PatchSpec p;
    p.joint_id = def.joint;
    p.anchor = anchors[def.joint];
    p.motion = def.motion;
    s.patches.push_back(p);
    d.classes.push_back(std::move(s));
  }
  return d;
}

// Smallest end-to-end dataset; full ground-truth caches for fast turnaround.
DatasetSpec make_mini() {
  DatasetSpec d;
  d.name = "mini";
  d.videos_per_class = 4;
  d.train_per_class = 2;
  d.emit_gt_flow = true;
  d.emit_gt_scene_flow = true;

  const SynthSpec base = scene_base(160, 120, 24);
  const Vec3 center = world_at(79.5, 59.5, kStageZ, base.intrinsics);

  struct ClassDef {
    const char* label;
    MotionProgram motion;
  };
  const ClassDef defs[] = {{"pulse_z", radial(0.12, 12)},
                           {"slide_x", lateral(0, 0.06, 16)}};

  for (const auto& def : defs) {
    SynthSpec s = base;
    s.label = def.label;
    JointSpec j;
    j.id = 0;
    j.anchor = center;
    j.motion = def.motion;
    s.joints.push_back(j);
    PatchSpec p;
    p.joint_id = 0;
    p.anchor = center;
    p.motion = def.motion;
    s.patches.push_back(p);
    d.classes.push_back(std::move(s));
  }
  return d;
}

}  // namespace

std::vector<std::string> dataset_preset_names() {
  return {"local6", "radial4", "distract4", "distract4_clean", "noisy4",
          "mini"};
}

DatasetSpec dataset_preset(const std::string& name) {
  if (name == "local6") return make_local6();
  if (name == "radial4") return make_radial4();
  if (name == "distract4") return make_distract4(true);
  if (name == "distract4_clean") return make_distract4(false);
  if (name == "noisy4") return make_noisy4();
  if (name == "mini") return make_mini();
  throw std::invalid_argument("unknown dataset preset: " + name);
}

// ---------------------------------------------------------------------------
// Dataset synthesis

void synth_dataset(const DatasetSpec& spec, const fs::path& out, uint64_t seed,
                   int jobs) {
  if (spec.classes.empty())
    throw std::invalid_argument("synth: dataset has no classes");
  if (spec.videos_per_class < 1 ||
      spec.train_per_class >= spec.videos_per_class)
    throw std::invalid_argument("synth: bad per-class video counts");

  struct Item {
    const SynthSpec* tmpl;
    std::string id;
    int index;
    bool train;
  };
  std::vector<Item> items;
  for (const auto& cls : spec.classes) {
    for (int v = 0; v < spec.videos_per_class; ++v) {
      char suffix[16];
      std::snprintf(suffix, sizeof suffix, "_%02d", v);
      items.push_back({&cls, cls.label + suffix, (int)items.size(),
                       v < spec.train_per_class});
    }
  }

  fs::create_directories(out / "videos");

  std::vector<std::string> errors(items.size());
  run_parallel((int)items.size(), jobs, [&](int i) {
    const Item& item = items[i];
    try {
      const SynthVideo video =
          synth_sequence(*item.tmpl, Rng::mix(seed, item.index));
      const fs::path dir = out / "videos" / item.id;
      for (size_t t = 0; t < video.frames.size(); ++t) {
        write_pgm8(dir / frame_name("frame", (int)t, "pgm"), video.frames[t]);
        write_pgm16_depth(dir / frame_name("depth", (int)t, "pgm"),
                          video.depths[t]);
      }
      write_skeleton(dir / "skeleton.jsonl", video.skeleton);
      if (spec.emit_gt_flow)
        for (size_t t = 0; t < video.gt_flow.size(); ++t)
          write_flo(dir / frame_name("flow", (int)t, "flo"), video.gt_flow[t]);
      if (spec.emit_gt_scene_flow)
        for (size_t t = 0; t < video.gt_scene_flow.size(); ++t)
          write_sf3(dir / frame_name("sf", (int)t, "sf3"),
                    video.gt_scene_flow[t]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (size_t i = 0; i < items.size(); ++i)
    if (!errors[i].empty())
      throw std::runtime_error("synth: video " + items[i].id + ": " +
                               errors[i]);

  save_intrinsics(out / "intrinsics.json", spec.classes[0].intrinsics);

  json splits;
  splits["train"] = json::array();
  splits["test"] = json::array();
  for (const auto& item : items)
    splits[item.train ? "train" : "test"].push_back(item.id);
  atomic_write(out / "splits.json", splits.dump(2) + "\n");

  std::string labels = "video_id,label\n";
  for (const auto& item : items)
    labels += item.id + "," + item.tmpl->label + "\n";
  atomic_write(out / "labels.csv", labels);

  json manifest;
  manifest["intrinsics"] = "intrinsics.json";
  manifest["splits"] = "splits.json";
  manifest["videos"] = json::array();
  for (const auto& item : items) {
    const std::string dir = "videos/" + item.id;
    manifest["videos"].push_back({{"id", item.id},
                                  {"frames", dir},
                                  {"depth", dir},
                                  {"skeleton", dir + "/skeleton.jsonl"},
                                  {"label", item.tmpl->label}});
  }
  atomic_write(out / "manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Extraction

namespace {

std::vector<FrameGray> load_frames(const fs::path& dir) {
  std::vector<FrameGray> frames;
  for (int t = 0;; ++t) {
    const fs::path p = dir / frame_name("frame", t, "pgm");
    if (!fs::exists(p)) break;
    frames.push_back(read_pgm8(p));
  }
  if (frames.empty())
    throw std::runtime_error("no frames under " + dir.string());
  return frames;
}

std::vector<DepthFrame> load_depths(const fs::path& dir, size_t count) {
  std::vector<DepthFrame> depths;
  for (size_t t = 0; t < count; ++t) {
    const fs::path p = dir / frame_name("depth", (int)t, "pgm");
    if (!fs::exists(p))
      throw std::runtime_error("missing depth map " + p.string());
    depths.push_back(read_pgm16_depth(p));
  }
  return depths;
}

VideoArchive extract_video(const VideoEntry& entry,
                           const CameraIntrinsics& intrinsics,
                           const PipelineConfig& cfg) {
  const std::vector<FrameGray> frames = load_frames(entry.frame_dir);
  const int n = (int)frames.size();
  if (n < cfg.tracker.L + 1)
    throw std::runtime_error("sequence too short for trajectory length");

  // Cached ground-truth motion takes precedence over estimation.
  std::vector<FlowField2D> flows;
  flows.reserve(n - 1);
  for (int t = 0; t + 1 < n; ++t) {
    const fs::path cached = entry.frame_dir / frame_name("flow", t, "flo");
    flows.push_back(fs::exists(cached)
                        ? read_flo(cached)
                        : estimate_flow_2d(frames[t], frames[t + 1], cfg.flow));
  }

  VideoArchive archive;
  archive.mode = cfg.mode;
  archive.L = cfg.tracker.L;

  std::vector<SkeletonFrame> skeleton;
  const bool have_skeleton = !entry.skeleton.empty() && fs::exists(entry.skeleton);
  if (have_skeleton) skeleton = read_skeleton(entry.skeleton);
  if (!have_skeleton && !cfg.global_bow)
    throw std::runtime_error("missing skeleton for localized encoding");

  if (cfg.mode == 2) {
    const std::vector<Trajectory2D> tracks =
        track_2d(flows, frames, cfg.tracker);

    std::vector<int> assigned(tracks.size(), kRejected);
    if (have_skeleton) {
      const double diag = std::hypot((double)frames[0].width(),
                                     (double)frames[0].height());
      assigned = assign_2d(tracks, joint_tracks_2d(skeleton), cfg.localize,
                           diag);
    }

    for (size_t i = 0; i < tracks.size(); ++i) {
      TrajectoryRecord rec;
      rec.t0 = tracks[i].t0;
      rec.joint = assigned[i];
      for (const auto& pt : tracks[i].points) {
        rec.points.push_back((float)pt[0]);
        rec.points.push_back((float)pt[1]);
      }
      rec.blocks = describe_2d(frames, flows, tracks[i], cfg.volume);
      archive.records.push_back(std::move(rec));
    }
    return archive;
  }

  if (entry.depth_dir.empty())
    throw std::runtime_error("3D mode needs depth maps");
  const std::vector<DepthFrame> depths = load_depths(entry.depth_dir, n);

  std::vector<SceneFlowField> scene;
  scene.reserve(n - 1);
  for (int t = 0; t + 1 < n; ++t) {
    const fs::path cached = entry.frame_dir / frame_name("sf", t, "sf3");
    if (fs::exists(cached)) {
      scene.push_back(read_sf3(cached));
    } else {
      const Grid<float> range =
          range_flow_from_depth(depths[t], depths[t + 1], flows[t]);
      scene.push_back(
          compose_scene_flow(flows[t], range, depths[t], intrinsics));
    }
  }

  const std::vector<Trajectory3D> tracks =
      track_3d(scene, frames, depths, intrinsics, cfg.tracker);

  std::vector<int> assigned(tracks.size(), kRejected);
  if (have_skeleton)
    assigned = assign_3d(tracks, joint_tracks_3d(skeleton), cfg.localize);

  for (size_t i = 0; i < tracks.size(); ++i) {
    TrajectoryRecord rec;
    rec.t0 = tracks[i].t0;
    rec.joint = assigned[i];
    for (const auto& pt : tracks[i].points) {
      rec.points.push_back((float)pt[0]);
      rec.points.push_back((float)pt[1]);
      rec.points.push_back((float)pt[2]);
    }
    for (const auto& px : tracks[i].pixel_track) {
      rec.pixel_track.push_back((float)px[0]);
      rec.pixel_track.push_back((float)px[1]);
    }
    rec.blocks = describe_3d(scene, tracks[i], cfg.volume);
    archive.records.push_back(std::move(rec));
  }
  return archive;
}

}  // namespace

ExtractStats extract_dataset(const DatasetManifest& manifest,
                             const PipelineConfig& cfg,
                             const fs::path& archive_dir) {
  fs::create_directories(archive_dir);

  ExtractStats stats;
  std::mutex stats_mu;
  std::vector<std::string> notes(manifest.videos.size());

  run_parallel((int)manifest.videos.size(), cfg.jobs, [&](int i) {
    const VideoEntry& entry = manifest.videos[i];
    const fs::path out = archive_dir / (entry.id + ".tlar");
    if (!cfg.force && fs::exists(out)) {
      std::lock_guard lock(stats_mu);
      ++stats.skipped;
      return;
    }
    try {
      const VideoArchive archive =
          extract_video(entry, manifest.intrinsics, cfg);
      write_archive(out, archive);
      std::lock_guard lock(stats_mu);
      ++stats.processed;
    } catch (const std::exception& e) {
      notes[i] = e.what();
      std::lock_guard lock(stats_mu);
      ++stats.failed;
    }
  });

  for (size_t i = 0; i < notes.size(); ++i)
    if (!notes[i].empty())
      std::fprintf(stderr, "extract: %s: %s\n", manifest.videos[i].id.c_str(),
                   notes[i].c_str());
  return stats;
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<DescriptorKind> kinds_for_mode(int mode) {
  return mode == 3 ? kinds_3d() : kinds_2d();
}

// Per-video candidate pools: sample_size records drawn without replacement
// (everything when the video is small enough).
std::vector<std::vector<int>> draw_pools(
    const std::vector<VideoArchive>& archives, int sample_size, uint64_t seed,
    int candidate) {
  std::vector<std::vector<int>> pools(archives.size());
  for (size_t vi = 0; vi < archives.size(); ++vi) {
    const int n = (int)archives[vi].records.size();
    std::vector<int>& pool = pools[vi];
    pool.resize(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    if (sample_size < n) {
      Rng rng(Rng::mix(Rng::mix(seed, kStreamPool + candidate), vi));
      for (int i = 0; i < sample_size; ++i)
        std::swap(pool[i], pool[i + (int)rng.below(n - i)]);
      pool.resize(sample_size);
    }
  }
  return pools;
}

CodebookSet build_codebooks(const std::vector<VideoArchive>& archives,
                            const std::vector<std::vector<int>>& pools,
                            const std::vector<int>& joints,
                            const PipelineConfig& cfg) {
  const std::vector<DescriptorKind> kinds = kinds_for_mode(cfg.mode);
  const int K = cfg.codebook_size;

  auto build_one = [&](int joint, DescriptorKind kind) {
    const int dim = descriptor_dim(kind, cfg.tracker.L, cfg.volume);
    std::vector<const float*> pts;
    for (size_t vi = 0; vi < archives.size(); ++vi) {
      for (int ri : pools[vi]) {
        const TrajectoryRecord& rec = archives[vi].records[ri];
        if (joint != -1 && rec.joint != joint) continue;
        for (const auto& block : rec.blocks) {
          if (block.kind != kind) continue;
          if ((int)block.values.size() != dim)
            throw std::runtime_error("archive descriptor dimension mismatch");
          pts.push_back(block.values.data());
        }
      }
    }

    Codebook cb;
    cb.kind = kind;
    cb.joint = joint;
    cb.K = (uint32_t)K;
    cb.dim = (uint32_t)dim;
    cb.words.assign((size_t)K * dim, 0.0f);
    if (!pts.empty()) {
      // Small pools still yield K words: learn what the pool supports and
      // repeat words cyclically to keep the histogram layout uniform.
      const int k_eff = std::min<int>(K, (int)pts.size());
      const uint64_t kseed =
          Rng::mix(cfg.seed, kStreamKmeans + (uint64_t)(joint + 1) * 8 +
                                 (uint64_t)kind);
      const KmeansResult res = kmeans(pts, dim, k_eff, kseed);
      std::copy(res.centroids.begin(), res.centroids.end(), cb.words.begin());
      for (int w = k_eff; w < K; ++w)
        for (int c = 0; c < dim; ++c)
          cb.words[(size_t)w * dim + c] = cb.words[(size_t)(w % k_eff) * dim + c];
    }
    return cb;
  };

  CodebookSet set;
  for (int j : joints)
    for (DescriptorKind kind : kinds) set.entries.push_back(build_one(j, kind));
  if (cfg.global_bow)
    for (DescriptorKind kind : kinds) set.entries.push_back(build_one(-1, kind));
  set.sort();
  return set;
}

// Stratified holdout: a fraction of each class, always leaving at least one
// fit video per class.
std::vector<char> holdout_mask(const std::vector<std::string>& labels,
                               double fraction, uint64_t seed) {
  std::map<std::string, std::vector<int>> groups;
  for (size_t i = 0; i < labels.size(); ++i)
    groups[labels[i]].push_back((int)i);

  std::vector<char> mask(labels.size(), 0);
  Rng rng(Rng::mix(seed, kStreamHoldout));
  for (auto& [label, idxs] : groups) {
    for (size_t i = idxs.size() - 1; i > 0; --i)
      std::swap(idxs[i], idxs[rng.below(i + 1)]);
    const int take = std::min<int>((int)idxs.size() - 1,
                                   (int)std::lround(fraction * idxs.size()));
    for (int i = 0; i < take; ++i) mask[idxs[i]] = 1;
  }
  if (std::count(mask.begin(), mask.end(), (char)1) == 0)
    throw std::runtime_error(
        "selection: holdout is empty; raise holdout_fraction or add videos");
  return mask;
}

double true_label_posterior(const LinearModel& model,
                            const Prediction& prediction,
                            const std::string& label) {
  const auto it =
      std::lower_bound(model.classes.begin(), model.classes.end(), label);
  if (it == model.classes.end() || *it != label)
    throw std::runtime_error("selection: label missing from fit split: " +
                             label);
  return prediction.posteriors[it - model.classes.begin()];
}

}  // namespace

void train_pipeline(const DatasetManifest& manifest, const PipelineConfig& cfg,
                    const fs::path& archive_dir, const fs::path& model_dir) {
  if (manifest.train_ids.empty())
    throw std::runtime_error("train: empty training split");

  std::vector<VideoArchive> archives;
  std::vector<std::string> labels;
  std::set<int> joint_ids;
  for (const auto& id : manifest.train_ids) {
    const VideoEntry* entry = manifest.find(id);
    archives.push_back(read_archive(archive_dir / (id + ".tlar")));
    if (archives.back().mode != cfg.mode)
      throw std::runtime_error("train: archive mode mismatch for " + id);
    labels.push_back(entry->label);
    if (!entry->skeleton.empty() && fs::exists(entry->skeleton)) {
      const auto skeleton = read_skeleton(entry->skeleton);
      if (!skeleton.empty())
        for (const auto& joint : skeleton[0].joints) joint_ids.insert(joint.id);
    }
  }

  const std::vector<int> joints(joint_ids.begin(), joint_ids.end());
  if (joints.empty() && !cfg.global_bow)
    throw std::runtime_error(
        "train: no skeleton joints available for localized encoding");

  const int n = (int)archives.size();
  const bool selecting = cfg.selection.enabled;
  const int candidates = selecting ? cfg.selection.candidates : 1;

  std::vector<char> holdout;
  double lambda = 0.0;
  if (selecting) {
    holdout = holdout_mask(labels, cfg.selection.holdout_fraction, cfg.seed);
    const long holdout_n = std::count(holdout.begin(), holdout.end(), (char)1);
    lambda = cfg.selection.lambda > 0 ? cfg.selection.lambda
                                      : 1.0 / (double)holdout_n;
  }

  CodebookSet best_codebooks;
  std::vector<std::vector<float>> best_features;
  int best_candidate = -1;
  double best_score = 0.0;
  json report_rows = json::array();

  for (int c = 0; c < candidates; ++c) {
    const auto pools = draw_pools(archives, cfg.selection.sample_size,
                                  cfg.seed, c);
    CodebookSet codebooks = build_codebooks(archives, pools, joints, cfg);

    std::vector<std::vector<float>> features;
    features.reserve(n);
    for (const auto& archive : archives)
      features.push_back(encode_archive(archive, codebooks, cfg.global_bow));

    if (!selecting) {
      best_codebooks = std::move(codebooks);
      best_features = std::move(features);
      best_candidate = 0;
      break;
    }

    std::vector<std::vector<float>> fit_features;
    std::vector<std::string> fit_labels;
    for (int i = 0; i < n; ++i) {
      if (holdout[i]) continue;
      fit_features.push_back(features[i]);
      fit_labels.push_back(labels[i]);
    }
    const LinearModel probe =
        train(fit_features, fit_labels, {cfg.svm_c, cfg.svm_epochs, cfg.seed});

    std::vector<double> fit_posteriors;
    std::vector<double> holdout_posteriors;
    for (int i = 0; i < n; ++i) {
      const double p = true_label_posterior(
          probe, predict(probe, features[i]), labels[i]);
      (holdout[i] ? holdout_posteriors : fit_posteriors).push_back(p);
    }
    const double conf = confidence(fit_posteriors);
    const double ambig = ambiguity(holdout_posteriors);
    const double score = conf + lambda * ambig;
    report_rows.push_back(
        {{"confidence", conf}, {"ambiguity", ambig}, {"score", score}});

    if (best_candidate < 0 || score > best_score) {
      best_candidate = c;
      best_score = score;
      best_codebooks = std::move(codebooks);
      best_features = std::move(features);
    }
  }

  const LinearModel model = train(best_features, labels,
                                  {cfg.svm_c, cfg.svm_epochs, cfg.seed});

  fs::create_directories(model_dir);
  write_codebooks(model_dir / "codebooks.tlcb", best_codebooks);
  write_model(model_dir / "model.tlmd", model);

  if (selecting) {
    json sel;
    sel["chosen"] = best_candidate;
    sel["lambda"] = lambda;
    sel["candidates"] = report_rows;
    json held = json::array();
    for (int i = 0; i < n; ++i)
      if (holdout[i]) held.push_back(manifest.train_ids[i]);
    sel["holdout"] = held;
    atomic_write(model_dir / "selection.json", sel.dump(2) + "\n");
  }
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<float> encode_archive(const VideoArchive& archive,
                                  const CodebookSet& codebooks,
                                  bool global_bow) {
  std::vector<EncodeItem> items;
  items.reserve(archive.records.size());
  for (const auto& rec : archive.records) items.push_back({rec.joint, &rec.blocks});
  return global_bow ? encode_global(items, codebooks)
                    : encode_local(items, codebooks);
}

EvalReport eval_pipeline(const DatasetManifest& manifest,
                         const PipelineConfig& cfg,
                         const fs::path& archive_dir,
                         const fs::path& model_dir,
                         const fs::path& report_dir) {
  if (manifest.test_ids.empty())
    throw std::runtime_error("eval: empty test split");

  const CodebookSet codebooks = read_codebooks(model_dir / "codebooks.tlcb");
  const LinearModel model = read_model(model_dir / "model.tlmd");

  std::vector<std::vector<float>> features;
  std::vector<std::string> labels;
  for (const auto& id : manifest.test_ids) {
    const VideoArchive archive = read_archive(archive_dir / (id + ".tlar"));
    if (archive.mode != cfg.mode)
      throw std::runtime_error("eval: archive mode mismatch for " + id);
    features.push_back(encode_archive(archive, codebooks, cfg.global_bow));
    labels.push_back(manifest.find(id)->label);
  }

  const EvalReport report = evaluate(model, features, labels);
  const size_t nc = report.classes.size();

  std::string csv = "true\\predicted";
  for (const auto& cls : report.classes) csv += "," + cls;
  csv += "\n";
  for (size_t r = 0; r < nc; ++r) {
    csv += report.classes[r];
    for (size_t c = 0; c < nc; ++c)
      csv += "," + std::to_string(report.confusion[r][c]);
    csv += "\n";
  }
  atomic_write(report_dir / "confusion.csv", csv);

  // Row-normalized heat map, one square cell per matrix entry.
  const int cell = 24;
  const int side = (int)nc * cell;
  std::vector<std::array<uint8_t, 3>> rgb((size_t)side * side);
  for (size_t r = 0; r < nc; ++r) {
    int row_total = 0;
    for (size_t c = 0; c < nc; ++c) row_total += report.confusion[r][c];
    for (size_t c = 0; c < nc; ++c) {
      const double v =
          row_total > 0 ? (double)report.confusion[r][c] / row_total : 0.0;
      const std::array<uint8_t, 3> color = {
          (uint8_t)std::lround(255.0 * std::min(1.0, 2.0 * v)),
          (uint8_t)std::lround(255.0 * std::max(0.0, 2.0 * v - 1.0)),
          (uint8_t)std::lround(64.0 * (1.0 - v))};
      for (int y = (int)r * cell; y < (int)(r + 1) * cell; ++y)
        for (int x = (int)c * cell; x < (int)(c + 1) * cell; ++x)
          rgb[(size_t)y * side + x] = color;
    }
  }
  write_ppm(report_dir / "confusion.ppm", side, side, rgb);

  json rep;
  rep["accuracy"] = report.accuracy;
  rep["classes"] = report.classes;
  rep["per_class_accuracy"] = report.per_class_accuracy;
  rep["confusion"] = report.confusion;
  rep["test_count"] = (int)features.size();
  atomic_write(report_dir / "report.json", rep.dump(2) + "\n");

  return report;
}

}  // namespace ltraj
