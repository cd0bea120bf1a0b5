#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "ltraj/archive.hpp"
#include "ltraj/flow_io.hpp"
#include "ltraj/fsutil.hpp"
#include "ltraj/image_io.hpp"
#include "ltraj/pipeline.hpp"
#include "ltraj/rng.hpp"

using namespace ltraj;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const char* leaf) {
  auto dir = fs::temp_directory_path() / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<fs::path> tree_files(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

void check_trees_identical(const fs::path& a, const fs::path& b) {
  auto fa = tree_files(a);
  auto fb = tree_files(b);
  REQUIRE(fa == fb);
  for (const auto& rel : fa)
    CHECK_MESSAGE(read_file(a / rel) == read_file(b / rel),
                  "differs: ", rel.string());
}

void check_grids_close(const Grid<float>& got, const Grid<float>& want,
                       double tol) {
  REQUIRE(got.width() == want.width());
  REQUIRE(got.height() == want.height());
  for (int y = 0; y < got.height(); ++y)
    for (int x = 0; x < got.width(); ++x) {
      if (std::isnan(want.at(x, y))) {
        CHECK(std::isnan(got.at(x, y)));
      } else {
        CHECK(std::abs(got.at(x, y) - want.at(x, y)) <= tol);
      }
    }
}

}  // namespace

TEST_CASE("archive files round trip") {
  auto dir = scratch_dir("ltraj_archive_test");
  VideoArchive a;
  a.mode = 3;
  a.L = 15;
  Rng rng(42);
  for (int i = 0; i < 5; ++i) {
    TrajectoryRecord r;
    r.t0 = i;
    r.joint = i == 0 ? -1 : i;
    for (int p = 0; p < 16 * 3; ++p) r.points.push_back((float)rng.uniform());
    for (int p = 0; p < 16 * 2; ++p)
      r.pixel_track.push_back((float)rng.uniform(0, 100));
    r.blocks.push_back({DescriptorKind::TSD3D, {1.f, 2.f, 3.f}});
    r.blocks.push_back({DescriptorKind::HSF, {0.f, 0.25f}});
    a.records.push_back(std::move(r));
  }
  write_archive(dir / "v.tlar", a);
  auto r = read_archive(dir / "v.tlar");
  CHECK(r.mode == a.mode);
  CHECK(r.L == a.L);
  REQUIRE(r.records.size() == a.records.size());
  for (size_t i = 0; i < r.records.size(); ++i) {
    CHECK(r.records[i].t0 == a.records[i].t0);
    CHECK(r.records[i].joint == a.records[i].joint);
    CHECK(r.records[i].points == a.records[i].points);
    CHECK(r.records[i].pixel_track == a.records[i].pixel_track);
    REQUIRE(r.records[i].blocks.size() == a.records[i].blocks.size());
    for (size_t b = 0; b < r.records[i].blocks.size(); ++b) {
      CHECK(r.records[i].blocks[b].kind == a.records[i].blocks[b].kind);
      CHECK(r.records[i].blocks[b].values == a.records[i].blocks[b].values);
    }
  }

  atomic_write(dir / "bad.tlar", std::string("NOTANARCHIVE"));
  CHECK_THROWS_AS(read_archive(dir / "bad.tlar"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("dataset preset registry") {
  auto names = dataset_preset_names();
  for (const char* want : {"local6", "radial4", "distract4", "distract4_clean",
                           "noisy4", "mini"})
    CHECK(std::find(names.begin(), names.end(), want) != names.end());
  for (const auto& n : names) {
    auto spec = dataset_preset(n);
    CHECK(spec.name == n);
    CHECK(spec.videos_per_class > spec.train_per_class);
    CHECK_FALSE(spec.classes.empty());
    for (const auto& c : spec.classes) CHECK_FALSE(c.label.empty());
  }
  CHECK_THROWS_AS(dataset_preset("nope"), std::invalid_argument);
}

TEST_CASE("config files: mode defaults, overrides, validation") {
  auto dir = scratch_dir("ltraj_config_test");

  {
    std::ofstream(dir / "m3.json") << R"({"mode":3})";
    auto cfg = load_config(dir / "m3.json", 0);
    CHECK(cfg.mode == 3);
    CHECK(cfg.tracker.max_step == doctest::Approx(0.5));
    CHECK(cfg.tracker.min_variance == doctest::Approx(1e-4));
    CHECK(cfg.localize.distance_threshold == doctest::Approx(0.05));
  }
  {
    // command-line mode wins and drags its defaults along
    auto cfg = load_config(dir / "m3.json", 2);
    CHECK(cfg.mode == 2);
    CHECK(cfg.tracker.max_step == doctest::Approx(20.0));
    CHECK(cfg.localize.distance_threshold == doctest::Approx(0.02));
  }
  {
    std::ofstream(dir / "partial.json")
        << R"({"encode":{"codebook_size":16},"tracker":{"max_step":7.5},
               "selection":{"enabled":true,"lambda":0.25}})";
    auto cfg = load_config(dir / "partial.json", 0);
    CHECK(cfg.mode == 2);
    CHECK(cfg.codebook_size == 16);
    CHECK(cfg.tracker.max_step == doctest::Approx(7.5));
    CHECK(cfg.tracker.grid_step == 5);  // untouched default
    CHECK(cfg.selection.enabled);
    CHECK(cfg.selection.lambda == doctest::Approx(0.25));
    CHECK(cfg.selection.candidates == 4);
  }
  {
    std::ofstream(dir / "bad.json") << R"({"mode":5})";
    CHECK_THROWS(load_config(dir / "bad.json", 0));
  }
  for (int mode : {2, 3}) {
    auto j = nlohmann::json::parse(default_config_json(mode));
    CHECK(j["mode"].get<int>() == mode);
    CHECK(j.contains("tracker"));
    CHECK(j.contains("selection"));
  }
  fs::remove_all(dir);
}

TEST_CASE("a textured but motionless video produces an empty archive") {
  auto dir = scratch_dir("ltraj_static_test");

  SynthSpec spec;
  spec.width = 64;
  spec.height = 48;
  spec.frames = 17;
  spec.label = "static";
  spec.intrinsics = CameraIntrinsics::defaults_for(64, 48);
  spec.intrinsics.fx = 140;
  spec.intrinsics.fy = 140;
  PatchSpec patch;
  patch.joint_id = 0;
  const Point3 pc = back_project({31.5, 23.5, 2.4}, spec.intrinsics);
  patch.anchor = {pc.X, pc.Y, pc.Z};
  spec.patches.push_back(patch);
  JointSpec joint;
  joint.id = 0;
  joint.anchor = patch.anchor;
  spec.joints.push_back(joint);

  auto video = synth_sequence(spec, 123);
  const fs::path vdir = dir / "videos" / "static_00";
  for (size_t t = 0; t < video.frames.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.pgm", t);
    write_pgm8(vdir / name, video.frames[t]);
    std::snprintf(name, sizeof name, "depth_%04zu.pgm", t);
    write_pgm16_depth(vdir / name, video.depths[t]);
  }
  write_skeleton(vdir / "skeleton.jsonl", video.skeleton);
  save_intrinsics(dir / "intrinsics.json", spec.intrinsics);
  nlohmann::json manifest;
  manifest["intrinsics"] = "intrinsics.json";
  manifest["splits"] = {{"train", {"static_00"}}, {"test", nlohmann::json::array()}};
  manifest["videos"] = {{{"id", "static_00"},
                         {"frames", "videos/static_00"},
                         {"depth", "videos/static_00"},
                         {"skeleton", "videos/static_00/skeleton.jsonl"},
                         {"label", "static"}}};
  atomic_write(dir / "manifest.json", manifest.dump(2));

  auto m = load_manifest(dir / "manifest.json");
  REQUIRE(m.videos.size() == 1);

  // manifest sanity checking on mutated copies
  {
    auto bad = m;
    bad.videos.push_back(bad.videos[0]);
    CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  }
  {
    auto bad = m;
    bad.train_ids.push_back("ghost");
    CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  }
  {
    auto bad = m;
    bad.test_ids.push_back("static_00");  // overlaps train
    CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  }
  {
    auto bad = m;
    bad.videos[0].label.clear();
    CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  }
  {
    auto bad = m;
    bad.videos[0].frame_dir = bad.root / "videos" / "missing";
    CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  }

  auto cfg = PipelineConfig::defaults_for_mode(2);
  auto stats = extract_dataset(m, cfg, dir / "archives");
  CHECK(stats.processed == 1);
  CHECK(stats.failed == 0);
  auto archive = read_archive(dir / "archives" / "static_00.tlar");
  CHECK(archive.mode == 2);
  CHECK(archive.records.empty());
  fs::remove_all(dir);
}

TEST_CASE("mini dataset: render, extract, train, evaluate end to end") {
  const uint64_t seed = 7;
  auto dirA = scratch_dir("ltraj_mini_a");
  auto dirB = scratch_dir("ltraj_mini_b");
  auto spec = dataset_preset("mini");

  // renders are byte-identical regardless of worker count
  synth_dataset(spec, dirA, seed, 1);
  synth_dataset(spec, dirB, seed, 2);
  check_trees_identical(dirA, dirB);
  fs::remove_all(dirB);

  auto manifest = load_manifest(dirA / "manifest.json");
  const size_t n_videos = spec.classes.size() * spec.videos_per_class;
  REQUIRE(manifest.videos.size() == n_videos);
  CHECK(manifest.train_ids.size() ==
        spec.classes.size() * (size_t)spec.train_per_class);
  CHECK(manifest.test_ids.size() == n_videos - manifest.train_ids.size());

  // the emitted ground-truth caches equal an in-memory render of video 0
  {
    const auto& v0 = manifest.videos[0];
    const SynthSpec* tmpl = nullptr;
    for (const auto& c : spec.classes)
      if (c.label == v0.label) tmpl = &c;
    REQUIRE(tmpl != nullptr);
    auto video = synth_sequence(*tmpl, Rng::mix(seed, 0));

    auto flo = read_flo(v0.frame_dir / "flow_0000.flo");
    REQUIRE(flo.width() == video.gt_flow[0].width());
    for (int y = 0; y < flo.height(); ++y)
      for (int x = 0; x < flo.width(); ++x) {
        CHECK(flo.u.at(x, y) == video.gt_flow[0].u.at(x, y));
        CHECK(flo.v.at(x, y) == video.gt_flow[0].v.at(x, y));
      }
    auto sf = read_sf3(v0.frame_dir / "sf_0000.sf3");
    check_grids_close(sf.dX, video.gt_scene_flow[0].dX, 0.0);
    check_grids_close(sf.dZ, video.gt_scene_flow[0].dZ, 0.0);

    // quantization error bounds: 1/255 intensity, 1 mm depth
    auto frame = read_pgm8(v0.frame_dir / "frame_0000.pgm");
    check_grids_close(frame, video.frames[0], 0.5 / 255 + 1e-6);
    auto depth = read_pgm16_depth(v0.frame_dir / "depth_0000.pgm");
    check_grids_close(depth, video.depths[0], 0.5e-3 + 1e-6);
  }

  // 2D extraction: once, idempotent, forceable
  auto cfg2 = PipelineConfig::defaults_for_mode(2);
  cfg2.seed = seed;
  cfg2.codebook_size = 16;
  const fs::path arch2 = dirA / "archives_2d";
  auto s1 = extract_dataset(manifest, cfg2, arch2);
  CHECK(s1.processed == (int)n_videos);
  CHECK(s1.failed == 0);
  auto first_bytes = read_file(arch2 / (manifest.videos[0].id + ".tlar"));
  auto s2 = extract_dataset(manifest, cfg2, arch2);
  CHECK(s2.processed == 0);
  CHECK(s2.skipped == (int)n_videos);
  CHECK(read_file(arch2 / (manifest.videos[0].id + ".tlar")) == first_bytes);
  {
    auto forced = cfg2;
    forced.force = true;
    auto s3 = extract_dataset(manifest, forced, arch2);
    CHECK(s3.processed == (int)n_videos);
    CHECK(read_file(arch2 / (manifest.videos[0].id + ".tlar")) == first_bytes);
  }

  // archive contents equal a direct run of the tracking/assignment stages
  {
    const auto& v0 = manifest.videos[0];
    std::vector<FrameGray> frames;
    std::vector<FlowField2D> flows;
    for (int t = 0;; ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%04d.pgm", t);
      if (!fs::exists(v0.frame_dir / name)) break;
      frames.push_back(read_pgm8(v0.frame_dir / name));
    }
    REQUIRE(frames.size() == 24);
    for (int t = 0; t + 1 < (int)frames.size(); ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "flow_%04d.flo", t);
      flows.push_back(read_flo(v0.frame_dir / name));
    }
    auto trajs = track_2d(flows, frames, cfg2.tracker);
    auto archive = read_archive(arch2 / (v0.id + ".tlar"));
    REQUIRE(archive.records.size() == trajs.size());
    CHECK(archive.mode == 2);

    auto joints = joint_tracks_2d(read_skeleton(v0.skeleton));
    auto assigned = assign_2d(trajs, joints, cfg2.localize,
                              std::hypot(160.0, 120.0));
    auto want_kinds = kinds_2d();
    for (size_t i = 0; i < trajs.size(); ++i) {
      const auto& rec = archive.records[i];
      CHECK(rec.t0 == trajs[i].t0);
      CHECK(rec.joint == assigned[i]);
      REQUIRE(rec.points.size() == 32);
      CHECK(rec.points[0] == doctest::Approx(trajs[i].points[0][0]));
      REQUIRE(rec.blocks.size() == want_kinds.size());
      for (size_t b = 0; b < want_kinds.size(); ++b) {
        CHECK(rec.blocks[b].kind == want_kinds[b]);
        CHECK((int)rec.blocks[b].values.size() ==
              descriptor_dim(want_kinds[b], archive.L, cfg2.volume));
      }
    }
  }

  // 3D stages end to end
  auto cfg3 = PipelineConfig::defaults_for_mode(3);
  cfg3.seed = seed;
  cfg3.codebook_size = 16;
  const fs::path arch3 = dirA / "archives_3d";
  auto s3d = extract_dataset(manifest, cfg3, arch3);
  CHECK(s3d.processed == (int)n_videos);
  CHECK(s3d.failed == 0);

  const fs::path model3 = dirA / "model_3d";
  train_pipeline(manifest, cfg3, arch3, model3);
  CHECK(fs::exists(model3 / "codebooks.tlcb"));
  CHECK(fs::exists(model3 / "model.tlmd"));
  CHECK_FALSE(fs::exists(model3 / "selection.json"));  // selection disabled

  auto books = read_codebooks(model3 / "codebooks.tlcb");
  REQUIRE_FALSE(books.entries.empty());
  CHECK(books.entries.size() % kinds_3d().size() == 0);
  for (const auto& cb : books.entries) {
    CHECK(cb.K <= (uint32_t)cfg3.codebook_size);
    CHECK(cb.joint >= 0);  // no global vocabularies unless asked for
    CHECK(cb.dim == (uint32_t)descriptor_dim(cb.kind, 15, cfg3.volume));
  }

  const fs::path report3 = dirA / "report_3d";
  auto report = eval_pipeline(manifest, cfg3, arch3, model3, report3);
  CHECK(report.accuracy == doctest::Approx(1.0));
  REQUIRE(report.classes == std::vector<std::string>{"pulse_z", "slide_x"});
  for (size_t i = 0; i < report.confusion.size(); ++i) {
    int row = 0;
    for (int c : report.confusion[i]) row += c;
    CHECK(row == 2);  // per-class test count
  }
  CHECK(fs::exists(report3 / "confusion.csv"));
  CHECK(fs::exists(report3 / "confusion.ppm"));
  {
    std::ifstream csv(report3 / "confusion.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "true\\predicted,pulse_z,slide_x");
    auto j = nlohmann::json::parse(read_file(report3 / "report.json"));
    CHECK(j["accuracy"].get<double>() == doctest::Approx(report.accuracy));
    CHECK(j["test_count"].get<int>() == 4);
  }

  // wrong-mode archives are refused
  CHECK_THROWS(eval_pipeline(manifest, cfg2, arch3, model3, dirA / "r_bad"));

  // training never touches test archives: deleting them changes nothing
  {
    const fs::path model3b = dirA / "model_3d_b";
    for (const auto& id : manifest.test_ids)
      fs::remove(arch3 / (id + ".tlar"));
    train_pipeline(manifest, cfg3, arch3, model3b);
    CHECK(read_file(model3b / "codebooks.tlcb") ==
          read_file(model3 / "codebooks.tlcb"));
    CHECK(read_file(model3b / "model.tlmd") == read_file(model3 / "model.tlmd"));
  }

  // a video without its skeleton fails localized extraction but not the run
  {
    // pick a laterally moving video: radial ones track to nothing in 2D
    const auto moving = std::find_if(
        manifest.videos.begin(), manifest.videos.end(),
        [](const VideoEntry& v) { return v.label == "slide_x"; });
    REQUIRE(moving != manifest.videos.end());
    fs::remove(moving->skeleton);
    auto forced = cfg2;
    forced.force = true;
    auto stats = extract_dataset(manifest, forced, arch2);
    CHECK(stats.failed == 1);
    CHECK(stats.processed == (int)n_videos - 1);

    forced.global_bow = true;  // baseline mode carries on without joints
    auto stats2 = extract_dataset(manifest, forced, arch2);
    CHECK(stats2.failed == 0);
    auto archive = read_archive(arch2 / (moving->id + ".tlar"));
    REQUIRE_FALSE(archive.records.empty());
    for (const auto& rec : archive.records) CHECK(rec.joint == kRejected);
  }

  fs::remove_all(dirA);
}
