// Batch driver for the localized-trajectory pipeline: dataset synthesis,
// per-video feature extraction, codebook/classifier training, evaluation
// and artifact inspection.
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ltraj/archive.hpp"
#include "ltraj/encode.hpp"
#include "ltraj/flow_io.hpp"
#include "ltraj/fsutil.hpp"
#include "ltraj/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ltraj;

namespace {

fs::path manifest_path_for(const fs::path& data) {
  if (fs::is_regular_file(data)) return data;
  return data / "manifest.json";
}

void inspect_manifest(const fs::path& path) {
  const DatasetManifest m = load_manifest(path);
  std::set<std::string> classes;
  for (const auto& v : m.videos) classes.insert(v.label);
  std::printf("dataset %s\n", m.root.string().c_str());
  std::printf("  videos: %zu (train %zu, test %zu)\n", m.videos.size(),
              m.train_ids.size(), m.test_ids.size());
  std::printf("  classes: %zu (", classes.size());
  bool first = true;
  for (const auto& c : classes) {
    std::printf("%s%s", first ? "" : ", ", c.c_str());
    first = false;
  }
  std::printf(")\n");
  std::printf("  intrinsics: fx=%g fy=%g cx=%g cy=%g\n", m.intrinsics.fx,
              m.intrinsics.fy, m.intrinsics.cx, m.intrinsics.cy);
}

void inspect_archive(const fs::path& path) {
  const VideoArchive a = read_archive(path);
  std::printf("trajectory archive, %dD, L=%d, %zu records\n", a.mode, a.L,
              a.records.size());
  std::map<int, int> per_joint;
  for (const auto& r : a.records) ++per_joint[r.joint];
  for (const auto& [joint, count] : per_joint) {
    if (joint < 0)
      std::printf("  rejected: %d\n", count);
    else
      std::printf("  joint %d: %d\n", joint, count);
  }
  if (!a.records.empty()) {
    std::printf("  descriptor blocks:");
    for (const auto& b : a.records[0].blocks)
      std::printf(" %s[%zu]", kind_name(b.kind), b.values.size());
    std::printf("\n");
  }
}

void inspect_codebooks(const fs::path& path) {
  const CodebookSet set = read_codebooks(path);
  std::printf("codebook set, %zu entries, histogram dim %zu\n",
              set.entries.size(), set.histogram_dim());
  for (const auto& cb : set.entries) {
    if (cb.joint < 0)
      std::printf("  global %s: K=%u dim=%u\n", kind_name(cb.kind), cb.K,
                  cb.dim);
    else
      std::printf("  joint %d %s: K=%u dim=%u\n", cb.joint, kind_name(cb.kind),
                  cb.K, cb.dim);
  }
}

void inspect_model(const fs::path& path) {
  const LinearModel m = read_model(path);
  std::printf("linear model, %zu classes, feature dim %zu\n",
              m.classes.size(), m.dim);
  for (const auto& c : m.classes) std::printf("  %s\n", c.c_str());
}

void inspect_flo(const fs::path& path) {
  const FlowField2D f = read_flo(path);
  double sum = 0.0;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x)
      sum += std::hypot(f.u.at(x, y), f.v.at(x, y));
  std::printf("2D flow field %dx%d, mean |flow| %.4f px\n", f.width(),
              f.height(), sum / (f.width() * f.height()));
}

void inspect_sf3(const fs::path& path) {
  const SceneFlowField f = read_sf3(path);
  int valid = 0;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) valid += f.valid_at(x, y);
  std::printf("scene flow field %dx%d, %.1f%% valid\n", f.width(), f.height(),
              100.0 * valid / (f.width() * f.height()));
}

void inspect_file(const fs::path& path) {
  fs::path p = path;
  if (fs::is_directory(p)) p /= "manifest.json";
  const std::string data = read_file(p);
  const std::string magic = data.substr(0, std::min<size_t>(4, data.size()));
  if (magic == "TLAR") return inspect_archive(p);
  if (magic == "TLCB") return inspect_codebooks(p);
  if (magic == "TLMD") return inspect_model(p);
  if (magic == std::string("SF3\0", 4)) return inspect_sf3(p);
  if (magic == "PIEH") return inspect_flo(p);  // 202021.25f, little-endian
  if (magic.rfind("P5", 0) == 0 || magic.rfind("P6", 0) == 0) {
    std::printf("%s image (netpbm)\n", magic.substr(0, 2).c_str());
    return;
  }
  if (!data.empty() && data[0] == '{') return inspect_manifest(p);
  throw std::runtime_error("unrecognized file format: " + p.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized trajectory pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mode_str;
  uint64_t seed = 0;
  int jobs = 1;
  bool force = false;
  bool global_bow = false;
  auto* opt_config =
      app.add_option("--config", config_path, "JSON pipeline config");
  auto* opt_seed = app.add_option("--seed", seed, "Random seed");
  auto* opt_mode = app.add_option("--mode", mode_str, "Pipeline mode")
                       ->check(CLI::IsMember({"2d", "3d"}));
  auto* opt_jobs =
      app.add_option("--jobs", jobs, "Worker count")->check(CLI::PositiveNumber);
  auto* opt_force = app.add_flag("--force", force, "Overwrite existing outputs");
  auto* opt_global =
      app.add_flag("--global-bow", global_bow, "Global (non-localized) BoW");

  std::string preset;
  std::string out_dir;
  auto* cmd_synth = app.add_subcommand("synth", "Render a synthetic dataset");
  cmd_synth->add_option("--preset", preset, "Dataset preset")
      ->required()
      ->check(CLI::IsMember(dataset_preset_names()));
  cmd_synth->add_option("--out", out_dir, "Output directory")->required();

  std::string data_dir, archive_dir, model_dir, report_dir;
  auto* cmd_extract =
      app.add_subcommand("extract", "Extract per-video trajectory archives");
  cmd_extract->add_option("--data", data_dir, "Dataset directory or manifest")
      ->required();
  cmd_extract->add_option("--out", archive_dir, "Archive directory");

  auto* cmd_train =
      app.add_subcommand("train", "Train codebooks and classifier");
  cmd_train->add_option("--data", data_dir, "Dataset directory or manifest")
      ->required();
  cmd_train->add_option("--archives", archive_dir, "Archive directory");
  cmd_train->add_option("--model-dir", model_dir, "Model output directory");

  auto* cmd_eval = app.add_subcommand("eval", "Evaluate on the test split");
  cmd_eval->add_option("--data", data_dir, "Dataset directory or manifest")
      ->required();
  cmd_eval->add_option("--archives", archive_dir, "Archive directory");
  cmd_eval->add_option("--model-dir", model_dir, "Model directory");
  cmd_eval->add_option("--report-dir", report_dir, "Report output directory");

  std::string inspect_target;
  bool want_default_config = false;
  auto* cmd_inspect = app.add_subcommand("inspect", "Describe a pipeline file");
  cmd_inspect->add_option("file", inspect_target, "File or dataset directory");
  cmd_inspect->add_flag("--default-config", want_default_config,
                        "Print the default config JSON");

  for (auto* sub : {cmd_synth, cmd_extract, cmd_train, cmd_eval, cmd_inspect})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    const int cli_mode = *opt_mode ? (mode_str == "3d" ? 3 : 2) : 0;

    if (cmd_inspect->parsed()) {
      if (want_default_config) {
        std::fputs(default_config_json(cli_mode ? cli_mode : 2).c_str(),
                   stdout);
        return 0;
      }
      if (inspect_target.empty())
        throw std::runtime_error("inspect: give a file or --default-config");
      inspect_file(inspect_target);
      return 0;
    }

    PipelineConfig cfg =
        load_config(*opt_config ? fs::path(config_path) : fs::path(), cli_mode);
    if (*opt_seed) cfg.seed = seed;
    if (*opt_force) cfg.force = true;
    if (*opt_jobs) cfg.jobs = jobs;
    if (*opt_global) cfg.global_bow = true;

    if (cmd_synth->parsed()) {
      const DatasetSpec spec = dataset_preset(preset);
      synth_dataset(spec, out_dir, cfg.seed, cfg.jobs);
      std::printf("wrote %zu videos (%zu classes) to %s\n",
                  spec.classes.size() * (size_t)spec.videos_per_class,
                  spec.classes.size(), out_dir.c_str());
      return 0;
    }

    const DatasetManifest manifest =
        load_manifest(manifest_path_for(data_dir));
    const fs::path root = manifest.root;
    const fs::path archives =
        archive_dir.empty() ? root / "archives" : fs::path(archive_dir);

    if (cmd_extract->parsed()) {
      const ExtractStats stats = extract_dataset(manifest, cfg, archives);
      std::printf("extracted %d, skipped %d, failed %d\n", stats.processed,
                  stats.skipped, stats.failed);
      return stats.failed > 0 ? 1 : 0;
    }

    const fs::path models =
        model_dir.empty() ? root / "model" : fs::path(model_dir);

    if (cmd_train->parsed()) {
      train_pipeline(manifest, cfg, archives, models);
      std::printf("wrote %s and %s\n",
                  (models / "codebooks.tlcb").string().c_str(),
                  (models / "model.tlmd").string().c_str());
      return 0;
    }

    const fs::path reports =
        report_dir.empty() ? root / "report" : fs::path(report_dir);
    const EvalReport report =
        eval_pipeline(manifest, cfg, archives, models, reports);
    std::printf("accuracy %.4f over %zu test videos\n", report.accuracy,
                manifest.test_ids.size());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
