#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ltraj/archive.hpp"
#include "ltraj/classify.hpp"
#include "ltraj/descriptors.hpp"
#include "ltraj/encode.hpp"
#include "ltraj/flow.hpp"
#include "ltraj/localize.hpp"
#include "ltraj/synth.hpp"
#include "ltraj/tracking.hpp"

namespace ltraj {

/// One video's files, paths relative to the dataset root until load time.
struct VideoEntry {
  std::string id;
  std::filesystem::path frame_dir;
  std::filesystem::path depth_dir;  // empty when the video has no depth
  std::filesystem::path skeleton;   // empty when the video has no skeleton
  std::string label;
};

struct DatasetManifest {
  std::filesystem::path root;
  CameraIntrinsics intrinsics;
  std::vector<VideoEntry> videos;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;

  const VideoEntry* find(const std::string& id) const;
  /// Referenced files exist, splits are disjoint and name known videos,
  /// labels non-empty.
  void validate() const;
};

DatasetManifest load_manifest(const std::filesystem::path& manifest_path);

struct SelectionConfig {
  bool enabled = false;
  int sample_size = 2000;  // trajectories drawn per video into the pool
  int candidates = 4;
  double holdout_fraction = 0.25;
  double lambda = 0.0;  // ambiguity weight; <= 0 means 1/|holdout|
};

struct PipelineConfig {
  int mode = 2;  // 2 or 3
  uint64_t seed = 0;
  bool global_bow = false;
  bool force = false;
  int jobs = 1;
  FlowConfig flow;
  TrackerConfig tracker;
  LocalizeConfig localize;
  VolumeSpec volume;
  int codebook_size = 128;
  SelectionConfig selection;
  double svm_c = 1.0;
  int svm_epochs = 200;

  static PipelineConfig defaults_for_mode(int mode);
};

/// Full-defaulting JSON load: absent keys take the mode's defaults.
/// cli_mode overrides the file's mode when nonzero (2 or 3).
PipelineConfig load_config(const std::filesystem::path& path, int cli_mode);
std::string default_config_json(int mode);

/// A named synthetic dataset: per-class video templates plus split sizes.
struct DatasetSpec {
  std::string name;
  int videos_per_class = 0;
  int train_per_class = 0;
  bool emit_gt_flow = false;
  bool emit_gt_scene_flow = false;
  std::vector<SynthSpec> classes;  // one template per class; label set inside
};

/// Built-in dataset presets; throws on unknown name.
DatasetSpec dataset_preset(const std::string& name);
std::vector<std::string> dataset_preset_names();

/// Renders the dataset tree (frames, depth, skeletons, optional ground-truth
/// motion caches, manifest, splits, labels). Deterministic per seed at any
/// job count.
void synth_dataset(const DatasetSpec& spec, const std::filesystem::path& out,
                   uint64_t seed, int jobs);

struct ExtractStats {
  int processed = 0;
  int skipped = 0;
  int failed = 0;
};

/// Per-video flow -> tracking -> localization -> descriptors, written as one
/// archive per video under archive_dir. Existing archives are kept unless
/// cfg.force. Per-video failures are reported and counted, not fatal.
ExtractStats extract_dataset(const DatasetManifest& manifest,
                             const PipelineConfig& cfg,
                             const std::filesystem::path& archive_dir);

/// Codebook learning (with optional confidence/ambiguity pool selection),
/// encoding and classifier training on the train split only. Writes
/// codebooks.tlcb, model.tlmd and, when selection ran, selection.json.
void train_pipeline(const DatasetManifest& manifest, const PipelineConfig& cfg,
                    const std::filesystem::path& archive_dir,
                    const std::filesystem::path& model_dir);

/// Test-split evaluation; writes confusion.csv, confusion.ppm, report.json.
/// Returns the report.
EvalReport eval_pipeline(const DatasetManifest& manifest,
                         const PipelineConfig& cfg,
                         const std::filesystem::path& archive_dir,
                         const std::filesystem::path& model_dir,
                         const std::filesystem::path& report_dir);

/// Encodes one archive against a codebook set (local or global layout).
std::vector<float> encode_archive(const VideoArchive& archive,
                                  const CodebookSet& codebooks,
                                  bool global_bow);

}  // namespace ltraj
