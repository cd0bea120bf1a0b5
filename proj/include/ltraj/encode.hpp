#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ltraj/descriptors.hpp"

namespace ltraj {

/// A visual vocabulary for one (joint, kind) pair; joint -1 is the global
/// (localization-free) vocabulary.
struct Codebook {
  DescriptorKind kind = DescriptorKind::TSD;
  int joint = -1;
  uint32_t K = 0;
  uint32_t dim = 0;
  std::vector<float> words;  // K * dim, row-major
};

/// Codebooks sorted by (joint, kind); the order defines the histogram
/// layout.
struct CodebookSet {
  std::vector<Codebook> entries;

  const Codebook* find(int joint, DescriptorKind kind) const;
  void sort();
  size_t histogram_dim() const;
};

struct KmeansResult {
  std::vector<float> centroids;  // K * dim
  std::vector<double> sse_trace; // within-cluster SSE after each iteration
};

/// Seeded k-means++ initialization followed by Lloyd iterations until
/// centroid movement < 1e-6 or 100 iterations. Empty clusters are re-seeded
/// to the point farthest from its centroid. Throws when fewer points than K.
KmeansResult kmeans(const std::vector<const float*>& points, int dim, int K,
                    uint64_t seed);

/// Index of the nearest word by Euclidean distance; ties to the lowest
/// index.
int nearest_word(const Codebook& cb, const float* v);

/// One trajectory's worth of encoding input: its assigned joint (or
/// kRejected) and its descriptor blocks in layout order.
struct EncodeItem {
  int joint;
  const std::vector<DescriptorBlock>* blocks;
};

/// Local Bag-of-Words: each assigned trajectory votes its nearest word into
/// the (assigned joint, kind) segment. Rejected trajectories are skipped.
/// Segments are L1-normalized (or all-zero when empty).
std::vector<float> encode_local(const std::vector<EncodeItem>& items,
                                const CodebookSet& codebooks);

/// Global baseline: every trajectory (including rejected ones) votes into
/// per-kind global segments (joint -1 codebooks).
std::vector<float> encode_global(const std::vector<EncodeItem>& items,
                                 const CodebookSet& codebooks);

/// Median log-posterior of the true label over the sampled training set.
/// Even-sized inputs use the lower median. Posteriors must lie in (0,1].
double confidence(const std::vector<double>& posteriors);

/// Summed log-posterior over the held-out complement; empty -> 0.
double ambiguity(const std::vector<double>& posteriors);

/// Versioned binary codebook file ("TLCB").
void write_codebooks(const std::filesystem::path& path, const CodebookSet& set);
CodebookSet read_codebooks(const std::filesystem::path& path);

}  // namespace ltraj
