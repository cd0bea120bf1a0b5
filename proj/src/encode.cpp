#include "ltraj/encode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ltraj/fsutil.hpp"
#include "ltraj/localize.hpp"
#include "ltraj/rng.hpp"
#include "ltraj/serialize.hpp"

namespace ltraj {

namespace {

double sqdist(const float* a, const float* b, int dim) {
  double s = 0;
  for (int i = 0; i < dim; ++i) {
    const double d = (double)a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

const Codebook* CodebookSet::find(int joint, DescriptorKind kind) const {
  for (const auto& cb : entries)
    if (cb.joint == joint && cb.kind == kind) return &cb;
  return nullptr;
}

void CodebookSet::sort() {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Codebook& a, const Codebook& b) {
                     if (a.joint != b.joint) return a.joint < b.joint;
                     return (uint8_t)a.kind < (uint8_t)b.kind;
                   });
}

size_t CodebookSet::histogram_dim() const {
  size_t d = 0;
  for (const auto& cb : entries) d += cb.K;
  return d;
}

KmeansResult kmeans(const std::vector<const float*>& points, int dim, int K,
                    uint64_t seed) {
  const int n = (int)points.size();
  if (K < 1) throw std::invalid_argument("kmeans: K must be >= 1");
  if (n < K) throw std::invalid_argument("kmeans: fewer points than K");

  Rng rng(seed);
  std::vector<double> centroids((size_t)K * dim);
  auto centroid = [&](int k) { return centroids.data() + (size_t)k * dim; };

  // k-means++ seeding.
  {
    const float* first = points[rng.below(n)];
    for (int i = 0; i < dim; ++i) centroid(0)[i] = first[i];
    std::vector<double> d2(n);
    for (int k = 1; k < K; ++k) {
      double total = 0;
      for (int i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::max();
        for (int j = 0; j < k; ++j) {
          double s = 0;
          for (int c = 0; c < dim; ++c) {
            const double d = points[i][c] - centroid(j)[c];
            s += d * d;
          }
          best = std::min(best, s);
        }
        d2[i] = best;
        total += best;
      }
      int pick;
      if (total <= 0) {
        pick = (int)rng.below(n);  // all points coincide with a centroid
      } else {
        double target = rng.uniform() * total;
        pick = n - 1;
        for (int i = 0; i < n; ++i) {
          target -= d2[i];
          if (target <= 0) {
            pick = i;
            break;
          }
        }
      }
      for (int i = 0; i < dim; ++i) centroid(k)[i] = points[pick][i];
    }
  }

  std::vector<int> assign(n, 0);
  std::vector<double> dist_to_centroid(n, 0.0);
  KmeansResult out;

  for (int iter = 0; iter < 100; ++iter) {
    // Assignment (ties to the lowest index via strict <).
    double sse = 0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      int bk = 0;
      for (int k = 0; k < K; ++k) {
        double s = 0;
        for (int c = 0; c < dim; ++c) {
          const double d = points[i][c] - centroid(k)[c];
          s += d * d;
        }
        if (s < best) {
          best = s;
          bk = k;
        }
      }
      assign[i] = bk;
      dist_to_centroid[i] = best;
      sse += best;
    }
    out.sse_trace.push_back(sse);

    // Update.
    std::vector<double> sums((size_t)K * dim, 0.0);
    std::vector<int> counts(K, 0);
    for (int i = 0; i < n; ++i) {
      ++counts[assign[i]];
      double* s = sums.data() + (size_t)assign[i] * dim;
      for (int c = 0; c < dim; ++c) s[c] += points[i][c];
    }

    double movement = 0;
    for (int k = 0; k < K; ++k) {
      if (counts[k] == 0) continue;
      double m2 = 0;
      for (int c = 0; c < dim; ++c) {
        const double nv = sums[(size_t)k * dim + c] / counts[k];
        const double d = nv - centroid(k)[c];
        m2 += d * d;
        centroid(k)[c] = nv;
      }
      movement = std::max(movement, std::sqrt(m2));
    }

    // Re-seed empty clusters to the farthest point from its centroid.
    for (int k = 0; k < K; ++k) {
      if (counts[k] != 0) continue;
      int far = 0;
      double fd = -1;
      for (int i = 0; i < n; ++i) {
        if (dist_to_centroid[i] > fd) {
          fd = dist_to_centroid[i];
          far = i;
        }
      }
      for (int c = 0; c < dim; ++c) centroid(k)[c] = points[far][c];
      dist_to_centroid[far] = 0;  // don't hand the same point to two clusters
      movement = std::numeric_limits<double>::max();
    }

    if (movement < 1e-6) break;
  }

  out.centroids.resize((size_t)K * dim);
  for (size_t i = 0; i < centroids.size(); ++i)
    out.centroids[i] = (float)centroids[i];
  return out;
}

int nearest_word(const Codebook& cb, const float* v) {
  int best = 0;
  double bd = std::numeric_limits<double>::max();
  for (uint32_t k = 0; k < cb.K; ++k) {
    const double d = sqdist(cb.words.data() + (size_t)k * cb.dim, v, cb.dim);
    if (d < bd) {
      bd = d;
      best = (int)k;
    }
  }
  return best;
}

namespace {

std::vector<float> encode_impl(const std::vector<EncodeItem>& items,
                               const CodebookSet& codebooks, bool global) {
  std::vector<float> H(codebooks.histogram_dim(), 0.0f);

  // Segment offsets in codebook order.
  std::vector<size_t> offsets(codebooks.entries.size());
  size_t off = 0;
  for (size_t i = 0; i < codebooks.entries.size(); ++i) {
    offsets[i] = off;
    off += codebooks.entries[i].K;
  }

  auto segment_index = [&](int joint, DescriptorKind kind) -> size_t {
    for (size_t i = 0; i < codebooks.entries.size(); ++i)
      if (codebooks.entries[i].joint == joint &&
          codebooks.entries[i].kind == kind)
        return i;
    throw std::runtime_error("encode: missing codebook for joint/kind");
  };

  for (const auto& item : items) {
    const int joint = global ? -1 : item.joint;
    if (!global && item.joint == kRejected) continue;
    for (const auto& block : *item.blocks) {
      const size_t si = segment_index(joint, block.kind);
      const Codebook& cb = codebooks.entries[si];
      if (cb.K == 0) continue;
      if (cb.dim != block.values.size())
        throw std::runtime_error("encode: descriptor dimension mismatch");
      const int w = nearest_word(cb, block.values.data());
      H[offsets[si] + w] += 1.0f;
    }
  }

  for (size_t i = 0; i < codebooks.entries.size(); ++i) {
    double s = 0;
    for (uint32_t k = 0; k < codebooks.entries[i].K; ++k) s += H[offsets[i] + k];
    if (s > 0)
      for (uint32_t k = 0; k < codebooks.entries[i].K; ++k)
        H[offsets[i] + k] = (float)(H[offsets[i] + k] / s);
  }
  return H;
}

}  // namespace

std::vector<float> encode_local(const std::vector<EncodeItem>& items,
                                const CodebookSet& codebooks) {
  return encode_impl(items, codebooks, false);
}

std::vector<float> encode_global(const std::vector<EncodeItem>& items,
                                 const CodebookSet& codebooks) {
  return encode_impl(items, codebooks, true);
}

double confidence(const std::vector<double>& posteriors) {
  if (posteriors.empty())
    throw std::invalid_argument("confidence: empty posterior set");
  for (double p : posteriors)
    if (!(p > 0.0) || p > 1.0)
      throw std::invalid_argument("confidence: posterior outside (0,1]");
  std::vector<double> s = posteriors;
  const size_t k = (s.size() - 1) / 2;  // lower median
  std::nth_element(s.begin(), s.begin() + k, s.end());
  return std::log(s[k]);
}

double ambiguity(const std::vector<double>& posteriors) {
  double a = 0;
  for (double p : posteriors) {
    if (!(p > 0.0) || p > 1.0)
      throw std::invalid_argument("ambiguity: posterior outside (0,1]");
    a += std::log(p);
  }
  return a;
}

void write_codebooks(const std::filesystem::path& path,
                     const CodebookSet& set) {
  ByteWriter w;
  w.magic("TLCB");
  w.u32(1);
  w.u32((uint32_t)set.entries.size());
  for (const auto& cb : set.entries) {
    w.u8((uint8_t)cb.kind);
    w.i32(cb.joint);
    w.u32(cb.K);
    w.u32(cb.dim);
    for (float v : cb.words) w.f32(v);
  }
  atomic_write(path, w.str());
}

CodebookSet read_codebooks(const std::filesystem::path& path) {
  ByteReader r(read_file(path));
  r.expect_magic("TLCB", "codebook file");
  const uint32_t version = r.u32();
  if (version != 1) throw std::runtime_error("codebook file: unknown version");
  CodebookSet set;
  const uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    Codebook cb;
    cb.kind = (DescriptorKind)r.u8();
    cb.joint = r.i32();
    cb.K = r.u32();
    cb.dim = r.u32();
    cb.words.resize((size_t)cb.K * cb.dim);
    for (auto& v : cb.words) v = r.f32();
    set.entries.push_back(std::move(cb));
  }
  return set;
}

}  // namespace ltraj
