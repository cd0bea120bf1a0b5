#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "ltraj/encode.hpp"
#include "ltraj/fsutil.hpp"
#include "ltraj/localize.hpp"
#include "ltraj/rng.hpp"

using namespace ltraj;
namespace fs = std::filesystem;

namespace {

std::vector<const float*> as_ptrs(const std::vector<std::vector<float>>& pts) {
  std::vector<const float*> out;
  for (const auto& p : pts) out.push_back(p.data());
  return out;
}

Codebook make_codebook(int joint, DescriptorKind kind,
                       std::vector<std::vector<float>> words) {
  Codebook cb;
  cb.joint = joint;
  cb.kind = kind;
  cb.K = (uint32_t)words.size();
  cb.dim = (uint32_t)words[0].size();
  for (const auto& w : words) cb.words.insert(cb.words.end(), w.begin(), w.end());
  return cb;
}

DescriptorBlock block(DescriptorKind kind, std::vector<float> v) {
  return {kind, std::move(v)};
}

}  // namespace

TEST_CASE("kmeans separates two obvious 1-D clusters") {
  std::vector<std::vector<float>> pts{{0.f}, {1.f}, {10.f}, {11.f}};
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto r = kmeans(as_ptrs(pts), 1, 2, seed);
    REQUIRE(r.centroids.size() == 2);
    std::vector<float> c{r.centroids[0], r.centroids[1]};
    std::sort(c.begin(), c.end());
    CHECK(std::abs(c[0] - 0.5f) <= 1e-9);
    CHECK(std::abs(c[1] - 10.5f) <= 1e-9);
    CHECK(r.sse_trace.back() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("kmeans with K=1 recovers the mean") {
  Rng rng(5);
  std::vector<std::vector<float>> pts;
  std::vector<double> mean(3, 0.0);
  for (int i = 0; i < 50; ++i) {
    std::vector<float> p;
    for (int c = 0; c < 3; ++c) {
      p.push_back((float)rng.uniform(-5, 5));
      mean[c] += p.back();
    }
    pts.push_back(std::move(p));
  }
  for (double& m : mean) m /= 50;
  auto r = kmeans(as_ptrs(pts), 3, 1, 7);
  for (int c = 0; c < 3; ++c)
    CHECK(r.centroids[c] == doctest::Approx(mean[c]).epsilon(1e-6));
}

TEST_CASE("kmeans with K=n pins every point, SSE 0") {
  Rng rng(6);
  std::vector<std::vector<float>> pts;
  for (int i = 0; i < 8; ++i)
    pts.push_back({(float)rng.uniform(0, 1), (float)rng.uniform(0, 1)});
  auto r = kmeans(as_ptrs(pts), 2, 8, 9);
  CHECK(r.sse_trace.back() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kmeans SSE trace never increases") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed * 977 + 13);
    std::vector<std::vector<float>> pts;
    for (int i = 0; i < 60; ++i) {
      std::vector<float> p;
      for (int c = 0; c < 4; ++c) p.push_back((float)rng.uniform(-2, 2));
      pts.push_back(std::move(p));
    }
    auto r = kmeans(as_ptrs(pts), 4, 5, seed);
    REQUIRE_FALSE(r.sse_trace.empty());
    for (size_t i = 1; i < r.sse_trace.size(); ++i)
      CHECK(r.sse_trace[i] <= r.sse_trace[i - 1] + 1e-9);
  }
}

TEST_CASE("kmeans is deterministic per seed and rejects n < K") {
  std::vector<std::vector<float>> pts;
  Rng rng(8);
  for (int i = 0; i < 30; ++i)
    pts.push_back({(float)rng.uniform(0, 1), (float)rng.uniform(0, 1)});
  auto a = kmeans(as_ptrs(pts), 2, 4, 123);
  auto b = kmeans(as_ptrs(pts), 2, 4, 123);
  CHECK(a.centroids == b.centroids);

  std::vector<std::vector<float>> few{{0.f}, {1.f}, {2.f}};
  CHECK_THROWS_AS(kmeans(as_ptrs(few), 1, 4, 0), std::invalid_argument);
  CHECK_THROWS_AS(kmeans(as_ptrs(few), 1, 0, 0), std::invalid_argument);
}

TEST_CASE("nearest_word breaks ties toward the lower index") {
  auto cb = make_codebook(0, DescriptorKind::TSD, {{0.f}, {2.f}, {2.f}});
  float mid = 1.0f;     // exactly between words 0 and 1
  CHECK(nearest_word(cb, &mid) == 0);
  float two = 2.0f;     // words 1 and 2 identical
  CHECK(nearest_word(cb, &two) == 1);
  float low = -5.0f;
  CHECK(nearest_word(cb, &low) == 0);
}

TEST_CASE("codebook sets sort by joint then kind and sum their sizes") {
  CodebookSet set;
  set.entries.push_back(make_codebook(1, DescriptorKind::TSD, {{0.f}}));
  set.entries.push_back(make_codebook(0, DescriptorKind::HOG, {{0.f}, {1.f}}));
  set.entries.push_back(make_codebook(0, DescriptorKind::TSD, {{0.f}, {1.f}, {2.f}}));
  set.sort();
  CHECK(set.entries[0].joint == 0);
  CHECK(set.entries[0].kind == DescriptorKind::TSD);
  CHECK(set.entries[1].kind == DescriptorKind::HOG);
  CHECK(set.entries[2].joint == 1);
  CHECK(set.histogram_dim() == 6);
  CHECK(set.find(0, DescriptorKind::HOG) == &set.entries[1]);
  CHECK(set.find(3, DescriptorKind::HOG) == nullptr);
}

TEST_CASE("local encoding: votes land in per-joint segments, L1 per segment") {
  CodebookSet set;
  set.entries.push_back(
      make_codebook(0, DescriptorKind::TSD, {{0.f, 0.f}, {10.f, 10.f}}));
  set.entries.push_back(
      make_codebook(1, DescriptorKind::TSD, {{0.f, 0.f}, {10.f, 10.f}}));
  set.sort();

  std::vector<DescriptorBlock> near0{block(DescriptorKind::TSD, {0.1f, 0.f})};
  std::vector<DescriptorBlock> far0{block(DescriptorKind::TSD, {9.f, 9.f})};
  std::vector<DescriptorBlock> far1{block(DescriptorKind::TSD, {10.f, 10.f})};
  std::vector<DescriptorBlock> junk{block(DescriptorKind::TSD, {500.f, 0.f})};

  std::vector<EncodeItem> items{
      {0, &near0}, {0, &far0}, {1, &far1}, {kRejected, &junk}};
  auto H = encode_local(items, set);
  REQUIRE(H.size() == 4);
  CHECK(H[0] == doctest::Approx(0.5));
  CHECK(H[1] == doctest::Approx(0.5));
  CHECK(H[2] == doctest::Approx(0.0));
  CHECK(H[3] == doctest::Approx(1.0));

  // joint without a codebook
  std::vector<EncodeItem> bad{{5, &near0}};
  CHECK_THROWS_AS(encode_local(bad, set), std::runtime_error);

  // descriptor width must match the vocabulary
  std::vector<DescriptorBlock> wide{block(DescriptorKind::TSD, {1.f, 2.f, 3.f})};
  std::vector<EncodeItem> mismatched{{0, &wide}};
  CHECK_THROWS_AS(encode_local(mismatched, set), std::runtime_error);
}

TEST_CASE("empty segments stay all-zero instead of being normalized") {
  CodebookSet set;
  set.entries.push_back(make_codebook(0, DescriptorKind::TSD, {{0.f}, {1.f}}));
  auto H = encode_local({}, set);
  CHECK(H == std::vector<float>{0.f, 0.f});
}

TEST_CASE("global encoding with one joint equals local encoding") {
  Rng rng(21);
  std::vector<std::vector<float>> words;
  for (int k = 0; k < 4; ++k)
    words.push_back({(float)rng.uniform(0, 1), (float)rng.uniform(0, 1),
                     (float)rng.uniform(0, 1)});
  CodebookSet local, global;
  local.entries.push_back(make_codebook(2, DescriptorKind::TSD, words));
  global.entries.push_back(make_codebook(-1, DescriptorKind::TSD, words));

  std::vector<std::vector<DescriptorBlock>> storage;
  for (int i = 0; i < 40; ++i)
    storage.push_back({block(DescriptorKind::TSD,
                             {(float)rng.uniform(0, 1), (float)rng.uniform(0, 1),
                              (float)rng.uniform(0, 1)})});
  std::vector<EncodeItem> items;
  for (const auto& s : storage) items.push_back({2, &s});

  auto lh = encode_local(items, local);
  auto gh = encode_global(items, global);
  REQUIRE(lh.size() == gh.size());
  for (size_t i = 0; i < lh.size(); ++i) CHECK(lh[i] == gh[i]);
}

TEST_CASE("global encoding counts rejected trajectories, local drops them") {
  CodebookSet local, global;
  local.entries.push_back(make_codebook(0, DescriptorKind::TSD, {{0.f}, {1.f}}));
  global.entries.push_back(make_codebook(-1, DescriptorKind::TSD, {{0.f}, {1.f}}));

  std::vector<DescriptorBlock> a{block(DescriptorKind::TSD, {0.f})};
  std::vector<DescriptorBlock> b{block(DescriptorKind::TSD, {1.f})};
  std::vector<EncodeItem> items{{0, &a}, {kRejected, &b}};

  auto lh = encode_local(items, local);
  CHECK(lh[0] == doctest::Approx(1.0));
  CHECK(lh[1] == doctest::Approx(0.0));
  auto gh = encode_global(items, global);
  CHECK(gh[0] == doctest::Approx(0.5));
  CHECK(gh[1] == doctest::Approx(0.5));
}

TEST_CASE("confidence is the lower-median log posterior") {
  CHECK(confidence({0.8}) == doctest::Approx(std::log(0.8)).epsilon(1e-12));
  CHECK(confidence({0.9, 0.5, 0.8}) ==
        doctest::Approx(std::log(0.8)).epsilon(1e-12));
  CHECK(confidence({0.6, 0.4}) == doctest::Approx(std::log(0.4)).epsilon(1e-12));
  CHECK(confidence({1.0, 1.0, 1.0}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(confidence({}), std::invalid_argument);
  CHECK_THROWS_AS(confidence({0.5, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(confidence({1.5}), std::invalid_argument);
}

TEST_CASE("ambiguity sums log posteriors, empty scores zero") {
  CHECK(ambiguity({0.5, 0.5}) ==
        doctest::Approx(2 * std::log(0.5)).epsilon(1e-12));
  CHECK(ambiguity({}) == 0.0);
  CHECK(ambiguity({1.0}) == 0.0);
  CHECK_THROWS_AS(ambiguity({-0.1}), std::invalid_argument);
}

TEST_CASE("codebook files round trip") {
  auto dir = fs::temp_directory_path() / "ltraj_encode_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  CodebookSet set;
  set.entries.push_back(
      make_codebook(-1, DescriptorKind::HOG, {{0.5f, -1.25f}, {3.f, 4.f}}));
  set.entries.push_back(make_codebook(2, DescriptorKind::MBH, {{7.f, 8.f, 9.f}}));
  set.sort();
  write_codebooks(dir / "cb.tlcb", set);

  auto r = read_codebooks(dir / "cb.tlcb");
  REQUIRE(r.entries.size() == set.entries.size());
  for (size_t i = 0; i < r.entries.size(); ++i) {
    CHECK(r.entries[i].joint == set.entries[i].joint);
    CHECK(r.entries[i].kind == set.entries[i].kind);
    CHECK(r.entries[i].K == set.entries[i].K);
    CHECK(r.entries[i].dim == set.entries[i].dim);
    CHECK(r.entries[i].words == set.entries[i].words);
  }

  atomic_write(dir / "junk.tlcb", std::string("NOPE", 4));
  CHECK_THROWS_AS(read_codebooks(dir / "junk.tlcb"), std::runtime_error);
  fs::remove_all(dir);
}
