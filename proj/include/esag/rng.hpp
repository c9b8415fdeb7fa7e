#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace esag {

/// A seeded random stream. Streams are never shared between consumers;
/// parallel work derives one substream per work item from (seed, path)
/// so results do not depend on scheduling.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  explicit RandomStream(std::seed_seq& seq) : engine_(seq) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Independent substream keyed by a root seed and a path of indices,
/// e.g. derive_stream(seed, {replicate, kTagData}).
RandomStream derive_stream(std::uint64_t seed,
                           std::initializer_list<std::uint64_t> path);

// Tags distinguishing the purpose of a substream within one work item.
enum StreamTag : std::uint64_t {
  kTagData = 1,
  kTagNullFit = 2,
  kTagAltFit = 3,
  kTagMoment = 4,
  kTagPredict = 5,
  kTagResample = 6,
  kTagCovariates = 7,
  kTagGof = 8,
};

}  // namespace esag
