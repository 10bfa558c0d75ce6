#pragma once

#include <cstdint>
#include <random>

namespace gluekit {

/// Deterministic random stream addressed by (seed, stream_id).
///
/// Monte-Carlo loops derive one substream per draw (`substream(k)`), so the
/// k-th draw sees the same numbers whether the loop runs serially or on a
/// worker pool. A stream object is cheap to create but not thread-safe; give
/// each task its own.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Child stream k; independent of the parent and of every other child.
  RngStream substream(std::uint64_t k) const;

  double normal();
  double uniform();
  /// +1 or -1 with equal probability.
  double sign();

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace gluekit
