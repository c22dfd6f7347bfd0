#pragma once

#include "orcsmc/core.hpp"

#include <array>
#include <cstdint>

namespace orcsmc {

/// Deterministic tree of random streams.
///
/// A factory is identified by a 64-bit seed plus a short path of tags. `at(i)`
/// yields the generator for step `i` of that stream, so re-running a step with
/// the same key reproduces its draws exactly and distinct keys are independent
/// (up to seed_seq mixing).
class StreamFactory {
 public:
  static constexpr std::size_t kMaxDepth = 6;

  StreamFactory() = default;
  explicit StreamFactory(std::uint64_t seed) : seed_(seed) {}

  /// Stream with one more tag appended.
  StreamFactory child(std::uint64_t tag) const;

  /// Generator for step `step` of this stream.
  Rng at(std::uint64_t step) const;

  std::uint64_t seed() const noexcept { return seed_; }

  friend bool operator==(const StreamFactory&, const StreamFactory&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, kMaxDepth> tags_{};
  std::size_t depth_ = 0;
};

// Tags used by the controllers.
namespace stream_tag {
inline constexpr std::uint64_t kEstimation = 0x45535431;  // "EST1"
inline constexpr std::uint64_t kLearning = 0x4c524e31;    // "LRN1"
inline constexpr std::uint64_t kCsmc = 0x43534d43;        // "CSMC"
inline constexpr std::uint64_t kSimulate = 0x53494d55;    // "SIMU"
}  // namespace stream_tag

}  // namespace orcsmc
