#include "orcsmc/random.hpp"

#include <vector>

namespace orcsmc {

StreamFactory StreamFactory::child(std::uint64_t tag) const {
  require(depth_ < kMaxDepth, "StreamFactory: stream path too deep");
  StreamFactory out = *this;
  out.tags_[out.depth_++] = tag;
  return out;
}

Rng StreamFactory::at(std::uint64_t step) const {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (depth_ + 3));
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed_);
  push(depth_);
  for (std::size_t i = 0; i < depth_; ++i) push(tags_[i]);
  push(step);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

}  // namespace orcsmc
