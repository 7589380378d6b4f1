#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace sigdistill {

using Rng = std::mt19937_64;

// Independent stream keyed by a base seed plus a path of stream ids
// (e.g. {iteration, class}). Equal keys give equal streams.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * stream.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto s : stream) push(s);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Derives a child seed; used when a component wants a plain integer seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  return make_rng(seed, stream)();
}

// Stream tags so that different consumers of one seed never collide.
namespace stream_tag {
inline constexpr std::uint64_t init = 0x696e6974;
inline constexpr std::uint64_t network = 0x6e6574;
inline constexpr std::uint64_t batch = 0x6261746368;
inline constexpr std::uint64_t eval_run = 0x6576616c;
inline constexpr std::uint64_t shuffle = 0x73687566;
inline constexpr std::uint64_t split = 0x73706c6974;
inline constexpr std::uint64_t generate = 0x67656e;
}  // namespace stream_tag

}  // namespace sigdistill
