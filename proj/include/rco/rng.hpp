// Copyright 2026 The RCO Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RCO_RNG_HPP_
#define RCO_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <limits>

namespace rco {

/// Counter-based SplitMix64 stream.
///
/// Draw n of a stream with key s is splitmix64_mix(s + n * golden_gamma), so
/// any position can be reached in O(1) and a stream is fully described by
/// (seed, position). Child streams are keyed by hashing the parent seed with a
/// stream id; they never share state with the parent. Reproducible within
/// this implementation only.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t position = 0)
      : seed_(seed), position_(position) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    ++position_;
    return mix(seed_ + position_ * kGamma);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] (inclusive), unbiased by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());
    const std::uint64_t limit = max() - max() % span;
    std::uint64_t draw = next_u64();
    while (draw >= limit) draw = next_u64();
    return lo + static_cast<std::int64_t>(draw % span);
  }

  /// Independent child stream; the parent position is not advanced.
  RngStream fork(std::uint64_t stream_id) const {
    return RngStream(mix(seed_ ^ mix(stream_id * kGamma + 0x632be59bd9b4e019ULL)));
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  std::uint64_t seed_;
  std::uint64_t position_;
};

}  // namespace rco

#endif  // RCO_RNG_HPP_
