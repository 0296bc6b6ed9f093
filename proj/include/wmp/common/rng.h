// Copyright 2026 The wm_policy Authors
//
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

#ifndef WMP_COMMON_RNG_H_
#define WMP_COMMON_RNG_H_

#include <cstdint>
#include <random>

namespace wmp {

// Seeded random stream. Every stochastic component owns one of these; child
// streams are derived with `fork` so that adding draws in one component never
// shifts another component's sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_(seed) {}

  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  Rng fork(std::uint64_t salt) const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_),
                      static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(salt),
                      static_cast<std::uint32_t>(salt >> 32)};
    std::uint64_t words[2];
    std::uint32_t raw[4];
    seq.generate(raw, raw + 4);
    words[0] = (std::uint64_t{raw[0]} << 32) | raw[1];
    words[1] = (std::uint64_t{raw[2]} << 32) | raw[3];
    return Rng(words[0] ^ (words[1] * 0x9E3779B97F4A7C15ull));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace wmp

#endif  // WMP_COMMON_RNG_H_
