// Copyright 2026 The dfl Authors
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

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dfl {

/// Sub-stream indices reserved beside the per-channel Wiener streams.
namespace stream_slot {
inline constexpr std::uint32_t kInitialState = 0xFFFF0001u;
}

/// Independent, reproducible random stream identified by
/// (master_seed, stream_id, slot). No state is shared between streams.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t stream_id, std::uint32_t slot) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                      slot};
    engine_.seed(seq);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Wiener increments Normal(0, dt), one RandomStream per noise channel.
class WienerSource {
 public:
  WienerSource(std::uint64_t master_seed, std::uint64_t stream_id, std::size_t n_channels, double dt)
      : sqrt_dt_(std::sqrt(dt)) {
    streams_.reserve(n_channels);
    for (std::size_t k = 0; k < n_channels; ++k) {
      streams_.emplace_back(master_seed, stream_id, static_cast<std::uint32_t>(k));
    }
  }

  template <class Span>
  void draw(Span&& out) {
    for (std::size_t k = 0; k < streams_.size(); ++k) out[k] = sqrt_dt_ * streams_[k].normal();
  }

  std::size_t size() const { return streams_.size(); }

 private:
  double sqrt_dt_;
  std::vector<RandomStream> streams_;
};

}  // namespace dfl
