// Copyright 2026 The qmpc Authors
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

#include <cstdint>
#include <optional>
#include <vector>

#include "qmpc/rng.hpp"
#include "qmpc/sparse_state.hpp"

namespace qmpc {

/** Index of the Bell state sum_k w^{kb} |k, k+a> / sqrt(q). */
struct BellLabel {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  bool operator==(const BellLabel&) const = default;
};

inline SparseState bell_state(std::uint32_t q, BellLabel label) {
  const auto& w = roots_of_unity(q);
  std::vector<std::pair<std::vector<Digit>, Complex>> e;
  for (std::uint32_t k = 0; k < q; ++k) {
    e.push_back({{static_cast<Digit>(k), static_cast<Digit>((k + label.a) % q)},
                 w[k * label.b % q] / std::sqrt(static_cast<double>(q))});
  }
  return SparseState::from_terms(q, 2, e);
}

/** Gates that rotate the Bell basis of (first, second) onto the computational basis. */
inline std::vector<Instruction> bell_measurement_circuit(std::size_t first, std::size_t second) {
  // second -= first, then an inverse Fourier on first.
  return {LocalOp{first, Scale{-1}}, TwoOp{first, second, Cnot{}}, LocalOp{first, Scale{-1}},
          LocalOp{first, Fourier{-1}}};
}

struct TeleportResult {
  BellLabel label;
  SparseState state;
};

/**
 * Teleports `payload` onto `receiver`, where (sender, receiver) hold a fresh
 * Phi pair. Payload and sender end up definite; the receiver carries the
 * payload state. With `forced` the Bell outcome is fixed instead of sampled.
 */
inline TeleportResult teleport(
    SparseState s, std::size_t payload, std::size_t sender, std::size_t receiver, Rng& rng,
    std::optional<BellLabel> forced = std::nullopt) {
  if (payload == sender || payload == receiver || sender == receiver) {
    throw StateError("teleport needs three distinct registers");
  }
  s = apply_circuit(std::move(s), bell_measurement_circuit(payload, sender));
  std::size_t regs[] = {payload, sender};
  std::function<bool(std::span<const Digit>)> allowed;
  if (forced) {
    allowed = [&](std::span<const Digit> d) { return d[0] == forced->b && d[1] == forced->a; };
  }
  auto joint = measure_registers(std::move(s), regs, rng, allowed);
  BellLabel label{joint.digits[1], joint.digits[0]};
  std::vector<Instruction> fix = {
      LocalOp{receiver, Shift{-static_cast<std::int64_t>(label.a)}},
      LocalOp{receiver, Phase{static_cast<std::int64_t>(label.b)}}};
  return TeleportResult{label, apply_circuit(std::move(joint.state), fix)};
}

}  // namespace qmpc
