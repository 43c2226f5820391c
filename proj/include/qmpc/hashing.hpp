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

#include <algorithm>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "qmpc/field.hpp"
#include "qmpc/rng.hpp"
#include "qmpc/sparse_state.hpp"
#include "qmpc/teleport.hpp"

namespace qmpc {

// Pair j of an ensemble occupies registers 2j (first holder) and 2j + 1.
//
// Label actions on B_{a,b}, each up to a global phase:
//   rotate    F(1) x F(-1)          (a, b) -> (b, -a)
//   shift s   shift(s) x shift(-s)  (a, b) -> (a - 2s, b)
//   phase t   phase(t) x phase(t)   (a, b) -> (a, b + 2t)
//   bilateral cnot, source -> target:
//     source (a_s, b_s - b_t), target (a_t + a_s, b_t)

inline std::vector<Instruction> rotate_pair(std::size_t pair) {
  return {LocalOp{2 * pair, Fourier{1}}, LocalOp{2 * pair + 1, Fourier{-1}}};
}
inline std::vector<Instruction> shift_pair(std::size_t pair, std::int64_t s) {
  return {LocalOp{2 * pair, Shift{s}}, LocalOp{2 * pair + 1, Shift{-s}}};
}
inline std::vector<Instruction> phase_pair(std::size_t pair, std::int64_t t) {
  return {LocalOp{2 * pair, Phase{t}}, LocalOp{2 * pair + 1, Phase{t}}};
}
inline std::vector<Instruction> bilateral_cnot(std::size_t source, std::size_t target) {
  return {TwoOp{2 * source, 2 * target, Cnot{}}, TwoOp{2 * source + 1, 2 * target + 1, Cnot{}}};
}

/** Label arithmetic matching the table above. */
struct LabelAlgebra {
  std::uint32_t q;

  std::uint32_t red(std::int64_t v) const {
    std::int64_t r = v % static_cast<std::int64_t>(q);
    return static_cast<std::uint32_t>(r < 0 ? r + q : r);
  }
  BellLabel rotate(BellLabel l) const { return {l.b, red(-std::int64_t{l.a})}; }
  BellLabel shift(BellLabel l, std::int64_t s) const { return {red(l.a - 2 * s), l.b}; }
  BellLabel phase(BellLabel l, std::int64_t t) const { return {l.a, red(l.b + 2 * t)}; }
  std::pair<BellLabel, BellLabel> cnot(BellLabel s, BellLabel t) const {
    return {{s.a, red(std::int64_t{s.b} - t.b)}, {red(std::int64_t{t.a} + s.a), t.b}};
  }
};

struct HashingResult {
  bool pass = true;
  /** First inconsistent round, when failed. */
  std::optional<std::size_t> failed_round;
  std::string evidence;
  /** Original indices of the pairs still in the ensemble. */
  std::vector<std::size_t> survivors;
  /** Survivors only, returned to Phi when the ensemble was honest. */
  SparseState state;
};

/**
 * Each round: every pair gets a random element of the transform group, a
 * random source pair is folded into a random target pair by bilateral cnot,
 * and the target is measured. The holders compare the difference of their
 * outcomes with what an all-Phi ensemble would give. `schedule` may fix the
 * (source, target) of each round by original pair index.
 */
inline HashingResult hashing_test(
    SparseState ensemble, std::size_t rounds, Rng& rng,
    const std::vector<std::pair<std::size_t, std::size_t>>& schedule = {}) {
  if (ensemble.register_count() % 2) throw StateError("ensemble needs whole pairs");
  const std::uint32_t q = ensemble.modulus();
  if (q == 2) throw StateError("hashing needs an odd field");
  const std::size_t pairs = ensemble.register_count() / 2;
  if (rounds == 0) throw StateError("hashing needs at least one round");
  if (rounds + 1 > pairs) throw StateError("ensemble exhausted: too many rounds for the pair count");
  const LabelAlgebra alg{q};
  const std::int64_t half = (q + 1) / 2;

  bool pass = true;
  std::optional<std::size_t> failed_round;
  std::string evidence;
  std::vector<std::size_t> alive(pairs);
  for (std::size_t j = 0; j < pairs; ++j) alive[j] = j;
  // Label each surviving pair would carry if the ensemble were all Phi.
  std::vector<BellLabel> expected(pairs);
  SparseState s = std::move(ensemble);

  for (std::size_t round = 0; round < rounds; ++round) {
    std::vector<Instruction> prog;
    for (std::size_t slot = 0; slot < alive.size(); ++slot) {
      auto rot = rng.uniform_index(4);
      auto sh = static_cast<std::int64_t>(rng.uniform_index(q));
      auto ph = static_cast<std::int64_t>(rng.uniform_index(q));
      BellLabel& e = expected[slot];
      for (std::uint64_t k = 0; k < rot; ++k) {
        for (auto& ins : rotate_pair(slot)) prog.push_back(ins);
        e = alg.rotate(e);
      }
      for (auto& ins : shift_pair(slot, sh)) prog.push_back(ins);
      for (auto& ins : phase_pair(slot, ph)) prog.push_back(ins);
      e = alg.phase(alg.shift(e, sh), ph);
    }
    std::size_t src, tgt;
    if (round < schedule.size()) {
      auto find = [&](std::size_t original) {
        auto it = std::find(alive.begin(), alive.end(), original);
        if (it == alive.end()) throw StateError("scheduled pair is no longer in the ensemble");
        return static_cast<std::size_t>(it - alive.begin());
      };
      src = find(schedule[round].first);
      tgt = find(schedule[round].second);
      if (src == tgt) throw StateError("source and target must differ");
    } else {
      src = rng.uniform_index(alive.size());
      tgt = rng.uniform_index(alive.size() - 1);
      if (tgt >= src) ++tgt;
    }
    for (auto& ins : bilateral_cnot(src, tgt)) prog.push_back(ins);
    s = apply_circuit(std::move(s), prog);
    std::tie(expected[src], expected[tgt]) = alg.cnot(expected[src], expected[tgt]);

    std::size_t regs[] = {2 * tgt, 2 * tgt + 1};
    auto joint = measure_registers(std::move(s), regs, rng);
    s = remove_registers(joint.state, regs);
    std::uint32_t diff = alg.red(std::int64_t{joint.digits[1]} - joint.digits[0]);
    if (diff != expected[tgt].a && pass) {
      pass = false;
      failed_round = round;
      evidence = "round " + std::to_string(round) + ": pair " + std::to_string(alive[tgt]) +
                     " showed difference " + std::to_string(diff) + ", expected " +
                     std::to_string(expected[tgt].a);
    }
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(tgt));
    expected.erase(expected.begin() + static_cast<std::ptrdiff_t>(tgt));
  }

  // Undo the accumulated label drift on the survivors.
  std::vector<Instruction> restore;
  for (std::size_t slot = 0; slot < alive.size(); ++slot) {
    const BellLabel& e = expected[slot];
    for (auto& ins : shift_pair(slot, e.a * half)) restore.push_back(ins);
    for (auto& ins : phase_pair(slot, -std::int64_t{e.b} * half)) restore.push_back(ins);
  }
  return HashingResult{pass, failed_round, std::move(evidence), std::move(alive),
                       apply_circuit(std::move(s), restore)};
}

}  // namespace qmpc
