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

#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "oracles.hpp"
#include "qmpc/hashing.hpp"

namespace qmpc {
namespace {

constexpr std::uint32_t kQ = 5;

// Overlap magnitude with the predicted Bell state after applying a transform.
double label_fidelity(BellLabel in, const std::vector<Instruction>& prog, BellLabel predicted) {
  SparseState s = apply_circuit(bell_state(kQ, in), prog);
  return fidelity(s, bell_state(kQ, predicted));
}

TEST(Hashing, LabelTableMatchesGates) {
  LabelAlgebra alg{kQ};
  for (std::uint32_t a = 0; a < kQ; ++a) {
    for (std::uint32_t b = 0; b < kQ; ++b) {
      BellLabel l{a, b};
      EXPECT_NEAR(label_fidelity(l, rotate_pair(0), alg.rotate(l)), 1.0, 1e-9);
      for (std::int64_t s = 0; s < kQ; ++s) {
        EXPECT_NEAR(label_fidelity(l, shift_pair(0, s), alg.shift(l, s)), 1.0, 1e-9);
        EXPECT_NEAR(label_fidelity(l, phase_pair(0, s), alg.phase(l, s)), 1.0, 1e-9);
      }
    }
  }
}

TEST(Hashing, BilateralCnotTableMatchesGates) {
  LabelAlgebra alg{kQ};
  for (std::uint32_t x = 0; x < kQ * kQ; ++x) {
    for (std::uint32_t y = 0; y < kQ * kQ; ++y) {
      BellLabel s{x / kQ, x % kQ}, t{y / kQ, y % kQ};
      auto [s2, t2] = alg.cnot(s, t);
      SparseState in = tensor(bell_state(kQ, s), bell_state(kQ, t));
      SparseState out = apply_circuit(in, bilateral_cnot(0, 1));
      EXPECT_NEAR(fidelity(out, tensor(bell_state(kQ, s2), bell_state(kQ, t2))), 1.0, 1e-9);
    }
  }
}

SparseState ensemble(std::size_t pairs, std::optional<std::size_t> bad, SparseState bad_pair) {
  SparseState s = bad && *bad == 0 ? bad_pair : testing::phi_pair(kQ);
  for (std::size_t j = 1; j < pairs; ++j) {
    s = tensor(s, bad && *bad == j ? bad_pair : testing::phi_pair(kQ));
  }
  return s;
}

TEST(Hashing, AllPhiAlwaysPassesAndIsRestored) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto res = hashing_test(ensemble(4, std::nullopt, testing::phi_pair(kQ)), 2, rng);
    EXPECT_TRUE(res.pass) << res.evidence;
    ASSERT_EQ(res.survivors.size(), 2u);
    EXPECT_NEAR(fidelity(res.state, ensemble(2, std::nullopt, testing::phi_pair(kQ))), 1.0, 1e-9);
  }
}

TEST(Hashing, ExhaustedEnsembleRejected) {
  Rng rng(0);
  EXPECT_THROW(hashing_test(ensemble(2, std::nullopt, testing::phi_pair(kQ)), 2, rng), StateError);
}

// Detection probability by enumerating rotations and pair choices over error
// labels (actual minus expected). Random shifts and phases make the state
// diagonal in the label basis, so labels can be treated classically.
double oracle_detection(
    std::vector<std::pair<double, std::vector<BellLabel>>> dist, std::size_t rounds,
    const std::vector<std::pair<std::size_t, std::size_t>>& schedule) {
  LabelAlgebra alg{kQ};
  double detected = 0;
  // Track original indices alongside labels for scheduled rounds.
  struct Branch {
    double p;
    std::vector<BellLabel> err;
    std::vector<std::size_t> ids;
  };
  std::vector<Branch> live;
  for (auto& [p, e] : dist) {
    std::vector<std::size_t> ids(e.size());
    for (std::size_t j = 0; j < e.size(); ++j) ids[j] = j;
    live.push_back({p, e, ids});
  }
  for (std::size_t round = 0; round < rounds; ++round) {
    std::vector<Branch> next;
    for (const auto& br : live) {
      const std::size_t m = br.err.size();
      std::size_t combos = 1;
      for (std::size_t j = 0; j < m; ++j) combos *= 4;
      for (std::size_t c = 0; c < combos; ++c) {
        std::vector<BellLabel> e = br.err;
        std::size_t code = c;
        for (std::size_t j = 0; j < m; ++j) {
          for (std::size_t k = 0; k < code % 4; ++k) e[j] = alg.rotate(e[j]);
          code /= 4;
        }
        std::vector<std::pair<std::size_t, std::size_t>> choices;
        if (round < schedule.size()) {
          auto at = [&](std::size_t id) {
            return static_cast<std::size_t>(std::find(br.ids.begin(), br.ids.end(), id) - br.ids.begin());
          };
          choices.push_back({at(schedule[round].first), at(schedule[round].second)});
        } else {
          for (std::size_t s = 0; s < m; ++s) {
            for (std::size_t t = 0; t < m; ++t) {
              if (s != t) choices.push_back({s, t});
            }
          }
        }
        const double p = br.p / static_cast<double>(combos) / static_cast<double>(choices.size());
        for (auto [s, t] : choices) {
          auto [es, et] = alg.cnot(e[s], e[t]);
          if (et.a != 0) {
            detected += p;
            continue;
          }
          std::vector<BellLabel> ne = e;
          std::vector<std::size_t> ids = br.ids;
          ne[s] = es;
          ne.erase(ne.begin() + static_cast<std::ptrdiff_t>(t));
          ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(t));
          next.push_back({p, ne, ids});
        }
      }
    }
    live = std::move(next);
  }
  return detected;
}

double empirical_detection(
    const SparseState& start, std::size_t rounds, int trials, std::uint64_t seed,
    const std::vector<std::pair<std::size_t, std::size_t>>& schedule = {}) {
  Rng rng(seed);
  int hits = 0;
  for (int t = 0; t < trials; ++t) hits += !hashing_test(start, rounds, rng, schedule).pass;
  return static_cast<double>(hits) / trials;
}

TEST(Hashing, ZeroZeroPairDetectionMatchesEnumeration) {
  const std::size_t pairs = 3, rounds = 2;
  Digit zz[] = {0, 0};
  SparseState start = ensemble(pairs, 1, SparseState::basis(kQ, zz));
  std::vector<std::pair<double, std::vector<BellLabel>>> dist;
  for (std::uint32_t b = 0; b < kQ; ++b) {
    dist.push_back({1.0 / kQ, {BellLabel{}, BellLabel{0, b}, BellLabel{}}});
  }
  double want = oracle_detection(dist, rounds, {});
  const int trials = 10000;
  double got = empirical_detection(start, rounds, trials, 77);
  double sigma = std::sqrt(want * (1 - want) / trials);
  EXPECT_GT(want, 0.1);
  EXPECT_LE(std::abs(got - want), 3 * sigma) << "oracle " << want << " empirical " << got;
}

TEST(Hashing, ShiftErrorTargetedInOneRound) {
  const std::size_t pairs = 2;
  std::vector<std::pair<std::size_t, std::size_t>> schedule{{0, 1}};
  for (std::uint32_t a = 1; a < kQ; ++a) {
    SparseState start = ensemble(pairs, 1, bell_state(kQ, {a, 0}));
    double want = oracle_detection({{1.0, {BellLabel{}, BellLabel{a, 0}}}}, 1, schedule);
    EXPECT_NEAR(want, 0.5, 1e-12);
    const int trials = 4000;
    double got = empirical_detection(start, 1, trials, 100 + a, schedule);
    double sigma = std::sqrt(want * (1 - want) / trials);
    EXPECT_LE(std::abs(got - want), 3 * sigma) << "a=" << a << " empirical " << got;
  }
}

}  // namespace
}  // namespace qmpc
