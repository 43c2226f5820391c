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

#include <vector>

#include "qmpc/rng.hpp"
#include "qmpc/poly_code.hpp"
#include "qmpc/sparse_state.hpp"

namespace qmpc::testing {

/** Random normalized state supported on roughly `density` of the basis. */
inline SparseState random_state(
    std::uint32_t q, std::size_t m, Rng& rng, double density = 0.5) {
  std::vector<Term> terms;
  KeyCodec codec(q, m);
  std::size_t dim = 1;
  for (std::size_t j = 0; j < m; ++j) dim *= q;
  std::vector<Digit> d(m);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    if (!terms.empty() && rng.uniform_real() > density) continue;
    std::size_t rem = idx;
    for (std::size_t j = m; j-- > 0;) {
      d[j] = static_cast<Digit>(rem % q);
      rem /= q;
    }
    terms.push_back(
        Term{codec.pack(d), Complex(rng.uniform_real() - 0.5, rng.uniform_real() - 0.5)});
  }
  double norm = 0;
  for (const auto& t : terms) norm += std::norm(t.amplitude);
  for (auto& t : terms) t.amplitude /= std::sqrt(norm);
  return SparseState::from_raw(q, m, std::move(terms));
}

inline SparseState phi_pair(std::uint32_t q) {
  std::vector<std::pair<std::vector<Digit>, Complex>> e;
  for (std::uint32_t k = 0; k < q; ++k) {
    e.push_back({{static_cast<Digit>(k), static_cast<Digit>(k)}, 1.0 / std::sqrt(double(q))});
  }
  return SparseState::from_terms(q, 2, e);
}

/** Random normalized amplitude vector of length q. */
inline std::vector<Complex> random_amplitudes(std::uint32_t q, Rng& rng) {
  std::vector<Complex> v(q);
  double norm = 0;
  for (auto& a : v) {
    a = Complex(rng.uniform_real() - 0.5, rng.uniform_real() - 0.5);
    norm += std::norm(a);
  }
  for (auto& a : v) a /= std::sqrt(norm);
  return v;
}

using LogicalEntries = std::vector<std::pair<std::vector<Digit>, Complex>>;

/** sum amp |enc(x_1)> ... |enc(x_k)>, built by encoding each register directly. */
inline SparseState encode_superposition(
    const CodeParams& code, const std::vector<Variant>& variants, const LogicalEntries& entries) {
  std::vector<Term> terms;
  const std::size_t m = variants.size() * code.n();
  for (const auto& [logical, amp] : entries) {
    SparseState s = encode_basis(code, variants[0], logical[0]);
    for (std::size_t j = 1; j < variants.size(); ++j) {
      s = tensor(s, encode_basis(code, variants[j], logical[j]));
    }
    for (const auto& t : s.terms()) terms.push_back(Term{t.key, t.amplitude * amp});
  }
  return SparseState::from_raw(code.q(), m, std::move(terms));
}

inline SparseState logical_superposition(
    std::uint32_t q, std::size_t registers, const LogicalEntries& entries) {
  return SparseState::from_terms(q, registers, entries);
}

/** Random gate on m registers at q = 5, every kind reachable. */
inline Instruction random_instruction(std::size_t m, Rng& rng) {
  auto pick = [&] { return static_cast<std::size_t>(rng.uniform_index(m)); };
  auto nz = [&] { return static_cast<std::int64_t>(1 + rng.uniform_index(4)); };
  auto any = [&] { return static_cast<std::int64_t>(rng.uniform_index(5)); };
  for (;;) {
    switch (rng.uniform_index(8)) {
      case 0:
        return LocalOp{pick(), Fourier{nz()}};
      case 1:
        return LocalOp{pick(), Phase{any()}};
      case 2:
        return LocalOp{pick(), Shift{any()}};
      case 3:
        return LocalOp{pick(), Scale{nz()}};
      case 4:
      case 5: {
        if (m < 2) continue;
        std::size_t a = pick(), b = pick();
        if (a == b) continue;
        if (rng.uniform_index(2)) return TwoOp{a, b, Cnot{}};
        return TwoOp{a, b, CPhase{any()}};
      }
      default: {
        if (m < 3) continue;
        std::size_t a = pick(), b = pick(), c = pick();
        if (a == b || b == c || a == c) continue;
        if (rng.uniform_index(2)) return ThreeOp{a, b, c, Toffoli{}};
        return ThreeOp{a, b, c, CCPhase{any()}};
      }
    }
  }
}

}  // namespace qmpc::testing
