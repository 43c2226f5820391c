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

#include "qmpc/field.hpp"
#include "qmpc/poly_code.hpp"

namespace qmpc {

/**
 * Per-player exponents of the transversal gadgets.
 *   m: sum m_i y_i^j = [j == 0] for j < n     (Fourier layer, logical phase)
 *   p: sum p_i y_i^j = -[j == 0] for j <= 2(d-1) (pairwise phase)
 *   r: sum r_i y_i^j = [j == 0] for j <= 3(d-1)  (three-way phase)
 * The p and r systems are padded with zero moments up to n - 1.
 */
struct GadgetCoefficients {
  std::vector<FieldElement> m;
  std::vector<FieldElement> p;
  std::vector<FieldElement> r;
};

inline GadgetCoefficients derive_coefficients(const CodeParams& code) {
  const Modulus q = code.modulus();
  auto targets = [&](std::int64_t t0, std::size_t top) {
    std::vector<FieldElement> t(top + 1, FieldElement(0, q));
    t[0] = FieldElement::from_int(t0, q);
    return t;
  };
  const std::size_t d1 = code.d() - 1;
  GadgetCoefficients c{
      solve_moment_system({code.points(), targets(1, code.n() - 1)}),
      solve_moment_system({code.points(), targets(-1, 2 * d1)}),
      solve_moment_system({code.points(), targets(1, 3 * d1)}),
  };
  for (std::size_t i = 0; i < code.n(); ++i) {
    if (c.m[i].is_zero()) {
      throw CodeError("Fourier exponent m_" + std::to_string(i) + " is zero");
    }
  }
  return c;
}

}  // namespace qmpc
