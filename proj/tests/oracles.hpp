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

// Independent reference implementations used to cross-check the library.
// Everything here is deliberately naive: exhaustive enumeration and dense
// linear algebra over full q^m vectors.

#include <complex>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "qmpc/field.hpp"
#include "qmpc/reed_solomon.hpp"
#include "qmpc/sparse_state.hpp"

namespace qmpc::oracle {

inline std::uint64_t ipow(std::uint64_t b, std::size_t e) {
  std::uint64_t r = 1;
  while (e--) r *= b;
  return r;
}

/** Plain modular helpers that never touch FieldElement. */
inline std::int64_t mod(std::int64_t v, std::int64_t q) { return ((v % q) + q) % q; }

inline std::int64_t inv_brute(std::int64_t a, std::int64_t q) {
  for (std::int64_t x = 1; x < q; ++x) {
    if (mod(a * x, q) == 1) return x;
  }
  return -1;
}

inline std::int64_t eval_poly(
    const std::vector<std::int64_t>& coeffs, std::int64_t x, std::int64_t q) {
  std::int64_t acc = 0, p = 1;
  for (auto c : coeffs) {
    acc = mod(acc + c * p, q);
    p = mod(p * x, q);
  }
  return acc;
}

/** Calls f on every coefficient vector of the given length over GF(q). */
template <class F>
void for_each_vector(std::size_t len, std::int64_t q, F&& f) {
  std::vector<std::int64_t> v(len, 0);
  while (true) {
    f(v);
    std::size_t j = 0;
    while (j < len && ++v[j] == q) v[j++] = 0;
    if (j == len) return;
  }
}

struct BruteDecoded {
  std::vector<std::int64_t> message;
  std::size_t distance;
};

/** Nearest codeword by enumerating all q^k messages; nullopt on ties or if too far. */
inline std::optional<BruteDecoded> brute_decode(
    std::size_t n, std::size_t k, std::int64_t q,
    const std::vector<std::int64_t>& points,
    const std::vector<std::int64_t>& word, const std::set<std::size_t>& erased,
    std::size_t max_errors) {
  std::optional<BruteDecoded> best;
  bool tie = false;
  for_each_vector(k, q, [&](const std::vector<std::int64_t>& m) {
    std::size_t dist = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (erased.count(i)) continue;
      if (eval_poly(m, points[i], q) != word[i]) ++dist;
    }
    if (!best || dist < best->distance) {
      best = BruteDecoded{m, dist};
      tie = false;
    } else if (dist == best->distance) {
      tie = true;
    }
  });
  if (!best || tie || best->distance > max_errors) return std::nullopt;
  return best;
}

/** Full state vector over q^m entries; index has register 0 most significant. */
struct DenseState {
  std::uint32_t q;
  std::size_t m;
  std::vector<std::complex<double>> v;

  std::size_t dim() const { return v.size(); }
  std::vector<std::uint32_t> digits(std::size_t idx) const {
    std::vector<std::uint32_t> d(m);
    for (std::size_t j = m; j-- > 0;) {
      d[j] = static_cast<std::uint32_t>(idx % q);
      idx /= q;
    }
    return d;
  }
  std::size_t index(const std::vector<std::uint32_t>& d) const {
    std::size_t idx = 0;
    for (auto x : d) idx = idx * q + x;
    return idx;
  }
};

inline std::complex<double> omega(std::int64_t k, std::int64_t q) {
  double a = 2.0 * 3.14159265358979323846 * static_cast<double>(mod(k, q)) /
             static_cast<double>(q);
  return {std::cos(a), std::sin(a)};
}

/** Dense matrix of a gate acting on the full space. */
using Matrix = std::vector<std::vector<std::complex<double>>>;

inline DenseState apply_matrix(const Matrix& u, const DenseState& s) {
  DenseState out{s.q, s.m, std::vector<std::complex<double>>(s.dim())};
  for (std::size_t i = 0; i < s.dim(); ++i) {
    for (std::size_t j = 0; j < s.dim(); ++j) out.v[i] += u[i][j] * s.v[j];
  }
  return out;
}

/**
 * Builds the full matrix of a single instruction by evaluating its definition
 * on every basis pair: <out| U |in>.
 */
inline Matrix instruction_matrix(std::uint32_t q, std::size_t m, const Instruction& ins) {
  DenseState shape{q, m, {}};
  std::size_t dim = ipow(q, m);
  Matrix u(dim, std::vector<std::complex<double>>(dim));
  const std::int64_t Q = q;
  for (std::size_t in = 0; in < dim; ++in) {
    auto x = shape.digits(in);
    if (const auto* op = std::get_if<LocalOp>(&ins)) {
      std::int64_t v = x[op->reg];
      if (const auto* g = std::get_if<Fourier>(&op->gate)) {
        for (std::int64_t b = 0; b < Q; ++b) {
          auto y = x;
          y[op->reg] = static_cast<std::uint32_t>(b);
          u[shape.index(y)][in] += omega(g->c * v * b, Q) / std::sqrt(double(Q));
        }
        continue;
      }
      auto y = x;
      std::complex<double> amp = 1;
      if (const auto* g = std::get_if<Phase>(&op->gate)) amp = omega(g->b * v, Q);
      if (const auto* g = std::get_if<Shift>(&op->gate)) y[op->reg] = mod(v + g->a, Q);
      if (const auto* g = std::get_if<Scale>(&op->gate)) y[op->reg] = mod(v * g->a, Q);
      u[shape.index(y)][in] += amp;
    } else if (const auto* op = std::get_if<TwoOp>(&ins)) {
      auto y = x;
      std::complex<double> amp = 1;
      std::int64_t a = x[op->ctrl], b = x[op->tgt];
      if (std::holds_alternative<Cnot>(op->gate)) {
        y[op->tgt] = mod(a + b, Q);
      } else {
        amp = omega(std::get<CPhase>(op->gate).c * a * b, Q);
      }
      u[shape.index(y)][in] += amp;
    } else {
      const auto& op3 = std::get<ThreeOp>(ins);
      auto y = x;
      std::complex<double> amp = 1;
      std::int64_t a = x[op3.r1], b = x[op3.r2], c = x[op3.r3];
      if (std::holds_alternative<Toffoli>(op3.gate)) {
        y[op3.r3] = mod(c + a * b, Q);
      } else {
        amp = omega(std::get<CCPhase>(op3.gate).c * a * b * c, Q);
      }
      u[shape.index(y)][in] += amp;
    }
  }
  return u;
}

inline DenseState to_dense(const SparseState& s) {
  DenseState d{s.modulus(), s.register_count(),
               std::vector<std::complex<double>>(ipow(s.modulus(), s.register_count()))};
  for (const auto& t : s.terms()) {
    auto digits = s.digits(t.key);
    std::size_t idx = 0;
    for (auto x : digits) idx = idx * s.modulus() + x;
    d.v[idx] = t.amplitude;
  }
  return d;
}

inline double dense_fidelity(const DenseState& a, const DenseState& b) {
  std::complex<double> acc = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) acc += std::conj(a.v[i]) * b.v[i];
  return std::norm(acc);
}

}  // namespace qmpc::oracle
