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
#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qmpc/field.hpp"

namespace qmpc {

struct RSParams {
  std::size_t n;
  std::size_t k;
  Modulus q;
  std::vector<FieldElement> points;

  RSParams(std::size_t n_, std::size_t k_, Modulus q_, std::vector<FieldElement> pts)
      : n(n_), k(k_), q(q_), points(std::move(pts)) {
    if (k == 0 || k > n) throw FieldError("RS parameters need 1 <= k <= n");
    if (n >= q.value()) throw FieldError("RS parameters need n < q");
    if (points.size() != n) throw FieldError("RS parameters need n points");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(points[i].modulus() == q) || points[i].is_zero()) {
        throw FieldError("RS evaluation points must be nonzero elements of GF(q)");
      }
      for (std::size_t j = i + 1; j < n; ++j) {
        if (points[i] == points[j]) throw FieldError("RS points not distinct");
      }
    }
  }

  /** Evaluation points 1..n. */
  static RSParams standard(std::size_t n, std::size_t k, Modulus q) {
    std::vector<FieldElement> pts;
    for (std::size_t i = 1; i <= n; ++i) pts.emplace_back(i, q);
    return RSParams(n, k, q, std::move(pts));
  }

  std::size_t distance() const { return n - k + 1; }
  std::size_t error_budget() const { return (n - k) / 2; }
};

struct ShareVector {
  std::vector<FieldElement> symbols;
  std::set<std::size_t> erasures;

  std::size_t size() const { return symbols.size(); }
  bool erased(std::size_t i) const { return erasures.count(i) != 0; }
};

struct RSDecoded {
  FieldElement value_at_zero;
  std::vector<FieldElement> message;
  std::vector<std::size_t> error_positions;
};

struct DecodeFailure {
  std::string reason;
};

using RSDecodeResult = std::variant<RSDecoded, DecodeFailure>;

inline ShareVector rs_encode(
    const RSParams& params, const std::vector<FieldElement>& message) {
  if (message.size() != params.k) {
    throw FieldError(
        "RS message has length " + std::to_string(message.size()) +
        ", expected " + std::to_string(params.k));
  }
  ShareVector out;
  for (const auto& y : params.points) {
    out.symbols.push_back(evaluate_polynomial(message, y));
  }
  return out;
}

namespace detail {

inline RSDecodeResult finish_decode(
    const RSParams& params, const ShareVector& shares,
    std::vector<FieldElement> message, std::size_t max_errors) {
  message.resize(params.k, FieldElement(0, params.q));
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < params.n; ++i) {
    if (shares.erased(i)) continue;
    if (!(evaluate_polynomial(message, params.points[i]) == shares.symbols[i])) {
      bad.push_back(i);
    }
  }
  if (bad.size() > max_errors) {
    return DecodeFailure{
        "no codeword within " + std::to_string(max_errors) + " errors"};
  }
  FieldElement v = message[0];
  return RSDecoded{v, std::move(message), std::move(bad)};
}

}  // namespace detail

/**
 * Berlekamp-Welch decoding. Erased positions are left out of the
 * interpolation; the budget 2 * max_errors + |erasures| <= n - k keeps the
 * nearest codeword unique, so ties cannot arise inside it.
 */
inline RSDecodeResult rs_decode(
    const RSParams& params, const ShareVector& shares, std::size_t max_errors) {
  if (shares.size() != params.n) {
    throw FieldError("share vector has the wrong length");
  }
  for (auto e : shares.erasures) {
    if (e >= params.n) throw FieldError("erasure position out of range");
  }
  const std::size_t erased = shares.erasures.size();
  if (erased > params.n - params.k) {
    return DecodeFailure{
        std::to_string(erased) + " erasures exceed the redundancy " +
        std::to_string(params.n - params.k)};
  }
  if (2 * max_errors + erased > params.n - params.k) {
    throw FieldError(
        "decoding budget exceeded: 2*" + std::to_string(max_errors) + " + " +
        std::to_string(erased) + " > n - k = " +
        std::to_string(params.n - params.k));
  }
  const Modulus q = params.q;
  std::vector<FieldElement> xs, ys;
  for (std::size_t i = 0; i < params.n; ++i) {
    if (shares.erased(i)) continue;
    if (!(shares.symbols[i].modulus() == q)) {
      throw FieldError("share symbol has the wrong modulus");
    }
    xs.push_back(params.points[i]);
    ys.push_back(shares.symbols[i]);
  }

  // Most words are clean codewords; try the cheap interpolation first.
  {
    auto msg = interpolate_coefficients(
        std::span(xs).first(params.k), std::span(ys).first(params.k));
    auto clean = detail::finish_decode(params, shares, msg, 0);
    if (std::holds_alternative<RSDecoded>(clean) || max_errors == 0) {
      return clean;
    }
  }

  // Unknowns: Q_0 .. Q_{k+e-1}, then E_0 .. E_{e-1}; E is monic of degree e.
  const std::size_t e = max_errors;
  const std::size_t nq = params.k + e;
  std::vector<std::vector<FieldElement>> a;
  std::vector<FieldElement> b;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::vector<FieldElement> row;
    FieldElement p(1, q);
    for (std::size_t j = 0; j < nq; ++j) {
      row.push_back(p);
      p *= xs[i];
    }
    p = FieldElement(1, q);
    for (std::size_t j = 0; j < e; ++j) {
      row.push_back(-(ys[i] * p));
      p *= xs[i];
    }
    a.push_back(std::move(row));
    b.push_back(ys[i] * xs[i].pow(e));
  }
  auto sol = solve_linear_system(std::move(a), std::move(b), q);
  if (!sol) return DecodeFailure{"key equation has no solution"};
  std::vector<FieldElement> qpoly(sol->begin(), sol->begin() + nq);
  std::vector<FieldElement> epoly(sol->begin() + nq, sol->end());
  epoly.emplace_back(1, q);
  auto [quot, rem] = polynomial_divmod(qpoly, epoly);
  if (!rem.empty()) return DecodeFailure{"error locator does not divide"};
  if (quot.size() > params.k) return DecodeFailure{"decoded degree too high"};
  return detail::finish_decode(params, shares, std::move(quot), e);
}

}  // namespace qmpc
