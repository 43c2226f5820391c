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
#include <initializer_list>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qmpc {

class FieldError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/** A validated prime modulus. Digits are stored in one byte, so q < 256. */
class Modulus {
 public:
  explicit Modulus(std::uint32_t q) : q_(q) {
    if (q < 2 || q > 251) {
      throw FieldError("modulus " + std::to_string(q) + " outside [2, 251]");
    }
    for (std::uint32_t f = 2; f * f <= q; ++f) {
      if (q % f == 0) {
        throw FieldError(
            "modulus " + std::to_string(q) + " is composite (divisible by " +
            std::to_string(f) + ")");
      }
    }
  }

  std::uint32_t value() const { return q_; }
  bool operator==(const Modulus&) const = default;

 private:
  std::uint32_t q_;
};

class FieldElement {
 public:
  FieldElement(std::uint64_t value, Modulus q)
      : value_(static_cast<std::uint32_t>(value % q.value())), q_(q) {}

  static FieldElement from_int(std::int64_t value, Modulus q) {
    std::int64_t m = static_cast<std::int64_t>(q.value());
    std::int64_t r = value % m;
    if (r < 0) r += m;
    return FieldElement(static_cast<std::uint64_t>(r), q);
  }

  std::uint32_t value() const { return value_; }
  Modulus modulus() const { return q_; }
  bool is_zero() const { return value_ == 0; }

  FieldElement operator+(const FieldElement& o) const {
    check(o);
    return FieldElement(value_ + o.value_, q_);
  }
  FieldElement operator-(const FieldElement& o) const {
    check(o);
    return FieldElement(value_ + q_.value() - o.value_, q_);
  }
  FieldElement operator-() const {
    return FieldElement(q_.value() - value_, q_);
  }
  FieldElement operator*(const FieldElement& o) const {
    check(o);
    return FieldElement(std::uint64_t{value_} * o.value_, q_);
  }
  FieldElement operator/(const FieldElement& o) const {
    check(o);
    return *this * o.inverse();
  }
  FieldElement& operator+=(const FieldElement& o) { return *this = *this + o; }
  FieldElement& operator-=(const FieldElement& o) { return *this = *this - o; }
  FieldElement& operator*=(const FieldElement& o) { return *this = *this * o; }

  FieldElement pow(std::uint64_t e) const {
    std::uint64_t base = value_, acc = 1 % q_.value();
    while (e > 0) {
      if (e & 1) acc = acc * base % q_.value();
      base = base * base % q_.value();
      e >>= 1;
    }
    return FieldElement(acc, q_);
  }

  FieldElement inverse() const {
    if (value_ == 0) throw FieldError("division by zero in GF(" + name() + ")");
    return pow(q_.value() - 2);
  }

  bool operator==(const FieldElement& o) const {
    return value_ == o.value_ && q_ == o.q_;
  }

 private:
  void check(const FieldElement& o) const {
    if (!(q_ == o.q_)) {
      throw FieldError(
          "modulus mismatch: GF(" + name() + ") vs GF(" + o.name() + ")");
    }
  }
  std::string name() const { return std::to_string(q_.value()); }

  std::uint32_t value_;
  Modulus q_;
};

inline std::ostream& operator<<(std::ostream& os, const FieldElement& x) {
  return os << x.value();
}

enum class FieldOp { add, sub, mul, div, pow };

inline FieldElement ff_arith(
    const FieldElement& a, const FieldElement& b, FieldOp op) {
  switch (op) {
    case FieldOp::add:
      return a + b;
    case FieldOp::sub:
      return a - b;
    case FieldOp::mul:
      return a * b;
    case FieldOp::div:
      return a / b;
    case FieldOp::pow:
      if (!(a.modulus() == b.modulus())) {
        throw FieldError("modulus mismatch in pow");
      }
      return a.pow(b.value());
  }
  throw FieldError("unknown field operation");
}

inline std::vector<FieldElement> field_vector(
    std::initializer_list<std::int64_t> values, Modulus q) {
  std::vector<FieldElement> out;
  for (auto v : values) out.push_back(FieldElement::from_int(v, q));
  return out;
}

// Coefficients are stored lowest degree first.
inline FieldElement evaluate_polynomial(
    std::span<const FieldElement> coeffs, const FieldElement& x) {
  FieldElement acc(0, x.modulus());
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

/** Quotient and remainder of num / den. den must have a nonzero top term. */
inline std::pair<std::vector<FieldElement>, std::vector<FieldElement>>
polynomial_divmod(std::vector<FieldElement> num, std::vector<FieldElement> den) {
  while (!den.empty() && den.back().is_zero()) den.pop_back();
  if (den.empty()) throw FieldError("polynomial division by zero");
  Modulus q = den.back().modulus();
  while (!num.empty() && num.back().is_zero()) num.pop_back();
  if (num.size() < den.size()) return {{}, num};
  std::vector<FieldElement> quot(num.size() - den.size() + 1, FieldElement(0, q));
  FieldElement lead_inv = den.back().inverse();
  for (std::size_t i = quot.size(); i-- > 0;) {
    FieldElement c = num[i + den.size() - 1] * lead_inv;
    quot[i] = c;
    for (std::size_t j = 0; j < den.size(); ++j) num[i + j] -= c * den[j];
  }
  num.resize(den.size() - 1, FieldElement(0, q));
  while (!num.empty() && num.back().is_zero()) num.pop_back();
  return {quot, num};
}

/**
 * Solves A x = b by Gauss-Jordan elimination. Free variables are set to zero,
 * so the result is deterministic. Returns nullopt if the system is
 * inconsistent.
 */
inline std::optional<std::vector<FieldElement>> solve_linear_system(
    std::vector<std::vector<FieldElement>> a, std::vector<FieldElement> b,
    Modulus q) {
  const std::size_t rows = a.size();
  if (b.size() != rows) throw FieldError("linear system shape mismatch");
  const std::size_t cols = rows == 0 ? 0 : a[0].size();
  std::vector<std::size_t> pivot_col;
  std::size_t row = 0;
  for (std::size_t col = 0; col < cols && row < rows; ++col) {
    std::size_t pivot = row;
    while (pivot < rows && a[pivot][col].is_zero()) ++pivot;
    if (pivot == rows) continue;
    std::swap(a[pivot], a[row]);
    std::swap(b[pivot], b[row]);
    FieldElement inv = a[row][col].inverse();
    for (auto& x : a[row]) x *= inv;
    b[row] *= inv;
    for (std::size_t r = 0; r < rows; ++r) {
      if (r == row || a[r][col].is_zero()) continue;
      FieldElement f = a[r][col];
      for (std::size_t c = col; c < cols; ++c) a[r][c] -= f * a[row][c];
      b[r] -= f * b[row];
    }
    pivot_col.push_back(col);
    ++row;
  }
  for (std::size_t r = row; r < rows; ++r) {
    if (!b[r].is_zero()) return std::nullopt;
  }
  std::vector<FieldElement> x(cols, FieldElement(0, q));
  for (std::size_t r = 0; r < pivot_col.size(); ++r) x[pivot_col[r]] = b[r];
  return x;
}

/** Coefficients of the unique polynomial of degree < xs.size() through the points. */
inline std::vector<FieldElement> interpolate_coefficients(
    std::span<const FieldElement> xs, std::span<const FieldElement> ys) {
  if (xs.size() != ys.size() || xs.empty()) {
    throw FieldError("interpolation needs matching, non-empty point lists");
  }
  Modulus q = xs[0].modulus();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      if (xs[i] == xs[j]) {
        throw FieldError(
            "repeated x-coordinate " + std::to_string(xs[i].value()));
      }
    }
  }
  std::vector<std::vector<FieldElement>> v;
  for (const auto& x : xs) {
    std::vector<FieldElement> row;
    FieldElement p(1, q);
    for (std::size_t j = 0; j < xs.size(); ++j) {
      row.push_back(p);
      p *= x;
    }
    v.push_back(std::move(row));
  }
  return *solve_linear_system(
      std::move(v), std::vector<FieldElement>(ys.begin(), ys.end()), q);
}

inline FieldElement lagrange_interpolate(
    std::span<const std::pair<FieldElement, FieldElement>> points,
    const FieldElement& eval_at) {
  if (points.empty()) throw FieldError("interpolation needs at least one point");
  Modulus q = eval_at.modulus();
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (points[i].first == points[j].first) {
        throw FieldError(
            "repeated x-coordinate " + std::to_string(points[i].first.value()));
      }
    }
  }
  FieldElement acc(0, q);
  for (std::size_t i = 0; i < points.size(); ++i) {
    FieldElement num(1, q), den(1, q);
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j == i) continue;
      num *= eval_at - points[j].first;
      den *= points[i].first - points[j].first;
    }
    acc += points[i].second * num / den;
  }
  return acc;
}

/** Constraints sum_i c_i y_i^j = t_j for j = 0 .. targets.size() - 1. */
struct MomentSystem {
  std::vector<FieldElement> points;
  std::vector<FieldElement> targets;

  std::size_t max_moment() const { return targets.size() - 1; }
};

class UnsolvableMomentSystem : public FieldError {
 public:
  UnsolvableMomentSystem(std::size_t moment, const std::string& why)
      : FieldError(
            "unsolvable moment system: moment " + std::to_string(moment) +
            " " + why),
        moment_(moment) {}
  std::size_t moment() const { return moment_; }

 private:
  std::size_t moment_;
};

inline FieldElement moment_sum(
    std::span<const FieldElement> c, std::span<const FieldElement> y,
    std::size_t j) {
  FieldElement acc(0, y[0].modulus());
  for (std::size_t i = 0; i < c.size(); ++i) acc += c[i] * y[i].pow(j);
  return acc;
}

/**
 * Solves the moment system. Missing targets up to n - 1 are taken as zero,
 * which makes the square Vandermonde system uniquely solvable. Targets beyond
 * n - 1 are checked against that solution.
 */
inline std::vector<FieldElement> solve_moment_system(const MomentSystem& sys) {
  const std::size_t n = sys.points.size();
  if (n == 0) throw FieldError("moment system needs at least one point");
  if (sys.targets.empty()) throw FieldError("moment system needs a target");
  Modulus q = sys.points[0].modulus();
  for (std::size_t i = 0; i < n; ++i) {
    if (sys.points[i].is_zero()) throw FieldError("moment system point is zero");
    for (std::size_t j = i + 1; j < n; ++j) {
      if (sys.points[i] == sys.points[j]) {
        throw FieldError("moment system points are not distinct");
      }
    }
  }
  std::vector<std::vector<FieldElement>> a;
  std::vector<FieldElement> b;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<FieldElement> row;
    for (const auto& y : sys.points) row.push_back(y.pow(j));
    a.push_back(std::move(row));
    b.push_back(j < sys.targets.size() ? sys.targets[j] : FieldElement(0, q));
  }
  auto sol = solve_linear_system(std::move(a), std::move(b), q);
  if (!sol) throw UnsolvableMomentSystem(0, "has a singular Vandermonde block");
  for (std::size_t j = 0; j < sys.targets.size(); ++j) {
    if (!(moment_sum(*sol, sys.points, j) == sys.targets[j])) {
      throw UnsolvableMomentSystem(
          j, "is inconsistent with the lower moments (" +
                 std::to_string(sys.targets.size()) + " constraints on " +
                 std::to_string(n) + " unknowns)");
    }
  }
  return *sol;
}

}  // namespace qmpc
