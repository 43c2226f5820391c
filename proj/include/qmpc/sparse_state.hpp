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

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "qmpc/rng.hpp"

namespace qmpc {

using Complex = std::complex<double>;
using Digit = std::uint8_t;
using Key = unsigned __int128;

/** Amplitudes with smaller modulus are dropped after every gate. */
inline constexpr double kPruneThreshold = 1e-12;
/** Equality tolerance for norms, fidelities and matrix entries. */
inline constexpr double kTolerance = 1e-9;

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/** Powers of the primitive root exp(2 pi i / q), for every q < 256. */
inline const std::vector<Complex>& roots_of_unity(std::uint32_t q) {
  static const std::array<std::vector<Complex>, 256> tables = [] {
    std::array<std::vector<Complex>, 256> t;
    for (std::uint32_t m = 1; m < 256; ++m) {
      t[m].resize(m);
      for (std::uint32_t k = 0; k < m; ++k) {
        double angle = 2.0 * std::numbers::pi * k / m;
        t[m][k] = Complex(std::cos(angle), std::sin(angle));
      }
    }
    return t;
  }();
  if (q == 0 || q > 255) throw StateError("no root table for this modulus");
  return tables[q];
}

/**
 * Packs basis strings into 128-bit keys, register 0 in the most significant
 * digit, so numeric key order is lexicographic string order.
 */
class KeyCodec {
 public:
  KeyCodec(std::uint32_t q, std::size_t registers)
      : q_(q), m_(registers), bits_(std::bit_width(q - 1)) {
    if (q < 2 || q > 255) throw StateError("modulus out of range");
    if (bits_ * registers > 128) {
      throw StateError(
          "register cap exceeded: " + std::to_string(registers) +
          " registers of " + std::to_string(bits_) + " bits do not fit a key");
    }
    mask_ = (Key{1} << bits_) - 1;
  }

  static std::size_t capacity(std::uint32_t q) {
    return 128 / std::bit_width(q - 1);
  }

  std::uint32_t q() const { return q_; }
  std::size_t size() const { return m_; }
  unsigned bits() const { return bits_; }
  unsigned shift(std::size_t reg) const {
    return static_cast<unsigned>((m_ - 1 - reg) * bits_);
  }

  Digit get(Key key, std::size_t reg) const {
    return static_cast<Digit>((key >> shift(reg)) & mask_);
  }
  Key set(Key key, std::size_t reg, std::uint32_t value) const {
    unsigned s = shift(reg);
    return (key & ~(mask_ << s)) | (Key{value} << s);
  }
  std::vector<Digit> unpack(Key key) const {
    std::vector<Digit> out(m_);
    for (std::size_t j = 0; j < m_; ++j) out[j] = get(key, j);
    return out;
  }
  Key pack(std::span<const Digit> digits) const {
    if (digits.size() != m_) throw StateError("basis string has wrong length");
    Key key = 0;
    for (std::size_t j = 0; j < m_; ++j) {
      if (digits[j] >= q_) throw StateError("digit out of range");
      key = (key << bits_) | digits[j];
    }
    return key;
  }
  /** Digits of the listed registers, packed in listed order. */
  Key extract(Key key, std::span<const std::size_t> regs) const {
    Key out = 0;
    for (auto r : regs) out = (out << bits_) | get(key, r);
    return out;
  }

 private:
  std::uint32_t q_;
  std::size_t m_;
  unsigned bits_;
  Key mask_;
};

struct Term {
  Key key;
  Complex amplitude;
};

// Gate parameters are integers reduced mod q when applied.
struct Fourier {
  std::int64_t c = 1;
};
struct Phase {
  std::int64_t b;
};
struct Shift {
  std::int64_t a;
};
struct Scale {
  std::int64_t a;
};
using LocalGate = std::variant<Fourier, Phase, Shift, Scale>;

struct Cnot {};
struct CPhase {
  std::int64_t c;
};
using TwoGate = std::variant<Cnot, CPhase>;

struct CCPhase {
  std::int64_t c;
};
struct Toffoli {};
using ThreeGate = std::variant<CCPhase, Toffoli>;

struct LocalOp {
  std::size_t reg;
  LocalGate gate;
};
struct TwoOp {
  std::size_t ctrl;
  std::size_t tgt;
  TwoGate gate;
};
struct ThreeOp {
  std::size_t r1;
  std::size_t r2;
  std::size_t r3;
  ThreeGate gate;
};
using Instruction = std::variant<LocalOp, TwoOp, ThreeOp>;

class SparseState {
 public:
  /** |0...0>. */
  SparseState(std::uint32_t q, std::size_t registers)
      : codec_(q, registers), terms_{Term{0, 1.0}} {}

  static SparseState basis(std::uint32_t q, std::span<const Digit> digits) {
    SparseState s(q, digits.size());
    s.terms_[0].key = s.codec_.pack(digits);
    return s;
  }

  static SparseState from_terms(
      std::uint32_t q, std::size_t registers,
      const std::vector<std::pair<std::vector<Digit>, Complex>>& entries) {
    SparseState s(q, registers);
    std::vector<Term> terms;
    for (const auto& [digits, amp] : entries) {
      terms.push_back(Term{s.codec_.pack(digits), amp});
    }
    return from_raw(q, registers, std::move(terms));
  }

  /** Canonicalizes (sort, merge, prune) and checks the norm. */
  static SparseState from_raw(
      std::uint32_t q, std::size_t registers, std::vector<Term> terms) {
    SparseState s(q, registers);
    s.terms_ = std::move(terms);
    s.canonicalize();
    s.check_norm("construction");
    return s;
  }

  std::uint32_t modulus() const { return codec_.q(); }
  std::size_t register_count() const { return codec_.size(); }
  std::size_t size() const { return terms_.size(); }
  const KeyCodec& codec() const { return codec_; }
  const std::vector<Term>& terms() const { return terms_; }

  std::vector<Digit> digits(Key key) const { return codec_.unpack(key); }

  Complex amplitude(std::span<const Digit> digits) const {
    Key key = codec_.pack(digits);
    auto it = std::lower_bound(
        terms_.begin(), terms_.end(), key,
        [](const Term& t, Key k) { return t.key < k; });
    return it != terms_.end() && it->key == key ? it->amplitude : Complex{};
  }

  double norm_squared() const {
    double acc = 0;
    for (const auto& t : terms_) acc += std::norm(t.amplitude);
    return acc;
  }

  void check_norm(const char* where) const {
    double n = norm_squared();
    if (std::abs(n - 1.0) > kTolerance) {
      throw StateError(
          std::string("norm drifted to ") + std::to_string(n) + " after " +
          where);
    }
  }

  /** Replaces the terms; caller promises the result is canonical or asks for it. */
  void assign(std::vector<Term> terms, bool canonical) {
    terms_ = std::move(terms);
    if (!canonical) canonicalize();
  }

  std::vector<Term> release() && { return std::move(terms_); }

  void canonicalize() {
    std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) {
      return a.key < b.key;
    });
    std::size_t out = 0;
    for (std::size_t i = 0; i < terms_.size();) {
      Key k = terms_[i].key;
      Complex acc = 0;
      while (i < terms_.size() && terms_[i].key == k) acc += terms_[i++].amplitude;
      if (std::abs(acc) >= kPruneThreshold) terms_[out++] = Term{k, acc};
    }
    terms_.resize(out);
  }

  void renormalize() {
    double n = std::sqrt(norm_squared());
    if (n < kPruneThreshold) throw StateError("cannot renormalize a null state");
    for (auto& t : terms_) t.amplitude /= n;
  }

 private:
  KeyCodec codec_;
  std::vector<Term> terms_;
};

namespace detail {

inline std::uint32_t reduce(std::int64_t v, std::uint32_t q) {
  std::int64_t r = v % static_cast<std::int64_t>(q);
  return static_cast<std::uint32_t>(r < 0 ? r + q : r);
}

inline void check_register(const SparseState& s, std::size_t r) {
  if (r >= s.register_count()) {
    throw StateError(
        "register " + std::to_string(r) + " out of range (" +
        std::to_string(s.register_count()) + " registers)");
  }
}

inline bool is_fourier(const Instruction& ins) {
  const auto* op = std::get_if<LocalOp>(&ins);
  return op && std::holds_alternative<Fourier>(op->gate);
}

inline void validate(const SparseState& s, const Instruction& ins) {
  const std::uint32_t q = s.modulus();
  std::visit(
      [&](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, LocalOp>) {
          check_register(s, op.reg);
          if (const auto* g = std::get_if<Scale>(&op.gate);
              g && reduce(g->a, q) == 0) {
            throw StateError("scale(0) is not invertible");
          }
          if (const auto* g = std::get_if<Fourier>(&op.gate);
              g && reduce(g->c, q) == 0) {
            throw StateError("fourier(0) is not invertible");
          }
        } else if constexpr (std::is_same_v<T, TwoOp>) {
          check_register(s, op.ctrl);
          check_register(s, op.tgt);
          if (op.ctrl == op.tgt) throw StateError("two-register gate index collision");
        } else {
          check_register(s, op.r1);
          check_register(s, op.r2);
          check_register(s, op.r3);
          if (op.r1 == op.r2 || op.r1 == op.r3 || op.r2 == op.r3) {
            throw StateError("three-register gate index collision");
          }
        }
      },
      ins);
}

/** Applies a run of basis-permuting and diagonal gates in a single pass. */
inline void apply_classical_run(
    SparseState& s, std::span<const Instruction> run) {
  const KeyCodec& c = s.codec();
  const std::uint32_t q = s.modulus();
  const auto& w = roots_of_unity(q);
  std::vector<Term> terms = std::move(s).release();
  bool permutes = false;
  for (auto& t : terms) {
    Key key = t.key;
    std::uint64_t phase = 0;
    for (const auto& ins : run) {
      if (const auto* op = std::get_if<LocalOp>(&ins)) {
        std::uint32_t x = c.get(key, op->reg);
        if (const auto* g = std::get_if<Phase>(&op->gate)) {
          phase += std::uint64_t{reduce(g->b, q)} * x;
        } else if (const auto* g = std::get_if<Shift>(&op->gate)) {
          key = c.set(key, op->reg, (x + reduce(g->a, q)) % q);
          permutes = true;
        } else if (const auto* g = std::get_if<Scale>(&op->gate)) {
          key = c.set(key, op->reg, (x * reduce(g->a, q)) % q);
          permutes = true;
        }
      } else if (const auto* op = std::get_if<TwoOp>(&ins)) {
        std::uint32_t x = c.get(key, op->ctrl), y = c.get(key, op->tgt);
        if (std::holds_alternative<Cnot>(op->gate)) {
          key = c.set(key, op->tgt, (x + y) % q);
          permutes = true;
        } else {
          phase += std::uint64_t{reduce(std::get<CPhase>(op->gate).c, q)} * x * y % q;
        }
      } else {
        const auto& op3 = std::get<ThreeOp>(ins);
        std::uint32_t x = c.get(key, op3.r1), y = c.get(key, op3.r2),
                      z = c.get(key, op3.r3);
        if (std::holds_alternative<Toffoli>(op3.gate)) {
          key = c.set(key, op3.r3, (z + x * y) % q);
          permutes = true;
        } else {
          phase += std::uint64_t{reduce(std::get<CCPhase>(op3.gate).c, q)} *
                   (x * y % q) * z % q;
        }
      }
    }
    t.key = key;
    if (phase % q != 0) t.amplitude *= w[phase % q];
  }
  s.assign(std::move(terms), !permutes);
}

/**
 * Applies fourier(c_j) on each listed register (distinct). Terms are grouped
 * by the untouched digits and each group is transformed as a dense block of
 * size q^k, either by direct expansion or by per-register passes.
 */
inline void apply_fourier_block(
    SparseState& s, std::span<const std::size_t> regs,
    std::span<const std::uint32_t> coeffs) {
  const KeyCodec& c = s.codec();
  const std::uint32_t q = s.modulus();
  const std::size_t k = regs.size();
  const auto& w = roots_of_unity(q);
  std::size_t dim = 1;
  for (std::size_t j = 0; j < k; ++j) dim *= q;
  const double norm = std::pow(1.0 / std::sqrt(static_cast<double>(q)), k);

  Key clear = ~Key{0};
  for (auto r : regs) clear = c.set(clear, r, 0);

  struct Item {
    Key rest;
    std::uint32_t index;
    Complex amp;
  };
  std::vector<Item> items;
  items.reserve(s.size());
  for (const auto& t : s.terms()) {
    std::uint32_t idx = 0;
    for (auto r : regs) idx = idx * q + c.get(t.key, r);
    items.push_back(Item{t.key & clear, idx, t.amplitude});
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return a.rest < b.rest;
  });

  std::vector<Complex> buf(dim), tmp(dim);
  std::vector<std::uint32_t> digits(k), scaled(k);
  std::vector<Term> out;
  auto emit = [&](Key rest) {
    for (std::uint32_t idx = 0; idx < dim; ++idx) {
      Complex a = buf[idx] * norm;
      if (std::abs(a) < kPruneThreshold) continue;
      Key key = rest;
      std::uint32_t rem = idx;
      for (std::size_t j = k; j-- > 0;) {
        key = c.set(key, regs[j], rem % q);
        rem /= q;
      }
      out.push_back(Term{key, a});
    }
  };

  for (std::size_t lo = 0; lo < items.size();) {
    std::size_t hi = lo;
    while (hi < items.size() && items[hi].rest == items[lo].rest) ++hi;
    const std::size_t group = hi - lo;
    std::fill(buf.begin(), buf.end(), Complex{});
    if (group < k * q) {
      // Direct expansion: each input term spreads over every output index.
      for (std::size_t i = lo; i < hi; ++i) {
        std::uint32_t rem = items[i].index;
        for (std::size_t j = k; j-- > 0;) {
          digits[j] = rem % q;
          rem /= q;
        }
        for (std::size_t j = 0; j < k; ++j) scaled[j] = coeffs[j] * digits[j] % q;
        // Odometer over output digits, tracking the phase exponent.
        std::vector<std::uint32_t> y(k, 0);
        std::uint32_t e = 0;
        for (std::uint32_t idx = 0; idx < dim; ++idx) {
          buf[idx] += items[i].amp * w[e];
          for (std::size_t j = k; j-- > 0;) {
            e = (e + scaled[j]) % q;
            if (++y[j] < q) break;
            y[j] = 0;
            // Wrapping a digit adds scaled[j] * q, which is 0 mod q.
          }
        }
      }
    } else {
      for (std::size_t i = lo; i < hi; ++i) buf[items[i].index] = items[i].amp;
      std::size_t stride = dim;
      for (std::size_t j = 0; j < k; ++j) {
        stride /= q;
        std::fill(tmp.begin(), tmp.end(), Complex{});
        for (std::size_t base = 0; base < dim; base += stride * q) {
          for (std::size_t off = 0; off < stride; ++off) {
            for (std::uint32_t x = 0; x < q; ++x) {
              Complex a = buf[base + off + x * stride];
              if (a == Complex{}) continue;
              std::uint32_t step = coeffs[j] * x % q, e = 0;
              for (std::uint32_t yv = 0; yv < q; ++yv) {
                tmp[base + off + yv * stride] += a * w[e];
                e += step;
                if (e >= q) e -= q;
              }
            }
          }
        }
        std::swap(buf, tmp);
      }
    }
    emit(items[lo].rest);
    lo = hi;
  }
  s.assign(std::move(out), false);
}

inline void apply_fourier_run(SparseState& s, std::span<const Instruction> run) {
  const std::uint32_t q = s.modulus();
  std::vector<std::size_t> regs;
  std::vector<std::uint32_t> coeffs;
  auto flush = [&] {
    if (regs.empty()) return;
    // Dense blocks above this size are split into smaller passes.
    constexpr std::size_t kMaxBlock = std::size_t{1} << 16;
    std::size_t lo = 0;
    while (lo < regs.size()) {
      std::size_t hi = lo, dim = 1;
      while (hi < regs.size() && dim * q <= kMaxBlock) {
        dim *= q;
        ++hi;
      }
      if (hi == lo) hi = lo + 1;
      apply_fourier_block(
          s, std::span(regs).subspan(lo, hi - lo),
          std::span(coeffs).subspan(lo, hi - lo));
      lo = hi;
    }
    regs.clear();
    coeffs.clear();
  };
  for (const auto& ins : run) {
    const auto& op = std::get<LocalOp>(ins);
    if (std::find(regs.begin(), regs.end(), op.reg) != regs.end()) flush();
    regs.push_back(op.reg);
    coeffs.push_back(reduce(std::get<Fourier>(op.gate).c, q));
  }
  flush();
}

}  // namespace detail

/**
 * Applies a gate sequence. Consecutive permutation and phase gates share one
 * pass over the amplitudes; consecutive Fourier gates share one grouping.
 */
inline SparseState apply_circuit(
    SparseState s, std::span<const Instruction> program) {
  for (const auto& ins : program) detail::validate(s, ins);
  std::size_t lo = 0;
  while (lo < program.size()) {
    bool fourier = detail::is_fourier(program[lo]);
    std::size_t hi = lo;
    while (hi < program.size() && detail::is_fourier(program[hi]) == fourier) ++hi;
    auto run = program.subspan(lo, hi - lo);
    if (fourier) {
      detail::apply_fourier_run(s, run);
    } else {
      detail::apply_classical_run(s, run);
    }
    lo = hi;
  }
  s.check_norm("gate application");
  return s;
}

inline SparseState apply_local(SparseState s, std::size_t reg, LocalGate gate) {
  Instruction ins = LocalOp{reg, gate};
  return apply_circuit(std::move(s), std::span(&ins, 1));
}

inline SparseState apply_two(
    SparseState s, std::size_t ctrl, std::size_t tgt, TwoGate gate) {
  Instruction ins = TwoOp{ctrl, tgt, gate};
  return apply_circuit(std::move(s), std::span(&ins, 1));
}

inline SparseState apply_three(
    SparseState s, std::size_t r1, std::size_t r2, std::size_t r3,
    ThreeGate gate) {
  Instruction ins = ThreeOp{r1, r2, r3, gate};
  return apply_circuit(std::move(s), std::span(&ins, 1));
}

struct JointOutcome {
  std::vector<Digit> digits;
  /** Born probability of the returned digits. */
  double probability;
  /** Born probability of the conditioning event (1 when unconditioned). */
  double condition_probability;
  SparseState state;
};

/**
 * Measures several registers in the computational basis. The measured
 * registers stay in the state, now definite. When `allowed` is given the
 * outcome is sampled from the Born distribution conditioned on it.
 */
inline JointOutcome measure_registers(
    SparseState s, std::span<const std::size_t> regs, Rng& rng,
    const std::function<bool(std::span<const Digit>)>& allowed = {}) {
  for (auto r : regs) detail::check_register(s, r);
  const KeyCodec& c = s.codec();
  std::map<Key, double> marginal;
  for (const auto& t : s.terms()) {
    marginal[c.extract(t.key, regs)] += std::norm(t.amplitude);
  }
  auto unpack_sub = [&](Key sub) {
    std::vector<Digit> d(regs.size());
    for (std::size_t j = regs.size(); j-- > 0;) {
      d[j] = static_cast<Digit>(sub & ((Key{1} << c.bits()) - 1));
      sub >>= c.bits();
    }
    return d;
  };
  std::vector<std::pair<Key, double>> candidates;
  double total = 0;
  for (const auto& [sub, p] : marginal) {
    if (allowed && !allowed(unpack_sub(sub))) continue;
    candidates.emplace_back(sub, p);
    total += p;
  }
  if (candidates.empty() || total < kTolerance) {
    throw StateError("requested measurement outcome has zero probability");
  }
  double u = rng.uniform_real() * total;
  Key chosen = candidates.back().first;
  double chosen_p = candidates.back().second;
  for (const auto& [sub, p] : candidates) {
    if (u < p) {
      chosen = sub;
      chosen_p = p;
      break;
    }
    u -= p;
  }
  std::vector<Term> kept;
  for (const auto& t : s.terms()) {
    if (c.extract(t.key, regs) == chosen) kept.push_back(t);
  }
  s.assign(std::move(kept), true);
  s.renormalize();
  s.check_norm("measurement");
  return JointOutcome{unpack_sub(chosen), chosen_p, total, std::move(s)};
}

struct MeasureResult {
  Digit outcome;
  SparseState state;
};

inline MeasureResult measure(SparseState s, std::size_t reg, Rng& rng) {
  std::size_t regs[] = {reg};
  auto r = measure_registers(std::move(s), regs, rng);
  return MeasureResult{r.digits[0], std::move(r.state)};
}

inline MeasureResult measure_forced(SparseState s, std::size_t reg, Digit value) {
  std::size_t regs[] = {reg};
  Rng unused(0);
  auto r = measure_registers(
      std::move(s), regs, unused,
      [value](std::span<const Digit> d) { return d[0] == value; });
  return MeasureResult{r.digits[0], std::move(r.state)};
}

/** Tensor product; a's registers come first. */
inline SparseState tensor(const SparseState& a, const SparseState& b) {
  if (a.modulus() != b.modulus()) throw StateError("tensor of mismatched moduli");
  const std::size_t m = a.register_count() + b.register_count();
  KeyCodec codec(a.modulus(), m);
  const unsigned shift =
      static_cast<unsigned>(b.register_count() * codec.bits());
  std::vector<Term> terms;
  terms.reserve(a.size() * b.size());
  for (const auto& x : a.terms()) {
    for (const auto& y : b.terms()) {
      terms.push_back(Term{(x.key << shift) | y.key, x.amplitude * y.amplitude});
    }
  }
  SparseState out(a.modulus(), m);
  out.assign(std::move(terms), true);
  return out;
}

/** Drops registers that hold a definite value in every term. */
inline SparseState remove_registers(
    const SparseState& s, std::span<const std::size_t> regs) {
  const KeyCodec& c = s.codec();
  std::vector<bool> drop(s.register_count(), false);
  for (auto r : regs) {
    detail::check_register(s, r);
    drop[r] = true;
    Digit v = c.get(s.terms()[0].key, r);
    for (const auto& t : s.terms()) {
      if (c.get(t.key, r) != v) {
        throw StateError(
            "register " + std::to_string(r) + " is not definite; cannot remove");
      }
    }
  }
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < s.register_count(); ++r) {
    if (!drop[r]) keep.push_back(r);
  }
  std::vector<Term> terms;
  terms.reserve(s.size());
  for (const auto& t : s.terms()) {
    terms.push_back(Term{c.extract(t.key, keep), t.amplitude});
  }
  SparseState out(s.modulus(), keep.size());
  out.assign(std::move(terms), true);
  return out;
}

/** New register j holds old register order[j]. */
inline SparseState permute_registers(
    const SparseState& s, std::span<const std::size_t> order) {
  if (order.size() != s.register_count()) {
    throw StateError("permutation has the wrong length");
  }
  std::vector<bool> seen(order.size(), false);
  for (auto r : order) {
    detail::check_register(s, r);
    if (seen[r]) throw StateError("permutation repeats a register");
    seen[r] = true;
  }
  std::vector<Term> terms;
  terms.reserve(s.size());
  for (const auto& t : s.terms()) {
    terms.push_back(Term{s.codec().extract(t.key, order), t.amplitude});
  }
  SparseState out(s.modulus(), s.register_count());
  out.assign(std::move(terms), false);
  return out;
}

inline Complex inner_product(const SparseState& a, const SparseState& b) {
  if (a.modulus() != b.modulus() || a.register_count() != b.register_count()) {
    throw StateError("inner product of states with different shapes");
  }
  Complex acc = 0;
  auto i = a.terms().begin(), j = b.terms().begin();
  while (i != a.terms().end() && j != b.terms().end()) {
    if (i->key < j->key) {
      ++i;
    } else if (j->key < i->key) {
      ++j;
    } else {
      acc += std::conj(i->amplitude) * j->amplitude;
      ++i;
      ++j;
    }
  }
  return acc;
}

inline double fidelity(const SparseState& a, const SparseState& b) {
  return std::norm(inner_product(a, b));
}

class DensityMatrix {
 public:
  /** Largest materialized dimension; q^|keep| beyond this is refused. */
  static constexpr std::size_t kMaxDimension = 2048;

  DensityMatrix(std::uint32_t q, std::size_t registers, Eigen::MatrixXcd m)
      : q_(q), registers_(registers), m_(std::move(m)) {}

  std::uint32_t modulus() const { return q_; }
  std::size_t register_count() const { return registers_; }
  std::size_t dimension() const { return static_cast<std::size_t>(m_.rows()); }
  Complex at(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXcd& matrix() const { return m_; }

  Eigen::VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(
        m_, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
  }

  /** Empty string when Hermitian, unit trace and positive within tolerance. */
  std::string invariant_violation() const {
    if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kTolerance) {
      return "not Hermitian";
    }
    if (std::abs(m_.trace() - Complex(1.0)) > kTolerance) return "trace is not 1";
    if (dimension() > 0 && eigenvalues().minCoeff() < -kTolerance) {
      return "negative eigenvalue";
    }
    return {};
  }

  double max_abs_diff(const DensityMatrix& o) const {
    if (o.dimension() != dimension()) return INFINITY;
    return (m_ - o.m_).cwiseAbs().maxCoeff();
  }

 private:
  std::uint32_t q_;
  std::size_t registers_;
  Eigen::MatrixXcd m_;
};

/** Reduced density matrix on `keep`, indexed by the kept digits in listed order. */
inline DensityMatrix partial_trace(
    const SparseState& s, std::span<const std::size_t> keep) {
  const KeyCodec& c = s.codec();
  const std::uint32_t q = s.modulus();
  std::size_t dim = 1;
  for (auto r : keep) {
    detail::check_register(s, r);
    dim *= q;
    if (dim > DensityMatrix::kMaxDimension) {
      throw StateError("partial trace cap exceeded: dimension above 2048");
    }
  }
  Key clear = ~Key{0};
  for (auto r : keep) clear = c.set(clear, r, 0);
  struct Item {
    Key rest;
    std::size_t index;
    Complex amp;
  };
  std::vector<Item> items;
  for (const auto& t : s.terms()) {
    std::size_t idx = 0;
    for (auto r : keep) idx = idx * q + c.get(t.key, r);
    items.push_back(Item{t.key & clear, idx, t.amplitude});
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return a.rest < b.rest;
  });
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(
      static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t lo = 0; lo < items.size();) {
    std::size_t hi = lo;
    while (hi < items.size() && items[hi].rest == items[lo].rest) ++hi;
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t j = lo; j < hi; ++j) {
        rho(static_cast<Eigen::Index>(items[i].index),
            static_cast<Eigen::Index>(items[j].index)) +=
            items[i].amp * std::conj(items[j].amp);
      }
    }
    lo = hi;
  }
  return DensityMatrix(q, keep.size(), std::move(rho));
}

/**
 * Tr_rest |x><y| on the kept registers, for two states of the same shape.
 * Used to tabulate reduced operators of encoded basis pairs.
 */
inline Eigen::MatrixXcd partial_trace_cross(
    const SparseState& x, const SparseState& y, std::span<const std::size_t> keep) {
  if (x.modulus() != y.modulus() || x.register_count() != y.register_count()) {
    throw StateError("cross partial trace of mismatched states");
  }
  const KeyCodec& c = x.codec();
  const std::uint32_t q = x.modulus();
  std::size_t dim = 1;
  for (auto r : keep) {
    detail::check_register(x, r);
    dim *= q;
    if (dim > DensityMatrix::kMaxDimension) throw StateError("partial trace cap exceeded");
  }
  Key clear = ~Key{0};
  for (auto r : keep) clear = c.set(clear, r, 0);
  struct Item {
    Key rest;
    std::size_t index;
    Complex amp;
    bool left;
  };
  std::vector<Item> items;
  auto add = [&](const SparseState& s, bool left) {
    for (const auto& t : s.terms()) {
      std::size_t idx = 0;
      for (auto r : keep) idx = idx * q + c.get(t.key, r);
      items.push_back(Item{t.key & clear, idx, t.amplitude, left});
    }
  };
  add(x, true);
  add(y, false);
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return a.rest < b.rest;
  });
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(
      static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t lo = 0; lo < items.size();) {
    std::size_t hi = lo;
    while (hi < items.size() && items[hi].rest == items[lo].rest) ++hi;
    for (std::size_t i = lo; i < hi; ++i) {
      if (!items[i].left) continue;
      for (std::size_t j = lo; j < hi; ++j) {
        if (items[j].left) continue;
        out(static_cast<Eigen::Index>(items[i].index), static_cast<Eigen::Index>(items[j].index)) +=
            items[i].amp * std::conj(items[j].amp);
      }
    }
    lo = hi;
  }
  return out;
}

/** One line per term: digits, tab, real part, tab, imaginary part. */
inline std::string to_debug_string(const SparseState& s) {
  std::ostringstream out;
  char buf[64];
  for (const auto& t : s.terms()) {
    auto d = s.digits(t.key);
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (s.modulus() > 10 && j > 0) out << '.';
      out << static_cast<unsigned>(d[j]);
    }
    auto clean = [](double x) { return std::abs(x) < 5e-13 ? 0.0 : x; };
    std::snprintf(
        buf, sizeof buf, "\t%.12f\t%.12f\n", clean(t.amplitude.real()),
        clean(t.amplitude.imag()));
    out << buf;
  }
  return out.str();
}

}  // namespace qmpc
