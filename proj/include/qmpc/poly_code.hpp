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

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "qmpc/field.hpp"
#include "qmpc/reed_solomon.hpp"
#include "qmpc/rng.hpp"
#include "qmpc/sparse_state.hpp"

namespace qmpc {

/**
 * L: logical value a0 is the constant term of a random polynomial of degree
 * d - 1. LTilde: same with degree n - d. The Fourier layer maps one onto the
 * other.
 */
enum class Variant { L, LTilde };

inline const char* variant_name(Variant v) { return v == Variant::L ? "L" : "L~"; }

class CodeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class CodeParams {
 public:
  CodeParams(
      std::size_t n, std::uint32_t q, std::size_t d,
      std::optional<std::vector<std::uint32_t>> points = std::nullopt)
      : n_(n), q_(q), d_(d) {
    if (q <= n) throw CodeError("code needs q > n");
    if (d < 1) throw CodeError("code needs d >= 1");
    if (3 * d > n + 2) throw CodeError("code needs 3d <= n + 2");
    if (points) {
      if (points->size() != n) throw CodeError("code needs exactly n points");
      for (auto y : *points) points_.emplace_back(y, q_);
    } else {
      for (std::size_t i = 1; i <= n; ++i) points_.emplace_back(i, q_);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (points_[i].is_zero()) throw CodeError("evaluation points must be nonzero");
      for (std::size_t j = i + 1; j < n; ++j) {
        if (points_[i] == points_[j]) throw CodeError("evaluation points must be distinct");
      }
    }
    lagrange_zero_ = solve_moment_system(
        {points_, std::vector<FieldElement>(1, FieldElement(1, q_))});
    mu_n_ = moment_sum(lagrange_zero_, points_, n);
    if (mu_n_.is_zero()) {
      throw CodeError("the Fourier layer is degenerate for these points (mu_n = 0)");
    }
  }

  /** (n, q, d) = (4, 5, 2): no error correction, small enough for exhaustive tests. */
  static CodeParams small() { return CodeParams(4, 5, 2); }
  /** (n, q, d) = (7, 11, 3): corrects one arbitrary register. */
  static CodeParams secure() { return CodeParams(7, 11, 3); }

  std::size_t n() const { return n_; }
  Modulus modulus() const { return q_; }
  std::uint32_t q() const { return q_.value(); }
  std::size_t d() const { return d_; }
  std::size_t delta() const { return (d_ - 1) / 2; }
  const std::vector<FieldElement>& points() const { return points_; }
  /** Weights m_i with sum m_i y_i^j = [j == 0] for j < n. */
  const std::vector<FieldElement>& lagrange_at_zero() const { return lagrange_zero_; }
  FieldElement mu_n() const { return mu_n_; }

  /** Number of random coefficients a_1 .. a_g. */
  std::size_t gauge_count(Variant v) const { return v == Variant::L ? d_ - 1 : n_ - d_; }
  /** RS message length of a measured register: polynomial degree + 1. */
  std::size_t rs_k(Variant v) const { return gauge_count(v) + 1; }
  RSParams rs_params(Variant v) const { return RSParams(n_, rs_k(v), q_, points_); }

  bool operator==(const CodeParams& o) const {
    return n_ == o.n_ && q_ == o.q_ && d_ == o.d_ && points_ == o.points_;
  }

 private:
  std::size_t n_;
  Modulus q_;
  std::size_t d_;
  std::vector<FieldElement> points_;
  std::vector<FieldElement> lagrange_zero_;
  FieldElement mu_n_{0, Modulus(2)};
};

/** Exact membership test for one variant's codewords, by interpolation. */
class CodewordChecker {
 public:
  CodewordChecker(const CodeParams& code, Variant v)
      : q_(code.q()), n_(code.n()), k_(code.rs_k(v)) {
    // Lagrange basis over the first k points, evaluated at 0 and at the rest.
    const auto& y = code.points();
    auto basis_at = [&](std::size_t l, const FieldElement& x) {
      FieldElement num(1, code.modulus()), den(1, code.modulus());
      for (std::size_t j = 0; j < k_; ++j) {
        if (j == l) continue;
        num *= x - y[j];
        den *= y[l] - y[j];
      }
      return (num / den).value();
    };
    for (std::size_t l = 0; l < k_; ++l) {
      at_zero_.push_back(basis_at(l, FieldElement(0, code.modulus())));
    }
    for (std::size_t i = k_; i < n_; ++i) {
      std::vector<std::uint32_t> row;
      for (std::size_t l = 0; l < k_; ++l) row.push_back(basis_at(l, y[i]));
      predict_.push_back(std::move(row));
    }
  }

  /** Logical value if the string is a codeword, else nullopt. */
  std::optional<std::uint32_t> logical(std::span<const Digit> s) const {
    for (std::size_t i = k_; i < n_; ++i) {
      std::uint64_t acc = 0;
      for (std::size_t l = 0; l < k_; ++l) acc += std::uint64_t{predict_[i - k_][l]} * s[l];
      if (acc % q_ != s[i]) return std::nullopt;
    }
    std::uint64_t acc = 0;
    for (std::size_t l = 0; l < k_; ++l) acc += std::uint64_t{at_zero_[l]} * s[l];
    return static_cast<std::uint32_t>(acc % q_);
  }

 private:
  std::uint32_t q_;
  std::size_t n_, k_;
  std::vector<std::uint32_t> at_zero_;
  std::vector<std::vector<std::uint32_t>> predict_;
};

/** Physical strings of every codeword for logical value 0, one per gauge choice. */
inline std::vector<std::vector<Digit>> gauge_strings(const CodeParams& code, Variant v) {
  const std::uint32_t q = code.q();
  const std::size_t g = code.gauge_count(v), n = code.n();
  std::vector<std::vector<std::uint32_t>> powers(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j <= g; ++j) powers[i].push_back(code.points()[i].pow(j).value());
  }
  std::vector<std::vector<Digit>> out;
  std::vector<std::uint32_t> coeff(g, 0);
  while (true) {
    std::vector<Digit> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t acc = 0;
      for (std::size_t j = 0; j < g; ++j) acc += std::uint64_t{coeff[j]} * powers[i][j];
      s[i] = static_cast<Digit>(acc % q);
    }
    out.push_back(std::move(s));
    std::size_t j = 0;
    while (j < g && ++coeff[j] == q) coeff[j++] = 0;
    if (j == g) break;
  }
  return out;
}

/**
 * Encodes a logical single-register state given as q amplitudes indexed by
 * the logical value.
 */
inline SparseState encode(
    const CodeParams& code, Variant v, const std::vector<Complex>& logical) {
  const std::uint32_t q = code.q();
  if (logical.size() != q) throw CodeError("logical state needs q amplitudes");
  double norm = 0;
  for (const auto& a : logical) norm += std::norm(a);
  if (std::abs(norm - 1.0) > kTolerance) throw CodeError("logical state is not normalized");
  auto gauges = gauge_strings(code, v);
  const double scale = 1.0 / std::sqrt(static_cast<double>(gauges.size()));
  KeyCodec codec(q, code.n());
  std::vector<Term> terms;
  std::vector<Digit> s(code.n());
  for (std::uint32_t a = 0; a < q; ++a) {
    if (std::abs(logical[a]) < kPruneThreshold) continue;
    for (const auto& g : gauges) {
      for (std::size_t i = 0; i < code.n(); ++i) s[i] = static_cast<Digit>((g[i] + a) % q);
      terms.push_back(Term{codec.pack(s), logical[a] * scale});
    }
  }
  return SparseState::from_raw(q, code.n(), std::move(terms));
}

inline SparseState encode_basis(const CodeParams& code, Variant v, std::uint32_t a) {
  std::vector<Complex> logical(code.q());
  logical[a % code.q()] = 1.0;
  return encode(code, v, logical);
}

/** Where an encoded register sits inside a larger state. */
struct EncodedRegister {
  std::size_t offset;
  Variant variant;

  std::vector<std::size_t> qudits(std::size_t n) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(offset + i);
    return out;
  }
};

/** Shift by a then phase by b on one physical register (0-based index). */
inline SparseState inject_error(
    SparseState s, const CodeParams& code, const EncodedRegister& reg,
    std::size_t physical_index, std::int64_t a, std::int64_t b) {
  if (physical_index >= code.n()) throw CodeError("physical index out of range");
  std::vector<Instruction> prog = {
      LocalOp{reg.offset + physical_index, Shift{a}},
      LocalOp{reg.offset + physical_index, Phase{b}}};
  return apply_circuit(std::move(s), prog);
}

struct Inference {
  std::optional<FieldElement> logical;
  std::string failure;
  RSDecodeResult decoded;
  ShareVector shares;
  SparseState collapsed;
  /** Born probability of the allowed outcome set (1 unless forced). */
  double condition_probability = 1.0;
};

inline RSDecodeResult decode_shares(
    const CodeParams& code, Variant v, const ShareVector& shares, std::size_t max_errors) {
  return rs_decode(code.rs_params(v), shares, max_errors);
}

/**
 * Measures the n physical registers, decodes the share vector and reports
 * the logical outcome. The measured registers remain in the collapsed state,
 * holding definite values. With `forced`, the physical outcome is drawn from
 * the strings that decode to that value.
 */
inline Inference measure_and_infer(
    SparseState s, const CodeParams& code, const EncodedRegister& reg, Rng& rng,
    std::size_t max_errors, std::optional<std::uint32_t> forced = std::nullopt) {
  if (max_errors > code.delta()) throw CodeError("max_errors exceeds delta");
  const auto qudits = reg.qudits(code.n());
  const RSParams params = code.rs_params(reg.variant);
  auto to_shares = [&](std::span<const Digit> d) {
    ShareVector sv;
    for (auto x : d) sv.symbols.emplace_back(x, code.modulus());
    return sv;
  };
  std::function<bool(std::span<const Digit>)> allowed;
  if (forced) {
    allowed = [&](std::span<const Digit> d) {
      auto r = rs_decode(params, to_shares(d), max_errors);
      const auto* ok = std::get_if<RSDecoded>(&r);
      return ok && ok->value_at_zero.value() == *forced % code.q();
    };
  }
  auto joint = measure_registers(std::move(s), qudits, rng, allowed);
  ShareVector shares = to_shares(joint.digits);
  auto decoded = rs_decode(params, shares, max_errors);
  Inference out{std::nullopt, {}, decoded, shares, std::move(joint.state),
                joint.condition_probability};
  if (const auto* ok = std::get_if<RSDecoded>(&decoded)) {
    out.logical = ok->value_at_zero;
  } else {
    out.failure = std::get<DecodeFailure>(decoded).reason;
  }
  return out;
}

class LeakageError : public CodeError {
 public:
  explicit LeakageError(double mass)
      : CodeError("state leaks outside the code space (mass " + std::to_string(mass) + ")"),
        mass_(mass) {}
  double leaked_mass() const { return mass_; }

 private:
  double mass_;
};

/**
 * Projects onto the encoded subspace. The listed registers must cover every
 * qudit of the state. Returns logical amplitudes <enc(s)|psi> keyed by the
 * logical string.
 */
inline std::map<std::vector<Digit>, Complex> logical_readout(
    const SparseState& s, const CodeParams& code, const std::vector<EncodedRegister>& regs) {
  const std::size_t n = code.n();
  if (regs.size() * n != s.register_count()) {
    throw CodeError("encoded registers must cover the whole state");
  }
  std::vector<CodewordChecker> checkers;
  double scale = 1.0;
  for (const auto& r : regs) {
    checkers.emplace_back(code, r.variant);
    scale /= std::sqrt(std::pow(static_cast<double>(code.q()), code.gauge_count(r.variant)));
  }
  std::map<std::vector<Digit>, Complex> out;
  std::vector<Digit> sub(n), logical(regs.size());
  for (const auto& t : s.terms()) {
    bool ok = true;
    for (std::size_t r = 0; r < regs.size() && ok; ++r) {
      for (std::size_t i = 0; i < n; ++i) sub[i] = s.codec().get(t.key, regs[r].offset + i);
      auto v = checkers[r].logical(sub);
      if (!v) ok = false;
      else logical[r] = static_cast<Digit>(*v);
    }
    if (ok) out[logical] += t.amplitude * scale;
  }
  double kept = 0;
  for (auto it = out.begin(); it != out.end();) {
    if (std::abs(it->second) < kPruneThreshold) {
      it = out.erase(it);
    } else {
      kept += std::norm(it->second);
      ++it;
    }
  }
  double leak = s.norm_squared() - kept;
  if (leak > kTolerance) throw LeakageError(leak);
  return out;
}

/** Logical readout as a state over one qudit per encoded register. */
inline SparseState logical_state(
    const SparseState& s, const CodeParams& code, const std::vector<EncodedRegister>& regs) {
  auto amps = logical_readout(s, code, regs);
  std::vector<std::pair<std::vector<Digit>, Complex>> entries(amps.begin(), amps.end());
  return SparseState::from_terms(code.q(), regs.size(), entries);
}

}  // namespace qmpc
