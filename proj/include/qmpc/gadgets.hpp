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

#include <array>
#include <deque>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmpc/machine.hpp"

namespace qmpc {

/** Raised by gadgets when an announced share vector does not decode. */
class AbortSignal : public std::runtime_error {
 public:
  AbortSignal(std::string tag, std::string reason)
      : std::runtime_error(tag + ": " + reason), tag_(std::move(tag)), reason_(std::move(reason)) {}
  const std::string& tag() const { return tag_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string tag_;
  std::string reason_;
};

/** Queue of logical outcomes to force on successive measurements. */
class OutcomeSchedule {
 public:
  OutcomeSchedule() = default;
  OutcomeSchedule(std::initializer_list<std::uint32_t> values) : queue_(values) {}
  explicit OutcomeSchedule(std::vector<std::uint32_t> values)
      : queue_(values.begin(), values.end()) {}

  void push(std::uint32_t v) { queue_.push_back(v); }
  bool empty() const { return queue_.empty(); }
  std::optional<std::uint32_t> next() {
    if (queue_.empty()) return std::nullopt;
    auto v = queue_.front();
    queue_.pop_front();
    return v;
  }

 private:
  std::deque<std::uint32_t> queue_;
};

struct AnnounceRequest {
  std::string tag;
  Variant variant;
  const MeasureOutcome& outcome;
};

/**
 * Turns honest shares into the inferred logical value: the protocol layer
 * injects lies and logs broadcasts here. nullopt means decoding failed;
 * `reason` receives the explanation.
 */
using Announcer = std::function<std::optional<FieldElement>(const AnnounceRequest&, std::string& reason)>;

/** Everyone announces honestly; decoding corrects up to delta errors. */
inline Announcer honest_announcer(const CodeParams& code) {
  return [code](const AnnounceRequest& req, std::string& reason) -> std::optional<FieldElement> {
    auto r = decode_shares(code, req.variant, req.outcome.shares, code.delta());
    if (const auto* ok = std::get_if<RSDecoded>(&r)) return ok->value_at_zero;
    reason = std::get<DecodeFailure>(r).reason;
    return std::nullopt;
  };
}

struct GadgetEnv {
  Rng* rng;
  OutcomeSchedule* schedule = nullptr;
  Announcer announcer;
  /** Product of the conditioning probabilities of forced outcomes. */
  double class_probability = 1.0;
};

template <RegisterMachine M>
GadgetEnv make_env(const M& m, Rng& rng, OutcomeSchedule* schedule = nullptr) {
  return GadgetEnv{&rng, schedule, honest_announcer(m.code())};
}

/** Measures, announces and decodes one register; nullopt on decode failure. */
template <RegisterMachine M>
std::optional<FieldElement> measure_logical(
    M& m, RegisterId r, GadgetEnv& env, const std::string& tag, std::string* reason = nullptr) {
  Variant v = m.variant(r);
  std::optional<std::uint32_t> forced;
  if (env.schedule) forced = env.schedule->next();
  MeasureOutcome out = m.measure(r, *env.rng, forced, m.code().delta());
  env.class_probability *= out.class_probability;
  std::string why;
  auto value = env.announcer(AnnounceRequest{tag, v, out}, why);
  if (!value && reason) *reason = why;
  return value;
}

template <RegisterMachine M>
FieldElement measure_or_abort(M& m, RegisterId r, GadgetEnv& env, const std::string& tag) {
  std::string reason;
  auto v = measure_logical(m, r, env, tag, &reason);
  if (!v) throw AbortSignal(tag, reason);
  return *v;
}

/** Player-local Fourier layer; maps L onto L~ and back. */
template <RegisterMachine M>
void F_gadget(M& m, RegisterId r) {
  m.fourier(r);
}

/** Ancilla sum_{a,b} |a, b, ab>_L / q. */
struct Ancilla {
  RegisterId a;
  RegisterId b;
  RegisterId c;
  FieldElement lambda;
};

/**
 * Runs the synthesis up to the measurement of the fourth register. The
 * returned registers hold sum_{a,b} |a, b, ab + lambda>_L / q.
 */
template <RegisterMachine M>
Ancilla synthesize_uncorrected(
    M& m, GadgetEnv& env, const std::string& tag = "synthesis",
    std::optional<std::array<RegisterId, 4>> presets = std::nullopt) {
  std::array<RegisterId, 4> reg;
  if (presets) {
    reg = *presets;
  } else {
    for (auto& r : reg) r = m.prepare(Variant::LTilde, 0);
  }
  for (auto r : reg) {
    if (m.variant(r) != Variant::LTilde) throw CodeError("synthesis needs L~ presets");
  }
  for (auto r : reg) F_gadget(m, r);
  m.cphase_pq(reg[2], reg[3]);
  m.ccphase_r(reg[0], reg[1], reg[3]);
  F_gadget(m, reg[3]);
  FieldElement lambda = measure_or_abort(m, reg[3], env, tag);
  return Ancilla{reg[0], reg[1], reg[2], lambda};
}

template <RegisterMachine M>
Ancilla synthesize(
    M& m, GadgetEnv& env, const std::string& tag = "synthesis",
    std::optional<std::array<RegisterId, 4>> presets = std::nullopt) {
  Ancilla anc = synthesize_uncorrected(m, env, tag, presets);
  m.add_const(anc.c, -static_cast<std::int64_t>(anc.lambda.value()));
  return anc;
}

struct ToffoliResult {
  /** New homes of x, y and z + xy. */
  RegisterId x;
  RegisterId y;
  RegisterId z;
  FieldElement lambda1;
  FieldElement lambda2;
  FieldElement lambda3;
};

// Toffoli stages, exposed so tests can branch between measurements.
template <RegisterMachine M>
void toffoli_stage_x(M& m, RegisterId x, const Ancilla& anc) {
  m.add_scaled(anc.a, x, -1);
}
template <RegisterMachine M>
void toffoli_stage_y(M& m, RegisterId y, const Ancilla& anc) {
  m.add_scaled(anc.b, y, -1);
}
template <RegisterMachine M>
void toffoli_stage_z(M& m, RegisterId z, const Ancilla& anc) {
  m.add_scaled(z, anc.c, 1);
  F_gadget(m, z);
}

/** Classical corrections once lambda1 = x - a, lambda2 = y - b and lambda3 are known. */
template <RegisterMachine M>
void toffoli_finish(
    M& m, const Ancilla& anc, const FieldElement& l1, const FieldElement& l2,
    const FieldElement& l3) {
  auto v = [](const FieldElement& f) { return static_cast<std::int64_t>(f.value()); };
  m.add_const(anc.a, v(l1));
  m.add_const(anc.b, v(l2));
  m.add_scaled(anc.b, anc.c, v(l1));
  m.add_scaled(anc.a, anc.c, v(l2));
  m.add_const(anc.c, -v(l1 * l2));
  // Measuring z in the Fourier basis left w^{l3 z} = w^{l3 (c - ab)}.
  if (!l3.is_zero()) {
    m.phase(anc.c, -v(l3));
    m.cphase(anc.a, anc.b, v(l3));
  }
}

/**
 * |x, y, z> -> |x, y, z + xy> using a synthesized ancilla. The inputs are
 * measured away; the ancilla registers carry the result.
 */
template <RegisterMachine M>
ToffoliResult logical_toffoli(
    M& m, RegisterId x, RegisterId y, RegisterId z, const Ancilla& anc, GadgetEnv& env,
    const std::string& tag = "toffoli") {
  for (auto r : {x, y, z, anc.a, anc.b, anc.c}) {
    if (m.variant(r) != Variant::L) throw CodeError("toffoli needs L registers");
  }
  toffoli_stage_x(m, x, anc);
  FieldElement l1 = measure_or_abort(m, x, env, tag + ".lambda1");
  toffoli_stage_y(m, y, anc);
  FieldElement l2 = measure_or_abort(m, y, env, tag + ".lambda2");
  toffoli_stage_z(m, z, anc);
  FieldElement l3 = measure_or_abort(m, z, env, tag + ".lambda3");
  toffoli_finish(m, anc, l1, l2, l3);
  return ToffoliResult{anc.a, anc.b, anc.c, l1, l2, l3};
}

struct ParityResult {
  bool pass;
  std::optional<FieldElement> value;
  std::string reason;
};

/**
 * Accumulates sum_k c_k x_k into a fresh |0>_L and measures it. The copies
 * are left untouched.
 */
template <RegisterMachine M>
ParityResult random_parity_check(
    M& m, const std::vector<RegisterId>& copies, const std::vector<FieldElement>& c,
    RegisterId accumulator, GadgetEnv& env, const std::string& tag = "parity") {
  if (copies.size() != c.size()) throw CodeError("one coefficient per copy");
  FieldElement sum(0, m.code().modulus());
  for (const auto& x : c) sum += x;
  if (!sum.is_zero()) throw CodeError("parity coefficients must sum to zero");
  if (m.variant(accumulator) != Variant::L) throw CodeError("accumulator must be L");
  for (std::size_t k = 0; k < copies.size(); ++k) {
    m.add_scaled(copies[k], accumulator, static_cast<std::int64_t>(c[k].value()));
  }
  std::string reason;
  auto v = measure_logical(m, accumulator, env, tag, &reason);
  if (!v) return ParityResult{false, std::nullopt, reason};
  if (!v->is_zero()) return ParityResult{false, v, "nonzero parity " + std::to_string(v->value())};
  return ParityResult{true, v, {}};
}

/** Uniform coefficients with sum zero: s - 1 free draws, the last one balances. */
inline std::vector<FieldElement> random_parity_coefficients(
    std::size_t s, const Modulus& q, Rng& rng) {
  if (s < 2) throw CodeError("a parity check needs at least two copies");
  std::vector<FieldElement> c;
  FieldElement sum(0, q);
  for (std::size_t k = 0; k + 1 < s; ++k) {
    c.emplace_back(static_cast<std::uint32_t>(rng.uniform_index(q.value())), q);
    sum += c.back();
  }
  c.push_back(-sum);
  return c;
}

}  // namespace qmpc
