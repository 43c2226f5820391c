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

// Fidelity sweeps over the gadgets, shared by the CLI and the acceptance run.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "qmpc/gadgets.hpp"
#include "qmpc/hashing.hpp"
#include "qmpc/machine.hpp"
#include "qmpc/teleport.hpp"

namespace qmpc {

inline constexpr double kGadgetFidelity = 1 - 1e-9;

struct SweepReport {
  std::string gadget;
  std::size_t cases = 0;
  std::size_t passed = 0;
  double min_fidelity = 1.0;
  /** First failing case, human readable. */
  std::string first_failure;

  bool pass() const { return cases > 0 && passed == cases; }
  void add(double fid, const std::string& label) {
    ++cases;
    min_fidelity = std::min(min_fidelity, fid);
    if (fid >= kGadgetFidelity) {
      ++passed;
    } else if (first_failure.empty()) {
      first_failure = label + " fidelity " + std::to_string(fid);
    }
  }
};

/** sum amp |enc(x_1)>...|enc(x_k)> on physical qudits. */
inline SparseState encoded_superposition(
    const CodeParams& code, const std::vector<Variant>& variants,
    const std::vector<std::pair<std::vector<Digit>, Complex>>& entries) {
  std::vector<Term> terms;
  for (const auto& [logical, amp] : entries) {
    SparseState s = encode_basis(code, variants[0], logical[0]);
    for (std::size_t j = 1; j < variants.size(); ++j) s = tensor(s, encode_basis(code, variants[j], logical[j]));
    for (const auto& t : s.terms()) terms.push_back(Term{t.key, t.amplitude * amp});
  }
  return SparseState::from_raw(code.q(), variants.size() * code.n(), std::move(terms));
}

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

/**
 * F on every basis input of both variants plus `random_inputs` superpositions,
 * against the discrete Fourier image on the other variant.
 */
inline SweepReport sweep_fourier(const CodeParams& code, std::size_t random_inputs, std::uint64_t seed) {
  SweepReport rep;
  rep.gadget = "F";
  const std::uint32_t q = code.q();
  const auto& w = roots_of_unity(q);
  Rng rng(seed);
  for (Variant v : {Variant::L, Variant::LTilde}) {
    const Variant out = v == Variant::L ? Variant::LTilde : Variant::L;
    for (std::size_t trial = 0; trial < q + random_inputs; ++trial) {
      std::vector<Complex> in(q);
      if (trial < q) in[trial] = 1;
      else in = random_amplitudes(q, rng);
      std::vector<std::pair<std::vector<Digit>, Complex>> want;
      for (std::uint32_t b = 0; b < q; ++b) {
        Complex amp = 0;
        for (std::uint32_t a = 0; a < q; ++a) amp += in[a] * w[(a * b) % q];
        want.push_back({{static_cast<Digit>(b)}, amp / std::sqrt(double(q))});
      }
      PhysicalMachine m(code);
      RegisterId r = trial < q ? m.prepare(v, static_cast<std::uint32_t>(trial)) : m.prepare_state(v, in);
      F_gadget(m, r);
      double fid = m.variant(r) == out ? fidelity(encoded_superposition(code, {out}, want), m.physical_state({r})) : 0;
      rep.add(fid, std::string(variant_name(v)) + (trial < q ? " basis " + std::to_string(trial) : " random"));
    }
  }
  return rep;
}

struct ToffoliSweepOptions {
  /** Branch over every (lambda1, lambda2, lambda3) instead of sampling one. */
  bool all_outcomes = false;
  std::optional<std::array<std::uint32_t, 3>> forced;
  /** Data triples; empty means all of F_q^3. */
  std::vector<std::array<Digit, 3>> triples;
  std::uint64_t seed = 1;
};

/**
 * Synthesizes one ancilla (honest lambda), then runs the Toffoli on each
 * triple and compares the physical output with |x, y, z + xy>_L.
 */
inline SweepReport sweep_toffoli(const CodeParams& code, const ToffoliSweepOptions& opt) {
  SweepReport rep;
  rep.gadget = "toffoli";
  const std::uint32_t q = code.q();
  PhysicalMachine base(code);
  Rng rng(opt.seed);
  GadgetEnv env = make_env(base, rng);
  const Ancilla anc = synthesize(base, env);

  std::vector<std::array<Digit, 3>> triples = opt.triples;
  if (triples.empty()) {
    for (Digit x = 0; x < q; ++x) {
      for (Digit y = 0; y < q; ++y) {
        for (Digit z = 0; z < q; ++z) triples.push_back({x, y, z});
      }
    }
  }

  auto measure = [&](PhysicalMachine& m, RegisterId r, std::optional<std::uint32_t> force, const char* tag) {
    OutcomeSchedule s;
    if (force) s.push(*force);
    GadgetEnv e = make_env(m, rng, force ? &s : nullptr);
    return measure_or_abort(m, r, e, tag);
  };

  for (const auto& [x, y, z] : triples) {
    const SparseState target = encoded_superposition(
        code, {3, Variant::L}, {{{x, y, static_cast<Digit>((z + x * y) % q)}, 1.0}});
    const std::string label = "(" + std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(z) + ")";
    PhysicalMachine m0 = base;
    auto rx = m0.prepare(Variant::L, x), ry = m0.prepare(Variant::L, y), rz = m0.prepare(Variant::L, z);
    toffoli_stage_x(m0, rx, anc);
    if (!opt.all_outcomes) {
      std::optional<std::uint32_t> f1, f2, f3;
      if (opt.forced) std::tie(f1, f2, f3) = std::tuple((*opt.forced)[0], (*opt.forced)[1], (*opt.forced)[2]);
      auto l1 = measure(m0, rx, f1, "lambda1");
      toffoli_stage_y(m0, ry, anc);
      auto l2 = measure(m0, ry, f2, "lambda2");
      toffoli_stage_z(m0, rz, anc);
      auto l3 = measure(m0, rz, f3, "lambda3");
      toffoli_finish(m0, anc, l1, l2, l3);
      rep.add(fidelity(target, m0.physical_state({anc.a, anc.b, anc.c})), label);
      continue;
    }
    for (std::uint32_t f1 = 0; f1 < q; ++f1) {
      PhysicalMachine m1 = m0;
      auto l1 = measure(m1, rx, f1, "lambda1");
      toffoli_stage_y(m1, ry, anc);
      for (std::uint32_t f2 = 0; f2 < q; ++f2) {
        PhysicalMachine m2 = m1;
        auto l2 = measure(m2, ry, f2, "lambda2");
        toffoli_stage_z(m2, rz, anc);
        for (std::uint32_t f3 = 0; f3 < q; ++f3) {
          PhysicalMachine m3 = m2;
          auto l3 = measure(m3, rz, f3, "lambda3");
          toffoli_finish(m3, anc, l1, l2, l3);
          const bool took = l1.value() == f1 && l2.value() == f2 && l3.value() == f3;
          rep.add(took ? fidelity(target, m3.physical_state({anc.a, anc.b, anc.c})) : 0,
                  label + " lambda " + std::to_string(f1) + "," + std::to_string(f2) + "," + std::to_string(f3));
        }
      }
    }
  }
  return rep;
}

/**
 * Teleports one half of a random entangled (reference, payload) pair over
 * a Phi pair, for every label or a sampled one.
 */
inline SweepReport sweep_teleport(
    std::uint32_t q, std::size_t payloads, bool all_outcomes, std::optional<BellLabel> forced, std::uint64_t seed) {
  SweepReport rep;
  rep.gadget = "teleport";
  Rng rng(seed);
  for (std::size_t p = 0; p < payloads; ++p) {
    std::vector<Term> terms;
    KeyCodec codec(q, 2);
    double norm = 0;
    for (Digit a = 0; a < q; ++a) {
      for (Digit b = 0; b < q; ++b) {
        Complex amp(rng.uniform_real() - 0.5, rng.uniform_real() - 0.5);
        norm += std::norm(amp);
        const Digit d[] = {a, b};
        terms.push_back(Term{codec.pack(d), amp});
      }
    }
    for (auto& t : terms) t.amplitude /= std::sqrt(norm);
    const SparseState payload = SparseState::from_raw(q, 2, std::move(terms));
    std::vector<std::optional<BellLabel>> labels;
    if (all_outcomes) {
      for (std::uint32_t a = 0; a < q; ++a) {
        for (std::uint32_t b = 0; b < q; ++b) labels.push_back(BellLabel{a, b});
      }
    } else {
      labels.push_back(forced);
    }
    for (const auto& label : labels) {
      auto res = teleport(tensor(payload, bell_state(q, {})), 1, 2, 3, rng, label);
      const std::size_t gone[] = {1, 2};
      double fid = fidelity(payload, remove_registers(res.state, gone));
      if (label && !(res.label == *label)) fid = 0;
      rep.add(fid, "payload " + std::to_string(p) + " label " + std::to_string(res.label.a) + "," +
                       std::to_string(res.label.b));
    }
  }
  return rep;
}

/** Honest Phi ensembles must pass every round and come back as Phi. */
inline SweepReport sweep_hashing(std::uint32_t q, std::size_t pairs, std::size_t rounds, std::size_t trials,
                                 std::uint64_t seed) {
  SweepReport rep;
  rep.gadget = "hashing";
  Rng rng(seed);
  const SparseState phi = bell_state(q, {});
  auto ensemble = [&](std::size_t k) {
    SparseState s = phi;
    for (std::size_t j = 1; j < k; ++j) s = tensor(s, phi);
    return s;
  };
  const SparseState restored = ensemble(pairs - rounds);
  for (std::size_t t = 0; t < trials; ++t) {
    auto res = hashing_test(ensemble(pairs), rounds, rng);
    rep.add(res.pass ? fidelity(res.state, restored) : 0, "trial " + std::to_string(t) + " " + res.evidence);
  }
  return rep;
}

}  // namespace qmpc
