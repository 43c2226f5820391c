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
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "qmpc/poly_code.hpp"
#include "qmpc/rng.hpp"
#include "qmpc/sparse_state.hpp"

namespace qmpc {

/** Encoded basis states of some code, |enc(0)> .. |enc(q-1)>. */
struct CodeInstance {
  std::string name;
  std::uint32_t q;
  std::size_t n;
  std::vector<SparseState> codewords;

  static CodeInstance polynomial(const CodeParams& code, Variant v) {
    CodeInstance c{std::string("poly(") + std::to_string(code.n()) + "," +
                       std::to_string(code.q()) + "," + std::to_string(code.d()) + ")" +
                       variant_name(v),
                   code.q(), code.n(), {}};
    for (std::uint32_t k = 0; k < code.q(); ++k) c.codewords.push_back(encode_basis(code, v, k));
    return c;
  }

  /** |a> -> |a, a, ..., a>. */
  static CodeInstance repetition(std::size_t n, std::uint32_t q) {
    Modulus check(q);
    (void)check;
    CodeInstance c{"repetition(" + std::to_string(n) + "," + std::to_string(q) + ")", q, n, {}};
    for (std::uint32_t k = 0; k < q; ++k) {
      std::vector<Digit> d(n, static_cast<Digit>(k));
      c.codewords.push_back(SparseState::basis(q, d));
    }
    return c;
  }
};

/** Product of Z^b X^a on the listed registers; identity when empty. */
struct ErrorOperator {
  struct Factor {
    std::size_t position;
    std::uint32_t a;
    std::uint32_t b;
    auto operator<=>(const Factor&) const = default;
  };
  std::vector<Factor> factors;

  std::size_t weight() const { return factors.size(); }
  auto operator<=>(const ErrorOperator&) const = default;

  std::string to_string() const {
    if (factors.empty()) return "I";
    std::string s;
    for (const auto& f : factors) {
      if (!s.empty()) s += " ";
      s += "X" + std::to_string(f.a) + "Z" + std::to_string(f.b) + "@" + std::to_string(f.position);
    }
    return s;
  }
};

enum class ErrorKind { General, ShiftOnly, PhaseOnly };

/** Identity plus every operator of weight 1..max_weight of the given kind. */
inline std::vector<ErrorOperator> enumerate_errors(
    std::size_t n, std::uint32_t q, std::size_t max_weight, ErrorKind kind) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> actions;
  for (std::uint32_t a = 0; a < q; ++a) {
    for (std::uint32_t b = 0; b < q; ++b) {
      if (a == 0 && b == 0) continue;
      if (kind == ErrorKind::ShiftOnly && b != 0) continue;
      if (kind == ErrorKind::PhaseOnly && a != 0) continue;
      actions.push_back({a, b});
    }
  }
  std::vector<ErrorOperator> out{ErrorOperator{}};
  // Extend operators position by position to keep supports sorted.
  std::vector<ErrorOperator> frontier{ErrorOperator{}};
  for (std::size_t w = 1; w <= max_weight; ++w) {
    std::vector<ErrorOperator> next;
    for (const auto& e : frontier) {
      std::size_t start = e.factors.empty() ? 0 : e.factors.back().position + 1;
      for (std::size_t p = start; p < n; ++p) {
        for (auto [a, b] : actions) {
          ErrorOperator g = e;
          g.factors.push_back({p, a, b});
          next.push_back(g);
        }
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

struct KLViolation {
  std::uint32_t k;
  std::uint32_t k_prime;
  ErrorOperator s;
  ErrorOperator s_prime;
  double deviation;
};

struct KLReport {
  std::string code_name;
  /** Errors in canonical order; rows and columns of lambda. */
  std::vector<ErrorOperator> errors;
  /** <enc(0)| G_S^dagger G_S' |enc(0)>. */
  Eigen::MatrixXcd lambda;
  double max_violation = 0;
  std::optional<KLViolation> worst;
  double tolerance = 1e-9;
  bool pass() const { return max_violation <= tolerance; }
};

class KLError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

constexpr std::size_t kKLMaxWeight = 2;
constexpr std::size_t kKLMaxTerms = std::size_t{1} << 22;

}  // namespace detail

/**
 * Checks <enc(k)| G_S^dagger G_S' |enc(k')> = [k == k'] Lambda_{S,S'} for all
 * logical pairs and error pairs. Errors sharing a shift pattern are handled
 * together: one merge of the shifted codewords, then phases per pair.
 */
inline KLReport kl_check(
    const CodeInstance& code, std::vector<ErrorOperator> errors, double tolerance = 1e-9) {
  const std::uint32_t q = code.q;
  std::size_t total = 0;
  for (const auto& c : code.codewords) total += c.size();
  if (total > detail::kKLMaxTerms) throw KLError("codeword size cap exceeded");
  for (const auto& e : errors) {
    if (e.weight() > detail::kKLMaxWeight) throw KLError("error weight above the cap of 2");
    for (const auto& f : e.factors) {
      if (f.position >= code.n) throw KLError("error acts outside the code");
    }
  }
  std::sort(errors.begin(), errors.end());
  errors.erase(std::unique(errors.begin(), errors.end()), errors.end());
  if (errors.empty() || !errors.front().factors.empty()) {
    errors.insert(errors.begin(), ErrorOperator{});
  }
  const std::size_t E = errors.size();
  const auto& w = roots_of_unity(q);
  const KeyCodec codec(q, code.n);

  // Group by shift pattern.
  std::map<std::vector<std::uint32_t>, std::vector<std::size_t>> groups;
  std::vector<std::vector<std::uint32_t>> zpart(E, std::vector<std::uint32_t>(code.n, 0));
  for (std::size_t e = 0; e < E; ++e) {
    std::vector<std::uint32_t> x(code.n, 0);
    for (const auto& f : errors[e].factors) {
      x[f.position] = f.a;
      zpart[e][f.position] = f.b;
    }
    groups[x].push_back(e);
  }
  struct Entry {
    Key key;
    std::uint32_t k;
    Complex amp;
  };
  std::vector<Entry> all;
  for (std::uint32_t k = 0; k < q; ++k) {
    for (const auto& t : code.codewords[k].terms()) all.push_back({t.key, k, t.amplitude});
  }
  // s + x = s' + x' forces s and s' to agree off supp(x) | supp(x'). For each
  // such support keep the pairs of distinct entries that collide off it.
  std::map<std::vector<std::size_t>, std::vector<std::pair<std::size_t, std::size_t>>> collisions;
  auto collide = [&](const std::vector<std::size_t>& support) -> const auto& {
    auto it = collisions.find(support);
    if (it != collisions.end()) return it->second;
    Key mask = ~Key{0};
    for (auto p : support) mask = codec.set(mask, p, 0);
    std::vector<std::size_t> order(all.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return (all[a].key & mask) < (all[b].key & mask);
    });
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t lo = 0; lo < order.size();) {
      std::size_t hi = lo + 1;
      while (hi < order.size() && (all[order[hi]].key & mask) == (all[order[lo]].key & mask)) ++hi;
      if (pairs.size() + (hi - lo) * (hi - lo) > detail::kKLMaxTerms) {
        throw KLError("collision table cap exceeded");
      }
      for (std::size_t a = lo; a < hi; ++a) {
        for (std::size_t b = lo; b < hi; ++b) {
          if (a != b) pairs.push_back({order[a], order[b]});
        }
      }
      lo = hi;
    }
    return collisions.emplace(support, std::move(pairs)).first->second;
  };
  auto shift_key = [&](Key key, const std::vector<std::uint32_t>& x) {
    for (std::size_t p = 0; p < code.n; ++p) {
      if (x[p]) key = codec.set(key, p, (codec.get(key, p) + x[p]) % q);
    }
    return key;
  };

  KLReport report{code.name, errors, Eigen::MatrixXcd::Zero(Eigen::Index(E), Eigen::Index(E)), 0, {}, tolerance};
  std::vector<const std::vector<std::uint32_t>*> shifts;
  std::vector<const std::vector<std::size_t>*> members;
  for (const auto& [x, m] : groups) {
    shifts.push_back(&x);
    members.push_back(&m);
  }
  struct Match {
    Key u;
    std::uint32_t k, kp;
    Complex amp;
  };
  // Sums of matched amplitudes by (k, k') and the digits of u on `pos`.
  auto tabulate = [&](const std::vector<Match>& matches, const std::vector<std::size_t>& pos) {
    std::size_t width = 1;
    for (std::size_t j = 0; j < pos.size(); ++j) width *= q;
    std::vector<Complex> t(std::size_t{q} * q * width);
    for (const auto& mt : matches) {
      std::size_t idx = 0;
      for (auto p : pos) idx = idx * q + codec.get(mt.u, p);
      t[(mt.k * q + mt.kp) * width + idx] += mt.amp;
    }
    return t;
  };
  std::vector<Complex> acc(std::size_t{q} * q);
  for (std::size_t g1 = 0; g1 < shifts.size(); ++g1) {
    for (std::size_t g2 = 0; g2 < shifts.size(); ++g2) {
      const auto& x = *shifts[g1];
      const auto& xp = *shifts[g2];
      std::vector<Match> matches;
      std::vector<std::size_t> support;
      for (std::size_t p = 0; p < code.n; ++p) {
        if (x[p] || xp[p]) support.push_back(p);
      }
      if (g1 == g2) {
        for (const auto& e : all) matches.push_back({shift_key(e.key, x), e.k, e.k, std::norm(e.amp)});
      }
      for (auto [a, b] : collide(support)) {
        bool hit = true;
        for (auto p : support) {
          if ((codec.get(all[a].key, p) + x[p]) % q != (codec.get(all[b].key, p) + xp[p]) % q) {
            hit = false;
            break;
          }
        }
        if (hit) {
          matches.push_back({shift_key(all[a].key, x), all[a].k, all[b].k,
                             std::conj(all[a].amp) * all[b].amp});
        }
      }
      // No overlap: every entry is zero, Lambda included.
      if (matches.empty()) continue;
      std::map<std::vector<std::size_t>, std::vector<Complex>> tables;
      for (auto s : *members[g1]) {
        for (auto sp : *members[g2]) {
          std::vector<std::size_t> diff;
          std::vector<std::uint32_t> delta;
          for (std::size_t p = 0; p < code.n; ++p) {
            if (zpart[s][p] != zpart[sp][p]) {
              diff.push_back(p);
              delta.push_back((zpart[sp][p] + q - zpart[s][p]) % q);
            }
          }
          std::fill(acc.begin(), acc.end(), Complex{});
          if (diff.size() <= 2) {
            auto it = tables.find(diff);
            if (it == tables.end()) it = tables.emplace(diff, tabulate(matches, diff)).first;
            const auto& t = it->second;
            const std::size_t width = t.size() / (std::size_t{q} * q);
            for (std::size_t kk = 0; kk < std::size_t{q} * q; ++kk) {
              Complex sum{};
              for (std::size_t idx = 0; idx < width; ++idx) {
                const Complex& v = t[kk * width + idx];
                if (v == Complex{}) continue;
                std::uint64_t ph = 0;
                std::size_t rem = idx;
                for (std::size_t m = diff.size(); m-- > 0;) {
                  ph += std::uint64_t{delta[m]} * (rem % q);
                  rem /= q;
                }
                sum += v * w[ph % q];
              }
              acc[kk] = sum;
            }
          } else {
            for (const auto& mt : matches) {
              std::uint64_t ph = 0;
              for (std::size_t m = 0; m < diff.size(); ++m) {
                ph += std::uint64_t{delta[m]} * codec.get(mt.u, diff[m]);
              }
              acc[mt.k * q + mt.kp] += mt.amp * w[ph % q];
            }
          }
          Complex lambda = acc[0];
          report.lambda(Eigen::Index(s), Eigen::Index(sp)) = lambda;
          for (std::uint32_t k = 0; k < q; ++k) {
            for (std::uint32_t kp = 0; kp < q; ++kp) {
              Complex want = k == kp ? lambda : Complex{};
              double dev = std::abs(acc[k * q + kp] - want);
              if (dev > report.max_violation) {
                report.max_violation = dev;
                if (dev > tolerance) report.worst = KLViolation{k, kp, errors[s], errors[sp], dev};
              }
            }
          }
        }
      }
    }
  }
  double asym = (report.lambda - report.lambda.adjoint()).cwiseAbs().maxCoeff();
  if (asym > tolerance) throw KLError("Lambda is not Hermitian; checker is inconsistent");
  return report;
}

struct SecrecyReport {
  bool pass = true;
  double worst_deviation = 0;
  std::vector<std::size_t> worst_set;
};

/** sum_k alpha_k |enc(k)>. */
inline SparseState encode_with(const CodeInstance& code, const std::vector<Complex>& alpha) {
  std::vector<Term> terms;
  for (std::uint32_t k = 0; k < code.q; ++k) {
    if (std::abs(alpha[k]) < kPruneThreshold) continue;
    for (const auto& t : code.codewords[k].terms()) terms.push_back(Term{t.key, t.amplitude * alpha[k]});
  }
  return SparseState::from_raw(code.q, code.n, std::move(terms));
}

/** Reduced states on each kept set must not depend on the probe. */
inline SecrecyReport secrecy_check(
    const CodeInstance& code, const std::vector<std::vector<std::size_t>>& kept_sets,
    const std::vector<std::vector<Complex>>& probes, double tolerance = 1e-9,
    std::size_t max_kept = 2) {
  SecrecyReport rep;
  if (probes.empty()) return rep;
  std::vector<SparseState> encoded;
  for (const auto& p : probes) encoded.push_back(encode_with(code, p));
  for (const auto& keep : kept_sets) {
    if (keep.size() > max_kept) throw KLError("kept set larger than the cap");
    if (keep.empty()) continue;
    DensityMatrix ref = partial_trace(encoded[0], keep);
    for (std::size_t j = 1; j < encoded.size(); ++j) {
      double dev = ref.max_abs_diff(partial_trace(encoded[j], keep));
      if (dev > rep.worst_deviation) {
        rep.worst_deviation = dev;
        rep.worst_set = keep;
      }
    }
  }
  rep.pass = rep.worst_deviation <= tolerance;
  return rep;
}

/** Every logical basis state plus `random` seeded superpositions. */
inline std::vector<std::vector<Complex>> default_probes(std::uint32_t q, std::size_t random, std::uint64_t seed) {
  std::vector<std::vector<Complex>> out;
  for (std::uint32_t k = 0; k < q; ++k) {
    std::vector<Complex> v(q);
    v[k] = 1.0;
    out.push_back(v);
  }
  Rng rng(seed);
  for (std::size_t j = 0; j < random; ++j) {
    std::vector<Complex> v(q);
    double norm = 0;
    for (auto& a : v) {
      a = Complex(rng.uniform_real() - 0.5, rng.uniform_real() - 0.5);
      norm += std::norm(a);
    }
    for (auto& a : v) a /= std::sqrt(norm);
    out.push_back(v);
  }
  return out;
}

/** All subsets of {0..n-1} with exactly `size` elements, in lexicographic order. */
inline std::vector<std::vector<std::size_t>> subsets(std::size_t n, std::size_t size) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (cur.size() == size) {
      out.push_back(cur);
      return;
    }
    for (std::size_t i = start; i < n; ++i) {
      cur.push_back(i);
      rec(i + 1);
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

struct TheoremProbe {
  bool spin_correctable;
  bool phase_correctable;
  bool secret;
  /** False when exactly two of the three hold, which the theorem forbids. */
  bool consistent;
  KLReport spin;
  KLReport phase;
  SecrecyReport secrecy;
};

inline TheoremProbe theorem_probe(
    const CodeInstance& code, std::size_t delta, double tolerance = 1e-9,
    std::size_t random_probes = 20, std::uint64_t seed = 1) {
  auto spin = kl_check(code, enumerate_errors(code.n, code.q, delta, ErrorKind::ShiftOnly), tolerance);
  auto phase = kl_check(code, enumerate_errors(code.n, code.q, delta, ErrorKind::PhaseOnly), tolerance);
  auto sec = secrecy_check(
      code, subsets(code.n, delta), default_probes(code.q, random_probes, seed), tolerance);
  int count = spin.pass() + phase.pass() + sec.pass;
  return TheoremProbe{spin.pass(), phase.pass(), sec.pass, count != 2, std::move(spin),
                      std::move(phase), std::move(sec)};
}

}  // namespace qmpc
