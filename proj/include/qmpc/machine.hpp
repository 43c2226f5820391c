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
#include <concepts>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "qmpc/coefficients.hpp"
#include "qmpc/poly_code.hpp"
#include "qmpc/reed_solomon.hpp"
#include "qmpc/rng.hpp"
#include "qmpc/sparse_state.hpp"
#include "qmpc/teleport.hpp"

namespace qmpc {

using RegisterId = std::size_t;

/** Result of measuring one encoded register. */
struct MeasureOutcome {
  /** Symbols each player would announce if honest. */
  ShareVector shares;
  /** Probability of the conditioning event of a forced outcome (1 otherwise). */
  double class_probability = 1.0;
};

/** Reduced state of the cheaters' qudits on one group of entangled registers. */
struct BlockView {
  std::vector<RegisterId> registers;
  DensityMatrix rho;
};
using CheaterView = std::vector<BlockView>;

/**
 * Registers grouped into independent blocks, each a SparseState over
 * `width` qudits per register. Blocks are merged on demand and split again
 * when they factorize.
 */
class BlockStore {
 public:
  /** Merges above this many terms are refused. */
  static constexpr std::size_t kMaxTerms = std::size_t{1} << 23;

  struct Block {
    SparseState state;
    std::vector<RegisterId> regs;
  };

  BlockStore(std::uint32_t q, std::size_t width) : q_(q), width_(width) {}

  std::size_t width() const { return width_; }

  RegisterId add(SparseState s) {
    if (s.register_count() != width_) throw StateError("register has the wrong width");
    RegisterId id = next_id_++;
    std::size_t b = next_block_++;
    blocks_.emplace(b, Block{std::move(s), {id}});
    where_[id] = b;
    return id;
  }

  bool contains(RegisterId r) const { return where_.count(r) != 0; }

  std::size_t block_of(RegisterId r) const {
    auto it = where_.find(r);
    if (it == where_.end()) throw StateError("unknown register " + std::to_string(r));
    return it->second;
  }

  Block& block(std::size_t b) { return blocks_.at(b); }
  const Block& block(std::size_t b) const { return blocks_.at(b); }
  const std::map<std::size_t, Block>& blocks() const { return blocks_; }

  std::size_t slot(RegisterId r) const {
    const auto& regs = block(block_of(r)).regs;
    return static_cast<std::size_t>(std::find(regs.begin(), regs.end(), r) - regs.begin());
  }
  std::size_t offset(RegisterId r) const { return slot(r) * width_; }

  std::vector<RegisterId> live() const {
    std::vector<RegisterId> out;
    for (const auto& [r, b] : where_) out.push_back(r);
    return out;
  }

  std::size_t peak_terms() const { return peak_; }

  /** Puts all listed registers into one block and returns it. */
  std::size_t gather(std::span<const RegisterId> regs) {
    std::vector<std::size_t> ids;
    for (auto r : regs) {
      std::size_t b = block_of(r);
      if (std::find(ids.begin(), ids.end(), b) == ids.end()) ids.push_back(b);
    }
    if (ids.empty()) throw StateError("gather of no registers");
    std::size_t target = ids[0];
    for (std::size_t j = 1; j < ids.size(); ++j) {
      Block& a = blocks_.at(target);
      Block& b = blocks_.at(ids[j]);
      if (a.state.size() * b.state.size() > kMaxTerms) {
        throw StateError(
            "block merge would exceed " + std::to_string(kMaxTerms) + " terms");
      }
      if (a.state.register_count() + b.state.register_count() > KeyCodec::capacity(q_)) {
        throw StateError("block merge exceeds the key capacity");
      }
      a.state = tensor(a.state, b.state);
      for (auto r : b.regs) {
        a.regs.push_back(r);
        where_[r] = target;
      }
      blocks_.erase(ids[j]);
    }
    note(blocks_.at(target).state.size());
    return target;
  }

  void note(std::size_t terms) { peak_ = std::max(peak_, terms); }

  /** Removes a register whose qudits are all definite. */
  void release(RegisterId r) {
    std::size_t b = block_of(r);
    Block& blk = blocks_.at(b);
    std::size_t s = slot(r);
    std::vector<std::size_t> qudits;
    for (std::size_t i = 0; i < width_; ++i) qudits.push_back(s * width_ + i);
    where_.erase(r);
    blk.regs.erase(blk.regs.begin() + static_cast<std::ptrdiff_t>(s));
    if (blk.regs.empty()) {
      blocks_.erase(b);
      return;
    }
    blk.state = remove_registers(blk.state, qudits);
  }

  /** Splits off every register that is in a product state with the rest of its block. */
  void factorize() {
    std::vector<std::size_t> ids;
    for (const auto& [b, blk] : blocks_) ids.push_back(b);
    for (auto b : ids) factorize_block(b);
  }

  void factorize_block(std::size_t b) {
    bool changed = true;
    while (changed) {
      changed = false;
      Block& blk = blocks_.at(b);
      if (blk.regs.size() < 2) return;
      for (std::size_t s = 0; s < blk.regs.size(); ++s) {
        auto split = try_split(blk.state, s);
        if (!split) continue;
        RegisterId r = blk.regs[s];
        blk.regs.erase(blk.regs.begin() + static_cast<std::ptrdiff_t>(s));
        blk.state = std::move(split->second);
        std::size_t nb = next_block_++;
        blocks_.emplace(nb, Block{std::move(split->first), {r}});
        where_[r] = nb;
        changed = true;
        break;
      }
    }
  }

 private:
  // (register part, rest) when the state is a product across that cut.
  std::optional<std::pair<SparseState, SparseState>> try_split(
      const SparseState& s, std::size_t slot_index) const {
    const KeyCodec& c = s.codec();
    const std::size_t m = s.register_count();
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < m; ++i) {
      (i / width_ == slot_index ? in : out).push_back(i);
    }
    struct Part {
      Key key;
      Complex amp;
    };
    const auto& terms = s.terms();
    const Key r0 = c.extract(terms[0].key, out), s0 = c.extract(terms[0].key, in);
    const Complex a0 = terms[0].amplitude;
    std::vector<Part> rest, sub;
    for (const auto& t : terms) {
      Key r = c.extract(t.key, out), k = c.extract(t.key, in);
      if (k == s0) rest.push_back({r, t.amplitude});
      if (r == r0) sub.push_back({k, t.amplitude});
    }
    if (rest.size() * sub.size() != terms.size()) return std::nullopt;
    auto by_key = [](const Part& a, const Part& b) { return a.key < b.key; };
    std::sort(rest.begin(), rest.end(), by_key);
    std::sort(sub.begin(), sub.end(), by_key);
    auto find = [&](const std::vector<Part>& v, Key k) -> const Part* {
      auto it = std::lower_bound(v.begin(), v.end(), Part{k, {}}, by_key);
      return it != v.end() && it->key == k ? &*it : nullptr;
    };
    for (const auto& t : terms) {
      const Part* x = find(rest, c.extract(t.key, out));
      const Part* y = find(sub, c.extract(t.key, in));
      if (!x || !y) return std::nullopt;
      if (std::abs(x->amp * y->amp / a0 - t.amplitude) > 1e-10) return std::nullopt;
    }
    double nb = 0;
    for (const auto& p : sub) nb += std::norm(p.amp);
    nb = std::sqrt(nb);
    std::vector<Term> tr, ts;
    for (const auto& p : rest) tr.push_back(Term{p.key, p.amp * nb / a0});
    for (const auto& p : sub) ts.push_back(Term{p.key, p.amp / nb});
    SparseState a(q_, in.size()), b(q_, out.size());
    a.assign(std::move(ts), true);
    b.assign(std::move(tr), true);
    a.renormalize();
    b.renormalize();
    return std::make_pair(std::move(a), std::move(b));
  }

  std::uint32_t q_;
  std::size_t width_;
  RegisterId next_id_ = 0;
  std::size_t next_block_ = 0;
  std::size_t peak_ = 0;
  std::map<std::size_t, Block> blocks_;
  std::map<RegisterId, std::size_t> where_;
};

namespace detail {

inline std::int64_t fv(const FieldElement& x) { return static_cast<std::int64_t>(x.value()); }

inline void require_variant(Variant got, Variant want, const char* op) {
  if (got != want) {
    throw CodeError(std::string(op) + " needs " + variant_name(want) + " registers");
  }
}

}  // namespace detail

/**
 * Full physical simulation: every encoded register is n qudits, gadgets act
 * player by player. Exact, but only practical for small codes.
 */
class PhysicalMachine {
 public:
  explicit PhysicalMachine(CodeParams code)
      : code_(std::move(code)), coeff_(derive_coefficients(code_)), store_(code_.q(), code_.n()) {}

  const CodeParams& code() const { return code_; }
  const GadgetCoefficients& coefficients() const { return coeff_; }
  std::size_t peak_terms() const { return store_.peak_terms(); }
  std::vector<RegisterId> live_registers() const { return store_.live(); }
  Variant variant(RegisterId r) const { return variants_.at(r); }

  RegisterId prepare(Variant v, std::uint32_t value) {
    return adopt(encode_basis(code_, v, value), v);
  }
  RegisterId prepare_state(Variant v, const std::vector<Complex>& logical) {
    return adopt(encode(code_, v, logical), v);
  }

  void add_const(RegisterId r, std::int64_t a) {
    run_local(r, [&](std::size_t) { return LocalGate{Shift{a}}; });
  }
  void scale(RegisterId r, std::int64_t a) {
    if (FieldElement::from_int(a, code_.modulus()).is_zero()) throw CodeError("scale by zero");
    run_local(r, [&](std::size_t) { return LocalGate{Scale{a}}; });
  }
  void phase(RegisterId r, std::int64_t b) {
    run_local(r, [&](std::size_t i) { return LocalGate{Phase{b * detail::fv(coeff_.m[i])}}; });
  }
  void tamper(RegisterId r, std::size_t pos, std::int64_t a, std::int64_t b) {
    if (pos >= code_.n()) throw CodeError("tamper position out of range");
    std::size_t blk = store_.block_of(r);
    std::size_t off = store_.offset(r);
    std::vector<Instruction> prog = {LocalOp{off + pos, Shift{a}}, LocalOp{off + pos, Phase{b}}};
    apply(blk, prog);
  }

  /** Player-local Fourier layer; flips the variant. */
  void fourier(RegisterId r) {
    run_local(r, [&](std::size_t i) { return LocalGate{Fourier{detail::fv(coeff_.m[i])}}; });
    variants_[r] = variants_[r] == Variant::L ? Variant::LTilde : Variant::L;
  }

  /** dst += s * src. */
  void add_scaled(RegisterId src, RegisterId dst, std::int64_t s) {
    if (src == dst) throw CodeError("add_scaled needs distinct registers");
    if (variants_.at(src) != variants_.at(dst)) throw CodeError("add_scaled across variants");
    const Modulus q = code_.modulus();
    FieldElement f = FieldElement::from_int(s, q);
    if (f.is_zero()) return;
    std::int64_t inv = detail::fv(f.inverse());
    RegisterId rs[] = {src, dst};
    std::size_t blk = store_.gather(rs);
    std::size_t a = store_.offset(src), b = store_.offset(dst);
    std::vector<Instruction> prog;
    for (std::size_t i = 0; i < code_.n(); ++i) {
      if (f.value() != 1) prog.push_back(LocalOp{a + i, Scale{s}});
      prog.push_back(TwoOp{a + i, b + i, Cnot{}});
      if (f.value() != 1) prog.push_back(LocalOp{a + i, Scale{inv}});
    }
    apply(blk, prog);
  }

  /** Logical w^{c a b}. */
  void cphase(RegisterId x, RegisterId y, std::int64_t c) {
    run_pair(x, y, "cphase", [&](std::size_t i) { return c * detail::fv(coeff_.r[i]); });
  }
  /** Logical w^{-a b}. */
  void cphase_pq(RegisterId x, RegisterId y) {
    run_pair(x, y, "cphase_pq", [&](std::size_t i) { return detail::fv(coeff_.p[i]); });
  }
  /** Logical w^{a b c}. */
  void ccphase_r(RegisterId x, RegisterId y, RegisterId z) {
    for (auto r : {x, y, z}) detail::require_variant(variants_.at(r), Variant::L, "ccphase_r");
    if (x == y || y == z || x == z) throw CodeError("ccphase_r needs distinct registers");
    RegisterId rs[] = {x, y, z};
    std::size_t blk = store_.gather(rs);
    std::size_t a = store_.offset(x), b = store_.offset(y), c = store_.offset(z);
    std::vector<Instruction> prog;
    for (std::size_t i = 0; i < code_.n(); ++i) {
      prog.push_back(ThreeOp{a + i, b + i, c + i, CCPhase{detail::fv(coeff_.r[i])}});
    }
    apply(blk, prog);
  }

  /**
   * Measures all n shares and releases the register. With `forced`, the
   * outcome is drawn from the strings that decode to that value.
   */
  MeasureOutcome measure(
      RegisterId r, Rng& rng, std::optional<std::uint32_t> forced = std::nullopt,
      std::size_t max_errors = 0) {
    std::size_t blk = store_.block_of(r);
    auto& block = store_.block(blk);
    EncodedRegister enc{store_.offset(r), variants_.at(r)};
    auto inf = measure_and_infer(std::move(block.state), code_, enc, rng, max_errors, forced);
    block.state = std::move(inf.collapsed);
    store_.release(r);
    variants_.erase(r);
    compact_around(blk);
    return MeasureOutcome{inf.shares, inf.condition_probability};
  }

  /**
   * Moves share `pos` through a fresh Phi pair. The register keeps its
   * place; only the announced label is returned.
   */
  BellLabel teleport_share(
      RegisterId r, std::size_t pos, Rng& rng, std::optional<BellLabel> forced = std::nullopt) {
    if (pos >= code_.n()) throw CodeError("share position out of range");
    std::size_t blk = store_.block_of(r);
    auto& block = store_.block(blk);
    const std::size_t m = block.state.register_count();
    if (m + 2 > KeyCodec::capacity(code_.q())) throw StateError("no room for a Phi pair");
    SparseState s = tensor(block.state, bell_state(code_.q(), {}));
    store_.note(s.size());
    const std::size_t payload = store_.offset(r) + pos;
    auto res = teleport(std::move(s), payload, m, m + 1, rng, forced);
    std::size_t sender[] = {m};
    SparseState t = remove_registers(res.state, sender);
    std::vector<std::size_t> order(m + 1);
    for (std::size_t j = 0; j <= m; ++j) order[j] = j;
    std::swap(order[payload], order[m]);
    t = permute_registers(t, order);
    std::size_t last[] = {m};
    block.state = remove_registers(t, last);
    return res.label;
  }

  void compact() { store_.factorize(); }

  /** Logical state of exactly the registers of one or more blocks, in listed order. */
  SparseState logical_state(const std::vector<RegisterId>& regs) {
    std::size_t blk = store_.gather(regs);
    const auto& block = store_.block(blk);
    if (block.regs.size() != regs.size()) {
      throw CodeError("logical_state must name every register of the block");
    }
    std::vector<EncodedRegister> enc;
    for (std::size_t j = 0; j < block.regs.size(); ++j) {
      enc.push_back({j * code_.n(), variants_.at(block.regs[j])});
    }
    SparseState ls = qmpc::logical_state(block.state, code_, enc);
    std::vector<std::size_t> order;
    for (auto r : regs) order.push_back(store_.slot(r));
    return permute_registers(ls, order);
  }

  /** Physical state of exactly the listed registers, qudits in listed order. */
  SparseState physical_state(const std::vector<RegisterId>& regs) {
    std::size_t blk = store_.gather(regs);
    const auto& block = store_.block(blk);
    if (block.regs.size() != regs.size()) {
      throw CodeError("physical_state must name every register of the block");
    }
    std::vector<std::size_t> order;
    for (auto r : regs) {
      for (std::size_t i = 0; i < code_.n(); ++i) order.push_back(store_.offset(r) + i);
    }
    return permute_registers(block.state, order);
  }

  /** Physical state of the block holding r, with its register order. */
  const BlockStore::Block& block_of(RegisterId r) const {
    return store_.block(store_.block_of(r));
  }

  CheaterView cheater_view(const std::vector<std::size_t>& positions) const {
    CheaterView out;
    for (const auto& [b, blk] : store_.blocks()) {
      std::vector<RegisterId> regs = blk.regs;
      std::sort(regs.begin(), regs.end());
      std::vector<std::size_t> keep;
      for (auto r : regs) {
        auto s = static_cast<std::size_t>(
            std::find(blk.regs.begin(), blk.regs.end(), r) - blk.regs.begin());
        for (auto p : positions) keep.push_back(s * code_.n() + p);
      }
      out.push_back(BlockView{regs, partial_trace(blk.state, keep)});
    }
    std::sort(out.begin(), out.end(), [](const BlockView& a, const BlockView& b) {
      return a.registers.front() < b.registers.front();
    });
    return out;
  }

 private:
  RegisterId adopt(SparseState s, Variant v) {
    RegisterId r = store_.add(std::move(s));
    variants_[r] = v;
    return r;
  }

  void apply(std::size_t blk, const std::vector<Instruction>& prog) {
    auto& block = store_.block(blk);
    block.state = apply_circuit(std::move(block.state), prog);
    store_.note(block.state.size());
  }

  template <class F>
  void run_local(RegisterId r, F gate_for) {
    std::size_t blk = store_.block_of(r);
    std::size_t off = store_.offset(r);
    std::vector<Instruction> prog;
    for (std::size_t i = 0; i < code_.n(); ++i) prog.push_back(LocalOp{off + i, gate_for(i)});
    apply(blk, prog);
  }

  template <class F>
  void run_pair(RegisterId x, RegisterId y, const char* name, F weight) {
    detail::require_variant(variants_.at(x), Variant::L, name);
    detail::require_variant(variants_.at(y), Variant::L, name);
    if (x == y) throw CodeError(std::string(name) + " needs distinct registers");
    RegisterId rs[] = {x, y};
    std::size_t blk = store_.gather(rs);
    std::size_t a = store_.offset(x), b = store_.offset(y);
    std::vector<Instruction> prog;
    for (std::size_t i = 0; i < code_.n(); ++i) {
      prog.push_back(TwoOp{a + i, b + i, CPhase{weight(i)}});
    }
    apply(blk, prog);
  }

  void compact_around(std::size_t blk) {
    if (store_.blocks().count(blk)) store_.factorize_block(blk);
  }

  CodeParams code_;
  GadgetCoefficients coeff_;
  BlockStore store_;
  std::map<RegisterId, Variant> variants_;
};

/**
 * One qudit per encoded register plus a Pauli frame per physical share.
 * Honest gadgets act on the logical qudits directly; tampering is tracked
 * in the frame and propagated gate by gate. A three-way phase on a shifted
 * share leaves a two-share phase that is twirled into random Z errors.
 */
class LogicalMachine {
 public:
  struct Pauli {
    std::uint32_t x = 0;
    std::uint32_t z = 0;
  };

  LogicalMachine(CodeParams code, std::uint64_t twirl_seed)
      : code_(std::move(code)),
        coeff_(derive_coefficients(code_)),
        store_(code_.q(), 1),
        twirl_(twirl_seed) {}

  const CodeParams& code() const { return code_; }
  const GadgetCoefficients& coefficients() const { return coeff_; }
  std::size_t peak_terms() const { return store_.peak_terms(); }
  std::vector<RegisterId> live_registers() const { return store_.live(); }
  Variant variant(RegisterId r) const { return variants_.at(r); }

  /** Pauli frame of register r (all identity when never tampered). */
  std::vector<Pauli> frame(RegisterId r) const {
    auto it = frames_.find(r);
    return it == frames_.end() ? std::vector<Pauli>(code_.n()) : it->second;
  }

  RegisterId prepare(Variant v, std::uint32_t value) {
    Digit d[] = {static_cast<Digit>(value % code_.q())};
    return adopt(SparseState::basis(code_.q(), d), v);
  }
  RegisterId prepare_state(Variant v, const std::vector<Complex>& logical) {
    if (logical.size() != code_.q()) throw CodeError("logical state needs q amplitudes");
    std::vector<std::pair<std::vector<Digit>, Complex>> e;
    for (std::uint32_t a = 0; a < code_.q(); ++a) {
      if (std::abs(logical[a]) >= kPruneThreshold) e.push_back({{static_cast<Digit>(a)}, logical[a]});
    }
    return adopt(SparseState::from_terms(code_.q(), 1, e), v);
  }

  void add_const(RegisterId r, std::int64_t a) { local(r, Shift{a}); }
  void phase(RegisterId r, std::int64_t b) { local(r, Phase{b}); }

  void scale(RegisterId r, std::int64_t a) {
    FieldElement f = FieldElement::from_int(a, code_.modulus());
    if (f.is_zero()) throw CodeError("scale by zero");
    local(r, Scale{a});
    if (auto* fr = frame_ptr(r)) {
      FieldElement inv = f.inverse();
      for (auto& p : *fr) {
        p.x = mul(p.x, f.value());
        p.z = mul(p.z, inv.value());
      }
    }
  }

  void fourier(RegisterId r) {
    local(r, Fourier{1});
    variants_[r] = variants_[r] == Variant::L ? Variant::LTilde : Variant::L;
    if (auto* fr = frame_ptr(r)) {
      for (std::size_t i = 0; i < code_.n(); ++i) {
        auto& p = (*fr)[i];
        const FieldElement& m = coeff_.m[i];
        std::uint32_t nx = (-(field(p.z) / m)).value();
        std::uint32_t nz = (m * field(p.x)).value();
        p = Pauli{nx, nz};
      }
    }
  }

  void add_scaled(RegisterId src, RegisterId dst, std::int64_t s) {
    if (src == dst) throw CodeError("add_scaled needs distinct registers");
    if (variants_.at(src) != variants_.at(dst)) throw CodeError("add_scaled across variants");
    FieldElement f = FieldElement::from_int(s, code_.modulus());
    if (f.is_zero()) return;
    RegisterId rs[] = {src, dst};
    std::size_t blk = store_.gather(rs);
    std::size_t a = store_.slot(src), b = store_.slot(dst);
    std::vector<Instruction> prog = {
        LocalOp{a, Scale{s}}, TwoOp{a, b, Cnot{}},
        LocalOp{a, Scale{static_cast<std::int64_t>(f.inverse().value())}}};
    apply(blk, prog);
    if (!frame_ptr(src) && !frame_ptr(dst)) return;
    auto fs = frame(src), fd = frame(dst);
    for (std::size_t i = 0; i < code_.n(); ++i) {
      fd[i].x = (field(fd[i].x) + f * field(fs[i].x)).value();
      fs[i].z = (field(fs[i].z) - f * field(fd[i].z)).value();
    }
    set_frame(src, fs);
    set_frame(dst, fd);
  }

  void cphase(RegisterId x, RegisterId y, std::int64_t c) {
    FieldElement w = FieldElement::from_int(c, code_.modulus());
    pair_phase(x, y, "cphase", c, [&](std::size_t i) { return w * coeff_.r[i]; });
  }
  void cphase_pq(RegisterId x, RegisterId y) {
    pair_phase(x, y, "cphase_pq", -1, [&](std::size_t i) { return coeff_.p[i]; });
  }

  void ccphase_r(RegisterId x, RegisterId y, RegisterId z) {
    for (auto r : {x, y, z}) detail::require_variant(variants_.at(r), Variant::L, "ccphase_r");
    if (x == y || y == z || x == z) throw CodeError("ccphase_r needs distinct registers");
    RegisterId rs[] = {x, y, z};
    std::size_t blk = store_.gather(rs);
    std::vector<Instruction> prog = {
        ThreeOp{store_.slot(x), store_.slot(y), store_.slot(z), CCPhase{1}}};
    apply(blk, prog);
    if (!frame_ptr(x) && !frame_ptr(y) && !frame_ptr(z)) return;
    auto fa = frame(x), fb = frame(y), fc = frame(z);
    const std::uint32_t q = code_.q();
    for (std::size_t i = 0; i < code_.n(); ++i) {
      FieldElement a = field(fa[i].x), b = field(fb[i].x), c = field(fc[i].x);
      const FieldElement& r = coeff_.r[i];
      auto bump = [&](Pauli& p, const FieldElement& v) { p.z = (field(p.z) + v).value(); };
      bump(fa[i], r * b * c);
      bump(fb[i], r * a * c);
      bump(fc[i], r * a * b);
      // Leftover two-share phases, replaced by uniformly random Z pairs.
      auto twirl = [&](const FieldElement& w, Pauli& u, Pauli& v) {
        if (w.is_zero()) return;
        bump(u, field(static_cast<std::uint32_t>(twirl_.uniform_index(q))));
        bump(v, field(static_cast<std::uint32_t>(twirl_.uniform_index(q))));
      };
      twirl(r * c, fa[i], fb[i]);
      twirl(r * b, fa[i], fc[i]);
      twirl(r * a, fb[i], fc[i]);
    }
    set_frame(x, fa);
    set_frame(y, fb);
    set_frame(z, fc);
  }

  void tamper(RegisterId r, std::size_t pos, std::int64_t a, std::int64_t b) {
    if (pos >= code_.n()) throw CodeError("tamper position out of range");
    store_.block_of(r);
    auto f = frame(r);
    f[pos].x = (field(f[pos].x) + FieldElement::from_int(a, code_.modulus())).value();
    f[pos].z = (field(f[pos].z) + FieldElement::from_int(b, code_.modulus())).value();
    set_frame(r, f);
  }

  /**
   * Samples the logical value, then a uniformly random codeword carrying it,
   * then adds the frame's shifts. Releases the register.
   */
  MeasureOutcome measure(
      RegisterId r, Rng& rng, std::optional<std::uint32_t> forced = std::nullopt,
      std::size_t max_errors = 0) {
    if (max_errors > code_.delta()) throw CodeError("max_errors exceeds delta");
    std::size_t blk = store_.block_of(r);
    auto& block = store_.block(blk);
    std::size_t regs[] = {store_.slot(r)};
    std::function<bool(std::span<const Digit>)> allowed;
    if (forced) {
      const std::uint32_t want = *forced % code_.q();
      allowed = [want](std::span<const Digit> d) { return d[0] == want; };
    }
    auto joint = measure_registers(std::move(block.state), regs, rng, allowed);
    block.state = std::move(joint.state);
    const Modulus q = code_.modulus();
    std::vector<FieldElement> poly{FieldElement(joint.digits[0], q)};
    for (std::size_t j = 0; j < code_.gauge_count(variants_.at(r)); ++j) {
      poly.emplace_back(static_cast<std::uint32_t>(rng.uniform_index(code_.q())), q);
    }
    auto f = frame(r);
    ShareVector shares;
    for (std::size_t i = 0; i < code_.n(); ++i) {
      shares.symbols.push_back(evaluate_polynomial(poly, code_.points()[i]) + field(f[i].x));
    }
    store_.release(r);
    variants_.erase(r);
    frames_.erase(r);
    if (store_.blocks().count(blk)) store_.factorize_block(blk);
    return MeasureOutcome{std::move(shares), joint.condition_probability};
  }

  /** Perfect teleport: the label is uniform and the share is unchanged. */
  BellLabel teleport_share(
      RegisterId r, std::size_t pos, Rng& rng, std::optional<BellLabel> forced = std::nullopt) {
    if (pos >= code_.n()) throw CodeError("share position out of range");
    store_.block_of(r);
    BellLabel label{static_cast<std::uint32_t>(rng.uniform_index(code_.q())),
                    static_cast<std::uint32_t>(rng.uniform_index(code_.q()))};
    return forced ? *forced : label;
  }

  void compact() { store_.factorize(); }

  SparseState logical_state(const std::vector<RegisterId>& regs) {
    std::size_t blk = store_.gather(regs);
    const auto& block = store_.block(blk);
    if (block.regs.size() != regs.size()) {
      throw CodeError("logical_state must name every register of the block");
    }
    std::vector<std::size_t> order;
    for (auto r : regs) order.push_back(store_.slot(r));
    return permute_registers(block.state, order);
  }

  /**
   * Reduced state on the listed share positions of every live register,
   * one matrix per block. Built from per-variant tables
   * Tr_rest |enc a><enc a'| and the frame.
   */
  CheaterView cheater_view(const std::vector<std::size_t>& positions) {
    const std::uint32_t q = code_.q();
    std::size_t local_dim = 1;
    for (std::size_t j = 0; j < positions.size(); ++j) local_dim *= q;
    CheaterView out;
    for (const auto& [b, blk] : store_.blocks()) {
      std::vector<RegisterId> regs = blk.regs;
      std::sort(regs.begin(), regs.end());
      std::vector<std::size_t> order;
      for (auto r : regs) {
        order.push_back(static_cast<std::size_t>(
            std::find(blk.regs.begin(), blk.regs.end(), r) - blk.regs.begin()));
      }
      SparseState s = permute_registers(blk.state, order);
      std::size_t dim = 1;
      for (std::size_t j = 0; j < regs.size(); ++j) {
        dim *= local_dim;
        if (dim > DensityMatrix::kMaxDimension) throw StateError("cheater view cap exceeded");
      }
      const double work = static_cast<double>(s.size()) * static_cast<double>(s.size()) *
                          static_cast<double>(dim) * static_cast<double>(dim);
      if (work > 4e9) throw StateError("cheater view too expensive for this block");
      std::vector<const std::vector<Eigen::MatrixXcd>*> tables;
      for (auto r : regs) tables.push_back(&reduced_table(variants_.at(r), positions));
      Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(
          static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
      const KeyCodec& c = s.codec();
      for (const auto& t : s.terms()) {
        for (const auto& u : s.terms()) {
          Eigen::MatrixXcd acc = Eigen::MatrixXcd::Constant(1, 1, t.amplitude * std::conj(u.amplitude));
          for (std::size_t j = 0; j < regs.size(); ++j) {
            const auto& m = (*tables[j])[c.get(t.key, j) * q + c.get(u.key, j)];
            acc = kron(acc, m);
          }
          rho += acc;
        }
      }
      // Conjugate by the frame on the kept shares.
      std::vector<Pauli> ops;
      for (auto r : regs) {
        auto f = frame(r);
        for (auto p : positions) ops.push_back(f[p]);
      }
      rho = apply_paulis(rho, ops);
      out.push_back(BlockView{regs, DensityMatrix(q, regs.size() * positions.size(), rho)});
    }
    std::sort(out.begin(), out.end(), [](const BlockView& a, const BlockView& b) {
      return a.registers.front() < b.registers.front();
    });
    return out;
  }

 private:
  FieldElement field(std::uint32_t v) const { return FieldElement(v, code_.modulus()); }
  std::uint32_t mul(std::uint32_t a, std::uint32_t b) const {
    return static_cast<std::uint32_t>(std::uint64_t{a} * b % code_.q());
  }

  RegisterId adopt(SparseState s, Variant v) {
    RegisterId r = store_.add(std::move(s));
    variants_[r] = v;
    return r;
  }

  std::vector<Pauli>* frame_ptr(RegisterId r) {
    auto it = frames_.find(r);
    return it == frames_.end() ? nullptr : &it->second;
  }
  void set_frame(RegisterId r, const std::vector<Pauli>& f) {
    bool trivial = std::all_of(f.begin(), f.end(), [](const Pauli& p) { return !p.x && !p.z; });
    if (trivial) frames_.erase(r);
    else frames_[r] = f;
  }

  void apply(std::size_t blk, const std::vector<Instruction>& prog) {
    auto& block = store_.block(blk);
    block.state = apply_circuit(std::move(block.state), prog);
    store_.note(block.state.size());
  }

  void local(RegisterId r, LocalGate g) {
    std::size_t blk = store_.block_of(r);
    apply(blk, {LocalOp{store_.slot(r), g}});
  }

  template <class W>
  void pair_phase(RegisterId x, RegisterId y, const char* name, std::int64_t logical, W weight) {
    detail::require_variant(variants_.at(x), Variant::L, name);
    detail::require_variant(variants_.at(y), Variant::L, name);
    if (x == y) throw CodeError(std::string(name) + " needs distinct registers");
    RegisterId rs[] = {x, y};
    std::size_t blk = store_.gather(rs);
    apply(blk, {TwoOp{store_.slot(x), store_.slot(y), CPhase{logical}}});
    if (!frame_ptr(x) && !frame_ptr(y)) return;
    auto fa = frame(x), fb = frame(y);
    for (std::size_t i = 0; i < code_.n(); ++i) {
      FieldElement w = weight(i);
      std::uint32_t ax = fa[i].x, bx = fb[i].x;
      fb[i].z = (field(fb[i].z) + w * field(ax)).value();
      fa[i].z = (field(fa[i].z) + w * field(bx)).value();
    }
    set_frame(x, fa);
    set_frame(y, fb);
  }

  static Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
      }
    }
    return out;
  }

  // rho -> P rho P^dagger with P the product of Z^z X^x over the listed qudits.
  Eigen::MatrixXcd apply_paulis(const Eigen::MatrixXcd& rho, const std::vector<Pauli>& ops) const {
    const std::uint32_t q = code_.q();
    const auto& w = roots_of_unity(q);
    const auto dim = static_cast<std::size_t>(rho.rows());
    std::vector<std::size_t> perm(dim);
    std::vector<Complex> ph(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      std::size_t rem = j, out = 0, scale = 1;
      Complex phase = 1.0;
      for (std::size_t k = ops.size(); k-- > 0;) {
        std::uint32_t digit = static_cast<std::uint32_t>(rem % q);
        rem /= q;
        std::uint32_t moved = (digit + ops[k].x) % q;
        phase *= w[std::uint64_t{ops[k].z} * moved % q];
        out += moved * scale;
        scale *= q;
      }
      perm[j] = out;
      ph[j] = phase;
    }
    Eigen::MatrixXcd res(rho.rows(), rho.cols());
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        res(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j])) =
            ph[i] * rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
            std::conj(ph[j]);
      }
    }
    return res;
  }

  const std::vector<Eigen::MatrixXcd>& reduced_table(
      Variant v, const std::vector<std::size_t>& positions) {
    auto key = std::make_pair(v, positions);
    auto it = tables_.find(key);
    if (it != tables_.end()) return it->second;
    const std::uint32_t q = code_.q();
    std::vector<SparseState> enc;
    for (std::uint32_t a = 0; a < q; ++a) enc.push_back(encode_basis(code_, v, a));
    std::vector<Eigen::MatrixXcd> table;
    for (std::uint32_t a = 0; a < q; ++a) {
      for (std::uint32_t b = 0; b < q; ++b) {
        table.push_back(partial_trace_cross(enc[a], enc[b], positions));
      }
    }
    return tables_.emplace(key, std::move(table)).first->second;
  }

  CodeParams code_;
  GadgetCoefficients coeff_;
  BlockStore store_;
  Rng twirl_;
  std::map<RegisterId, Variant> variants_;
  std::map<RegisterId, std::vector<Pauli>> frames_;
  std::map<std::pair<Variant, std::vector<std::size_t>>, std::vector<Eigen::MatrixXcd>> tables_;
};

/** What the gadgets need from a backend. */
template <class M>
concept RegisterMachine = requires(
    M m, const M cm, RegisterId r, Variant v, std::int64_t k, Rng& rng,
    std::optional<std::uint32_t> forced, std::optional<BellLabel> label) {
  { cm.code() } -> std::convertible_to<const CodeParams&>;
  { cm.variant(r) } -> std::same_as<Variant>;
  { m.prepare(v, 0u) } -> std::same_as<RegisterId>;
  m.add_const(r, k);
  m.scale(r, k);
  m.phase(r, k);
  m.fourier(r);
  m.add_scaled(r, r, k);
  m.cphase(r, r, k);
  m.cphase_pq(r, r);
  m.ccphase_r(r, r, r);
  m.tamper(r, std::size_t{0}, k, k);
  { m.measure(r, rng, forced, std::size_t{0}) } -> std::same_as<MeasureOutcome>;
  { m.teleport_share(r, std::size_t{0}, rng, label) } -> std::same_as<BellLabel>;
  m.compact();
};

}  // namespace qmpc
