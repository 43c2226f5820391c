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
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmpc/gadgets.hpp"
#include "qmpc/machine.hpp"
#include "qmpc/poly_code.hpp"
#include "qmpc/rng.hpp"

namespace qmpc {

class ProtocolError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Routing { Individual, Assignee };
enum class Backend { Auto, Physical, Logical };

inline const char* routing_name(Routing r) { return r == Routing::Individual ? "individual" : "assignee"; }
inline const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Auto: return "auto";
    case Backend::Physical: return "physical";
    case Backend::Logical: return "logical";
  }
  return "?";
}

struct ProtocolParams {
  CodeParams code = CodeParams::small();
  /** Copies prepared per input. */
  std::size_t s = 3;
  /** Copies kept after verification; s - r are wasted. */
  std::size_t r = 2;
  /** Parity rounds per prover. */
  std::size_t verification_rounds = 1;
  /** Parity rounds across the output copies; skipped when r = 1. */
  std::size_t final_rounds = 1;
  /** Presets of each used kind each player sacrifices to a public check. */
  std::size_t preset_spot_checks = 1;
  std::uint64_t seed = 1;
  Routing routing = Routing::Individual;
  Backend backend = Backend::Auto;

  void validate() const {
    if (r == 0 || r >= s) throw ProtocolError("need 0 < r < s");
    if (verification_rounds < 1) throw ProtocolError("need at least one verification round");
  }

  /** Physical simulation while one encoded register has at most 2^16 strings. */
  Backend resolved_backend() const {
    if (backend != Backend::Auto) return backend;
    double strings = std::pow(static_cast<double>(code.q()), static_cast<double>(code.n()));
    return strings <= 65536.0 ? Backend::Physical : Backend::Logical;
  }

  /** Failure bound implied by the round count, q^-rounds. */
  double implied_error_bound() const {
    return std::pow(static_cast<double>(code.q()), -static_cast<double>(verification_rounds));
  }
};

struct Gate {
  enum class Kind { AddConst, Scale, Cnot, Toffoli };
  Kind kind;
  std::vector<std::size_t> wires;
  std::int64_t value = 0;

  static Gate add_const(std::size_t w, std::int64_t a) { return {Kind::AddConst, {w}, a}; }
  static Gate scale(std::size_t w, std::int64_t a) { return {Kind::Scale, {w}, a}; }
  static Gate cnot(std::size_t i, std::size_t j) { return {Kind::Cnot, {i, j}, 0}; }
  /** wire k += wire i * wire j. */
  static Gate toffoli(std::size_t i, std::size_t j, std::size_t k) { return {Kind::Toffoli, {i, j, k}, 0}; }
};

inline const char* gate_name(Gate::Kind k) {
  switch (k) {
    case Gate::Kind::AddConst: return "add_const";
    case Gate::Kind::Scale: return "scale";
    case Gate::Kind::Cnot: return "cnot";
    case Gate::Kind::Toffoli: return "toffoli";
  }
  return "?";
}

/** Straight-line program over the input wires. Wire i starts as player i's input. */
struct FunctionCircuit {
  std::size_t wires = 0;
  std::vector<Gate> gates;
  std::size_t output = 0;

  void validate(std::uint32_t q) const {
    if (wires == 0) throw ProtocolError("circuit needs at least one wire");
    if (output >= wires) throw ProtocolError("output wire out of range");
    for (std::size_t g = 0; g < gates.size(); ++g) {
      const auto& gate = gates[g];
      const std::size_t want = gate.kind == Gate::Kind::Toffoli ? 3 : gate.kind == Gate::Kind::Cnot ? 2 : 1;
      const std::string at = "gate " + std::to_string(g) + " (" + gate_name(gate.kind) + ")";
      if (gate.wires.size() != want) throw ProtocolError(at + " needs " + std::to_string(want) + " wires");
      for (auto w : gate.wires) {
        if (w >= wires) throw ProtocolError(at + " names wire " + std::to_string(w) + " out of range");
      }
      std::set<std::size_t> distinct(gate.wires.begin(), gate.wires.end());
      if (distinct.size() != gate.wires.size()) throw ProtocolError(at + " repeats a wire");
      if (gate.kind == Gate::Kind::Scale && FieldElement::from_int(gate.value, Modulus(q)).is_zero()) {
        throw ProtocolError(at + " scales by zero");
      }
    }
  }

  std::size_t toffoli_count() const {
    return static_cast<std::size_t>(std::count_if(
        gates.begin(), gates.end(), [](const Gate& g) { return g.kind == Gate::Kind::Toffoli; }));
  }

  /** Plain evaluation over F_q. */
  std::uint32_t evaluate(const std::vector<std::uint32_t>& inputs, std::uint32_t q) const {
    Modulus mod(q);
    std::vector<FieldElement> w;
    for (auto x : inputs) w.emplace_back(x, mod);
    for (const auto& g : gates) {
      switch (g.kind) {
        case Gate::Kind::AddConst: w[g.wires[0]] += FieldElement::from_int(g.value, mod); break;
        case Gate::Kind::Scale: w[g.wires[0]] *= FieldElement::from_int(g.value, mod); break;
        case Gate::Kind::Cnot: w[g.wires[1]] += w[g.wires[0]]; break;
        case Gate::Kind::Toffoli: w[g.wires[2]] += w[g.wires[0]] * w[g.wires[1]]; break;
      }
    }
    return w[output].value();
  }
};

enum class Strategy { Honest, LieAnnounce, TamperShares, Refuse, InconsistentInput, Eavesdropper };
enum class LieMode { Offset, Uniform, Constant };
enum class ProtocolPhase { Setup, Verify, Evaluate, Finalize };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Honest: return "honest";
    case Strategy::LieAnnounce: return "lie_announce";
    case Strategy::TamperShares: return "tamper_shares";
    case Strategy::Refuse: return "refuse";
    case Strategy::InconsistentInput: return "inconsistent_input";
    case Strategy::Eavesdropper: return "eavesdropper";
  }
  return "?";
}
inline const char* lie_mode_name(LieMode m) {
  switch (m) {
    case LieMode::Offset: return "offset";
    case LieMode::Uniform: return "uniform";
    case LieMode::Constant: return "constant";
  }
  return "?";
}
inline const char* phase_name(ProtocolPhase p) {
  switch (p) {
    case ProtocolPhase::Setup: return "setup";
    case ProtocolPhase::Verify: return "verify";
    case ProtocolPhase::Evaluate: return "evaluate";
    case ProtocolPhase::Finalize: return "finalize";
  }
  return "?";
}

struct CheaterSpec {
  /** Player index; ignored for eavesdroppers, who hold nothing. */
  std::size_t player = 0;
  Strategy strategy = Strategy::Honest;
  LieMode lie = LieMode::Offset;
  /** Offset or constant for lies. */
  std::int64_t lie_value = 1;
  /** Chance of lying or refusing at each announcement. */
  double probability = 1.0;
  /** Shift and phase applied to the cheater's share by tamper_shares. */
  std::int64_t tamper_a = 1;
  std::int64_t tamper_b = 0;
  /** Values of the cheater's input copies, cycled. */
  std::vector<std::uint32_t> copies;
  /** Phases where the strategy is active; empty means all. */
  std::set<ProtocolPhase> phases;

  bool active(ProtocolPhase p) const { return phases.empty() || phases.count(p) != 0; }
};

struct AdversarySpec {
  std::vector<CheaterSpec> cheaters;
  /** Negative controls may exceed delta on purpose. */
  bool allow_exceeding_delta = false;

  /** Share positions held by cheaters, eavesdroppers excluded. */
  std::vector<std::size_t> positions() const {
    std::set<std::size_t> p;
    for (const auto& c : cheaters) {
      if (c.strategy != Strategy::Eavesdropper) p.insert(c.player);
    }
    return {p.begin(), p.end()};
  }

  const CheaterSpec* find(std::size_t player) const {
    for (const auto& c : cheaters) {
      if (c.strategy != Strategy::Eavesdropper && c.player == player) return &c;
    }
    return nullptr;
  }

  void validate(const CodeParams& code, std::size_t input_wires) const {
    std::set<std::size_t> seen;
    for (const auto& c : cheaters) {
      if (c.strategy == Strategy::Eavesdropper) continue;
      if (c.player >= code.n()) throw ProtocolError("cheater player index out of range");
      if (!seen.insert(c.player).second) throw ProtocolError("player listed twice in the adversary");
      if (c.probability < 0 || c.probability > 1) throw ProtocolError("probability outside [0, 1]");
      if (c.strategy == Strategy::InconsistentInput) {
        if (c.player >= input_wires) throw ProtocolError("inconsistent_input cheater owns no input");
        if (c.copies.empty()) throw ProtocolError("inconsistent_input needs copy values");
      }
    }
    if (seen.size() > code.delta() && !allow_exceeding_delta) {
      throw ProtocolError(
          "adversary controls " + std::to_string(seen.size()) + " players but the code tolerates " +
          std::to_string(code.delta()));
    }
  }
};

enum class AbortReason { ParityMismatch, DecodeFailure, PresetCheckFailed, Refused };

inline const char* abort_reason_name(AbortReason r) {
  switch (r) {
    case AbortReason::ParityMismatch: return "parity_mismatch";
    case AbortReason::DecodeFailure: return "decode_failure";
    case AbortReason::PresetCheckFailed: return "preset_check_failed";
    case AbortReason::Refused: return "refused";
  }
  return "?";
}

struct AbortInfo {
  AbortReason reason;
  ProtocolPhase phase;
  std::string tag;
  std::string detail;
  std::optional<std::size_t> prover;
  std::optional<std::size_t> round;
  std::optional<std::uint32_t> inferred;
};

struct Outcome {
  std::optional<std::uint32_t> z;
  std::optional<AbortInfo> abort;
  bool aborted() const { return abort.has_value(); }
};

struct Counters {
  std::uint64_t qudits_sent = 0;
  std::uint64_t classical_symbols_broadcast = 0;
  /** Teleport labels, sent privately to the receiver. */
  std::uint64_t classical_symbols_private = 0;
  std::uint64_t channels_used = 0;
  std::uint64_t registers_prepared = 0;
  std::uint64_t presets_minted = 0;
  std::uint64_t copies_wasted = 0;
  std::uint64_t measurements = 0;
  /** Broadcast symbols attributable to Toffoli gates (synthesis and lambdas). */
  std::uint64_t toffoli_symbols = 0;
  std::map<std::string, std::uint64_t> broadcast_by_phase;
};

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kTranscriptSchema = "qmpc-transcript/1";

struct Transcript {
  ordered_json header;
  std::vector<ordered_json> events;
  Counters counters;
  Outcome outcome;

  ordered_json summary() const {
    ordered_json s;
    s["event"] = "summary";
    if (outcome.abort) {
      const auto& a = *outcome.abort;
      ordered_json ab;
      ab["reason"] = abort_reason_name(a.reason);
      ab["phase"] = phase_name(a.phase);
      ab["tag"] = a.tag;
      ab["detail"] = a.detail;
      if (a.prover) ab["prover"] = *a.prover;
      if (a.round) ab["round"] = *a.round;
      if (a.inferred) ab["inferred"] = *a.inferred;
      s["outcome"] = {{"abort", ab}};
    } else {
      s["outcome"] = {{"z", outcome.z.value_or(0)}};
    }
    ordered_json c;
    c["qudits_sent"] = counters.qudits_sent;
    c["classical_symbols_broadcast"] = counters.classical_symbols_broadcast;
    c["classical_symbols_private"] = counters.classical_symbols_private;
    c["channels_used"] = counters.channels_used;
    c["registers_prepared"] = counters.registers_prepared;
    c["presets_minted"] = counters.presets_minted;
    c["copies_wasted"] = counters.copies_wasted;
    c["measurements"] = counters.measurements;
    c["toffoli_symbols"] = counters.toffoli_symbols;
    c["broadcast_by_phase"] = counters.broadcast_by_phase;
    s["counters"] = c;
    return s;
  }

  /** Header, one line per event, summary last. */
  std::string to_jsonl() const {
    std::ostringstream out;
    out << header.dump() << "\n";
    for (const auto& e : events) out << e.dump() << "\n";
    out << summary().dump() << "\n";
    return out.str();
  }

  /** Events everyone sees: broadcasts, coefficients, decoded values, verdicts. */
  std::vector<ordered_json> public_view() const {
    std::vector<ordered_json> out;
    for (const auto& e : events) {
      const std::string kind = e.value("event", "");
      if (kind == "broadcast" || kind == "coefficients" || kind == "verdict") out.push_back(e);
    }
    return out;
  }
};

/** Test hooks; none of them changes the run. */
struct RunOptions {
  /** Logical outcomes to force, in measurement order. */
  OutcomeSchedule* schedule = nullptr;
  /** Receives the logical value of every measurement, in order. */
  std::vector<std::uint32_t>* record = nullptr;
  /** Share positions whose reduced state is reported after each phase. */
  std::vector<std::size_t> view_positions;
  /** Phases to report; empty means all. */
  std::set<ProtocolPhase> view_phases;
  std::function<void(ProtocolPhase, const CheaterView&)> on_view;
};

struct RunResult {
  Outcome outcome;
  Transcript transcript;
  /** Product of conditioning probabilities of forced outcomes. */
  double class_probability = 1.0;
};

namespace detail {

struct ProtocolAbort {
  AbortInfo info;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/** Runs the four phases on one backend. */
template <RegisterMachine M>
class Orchestrator {
 public:
  Orchestrator(
      M& machine, const ProtocolParams& params, std::vector<std::uint32_t> inputs,
      const FunctionCircuit& circuit, const AdversarySpec& adversary, const RunOptions& options)
      : m_(machine),
        params_(params),
        code_(params.code),
        n_(params.code.n()),
        q_(params.code.q()),
        inputs_(std::move(inputs)),
        circuit_(circuit),
        adversary_(adversary),
        options_(options),
        rng_(detail::mix_seed(params.seed, 1)),
        adv_rng_(detail::mix_seed(params.seed, 2)) {
    env_ = GadgetEnv{&rng_, options_.schedule, announcer()};
  }

  RunResult run() {
    params_.validate();
    circuit_.validate(q_);
    if (inputs_.size() != circuit_.wires) throw ProtocolError("one input per circuit wire");
    if (circuit_.wires > n_) throw ProtocolError("more input wires than players");
    for (auto x : inputs_) {
      if (x >= q_) throw ProtocolError("input outside F_q");
    }
    adversary_.validate(code_, circuit_.wires);
    header();
    try {
      setup_and_distribute();
      snapshot(ProtocolPhase::Setup);
      verify_inputs();
      snapshot(ProtocolPhase::Verify);
      evaluate_circuit();
      snapshot(ProtocolPhase::Evaluate);
      finalize();
      snapshot(ProtocolPhase::Finalize);
    } catch (const detail::ProtocolAbort& a) {
      t_.outcome.abort = a.info;
    } catch (const AbortSignal& a) {
      t_.outcome.abort = AbortInfo{AbortReason::DecodeFailure, phase_, a.tag(), a.reason(), {}, {}, {}};
    }
    t_.outcome.z = t_.outcome.abort ? std::nullopt : z_;
    return RunResult{t_.outcome, t_, env_.class_probability};
  }

 private:
  // ---- bookkeeping ----

  ordered_json event(const char* kind) {
    ordered_json e;
    e["seq"] = t_.events.size();
    e["phase"] = phase_name(phase_);
    e["event"] = kind;
    return e;
  }

  void count_broadcast(std::uint64_t symbols, bool toffoli) {
    t_.counters.classical_symbols_broadcast += symbols;
    t_.counters.broadcast_by_phase[phase_name(phase_)] += symbols;
    if (toffoli) t_.counters.toffoli_symbols += symbols;
  }

  void header() {
    ordered_json h;
    h["schema"] = kTranscriptSchema;
    h["n"] = n_;
    h["q"] = q_;
    h["d"] = code_.d();
    h["delta"] = code_.delta();
    std::vector<std::uint32_t> y;
    for (const auto& p : code_.points()) y.push_back(p.value());
    h["y"] = y;
    h["s"] = params_.s;
    h["r"] = params_.r;
    h["verification_rounds"] = params_.verification_rounds;
    h["final_rounds"] = params_.final_rounds;
    h["seed"] = params_.seed;
    h["routing"] = routing_name(params_.routing);
    h["backend"] = backend_name(params_.resolved_backend());
    h["wires"] = circuit_.wires;
    h["gates"] = circuit_.gates.size();
    h["output"] = circuit_.output;
    ordered_json adv = ordered_json::array();
    for (const auto& c : adversary_.cheaters) {
      ordered_json a;
      if (c.strategy != Strategy::Eavesdropper) a["player"] = c.player;
      a["strategy"] = strategy_name(c.strategy);
      adv.push_back(a);
    }
    h["adversary"] = adv;
    t_.header = h;
    t_.counters.channels_used = n_;
  }

  void snapshot(ProtocolPhase p) {
    if (!options_.on_view) return;
    if (!options_.view_phases.empty() && !options_.view_phases.count(p)) return;
    if constexpr (requires { m_.cheater_view(options_.view_positions); }) {
      options_.on_view(p, m_.cheater_view(options_.view_positions));
    }
  }

  [[noreturn]] void abort(
      AbortReason reason, std::string tag, std::string detail, std::optional<std::size_t> prover = {},
      std::optional<std::size_t> round = {}, std::optional<std::uint32_t> inferred = {}) {
    auto e = event("abort");
    e["reason"] = abort_reason_name(reason);
    e["tag"] = tag;
    e["detail"] = detail;
    t_.events.push_back(e);
    throw detail::ProtocolAbort{AbortInfo{reason, phase_, std::move(tag), std::move(detail), prover, round, inferred}};
  }

  // ---- announcements ----

  /** Symbol player i broadcasts, after any lie. nullopt is a refusal. */
  std::optional<FieldElement> player_symbol(std::size_t i, const FieldElement& honest) {
    const CheaterSpec* c = adversary_.find(i);
    if (!c || !c->active(phase_)) return honest;
    if (c->strategy == Strategy::Refuse) {
      if (adv_rng_.bernoulli(c->probability)) return std::nullopt;
      return honest;
    }
    if (c->strategy != Strategy::LieAnnounce) return honest;
    if (!adv_rng_.bernoulli(c->probability)) return honest;
    const Modulus mod = code_.modulus();
    switch (c->lie) {
      case LieMode::Offset: return honest + FieldElement::from_int(c->lie_value, mod);
      case LieMode::Uniform: return FieldElement(static_cast<std::uint32_t>(adv_rng_.uniform_index(q_)), mod);
      case LieMode::Constant: return FieldElement::from_int(c->lie_value, mod);
    }
    return honest;
  }

  Announcer announcer() {
    return [this](const AnnounceRequest& req, std::string& reason) -> std::optional<FieldElement> {
      ++t_.counters.measurements;
      const bool toffoli = req.tag.rfind("toffoli", 0) == 0;
      const std::size_t delta = code_.delta();
      // Logical value behind the honest shares, for the record hook.
      if (options_.record) {
        auto truth = decode_shares(code_, req.variant, req.outcome.shares, delta);
        if (const auto* ok = std::get_if<RSDecoded>(&truth)) options_.record->push_back(ok->value_at_zero.value());
        else options_.record->push_back(q_);
      }
      if (params_.routing == Routing::Assignee) return assignee_announce(req, reason, toffoli);

      ShareVector said;
      ordered_json symbols = ordered_json::array();
      std::uint64_t spoken = 0;
      for (std::size_t i = 0; i < n_; ++i) {
        auto sym = player_symbol(i, req.outcome.shares.symbols[i]);
        if (sym) {
          said.symbols.push_back(*sym);
          symbols.push_back(sym->value());
          ++spoken;
        } else {
          said.symbols.push_back(FieldElement(0, code_.modulus()));
          said.erasures.insert(i);
          symbols.push_back(nullptr);
        }
      }
      count_broadcast(spoken, toffoli);
      auto e = event("broadcast");
      e["tag"] = req.tag;
      e["variant"] = variant_name(req.variant);
      e["symbols"] = symbols;
      // Refusals eat into the error budget.
      const auto rs = code_.rs_params(req.variant);
      RSDecodeResult decoded = DecodeFailure{"too many refusals to interpolate"};
      if (said.erasures.size() <= rs.n - rs.k) {
        const std::size_t room = (rs.n - rs.k - said.erasures.size()) / 2;
        decoded = decode_shares(code_, req.variant, said, std::min(delta, room));
      }
      if (const auto* ok = std::get_if<RSDecoded>(&decoded)) {
        e["decoded"] = ok->value_at_zero.value();
        t_.events.push_back(e);
        return ok->value_at_zero;
      }
      reason = std::get<DecodeFailure>(decoded).reason;
      e["decoded"] = nullptr;
      e["failure"] = reason;
      t_.events.push_back(e);
      return std::nullopt;
    };
  }

  /** The register travels to one random player, who decodes and announces the value. */
  std::optional<FieldElement> assignee_announce(const AnnounceRequest& req, std::string& reason, bool toffoli) {
    const std::size_t who = rng_.uniform_index(n_);
    t_.counters.qudits_sent += n_ - 1;
    auto decoded = decode_shares(code_, req.variant, req.outcome.shares, code_.delta());
    auto e = event("broadcast");
    e["tag"] = req.tag;
    e["variant"] = variant_name(req.variant);
    e["assignee"] = who;
    if (!std::holds_alternative<RSDecoded>(decoded)) {
      reason = std::get<DecodeFailure>(decoded).reason;
      e["decoded"] = nullptr;
      e["failure"] = reason;
      t_.events.push_back(e);
      return std::nullopt;
    }
    auto value = player_symbol(who, std::get<RSDecoded>(decoded).value_at_zero);
    if (!value) {
      e["decoded"] = nullptr;
      t_.events.push_back(e);
      abort(AbortReason::Refused, req.tag, "assignee " + std::to_string(who) + " refused to announce");
    }
    count_broadcast(1, toffoli);
    e["decoded"] = value->value();
    t_.events.push_back(e);
    return value;
  }

  // ---- phases ----

  /** Owner encodes, then teleports share j to player j. */
  RegisterId distribute(std::size_t owner, Variant v, std::uint32_t value, const char* kind) {
    RegisterId reg = m_.prepare(v, value);
    ++t_.counters.registers_prepared;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == owner) continue;
      BellLabel label = m_.teleport_share(reg, j, rng_);
      ++t_.counters.qudits_sent;
      t_.counters.classical_symbols_private += 2;
      auto e = event("teleport");
      e["register"] = reg;
      e["kind"] = kind;
      e["from"] = owner;
      e["to"] = j;
      e["label"] = {label.a, label.b};
      t_.events.push_back(e);
    }
    return reg;
  }

  void tamper_all(ProtocolPhase p) {
    for (const auto& c : adversary_.cheaters) {
      if (c.strategy != Strategy::TamperShares || !c.active(p)) continue;
      for (RegisterId r : m_.live_registers()) {
        m_.tamper(r, c.player, c.tamper_a, c.tamper_b);
        auto e = event("tamper");
        e["player"] = c.player;
        e["register"] = r;
        t_.events.push_back(e);
      }
    }
  }

  void setup_and_distribute() {
    phase_ = ProtocolPhase::Setup;
    // Preset demand from the circuit.
    const std::size_t accumulators =
        circuit_.wires * params_.verification_rounds + (params_.r >= 2 ? params_.r - 1 + params_.final_rounds : 0);
    const std::size_t tilde = 4 * params_.r * circuit_.toffoli_count();
    auto per_player = [&](std::size_t demand) {
      if (demand == 0) return std::size_t{0};
      return (demand + n_ - 1) / n_ + params_.preset_spot_checks;
    };
    const std::size_t acc_each = per_player(accumulators), tilde_each = per_player(tilde);
    {
      auto e = event("presets");
      e["accumulators_needed"] = accumulators;
      e["tilde_needed"] = tilde;
      e["per_player_L"] = acc_each;
      e["per_player_L~"] = tilde_each;
      t_.events.push_back(e);
    }
    for (std::size_t i = 0; i < n_; ++i) {
      if (i < circuit_.wires) {
        const CheaterSpec* c = adversary_.find(i);
        for (std::size_t k = 0; k < params_.s; ++k) {
          std::uint32_t value = inputs_[i];
          if (c && c->strategy == Strategy::InconsistentInput && c->active(ProtocolPhase::Setup)) {
            value = c->copies[k % c->copies.size()] % q_;
          }
          copies_[i].push_back(distribute(i, Variant::L, value, "input"));
        }
      }
      for (std::size_t k = 0; k < acc_each; ++k) {
        owned_acc_[i].push_back(distribute(i, Variant::L, 0, "preset"));
      }
      for (std::size_t k = 0; k < tilde_each; ++k) {
        owned_tilde_[i].push_back(distribute(i, Variant::LTilde, 0, "preset"));
      }
    }
    t_.counters.presets_minted = n_ * (acc_each + tilde_each);
    tamper_all(ProtocolPhase::Setup);
  }

  /** Each player's presets of one kind face a public check on random members. */
  void spot_check(std::map<std::size_t, std::vector<RegisterId>>& owned, std::deque<RegisterId>& pool) {
    for (std::size_t i = 0; i < n_; ++i) {
      auto& mine = owned[i];
      for (std::size_t k = 0; k < params_.preset_spot_checks && !mine.empty(); ++k) {
        std::size_t pick = rng_.uniform_index(mine.size());
        RegisterId reg = mine[pick];
        mine.erase(mine.begin() + static_cast<std::ptrdiff_t>(pick));
        const std::string tag = "preset_check." + std::to_string(i);
        std::string why;
        auto v = measure_logical(m_, reg, env_, tag, &why);
        if (!v) abort(AbortReason::DecodeFailure, tag, why);
        auto e = event("verdict");
        e["check"] = "preset";
        e["owner"] = i;
        e["pass"] = v->is_zero();
        t_.events.push_back(e);
        if (!v->is_zero()) {
          abort(AbortReason::PresetCheckFailed, tag, "preset of player " + std::to_string(i) + " read " +
                std::to_string(v->value()), i, std::nullopt, v->value());
        }
      }
    }
    // Interleave owners so consumption spreads across players.
    for (std::size_t k = 0;; ++k) {
      bool any = false;
      for (std::size_t i = 0; i < n_; ++i) {
        if (k < owned[i].size()) {
          pool.push_back(owned[i][k]);
          any = true;
        }
      }
      if (!any) break;
    }
  }

  RegisterId take(std::deque<RegisterId>& pool, const char* what) {
    if (pool.empty()) throw std::logic_error(std::string("preset pool exhausted: ") + what);
    RegisterId r = pool.front();
    pool.pop_front();
    return r;
  }

  void verify_inputs() {
    phase_ = ProtocolPhase::Verify;
    tamper_all(ProtocolPhase::Verify);
    spot_check(owned_acc_, acc_pool_);
    spot_check(owned_tilde_, tilde_pool_);
    for (std::size_t prover = 0; prover < circuit_.wires; ++prover) {
      std::vector<std::size_t> verifiers;
      for (std::size_t j = 0; j < n_; ++j) {
        if (j != prover) verifiers.push_back(j);
      }
      for (std::size_t j = verifiers.size(); j > 1; --j) {
        std::swap(verifiers[j - 1], verifiers[rng_.uniform_index(j)]);
      }
      for (std::size_t round = 0; round < params_.verification_rounds; ++round) {
        const std::size_t verifier = verifiers[round % verifiers.size()];
        parity_round(copies_[prover], verifier, prover, round, "verify");
      }
    }
    // Discard the wasted copies; they are never announced.
    for (std::size_t i = 0; i < circuit_.wires; ++i) {
      while (copies_[i].size() > params_.r) {
        m_.measure(copies_[i].back(), rng_);
        copies_[i].pop_back();
        ++t_.counters.copies_wasted;
      }
    }
    auto e = event("discard");
    e["copies_wasted"] = t_.counters.copies_wasted;
    t_.events.push_back(e);
  }

  void parity_round(
      const std::vector<RegisterId>& regs, std::size_t verifier, std::optional<std::size_t> prover,
      std::size_t round, const char* kind, std::vector<FieldElement> c = {}) {
    if (c.empty()) c = random_parity_coefficients(regs.size(), code_.modulus(), rng_);
    auto e = event("coefficients");
    e["verifier"] = verifier;
    if (prover) e["prover"] = *prover;
    e["round"] = round;
    std::vector<std::uint32_t> cv;
    for (const auto& x : c) cv.push_back(x.value());
    e["c"] = cv;
    t_.events.push_back(e);
    count_broadcast(c.size(), false);
    std::string tag = std::string(kind) + ".parity";
    if (prover) tag += "." + std::to_string(*prover);
    tag += "." + std::to_string(round);
    RegisterId acc = take(acc_pool_, "accumulator");
    ParityResult res = random_parity_check(m_, regs, c, acc, env_, tag);
    auto v = event("verdict");
    v["check"] = "parity";
    if (prover) v["prover"] = *prover;
    v["round"] = round;
    v["pass"] = res.pass;
    t_.events.push_back(v);
    if (!res.pass) {
      AbortReason why = res.value ? AbortReason::ParityMismatch : AbortReason::DecodeFailure;
      abort(why, tag, res.reason, prover, round,
            res.value ? std::optional<std::uint32_t>(res.value->value()) : std::nullopt);
    }
  }

  void evaluate_circuit() {
    phase_ = ProtocolPhase::Evaluate;
    tamper_all(ProtocolPhase::Evaluate);
    wires_.assign(params_.r, std::vector<RegisterId>(circuit_.wires));
    for (std::size_t k = 0; k < params_.r; ++k) {
      for (std::size_t w = 0; w < circuit_.wires; ++w) wires_[k][w] = copies_[w][k];
    }
    for (std::size_t g = 0; g < circuit_.gates.size(); ++g) {
      const Gate& gate = circuit_.gates[g];
      for (std::size_t k = 0; k < params_.r; ++k) {
        auto& w = wires_[k];
        switch (gate.kind) {
          case Gate::Kind::AddConst: m_.add_const(w[gate.wires[0]], gate.value); break;
          case Gate::Kind::Scale: m_.scale(w[gate.wires[0]], gate.value); break;
          case Gate::Kind::Cnot: m_.add_scaled(w[gate.wires[0]], w[gate.wires[1]], 1); break;
          case Gate::Kind::Toffoli: {
            const std::string tag = "toffoli." + std::to_string(g) + "." + std::to_string(k);
            std::array<RegisterId, 4> presets;
            for (auto& p : presets) p = take(tilde_pool_, "L~ preset");
            Ancilla anc = synthesize(m_, env_, tag + ".synthesis", presets);
            ToffoliResult res = logical_toffoli(m_, w[gate.wires[0]], w[gate.wires[1]], w[gate.wires[2]], anc, env_, tag);
            w[gate.wires[0]] = res.x;
            w[gate.wires[1]] = res.y;
            w[gate.wires[2]] = res.z;
            break;
          }
        }
      }
      auto e = event("gate");
      e["index"] = g;
      e["op"] = gate_name(gate.kind);
      e["wires"] = gate.wires;
      t_.events.push_back(e);
    }
  }

  void finalize() {
    phase_ = ProtocolPhase::Finalize;
    tamper_all(ProtocolPhase::Finalize);
    std::vector<RegisterId> outputs;
    for (std::size_t k = 0; k < params_.r; ++k) outputs.push_back(wires_[k][circuit_.output]);
    if (outputs.size() >= 2) {
      // Copy 0 against each other copy with c = (1, -1), then random mixtures.
      const Modulus mod = code_.modulus();
      for (std::size_t k = 1; k < outputs.size(); ++k) {
        std::vector<FieldElement> c(outputs.size(), FieldElement(0, mod));
        c[0] = FieldElement(1, mod);
        c[k] = FieldElement::from_int(-1, mod);
        parity_round(outputs, (k - 1) % n_, std::nullopt, k - 1, "final.pair", c);
      }
      for (std::size_t round = 0; round < params_.final_rounds; ++round) {
        parity_round(outputs, round % n_, std::nullopt, round, "final");
      }
    }
    std::string why;
    auto z = measure_logical(m_, outputs[0], env_, "output", &why);
    if (!z) abort(AbortReason::DecodeFailure, "output", why);
    z_ = z->value();
    auto e = event("output");
    e["z"] = *z_;
    t_.events.push_back(e);
  }

  M& m_;
  ProtocolParams params_;
  CodeParams code_;
  std::size_t n_;
  std::uint32_t q_;
  std::vector<std::uint32_t> inputs_;
  FunctionCircuit circuit_;
  AdversarySpec adversary_;
  RunOptions options_;
  Rng rng_;
  Rng adv_rng_;
  GadgetEnv env_{};
  ProtocolPhase phase_ = ProtocolPhase::Setup;
  Transcript t_;
  std::map<std::size_t, std::vector<RegisterId>> copies_;
  std::map<std::size_t, std::vector<RegisterId>> owned_acc_, owned_tilde_;
  std::deque<RegisterId> acc_pool_, tilde_pool_;
  std::vector<std::vector<RegisterId>> wires_;
  std::optional<std::uint32_t> z_;
};

/** Builds the backend and runs all phases. */
inline RunResult run_protocol(
    const ProtocolParams& params, const std::vector<std::uint32_t>& inputs, const FunctionCircuit& circuit,
    const AdversarySpec& adversary, const RunOptions& options = {}) {
  if (params.resolved_backend() == Backend::Physical) {
    PhysicalMachine m(params.code);
    return Orchestrator<PhysicalMachine>(m, params, inputs, circuit, adversary, options).run();
  }
  LogicalMachine m(params.code, detail::mix_seed(params.seed, 3));
  return Orchestrator<LogicalMachine>(m, params, inputs, circuit, adversary, options).run();
}

}  // namespace qmpc
