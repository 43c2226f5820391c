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

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "qmpc/protocol.hpp"

namespace qmpc {

inline constexpr const char* kScenarioSchema = "qmpc-scenario/1";

/** Parse or validation problem, anchored to a 1-based line and column. */
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::size_t line, std::size_t column, const std::string& message)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct ScenarioDocument {
  std::string schema;
  ProtocolParams params;
  std::vector<std::uint32_t> inputs;
  FunctionCircuit circuit;
  AdversarySpec adversary;
};

namespace detail {

[[noreturn]] inline void fail_at(const YAML::Node& node, const std::string& message) {
  const auto mark = node.Mark();
  if (mark.is_null()) throw ScenarioError(0, 0, message);
  throw ScenarioError(static_cast<std::size_t>(mark.line) + 1, static_cast<std::size_t>(mark.column) + 1, message);
}

inline void only_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) {
  if (!map.IsMap()) fail_at(map, where + " must be a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail_at(kv.first, "unknown key '" + key + "' in " + where);
  }
}

inline YAML::Node need(const YAML::Node& map, const std::string& key, const std::string& where) {
  YAML::Node v = map[key];
  if (!v) fail_at(map, where + " is missing '" + key + "'");
  return v;
}

template <class T>
T scalar(const YAML::Node& node, const std::string& what) {
  if (!node.IsScalar()) fail_at(node, what + " must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail_at(node, what + " has the wrong type");
  }
}

inline std::uint64_t unsigned_value(const YAML::Node& node, const std::string& what) {
  auto v = scalar<long long>(node, what);
  if (v < 0) fail_at(node, what + " must be non-negative");
  return static_cast<std::uint64_t>(v);
}

inline std::vector<std::uint64_t> unsigned_list(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence()) fail_at(node, what + " must be a list");
  std::vector<std::uint64_t> out;
  for (const auto& x : node) out.push_back(unsigned_value(x, what + " entry"));
  return out;
}

inline ProtocolPhase parse_phase(const YAML::Node& node) {
  auto s = scalar<std::string>(node, "phase");
  for (auto p : {ProtocolPhase::Setup, ProtocolPhase::Verify, ProtocolPhase::Evaluate, ProtocolPhase::Finalize}) {
    if (s == phase_name(p)) return p;
  }
  fail_at(node, "unknown phase '" + s + "'");
}

inline Gate parse_gate(const YAML::Node& node) {
  only_keys(node, {"op", "wires", "value"}, "gate");
  auto op_node = need(node, "op", "gate");
  auto op = scalar<std::string>(op_node, "op");
  std::vector<std::size_t> wires;
  for (auto w : unsigned_list(need(node, "wires", "gate"), "wires")) wires.push_back(w);
  std::int64_t value = node["value"] ? scalar<std::int64_t>(node["value"], "value") : 0;
  if (op == "add_const") return Gate{Gate::Kind::AddConst, wires, value};
  if (op == "scale") return Gate{Gate::Kind::Scale, wires, value};
  if (op == "cnot") return Gate{Gate::Kind::Cnot, wires, value};
  if (op == "toffoli") return Gate{Gate::Kind::Toffoli, wires, value};
  fail_at(op_node, "unknown gate op '" + op + "'");
}

inline CheaterSpec parse_cheater(const YAML::Node& node) {
  only_keys(node, {"player", "strategy", "mode", "value", "probability", "tamper", "copies", "phases"}, "cheater");
  CheaterSpec c;
  auto strat_node = need(node, "strategy", "cheater");
  auto strat = scalar<std::string>(strat_node, "strategy");
  bool found = false;
  for (auto s : {Strategy::Honest, Strategy::LieAnnounce, Strategy::TamperShares, Strategy::Refuse,
                 Strategy::InconsistentInput, Strategy::Eavesdropper}) {
    if (strat == strategy_name(s)) {
      c.strategy = s;
      found = true;
    }
  }
  if (!found) fail_at(strat_node, "unknown strategy '" + strat + "'");
  if (c.strategy != Strategy::Eavesdropper) c.player = unsigned_value(need(node, "player", "cheater"), "player");
  if (auto m = node["mode"]) {
    auto s = scalar<std::string>(m, "mode");
    if (s == "offset") c.lie = LieMode::Offset;
    else if (s == "uniform") c.lie = LieMode::Uniform;
    else if (s == "constant") c.lie = LieMode::Constant;
    else fail_at(m, "unknown lie mode '" + s + "'");
  }
  if (auto v = node["value"]) c.lie_value = scalar<std::int64_t>(v, "value");
  if (auto p = node["probability"]) {
    c.probability = scalar<double>(p, "probability");
    if (c.probability < 0 || c.probability > 1) fail_at(p, "probability outside [0, 1]");
  }
  if (auto t = node["tamper"]) {
    if (!t.IsSequence() || t.size() != 2) fail_at(t, "tamper must be [shift, phase]");
    c.tamper_a = scalar<std::int64_t>(t[0], "tamper shift");
    c.tamper_b = scalar<std::int64_t>(t[1], "tamper phase");
  }
  if (auto cp = node["copies"]) {
    for (auto v : unsigned_list(cp, "copies")) c.copies.push_back(static_cast<std::uint32_t>(v));
  }
  if (auto ph = node["phases"]) {
    if (!ph.IsSequence()) fail_at(ph, "phases must be a list");
    for (const auto& p : ph) c.phases.insert(parse_phase(p));
  }
  return c;
}

}  // namespace detail

/** Parses and validates; every failure carries the offending line. */
inline ScenarioDocument parse_scenario(const std::string& text) {
  using namespace detail;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(static_cast<std::size_t>(e.mark.line) + 1, static_cast<std::size_t>(e.mark.column) + 1, e.msg);
  }
  if (!root || root.IsNull()) throw ScenarioError(1, 1, "empty scenario");
  only_keys(root,
            {"schema", "n", "q", "d", "y", "s", "r", "verification_rounds", "final_rounds",
             "preset_spot_checks", "seed", "routing", "backend", "inputs", "circuit", "adversary"},
            "scenario");
  ScenarioDocument doc;
  auto schema = need(root, "schema", "scenario");
  doc.schema = scalar<std::string>(schema, "schema");
  if (doc.schema != kScenarioSchema) fail_at(schema, "unsupported schema '" + doc.schema + "', expected " + kScenarioSchema);

  auto n = unsigned_value(need(root, "n", "scenario"), "n");
  auto q = unsigned_value(need(root, "q", "scenario"), "q");
  auto d = unsigned_value(need(root, "d", "scenario"), "d");
  std::optional<std::vector<std::uint32_t>> y;
  if (auto yn = root["y"]) {
    y.emplace();
    for (auto v : unsigned_list(yn, "y")) y->push_back(static_cast<std::uint32_t>(v));
  }
  try {
    doc.params.code = CodeParams(n, static_cast<std::uint32_t>(q), d, y);
  } catch (const std::exception& e) {
    fail_at(root["n"], std::string("invalid code: ") + e.what());
  }
  auto& p = doc.params;
  p.s = unsigned_value(need(root, "s", "scenario"), "s");
  p.r = unsigned_value(need(root, "r", "scenario"), "r");
  if (p.r == 0 || p.r >= p.s) fail_at(root["r"], "need 0 < r < s");
  p.verification_rounds = unsigned_value(need(root, "verification_rounds", "scenario"), "verification_rounds");
  if (p.verification_rounds == 0) fail_at(root["verification_rounds"], "need at least one verification round");
  if (auto v = root["final_rounds"]) p.final_rounds = unsigned_value(v, "final_rounds");
  if (auto v = root["preset_spot_checks"]) p.preset_spot_checks = unsigned_value(v, "preset_spot_checks");
  p.seed = unsigned_value(need(root, "seed", "scenario"), "seed");
  if (auto v = root["routing"]) {
    auto s = scalar<std::string>(v, "routing");
    if (s == "individual") p.routing = Routing::Individual;
    else if (s == "assignee") p.routing = Routing::Assignee;
    else fail_at(v, "unknown routing '" + s + "'");
  }
  if (auto v = root["backend"]) {
    auto s = scalar<std::string>(v, "backend");
    if (s == "auto") p.backend = Backend::Auto;
    else if (s == "physical") p.backend = Backend::Physical;
    else if (s == "logical") p.backend = Backend::Logical;
    else fail_at(v, "unknown backend '" + s + "'");
  }

  auto inputs = need(root, "inputs", "scenario");
  for (auto v : unsigned_list(inputs, "inputs")) {
    if (v >= q) fail_at(inputs, "input " + std::to_string(v) + " is outside F_" + std::to_string(q));
    doc.inputs.push_back(static_cast<std::uint32_t>(v));
  }
  if (doc.inputs.empty()) fail_at(inputs, "need at least one input");
  if (doc.inputs.size() > n) fail_at(inputs, "more inputs than players");

  auto circuit = need(root, "circuit", "scenario");
  only_keys(circuit, {"output", "gates"}, "circuit");
  doc.circuit.wires = doc.inputs.size();
  auto out = need(circuit, "output", "circuit");
  doc.circuit.output = unsigned_value(out, "output");
  if (doc.circuit.output >= doc.circuit.wires) fail_at(out, "output wire out of range");
  if (auto gates = circuit["gates"]) {
    if (!gates.IsSequence()) fail_at(gates, "gates must be a list");
    for (const auto& g : gates) {
      doc.circuit.gates.push_back(parse_gate(g));
      FunctionCircuit one{doc.circuit.wires, {doc.circuit.gates.back()}, doc.circuit.output};
      try {
        one.validate(static_cast<std::uint32_t>(q));
      } catch (const ProtocolError& e) {
        std::string msg = e.what();
        // Report with the real gate index.
        fail_at(g, "gate " + std::to_string(doc.circuit.gates.size() - 1) + msg.substr(msg.find(' ', 5)));
      }
    }
  }

  if (auto adv = root["adversary"]) {
    only_keys(adv, {"allow_exceeding_delta", "cheaters"}, "adversary");
    if (auto a = adv["allow_exceeding_delta"]) doc.adversary.allow_exceeding_delta = scalar<bool>(a, "allow_exceeding_delta");
    if (auto cs = adv["cheaters"]) {
      if (!cs.IsSequence()) fail_at(cs, "cheaters must be a list");
      for (const auto& c : cs) {
        doc.adversary.cheaters.push_back(parse_cheater(c));
        try {
          AdversarySpec one{{doc.adversary.cheaters.back()}, true};
          one.validate(doc.params.code, doc.circuit.wires);
        } catch (const ProtocolError& e) {
          fail_at(c, e.what());
        }
      }
      try {
        doc.adversary.validate(doc.params.code, doc.circuit.wires);
      } catch (const ProtocolError& e) {
        fail_at(cs, e.what());
      }
    }
  }
  return doc;
}

inline ScenarioDocument load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace qmpc
