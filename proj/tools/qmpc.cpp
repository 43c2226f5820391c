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

// qmpc: run scenarios, gadget sweeps and code checks from the shell.
//
// Exit codes: 0 success, 1 usage or validation error, 2 protocol abort or a
// failed check.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "qmpc/gadget_sweep.hpp"
#include "qmpc/kl_checker.hpp"
#include "qmpc/protocol.hpp"
#include "qmpc/scenario.hpp"

namespace {

using namespace qmpc;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFailed = 2;

struct CodeArgs {
  std::size_t n = 4;
  std::uint32_t q = 5;
  std::size_t d = 2;

  void add_to(CLI::App* app) {
    app->add_option("--n", n, "players")->capture_default_str();
    app->add_option("--q", q, "field size (prime)")->capture_default_str();
    app->add_option("--d", d, "code parameter d")->capture_default_str();
  }
  CodeParams build() const { return CodeParams(n, q, d); }
};

std::vector<std::uint32_t> parse_list(const std::string& text, std::size_t want, const char* what) {
  std::vector<std::uint32_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(static_cast<std::uint32_t>(std::stoul(item)));
  if (out.size() != want) {
    throw CLI::ValidationError(what, "expected " + std::to_string(want) + " comma-separated values");
  }
  return out;
}

// ---- protocol ----

struct RunArgs {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string backend;
};

int protocol_run(const RunArgs& a) {
  ScenarioDocument doc;
  try {
    doc = load_scenario(a.scenario);
  } catch (const ScenarioError& e) {
    std::cerr << a.scenario << ":" << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << a.scenario << ": " << e.what() << "\n";
    return kUsage;
  }
  if (a.seed) doc.params.seed = *a.seed;
  if (a.backend == "physical") doc.params.backend = Backend::Physical;
  if (a.backend == "logical") doc.params.backend = Backend::Logical;

  RunResult res;
  try {
    res = run_protocol(doc.params, doc.inputs, doc.circuit, doc.adversary);
  } catch (const std::exception& e) {
    std::cerr << a.scenario << ": " << e.what() << "\n";
    return kUsage;
  }
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) {
      std::cerr << "cannot write " << a.out << "\n";
      return kUsage;
    }
    f << res.transcript.to_jsonl();
  }
  const auto& c = res.transcript.counters;
  std::cout << "code (" << doc.params.code.n() << "," << doc.params.code.q() << "," << doc.params.code.d()
            << ") backend " << backend_name(doc.params.resolved_backend()) << " seed " << doc.params.seed << "\n";
  std::cout << "qudits sent " << c.qudits_sent << ", broadcast symbols " << c.classical_symbols_broadcast
            << ", toffoli symbols " << c.toffoli_symbols << "\n";
  if (res.outcome.aborted()) {
    const auto& ab = *res.outcome.abort;
    std::cout << "ABORT " << abort_reason_name(ab.reason) << " in " << phase_name(ab.phase) << " at " << ab.tag;
    if (ab.prover) std::cout << " (prover " << *ab.prover << ")";
    std::cout << ": " << ab.detail << "\n";
    return kFailed;
  }
  std::cout << "z = " << *res.outcome.z << "\n";
  return kOk;
}

// ---- gadgets ----

struct GadgetArgs {
  std::string gadget;
  CodeArgs code;
  bool sweep_all = false;
  bool all_outcomes = false;
  std::string force;
  std::string input = "2,3,4";
  std::uint64_t seed = 1;
  std::size_t pairs = 4, rounds = 2;
};

int gadget_run(const GadgetArgs& a) {
  SweepReport rep;
  // Teleport and hashing act on bare qudits; only q matters.
  const bool coded = a.gadget == "F" || a.gadget == "toffoli";
  if (!coded) Modulus check(a.code.q);
  if (a.gadget == "F") {
    const CodeParams code = a.code.build();
    if (!a.force.empty()) throw CLI::ValidationError("--force-outcomes", "F measures nothing");
    rep = sweep_fourier(code, a.sweep_all ? 5 : 0, a.seed);
  } else if (a.gadget == "toffoli") {
    const CodeParams code = a.code.build();
    if (std::pow(double(code.q()), double(code.n())) > 65536) {
      throw CLI::ValidationError("--n/--q", "toffoli sweep runs on the state vector; needs q^n <= 65536");
    }
    ToffoliSweepOptions opt;
    opt.all_outcomes = a.all_outcomes;
    opt.seed = a.seed;
    if (!a.force.empty()) {
      if (a.all_outcomes) throw CLI::ValidationError("--force-outcomes", "conflicts with --all-outcomes");
      auto f = parse_list(a.force, 3, "--force-outcomes");
      opt.forced = std::array<std::uint32_t, 3>{f[0] % code.q(), f[1] % code.q(), f[2] % code.q()};
    }
    if (!a.sweep_all) {
      auto in = parse_list(a.input, 3, "--input");
      opt.triples = {{static_cast<Digit>(in[0] % code.q()), static_cast<Digit>(in[1] % code.q()),
                      static_cast<Digit>(in[2] % code.q())}};
    }
    rep = sweep_toffoli(code, opt);
  } else if (a.gadget == "teleport") {
    std::optional<BellLabel> forced;
    if (!a.force.empty()) {
      auto f = parse_list(a.force, 2, "--force-outcomes");
      forced = BellLabel{f[0] % a.code.q, f[1] % a.code.q};
    }
    rep = sweep_teleport(a.code.q, a.sweep_all ? 10 : 1, a.all_outcomes, forced, a.seed);
  } else {
    if (!a.force.empty()) throw CLI::ValidationError("--force-outcomes", "hashing draws its own outcomes");
    rep = sweep_hashing(a.code.q, a.pairs, a.rounds, a.sweep_all ? 200 : 1, a.seed);
  }
  std::cout << "gadget " << rep.gadget << " on ";
  if (coded) std::cout << "(" << a.code.n << "," << a.code.q << "," << a.code.d << ")";
  else std::cout << "q = " << a.code.q;
  std::cout << ": "
            << rep.passed << "/" << rep.cases << " cases at fidelity >= 1-1e-9, min fidelity "
            << std::setprecision(12) << std::fixed << rep.min_fidelity << "\n";
  if (!rep.pass()) {
    std::cout << "first failure: " << rep.first_failure << "\n";
    return kFailed;
  }
  return kOk;
}

// ---- KL ----

struct KLArgs {
  CodeArgs code;
  std::string variant = "both";
  bool repetition = false;
  std::optional<std::size_t> delta;
  bool json = false;
};

int kl_run(const KLArgs& a) {
  std::vector<CodeInstance> codes;
  std::size_t delta;
  if (a.repetition) {
    codes.push_back(CodeInstance::repetition(a.code.n, a.code.q));
    delta = a.delta.value_or(1);
  } else {
    const CodeParams p = a.code.build();
    if (a.variant != "L~") codes.push_back(CodeInstance::polynomial(p, Variant::L));
    if (a.variant != "L") codes.push_back(CodeInstance::polynomial(p, Variant::LTilde));
    delta = a.delta.value_or(p.delta());
  }
  bool consistent = true;
  for (const auto& code : codes) {
    auto rep = kl_check(code, enumerate_errors(code.n, code.q, delta, ErrorKind::General));
    auto probe = theorem_probe(code, delta);
    consistent = consistent && probe.consistent;
    if (a.json) {
      nlohmann::ordered_json j;
      j["code"] = code.name;
      j["delta"] = delta;
      j["errors"] = rep.errors.size();
      j["kl_pass"] = rep.pass();
      j["max_violation"] = rep.max_violation;
      j["spin_correctable"] = probe.spin_correctable;
      j["phase_correctable"] = probe.phase_correctable;
      j["secret"] = probe.secret;
      j["secrecy_deviation"] = probe.secrecy.worst_deviation;
      j["two_of_three_consistent"] = probe.consistent;
      std::cout << j.dump() << "\n";
      continue;
    }
    std::cout << code.name << " delta " << delta << ": " << rep.errors.size() << " errors, KL "
              << (rep.pass() ? "pass" : "FAIL") << " (max violation " << std::scientific << std::setprecision(3)
              << rep.max_violation << ")\n";
    if (rep.worst) {
      std::cout << "  worst: k=" << rep.worst->k << " k'=" << rep.worst->k_prime << " " << rep.worst->s.to_string()
                << " vs " << rep.worst->s_prime.to_string() << "\n";
    }
    std::cout << "  spin " << (probe.spin_correctable ? "yes" : "no") << ", phase "
              << (probe.phase_correctable ? "yes" : "no") << ", secret " << (probe.secret ? "yes" : "no")
              << ", two-of-three " << (probe.consistent ? "consistent" : "INCONSISTENT") << "\n";
  }
  // Verdicts are data; only a two-true/one-false instance is a failure.
  return consistent ? kOk : kFailed;
}

// ---- field ----

int field_selftest(std::uint32_t q) {
  const Modulus m(q);
  std::size_t checks = 0, bad = 0;
  auto expect = [&](bool ok) {
    ++checks;
    bad += !ok;
  };
  for (std::uint32_t a = 0; a < q; ++a) {
    FieldElement x(a, m);
    expect(x + (-x) == FieldElement(0, m));
    if (a) expect(x * x.inverse() == FieldElement(1, m));
    expect(x.pow(q) == x);
    for (std::uint32_t b = 0; b < q; ++b) {
      FieldElement y(b, m);
      expect(x * y == y * x);
      expect((x + y) * y == x * y + y * y);
      expect((x - y) + y == x);
    }
  }
  // Interpolation round trip on random polynomials of every degree below q.
  Rng rng(q);
  std::vector<FieldElement> xs;
  for (std::uint32_t i = 1; i < q; ++i) xs.emplace_back(i, m);
  for (std::size_t deg = 0; deg + 1 < q; ++deg) {
    std::vector<FieldElement> coeffs;
    for (std::size_t k = 0; k <= deg; ++k) coeffs.emplace_back(rng.uniform_index(q), m);
    std::span<const FieldElement> pts(xs.data(), deg + 1);
    std::vector<FieldElement> ys;
    for (const auto& x : pts) ys.push_back(evaluate_polynomial(coeffs, x));
    expect(interpolate_coefficients(pts, ys) == coeffs);
  }
  std::cout << "field F_" << q << ": " << checks - bad << "/" << checks << " identities hold\n";
  return bad ? kFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qmpc: polynomial-code MPC simulator"};
  app.require_subcommand(1);

  auto* protocol = app.add_subcommand("protocol", "run a scenario");
  protocol->require_subcommand(1);
  RunArgs run;
  auto* run_cmd = protocol->add_subcommand("run", "run one scenario file");
  run_cmd->add_option("scenario", run.scenario, "scenario file")->required();
  run_cmd->add_option("--out", run.out, "write the JSONL transcript here");
  run_cmd->add_option("--seed", run.seed, "override the scenario seed");
  run_cmd->add_option("--backend", run.backend, "override the backend")
      ->check(CLI::IsMember({"auto", "physical", "logical"}));

  GadgetArgs gadget;
  auto* gadget_cmd = app.add_subcommand("gadget", "fidelity sweep of one gadget");
  gadget_cmd->add_option("gadget", gadget.gadget, "F, toffoli, teleport or hashing")
      ->required()
      ->check(CLI::IsMember({"F", "toffoli", "teleport", "hashing"}));
  gadget.code.add_to(gadget_cmd);
  gadget_cmd->add_flag("--sweep-all", gadget.sweep_all, "every input (toffoli) or more random inputs");
  gadget_cmd->add_flag("--all-outcomes", gadget.all_outcomes, "branch over every measurement outcome");
  gadget_cmd->add_option("--force-outcomes", gadget.force, "comma-separated outcomes to force");
  gadget_cmd->add_option("--input", gadget.input, "toffoli data triple x,y,z")->capture_default_str();
  gadget_cmd->add_option("--seed", gadget.seed)->capture_default_str();
  gadget_cmd->add_option("--pairs", gadget.pairs, "hashing ensemble size")->capture_default_str();
  gadget_cmd->add_option("--rounds", gadget.rounds, "hashing rounds")->capture_default_str();

  auto* kl = app.add_subcommand("kl", "Knill-Laflamme and secrecy checks");
  kl->require_subcommand(1);
  KLArgs kl_args;
  auto* kl_cmd = kl->add_subcommand("check", "check a code against all errors of weight <= delta");
  kl_args.code.add_to(kl_cmd);
  kl_cmd->add_option("--variant", kl_args.variant)->check(CLI::IsMember({"L", "L~", "both"}))->capture_default_str();
  kl_cmd->add_flag("--repetition", kl_args.repetition, "use the n-fold repetition code over F_q instead");
  kl_cmd->add_option("--delta", kl_args.delta, "error weight (default: the code's delta)");
  kl_cmd->add_flag("--json", kl_args.json, "one JSON record per code");

  auto* field = app.add_subcommand("field", "finite-field checks");
  field->require_subcommand(1);
  std::uint32_t field_q = 11;
  auto* selftest = field->add_subcommand("selftest", "exhaustive identities over F_q");
  selftest->add_option("--q", field_q)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) return protocol_run(run);
    if (*gadget_cmd) return gadget_run(gadget);
    if (*kl_cmd) return kl_run(kl_args);
    if (*selftest) return field_selftest(field_q);
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
