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

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "qmpc/gadgets.hpp"

namespace qmpc {
namespace {

using testing::encode_superposition;
using testing::LogicalEntries;

constexpr double kFid = 1 - 1e-9;

std::int64_t moment(const std::vector<FieldElement>& c, const CodeParams& code, std::size_t j) {
  std::int64_t acc = 0;
  const std::int64_t q = code.q();
  for (std::size_t i = 0; i < code.n(); ++i) {
    acc += static_cast<std::int64_t>(c[i].value()) *
           static_cast<std::int64_t>(oracle::ipow(code.points()[i].value(), j) % q);
  }
  return oracle::mod(acc, q);
}

TEST(Coefficients, SmallCode) {
  CodeParams code = CodeParams::small();
  auto c = derive_coefficients(code);
  for (auto x : c.m) EXPECT_EQ(x.value(), 4u);
  EXPECT_EQ(moment(c.p, code, 0), 4);
  EXPECT_EQ(moment(c.p, code, 1), 0);
  EXPECT_EQ(moment(c.p, code, 2), 0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(c.r[i], c.m[i]);
}

TEST(Coefficients, MomentConditionsOnPresets) {
  for (const auto& code : {CodeParams::small(), CodeParams::secure(), CodeParams(7, 11, 1)}) {
    auto c = derive_coefficients(code);
    const std::int64_t q = code.q();
    const std::size_t d1 = code.d() - 1;
    EXPECT_EQ(moment(c.m, code, 0), 1);
    for (std::size_t j = 1; j < code.n(); ++j) EXPECT_EQ(moment(c.m, code, j), 0);
    EXPECT_EQ(moment(c.p, code, 0), q - 1);
    for (std::size_t j = 1; j <= 2 * d1; ++j) EXPECT_EQ(moment(c.p, code, j), 0);
    EXPECT_EQ(moment(c.r, code, 0), 1);
    for (std::size_t j = 1; j <= 3 * d1; ++j) EXPECT_EQ(moment(c.r, code, j), 0);
  }
}

TEST(Coefficients, OneDimensionalPhaseSystem) {
  auto c = derive_coefficients(CodeParams(4, 5, 1));
  EXPECT_EQ(moment(c.p, CodeParams(4, 5, 1), 0), 4);
}

TEST(Transversal, CnotExample) {
  PhysicalMachine m(CodeParams::small());
  auto a = m.prepare(Variant::L, 2), b = m.prepare(Variant::L, 3);
  m.add_scaled(a, b, 1);
  auto s = m.logical_state({a, b});
  Digit want[] = {2, 0};
  EXPECT_NEAR(std::abs(s.amplitude(want)), 1.0, 1e-12);
}

TEST(Transversal, AddConstZeroIsIdentity) {
  PhysicalMachine m(CodeParams::small());
  auto a = m.prepare(Variant::L, 3);
  SparseState before = m.block_of(a).state;
  m.add_const(a, 0);
  EXPECT_GE(fidelity(before, m.block_of(a).state), kFid);
}

TEST(Transversal, ArithmeticOnBothVariants) {
  CodeParams code = CodeParams::small();
  for (auto v : {Variant::L, Variant::LTilde}) {
    for (std::uint32_t x = 0; x < 5; ++x) {
      PhysicalMachine m(code);
      auto r = m.prepare(v, x);
      m.add_const(r, 3);
      m.scale(r, 2);
      auto s = m.logical_state({r});
      Digit want[] = {static_cast<Digit>((x + 3) * 2 % 5)};
      EXPECT_NEAR(std::abs(s.amplitude(want)), 1.0, 1e-12);
      m.phase(r, 3);
      Complex amp = m.logical_state({r}).amplitude(want);
      EXPECT_NEAR(std::abs(amp - oracle::omega(3 * want[0], 5)), 0.0, 1e-9);
    }
  }
}

TEST(Transversal, CcphaseAllTriples) {
  CodeParams code = CodeParams::small();
  const std::vector<Variant> lll(3, Variant::L);
  for (Digit a = 0; a < 5; ++a) {
    for (Digit b = 0; b < 5; ++b) {
      for (Digit c = 0; c < 5; ++c) {
        PhysicalMachine m(code);
        auto x = m.prepare(Variant::L, a), y = m.prepare(Variant::L, b), z = m.prepare(Variant::L, c);
        m.ccphase_r(x, y, z);
        SparseState input = encode_superposition(code, lll, LogicalEntries{{{a, b, c}, 1.0}});
        Complex overlap = inner_product(input, m.block_of(x).state);
        EXPECT_NEAR(std::abs(overlap - oracle::omega(a * b * c, 5)), 0.0, 1e-9)
            << int(a) << int(b) << int(c);
      }
    }
  }
}

TEST(Transversal, PairPhasesAllPairs) {
  CodeParams code = CodeParams::small();
  const std::vector<Variant> ll(2, Variant::L);
  for (Digit a = 0; a < 5; ++a) {
    for (Digit b = 0; b < 5; ++b) {
      SparseState input = encode_superposition(code, ll, LogicalEntries{{{a, b}, 1.0}});
      PhysicalMachine m(code);
      auto x = m.prepare(Variant::L, a), y = m.prepare(Variant::L, b);
      m.cphase_pq(x, y);
      Complex overlap = inner_product(input, m.block_of(x).state);
      EXPECT_NEAR(std::abs(overlap - oracle::omega(-a * b, 5)), 0.0, 1e-9);
      m.cphase(x, y, 2);
      overlap = inner_product(input, m.block_of(x).state);
      EXPECT_NEAR(std::abs(overlap - oracle::omega(a * b, 5)), 0.0, 1e-9);
    }
  }
}

TEST(Transversal, MixedVariantsRejected) {
  PhysicalMachine m(CodeParams::small());
  auto a = m.prepare(Variant::L, 1), b = m.prepare(Variant::LTilde, 1);
  EXPECT_THROW(m.add_scaled(a, b, 1), CodeError);
  EXPECT_THROW(m.cphase_pq(a, b), CodeError);
}

LogicalEntries uniform_entries(std::uint32_t q) {
  LogicalEntries e;
  for (std::uint32_t k = 0; k < q; ++k) e.push_back({{static_cast<Digit>(k)}, 1 / std::sqrt(double(q))});
  return e;
}

TEST(FGadget, ZeroOfEitherVariantGoesToUniform) {
  CodeParams code = CodeParams::small();
  for (auto v : {Variant::L, Variant::LTilde}) {
    PhysicalMachine m(code);
    auto r = m.prepare(v, 0);
    F_gadget(m, r);
    Variant w = v == Variant::L ? Variant::LTilde : Variant::L;
    EXPECT_EQ(m.variant(r), w);
    SparseState target = encode_superposition(code, {w}, uniform_entries(5));
    EXPECT_GE(fidelity(target, m.block_of(r).state), kFid);
  }
}

TEST(FGadget, ActionTableAgainstDenseOracle) {
  CodeParams code = CodeParams::small();
  auto coeff = derive_coefficients(code);
  for (auto v : {Variant::L, Variant::LTilde}) {
    for (std::uint32_t a = 0; a < 5; ++a) {
      PhysicalMachine m(code);
      auto r = m.prepare(v, a);
      oracle::DenseState dense = oracle::to_dense(m.block_of(r).state);
      for (std::size_t i = 0; i < 4; ++i) {
        Instruction ins = LocalOp{i, Fourier{static_cast<std::int64_t>(coeff.m[i].value())}};
        dense = oracle::apply_matrix(oracle::instruction_matrix(5, 4, ins), dense);
      }
      F_gadget(m, r);
      EXPECT_GE(oracle::dense_fidelity(dense, oracle::to_dense(m.block_of(r).state)), kFid);
      SparseState logical = m.logical_state({r});
      for (Digit b = 0; b < 5; ++b) {
        Digit d[] = {b};
        Complex want = oracle::omega(a * b, 5) / std::sqrt(5.0);
        EXPECT_NEAR(std::abs(logical.amplitude(d) - want), 0.0, 1e-9);
      }
    }
  }
}

LogicalEntries product_entries(std::uint32_t q, std::uint32_t shift) {
  LogicalEntries e;
  for (Digit a = 0; a < q; ++a) {
    for (Digit b = 0; b < q; ++b) {
      e.push_back({{a, b, static_cast<Digit>((a * b + shift) % q)}, 1.0 / q});
    }
  }
  return e;
}

TEST(Synthesis, EveryForcedLambda) {
  CodeParams code = CodeParams::small();
  SparseState target = encode_superposition(code, {3, Variant::L}, product_entries(5, 0));
  PhysicalMachine base(code);
  std::array<RegisterId, 4> presets;
  for (auto& r : presets) r = base.prepare(Variant::LTilde, 0);
  for (std::uint32_t lambda = 0; lambda < 5; ++lambda) {
    PhysicalMachine m = base;
    Rng rng(lambda);
    OutcomeSchedule schedule{lambda};
    GadgetEnv env = make_env(m, rng, &schedule);
    Ancilla anc = synthesize_uncorrected(m, env, "synthesis", presets);
    EXPECT_EQ(anc.lambda.value(), lambda);
    EXPECT_NEAR(env.class_probability, 0.2, 1e-9);
    SparseState raw = encode_superposition(code, {3, Variant::L}, product_entries(5, lambda));
    EXPECT_GE(fidelity(raw, m.physical_state({anc.a, anc.b, anc.c})), kFid);
    m.add_const(anc.c, -static_cast<std::int64_t>(lambda));
    EXPECT_GE(fidelity(target, m.physical_state({anc.a, anc.b, anc.c})), kFid);
  }
}

TEST(Synthesis, HonestAnnouncementsAreCodewords) {
  CodeParams code = CodeParams::small();
  PhysicalMachine m(code);
  Rng rng(7);
  GadgetEnv env = make_env(m, rng);
  std::vector<ShareVector> seen;
  auto inner = env.announcer;
  env.announcer = [&](const AnnounceRequest& req, std::string& why) {
    seen.push_back(req.outcome.shares);
    return inner(req, why);
  };
  Ancilla anc = synthesize(m, env);
  ASSERT_EQ(seen.size(), 1u);
  std::vector<std::int64_t> ys;
  for (const auto& y : code.points()) ys.push_back(y.value());
  std::vector<std::int64_t> word;
  for (const auto& s : seen[0].symbols) word.push_back(s.value());
  auto brute = oracle::brute_decode(4, code.rs_k(Variant::LTilde), 5, ys, word, {}, 0);
  ASSERT_TRUE(brute.has_value());
  EXPECT_EQ(brute->distance, 0u);
  EXPECT_EQ(static_cast<std::uint32_t>(brute->message[0]), anc.lambda.value());
}

// Sweeps every lambda triple for one data triple, branching the machine
// between measurements.
int toffoli_branches(const PhysicalMachine& synthesized, const Ancilla& anc, Digit x, Digit y, Digit z) {
  const CodeParams& code = synthesized.code();
  PhysicalMachine m0 = synthesized;
  auto rx = m0.prepare(Variant::L, x), ry = m0.prepare(Variant::L, y), rz = m0.prepare(Variant::L, z);
  SparseState target = encode_superposition(
      code, {3, Variant::L}, LogicalEntries{{{x, y, static_cast<Digit>((z + x * y) % 5)}, 1.0}});
  int good = 0;
  Rng rng(x * 25 + y * 5 + z);
  toffoli_stage_x(m0, rx, anc);
  for (std::uint32_t l1 = 0; l1 < 5; ++l1) {
    PhysicalMachine m1 = m0;
    OutcomeSchedule s1{l1};
    GadgetEnv e1 = make_env(m1, rng, &s1);
    FieldElement v1 = measure_or_abort(m1, rx, e1, "l1");
    toffoli_stage_y(m1, ry, anc);
    for (std::uint32_t l2 = 0; l2 < 5; ++l2) {
      PhysicalMachine m2 = m1;
      OutcomeSchedule s2{l2};
      GadgetEnv e2 = make_env(m2, rng, &s2);
      FieldElement v2 = measure_or_abort(m2, ry, e2, "l2");
      toffoli_stage_z(m2, rz, anc);
      for (std::uint32_t l3 = 0; l3 < 5; ++l3) {
        PhysicalMachine m3 = m2;
        OutcomeSchedule s3{l3};
        GadgetEnv e3 = make_env(m3, rng, &s3);
        FieldElement v3 = measure_or_abort(m3, rz, e3, "l3");
        toffoli_finish(m3, anc, v1, v2, v3);
        SparseState out = m3.physical_state({anc.a, anc.b, anc.c});
        if (v1.value() == l1 && v2.value() == l2 && v3.value() == l3 && fidelity(target, out) >= kFid) {
          ++good;
        }
      }
    }
  }
  return good;
}

class ToffoliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    machine_ = new PhysicalMachine(CodeParams::small());
    Rng rng(11);
    GadgetEnv env = make_env(*machine_, rng);
    anc_ = new Ancilla(synthesize(*machine_, env));
  }
  static void TearDownTestSuite() {
    delete machine_;
    delete anc_;
  }
  static PhysicalMachine* machine_;
  static Ancilla* anc_;
};
PhysicalMachine* ToffoliTest::machine_ = nullptr;
Ancilla* ToffoliTest::anc_ = nullptr;

TEST_F(ToffoliTest, AllLambdaBranchesOnSampleTriples) {
  for (auto [x, y, z] : {std::array<Digit, 3>{2, 3, 4}, {0, 4, 1}, {4, 4, 4}, {1, 0, 3}}) {
    EXPECT_EQ(toffoli_branches(*machine_, *anc_, x, y, z), 125);
  }
}

TEST_F(ToffoliTest, AllTriplesWithSampledOutcomes) {
  const CodeParams& code = machine_->code();
  Rng rng(5);
  for (Digit x = 0; x < 5; ++x) {
    for (Digit y = 0; y < 5; ++y) {
      for (Digit z = 0; z < 5; ++z) {
        PhysicalMachine m = *machine_;
        auto rx = m.prepare(Variant::L, x), ry = m.prepare(Variant::L, y), rz = m.prepare(Variant::L, z);
        GadgetEnv env = make_env(m, rng);
        auto res = logical_toffoli(m, rx, ry, rz, *anc_, env);
        SparseState got = m.logical_state({res.x, res.y, res.z});
        Digit want[] = {x, y, static_cast<Digit>((z + x * y) % 5)};
        EXPECT_NEAR(std::norm(got.amplitude(want)), 1.0, 1e-9);
        (void)code;
      }
    }
  }
}

TEST_F(ToffoliTest, ZeroMultiplicandLeavesTargetAlone) {
  Rng rng(3);
  for (Digit y = 0; y < 5; ++y) {
    PhysicalMachine m = *machine_;
    auto rx = m.prepare(Variant::L, 0), ry = m.prepare(Variant::L, y), rz = m.prepare(Variant::L, 2);
    GadgetEnv env = make_env(m, rng);
    auto res = logical_toffoli(m, rx, ry, rz, *anc_, env);
    Digit want[] = {0, y, 2};
    EXPECT_NEAR(std::norm(m.logical_state({res.x, res.y, res.z}).amplitude(want)), 1.0, 1e-9);
  }
}

TEST_F(ToffoliTest, SuperposedInputIsLinear) {
  const CodeParams& code = machine_->code();
  LogicalEntries want;
  for (Digit x = 0; x < 5; ++x) want.push_back({{x, 1, x}, 1 / std::sqrt(5.0)});
  SparseState target = encode_superposition(code, {3, Variant::L}, want);
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    PhysicalMachine m = *machine_;
    std::vector<Complex> uniform(5, 1 / std::sqrt(5.0));
    auto rx = m.prepare_state(Variant::L, uniform);
    auto ry = m.prepare(Variant::L, 1), rz = m.prepare(Variant::L, 0);
    GadgetEnv env = make_env(m, rng);
    auto res = logical_toffoli(m, rx, ry, rz, *anc_, env);
    EXPECT_GE(fidelity(target, m.physical_state({res.x, res.y, res.z})), kFid);
  }
}

TEST(Parity, HonestCopiesPass) {
  CodeParams code = CodeParams::small();
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    PhysicalMachine m(code);
    std::vector<RegisterId> copies;
    for (int k = 0; k < 3; ++k) copies.push_back(m.prepare(Variant::L, 3));
    auto c = random_parity_coefficients(3, code.modulus(), rng);
    GadgetEnv env = make_env(m, rng);
    auto res = random_parity_check(m, copies, c, m.prepare(Variant::L, 0), env);
    EXPECT_TRUE(res.pass);
    // copies are untouched
    for (auto r : copies) {
      Digit want[] = {3};
      EXPECT_NEAR(std::norm(m.logical_state({r}).amplitude(want)), 1.0, 1e-9);
    }
  }
}

TEST(Parity, InconsistentPairExample) {
  CodeParams code = CodeParams::small();
  PhysicalMachine m(code);
  Rng rng(2);
  std::vector<RegisterId> copies{m.prepare(Variant::L, 1), m.prepare(Variant::L, 2)};
  std::vector<FieldElement> c{FieldElement(1, code.modulus()), FieldElement::from_int(-1, code.modulus())};
  GadgetEnv env = make_env(m, rng);
  auto res = random_parity_check(m, copies, c, m.prepare(Variant::L, 0), env);
  EXPECT_FALSE(res.pass);
  ASSERT_TRUE(res.value.has_value());
  EXPECT_EQ(res.value->value(), 4u);
}

TEST(Parity, ExhaustiveDetectionRate) {
  // s = 2: the valid coefficient vectors are (t, -t) for t in F_5.
  CodeParams code = CodeParams::small();
  Rng rng(4);
  for (std::uint32_t x1 = 0; x1 < 5; ++x1) {
    for (std::uint32_t x2 = 0; x2 < 5; ++x2) {
      if (x1 == x2) continue;
      int detected = 0, total = 0;
      for (std::int64_t t = 0; t < 5; ++t) {
        PhysicalMachine m(code);
        std::vector<RegisterId> copies{m.prepare(Variant::L, x1), m.prepare(Variant::L, x2)};
        std::vector<FieldElement> c{FieldElement::from_int(t, code.modulus()),
                                    FieldElement::from_int(-t, code.modulus())};
        GadgetEnv env = make_env(m, rng);
        detected += !random_parity_check(m, copies, c, m.prepare(Variant::L, 0), env).pass;
        ++total;
      }
      EXPECT_EQ(detected * 5, total * 4);
    }
  }
}

TEST(Parity, RejectsUnbalancedCoefficients) {
  CodeParams code = CodeParams::small();
  PhysicalMachine m(code);
  Rng rng(0);
  std::vector<RegisterId> copies{m.prepare(Variant::L, 1), m.prepare(Variant::L, 1)};
  std::vector<FieldElement> c{FieldElement(1, code.modulus()), FieldElement(1, code.modulus())};
  GadgetEnv env = make_env(m, rng);
  EXPECT_THROW(random_parity_check(m, copies, c, m.prepare(Variant::L, 0), env), CodeError);
}

TEST(Parity, CoefficientsSumToZero) {
  Rng rng(8);
  Modulus q(11);
  for (int i = 0; i < 100; ++i) {
    auto c = random_parity_coefficients(4, q, rng);
    FieldElement sum(0, q);
    for (const auto& x : c) sum += x;
    EXPECT_TRUE(sum.is_zero());
  }
}

}  // namespace
}  // namespace qmpc
