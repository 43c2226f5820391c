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

#include "oracles.hpp"
#include "qmpc/reed_solomon.hpp"
#include "qmpc/rng.hpp"

namespace qmpc {
namespace {

std::vector<std::uint32_t> values(const ShareVector& s) {
  std::vector<std::uint32_t> out;
  for (const auto& x : s.symbols) out.push_back(x.value());
  return out;
}

ShareVector shares_of(std::initializer_list<std::int64_t> v, Modulus q) {
  return ShareVector{field_vector(v, q), {}};
}

TEST(ReedSolomon, EncodesLine) {
  auto params = RSParams::standard(4, 2, Modulus(5));
  auto s = rs_encode(params, field_vector({2, 3}, params.q));
  EXPECT_EQ(values(s), (std::vector<std::uint32_t>{0, 3, 1, 4}));
}

TEST(ReedSolomon, ConstantMessageGivesConstantShares) {
  auto params = RSParams::standard(7, 3, Modulus(11));
  auto s = rs_encode(params, field_vector({5, 0, 0}, params.q));
  EXPECT_EQ(values(s), std::vector<std::uint32_t>(7, 5));
}

TEST(ReedSolomon, RejectsWrongMessageLength) {
  auto params = RSParams::standard(4, 2, Modulus(5));
  EXPECT_THROW(rs_encode(params, field_vector({1}, params.q)), FieldError);
}

TEST(ReedSolomon, DecodesCleanWord) {
  auto params = RSParams::standard(4, 2, Modulus(5));
  auto r = rs_decode(params, shares_of({0, 3, 1, 4}, params.q), 0);
  auto* ok = std::get_if<RSDecoded>(&r);
  ASSERT_NE(ok, nullptr);
  EXPECT_EQ(ok->value_at_zero.value(), 2u);
  EXPECT_TRUE(ok->error_positions.empty());
}

TEST(ReedSolomon, CorrectsTwoErrors) {
  auto params = RSParams::standard(7, 3, Modulus(11));
  auto s = rs_encode(params, field_vector({4, 1, 2}, params.q));
  s.symbols[2] += FieldElement(3, params.q);
  s.symbols[5] += FieldElement(9, params.q);
  auto r = rs_decode(params, s, 2);
  auto* ok = std::get_if<RSDecoded>(&r);
  ASSERT_NE(ok, nullptr);
  EXPECT_EQ(ok->message, field_vector({4, 1, 2}, params.q));
  EXPECT_EQ(ok->error_positions, (std::vector<std::size_t>{2, 5}));
}

TEST(ReedSolomon, ZeroWord) {
  for (auto [n, k, p] : {std::tuple{4, 2, 5}, {7, 3, 11}, {7, 5, 11}}) {
    auto params = RSParams::standard(n, k, Modulus(p));
    ShareVector zero{std::vector<FieldElement>(n, FieldElement(0, params.q)), {}};
    auto r = rs_decode(params, zero, 0);
    ASSERT_TRUE(std::holds_alternative<RSDecoded>(r));
    EXPECT_TRUE(std::get<RSDecoded>(r).value_at_zero.is_zero());
  }
}

TEST(ReedSolomon, RoundTripOverRandomParameters) {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    std::uint32_t p = std::vector<std::uint32_t>{5, 7, 11, 13}[rng.uniform_index(4)];
    std::size_t n = 1 + rng.uniform_index(p - 1);
    std::size_t k = 1 + rng.uniform_index(n);
    auto params = RSParams::standard(n, k, Modulus(p));
    std::vector<FieldElement> msg;
    for (std::size_t j = 0; j < k; ++j) msg.emplace_back(rng.uniform_index(p), params.q);
    auto r = rs_decode(params, rs_encode(params, msg), params.error_budget());
    ASSERT_TRUE(std::holds_alternative<RSDecoded>(r));
    EXPECT_EQ(std::get<RSDecoded>(r).message, msg);
    EXPECT_TRUE(std::get<RSDecoded>(r).error_positions.empty());
  }
}

TEST(ReedSolomon, BudgetViolationIsACallerError) {
  auto params = RSParams::standard(7, 5, Modulus(11));
  ShareVector s{std::vector<FieldElement>(7, FieldElement(0, params.q)), {3}};
  EXPECT_THROW(rs_decode(params, s, 1), FieldError);
  EXPECT_NO_THROW(rs_decode(params, s, 0));
}

TEST(ReedSolomon, ErasuresAreExcludedFromInterpolation) {
  auto params = RSParams::standard(7, 3, Modulus(11));
  auto s = rs_encode(params, field_vector({6, 2, 9}, params.q));
  s.symbols[0] = FieldElement(0, params.q);
  s.erasures = {0};
  s.symbols[4] += FieldElement(1, params.q);
  auto r = rs_decode(params, s, 1);
  ASSERT_TRUE(std::holds_alternative<RSDecoded>(r));
  EXPECT_EQ(std::get<RSDecoded>(r).value_at_zero.value(), 6u);
  EXPECT_EQ(std::get<RSDecoded>(r).error_positions, (std::vector<std::size_t>{4}));
}

TEST(ReedSolomon, TooManyErasuresFail) {
  auto params = RSParams::standard(4, 2, Modulus(5));
  ShareVector s{field_vector({0, 3, 1, 4}, params.q), {0, 1, 2}};
  EXPECT_TRUE(std::holds_alternative<DecodeFailure>(rs_decode(params, s, 0)));
}

// Every weight <= 2 corruption of sampled codewords at (n, k, q) = (7, 3, 11),
// plus every weight-3 pattern on one codeword, against the brute-force decoder.
TEST(ReedSolomon, AgreesWithBruteForceOnAllSmallCorruptions) {
  auto params = RSParams::standard(7, 3, Modulus(11));
  std::vector<std::int64_t> pts = {1, 2, 3, 4, 5, 6, 7};
  Rng rng(1);
  auto check = [&](const ShareVector& word) {
    std::vector<std::int64_t> raw;
    for (const auto& x : word.symbols) raw.push_back(x.value());
    auto expect = oracle::brute_decode(7, 3, 11, pts, raw, {}, 2);
    auto got = rs_decode(params, word, 2);
    if (!expect) {
      EXPECT_TRUE(std::holds_alternative<DecodeFailure>(got));
      return;
    }
    ASSERT_TRUE(std::holds_alternative<RSDecoded>(got));
    const auto& d = std::get<RSDecoded>(got);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(d.message[j].value(), static_cast<std::uint32_t>(expect->message[j]));
    }
    EXPECT_EQ(d.error_positions.size(), expect->distance);
  };
  for (int c = 0; c < 3; ++c) {
    auto msg = field_vector(
        {static_cast<std::int64_t>(rng.uniform_index(11)),
         static_cast<std::int64_t>(rng.uniform_index(11)),
         static_cast<std::int64_t>(rng.uniform_index(11))},
        params.q);
    auto base = rs_encode(params, msg);
    check(base);
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::uint32_t a = 1; a < 11; ++a) {
        auto w = base;
        w.symbols[i] += FieldElement(a, params.q);
        check(w);
        for (std::size_t j = i + 1; j < 7; ++j) {
          for (std::uint32_t b = 1; b < 11; ++b) {
            auto w2 = w;
            w2.symbols[j] += FieldElement(b, params.q);
            check(w2);
          }
        }
      }
    }
  }
  auto base = rs_encode(params, field_vector({3, 0, 7}, params.q));
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = i + 1; j < 7; ++j) {
      for (std::size_t l = j + 1; l < 7; ++l) {
        auto w = base;
        w.symbols[i] += FieldElement(1 + rng.uniform_index(10), params.q);
        w.symbols[j] += FieldElement(1 + rng.uniform_index(10), params.q);
        w.symbols[l] += FieldElement(1 + rng.uniform_index(10), params.q);
        check(w);
      }
    }
  }
}

TEST(ReedSolomon, DecoderOutputIsANearbyCodeword) {
  Rng rng(17);
  auto params = RSParams::standard(7, 3, Modulus(11));
  for (int trial = 0; trial < 2000; ++trial) {
    ShareVector w;
    for (int i = 0; i < 7; ++i) w.symbols.emplace_back(rng.uniform_index(11), params.q);
    auto r = rs_decode(params, w, 2);
    if (auto* d = std::get_if<RSDecoded>(&r)) {
      auto re = rs_encode(params, d->message);
      std::size_t diff = 0;
      for (int i = 0; i < 7; ++i) diff += !(re.symbols[i] == w.symbols[i]);
      EXPECT_LE(diff, 2u);
      EXPECT_EQ(diff, d->error_positions.size());
    }
  }
}

}  // namespace
}  // namespace qmpc
