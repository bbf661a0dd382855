// Copyright 2026 The ETS Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "ets/digest.hpp"
#include "ets/error.hpp"
#include "ets/kv_file.hpp"
#include "ets/rng.hpp"
#include "test_util.hpp"

namespace ets {
namespace {

TEST(RandomStream, SameSeedSameSequence) {
  RandomStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.NextU64(), b.NextU64());
}

TEST(RandomStream, DerivedStreamsDifferByPath) {
  std::set<uint64_t> firsts;
  for (uint64_t img = 0; img < 50; ++img) {
    for (uint64_t op = 0; op < 6; ++op) {
      firsts.insert(RandomStream::Derive(7, {img, op}).NextU64());
    }
  }
  EXPECT_EQ(firsts.size(), 300u);
  EXPECT_NE(DeriveSeed(7, {1, 2}), DeriveSeed(7, {2, 1}));
  EXPECT_NE(DeriveSeed(7, {1}), DeriveSeed(8, {1}));
}

TEST(RandomStream, UniformStaysInRange) {
  RandomStream rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(RandomStream, UniformIntCoversRangeEvenly) {
  RandomStream rng(3);
  std::vector<int> hist(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const int64_t v = rng.UniformInt(-3, 3);
    ASSERT_GE(v, -3);
    ASSERT_LE(v, 3);
    ++hist[v + 3];
  }
  for (int c : hist) EXPECT_NEAR(c, n / 7.0, 5 * std::sqrt(n / 7.0));
  EXPECT_EQ(rng.UniformInt(5, 5), 5);
}

TEST(RandomStream, ShuffleIsAPermutation) {
  RandomStream rng(9);
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.Shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Digest, KnownSha256Vectors) {
  EXPECT_EQ(Sha256Hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(Sha256Hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(KvFile, ParsesSectionsCommentsAndWhitespace) {
  const KvDocument doc = ParseKv(
      "# leading comment\n"
      "  a = 1 \n"
      "b=two words\n"
      "\n"
      "[flip]\n"
      "p = 0.5\n"
      "horizontal = true\n");
  ASSERT_EQ(doc.sections.size(), 2u);
  EXPECT_EQ(doc.Root().GetInt("a", 0), 1);
  EXPECT_EQ(doc.Root().GetOr("b", ""), "two words");
  EXPECT_EQ(doc.sections[1].name, "flip");
  EXPECT_DOUBLE_EQ(doc.sections[1].GetDouble("p", 0), 0.5);
  EXPECT_TRUE(doc.sections[1].GetBool("horizontal", false));
  EXPECT_EQ(doc.sections[1].GetOr("missing", "fallback"), "fallback");
}

TEST(KvFile, RejectsMalformedLinesWithOffset) {
  try {
    ParseKv("a = 1\nnot a pair\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.byte_offset(), 6u);
  }
  EXPECT_THROW(ParseKv("[open\n"), ParseError);
  EXPECT_THROW(ParseKv("= 3\n"), ParseError);
  EXPECT_THROW(ParseKv("x = abc").Root().GetDouble("x", 0), ParseError);
  EXPECT_THROW(ParseKv("x = 1.5").Root().GetInt("x", 0), ParseError);
}

TEST(KvFile, SplitListTrimsAndDropsEmpties) {
  EXPECT_EQ(SplitList(" a, b ,,c "), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(SplitList("  ").empty());
}

TEST(KvFile, TextFileRoundTrip) {
  testing::TempDir dir;
  const auto p = dir / "nested/dir/file.txt";
  WriteTextFile(p, std::string("bytes\0with nul", 14));
  EXPECT_EQ(ReadTextFile(p).size(), 14u);
  EXPECT_THROW(ReadTextFile(dir / "absent.txt"), Error);
}

}  // namespace
}  // namespace ets
