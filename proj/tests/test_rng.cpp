#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "instadet/rng.hpp"

using namespace instadet;

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("folds") == 0xd53294afa96a621bull);
}

TEST_CASE("derive_stream matches an independent implementation") {
  CHECK(derive_stream(42, "folds") == 0xc0dfe7a5dfc3ba45ull);
  CHECK(derive_stream(42, "folds", 7) == 0x0e6c3ee0daa2aaf9ull);
}

TEST_CASE("derive_stream separates names and indices") {
  CHECK(derive_stream(1, "a") != derive_stream(1, "b"));
  CHECK(derive_stream(1, "a") != derive_stream(2, "a"));
  CHECK(derive_stream(1, "a", 0) != derive_stream(1, "a", 1));
  // A derived stream is not the parent seed itself.
  CHECK(derive_stream(1, "a") != 1ull);
}

TEST_CASE("same stream id reproduces the same sequence") {
  Rng a(derive_stream(7, "shuffle"));
  Rng b(derive_stream(7, "shuffle"));
  for (int i = 0; i < 100; ++i) CHECK(a.u64() == b.u64());
}

TEST_CASE("below stays in range and covers all values") {
  Rng r(123);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    auto v = r.below(7);
    REQUIRE(v < 7);
    counts[v]++;
  }
  // Loose uniformity bound: each bucket within 10% of the expectation.
  for (int c : counts) {
    CHECK(c > 9000);
    CHECK(c < 11000);
  }
}

TEST_CASE("below(1) is always zero") {
  Rng r(5);
  for (int i = 0; i < 10; ++i) CHECK(r.below(1) == 0);
}

TEST_CASE("real01 lies in [0,1)") {
  Rng r(99);
  for (int i = 0; i < 10000; ++i) {
    double v = r.real01();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("uniform respects bounds") {
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    double v = r.uniform(-2.5, 4.0);
    CHECK(v >= -2.5);
    CHECK(v < 4.0);
  }
}

TEST_CASE("gaussian has roughly standard moments") {
  Rng r(17);
  double sum = 0, sumsq = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double v = r.gaussian();
    sum += v;
    sumsq += v * v;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.02);
  CHECK(std::fabs(var - 1.0) < 0.03);
}

TEST_CASE("shuffle produces a permutation and is seed-stable") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  Rng a(derive_stream(11, "s"));
  Rng b(derive_stream(11, "s"));
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(50);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);
  // 50 elements almost surely move under a fair shuffle.
  CHECK(v != expect);
}

TEST_CASE("sample_distinct returns k distinct in-range values") {
  Rng r(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = r.sample_distinct(10, 30);
    CHECK(s.size() == 10);
    std::set<std::size_t> uniq(s.begin(), s.end());
    CHECK(uniq.size() == 10);
    for (auto x : s) CHECK(x < 30);
  }
  auto all = r.sample_distinct(5, 5);
  std::set<std::size_t> uniq(all.begin(), all.end());
  CHECK(uniq.size() == 5);
}
