#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "projscan/errors.hpp"
#include "projscan/rng.hpp"

using namespace projscan;

TEST_CASE("same seed gives the same stream, different seeds diverge") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 64; ++i) {
    const auto va = a.next_u64();
    all_equal = all_equal && (va == b.next_u64());
    any_diff = any_diff || (va != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform stays in bounds and fills the range") {
  Rng rng(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);

  for (int i = 0; i < 1000; ++i) {
    const float v = rng.uniform_f(-2.0f, 3.0f);
    REQUIRE(v >= -2.0f);
    REQUIRE(v < 3.0f);
  }
}

TEST_CASE("normal is roughly standard") {
  Rng rng(11);
  double sum = 0.0, sum2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.08);
}

TEST_CASE("below is within bound and covers all residues") {
  Rng rng(3);
  std::set<uint32_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const uint32_t v = rng.below(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  CHECK_THROWS_AS(rng.below(0), ParameterError);
}

TEST_CASE("permutation is a permutation and seed-stable") {
  Rng a(5);
  auto p = a.permutation(100);
  std::set<uint32_t> unique(p.begin(), p.end());
  CHECK(unique.size() == 100);
  CHECK(*unique.begin() == 0);
  CHECK(*unique.rbegin() == 99);

  Rng b(5);
  CHECK(b.permutation(100) == p);
}

TEST_CASE("bernoulli respects the edge probabilities") {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    CHECK_FALSE(rng.bernoulli(0.0));
    CHECK(rng.bernoulli(1.0));
  }
}

TEST_CASE("named streams are independent and reproducible") {
  Rng a = make_stream(1234, rng_stream::init);
  Rng a2 = make_stream(1234, rng_stream::init);
  Rng b = make_stream(1234, rng_stream::dropout);
  Rng c = make_stream(1234, rng_stream::init, 1);

  bool a_matches = true, b_differs = false, c_differs = false;
  for (int i = 0; i < 32; ++i) {
    const auto v = a.next_u64();
    a_matches = a_matches && (v == a2.next_u64());
    b_differs = b_differs || (v != b.next_u64());
    c_differs = c_differs || (v != c.next_u64());
  }
  CHECK(a_matches);
  CHECK(b_differs);
  CHECK(c_differs);
}

TEST_CASE("mix64 and fnv1a64 are stable hashes") {
  CHECK(mix64(0) != 0);
  CHECK(mix64(1) != mix64(2));
  CHECK(fnv1a64("subject-001") != fnv1a64("subject-002"));
  CHECK(fnv1a64("") == 14695981039346656037ull);
}
