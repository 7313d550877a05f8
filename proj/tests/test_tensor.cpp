#include <catch_amalgamated.hpp>

#include "periq/rng.hpp"
#include "periq/tensor.hpp"

using namespace periq;

TEST_CASE("tensor shape and indexing", "[tensor]") {
  Tensor t({2, 3});
  REQUIRE(t.size() == 6);
  REQUIRE(t.rank() == 2);
  t(1, 2) = 5.0f;
  REQUIRE(t[5] == 5.0f);

  Tensor u({2, 2, 2});
  u(1, 0, 1) = 3.0f;
  REQUIRE(u[5] == 3.0f);
}

TEST_CASE("tensor rejects mismatched data length", "[tensor]") {
  REQUIRE_THROWS_AS(Tensor({2, 2}, {1.0f, 2.0f}), shape_error);
}

TEST_CASE("tensor finiteness check", "[tensor]") {
  Tensor t({2}, {1.0f, 2.0f});
  REQUIRE(t.all_finite());
  t[1] = std::numeric_limits<float>::infinity();
  REQUIRE_FALSE(t.all_finite());
  t[1] = std::numeric_limits<float>::quiet_NaN();
  REQUIRE_FALSE(t.all_finite());
}

TEST_CASE("rng streams are reproducible", "[tensor]") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  Rng c(43);
  REQUIRE(Rng(42).next_u64() != c.next_u64());
}

TEST_CASE("rng uniform stays in range", "[tensor]") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-0.5, 0.5);
    REQUIRE(v >= -0.5);
    REQUIRE(v < 0.5);
  }
}

TEST_CASE("rng shuffle is a permutation", "[tensor]") {
  Rng rng(3);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  rng.shuffle(v.begin(), v.end());
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  REQUIRE(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
}
