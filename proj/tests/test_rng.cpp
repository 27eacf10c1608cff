#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "dsa/parallel.hpp"
#include "dsa/rng.hpp"

using namespace dsa;

TEST_CASE("rng sequences are reproducible") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform01() == b.uniform01());
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  for (int i = 0; i < 100; ++i) CHECK(a.uniform_int(0, 1000) == b.uniform_int(0, 1000));
}

TEST_CASE("uniform01 lies in [0,1)") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform_int respects bounds and hits both ends") {
  Rng rng(9);
  bool lo_seen = false, hi_seen = false;
  for (int i = 0; i < 5000; ++i) {
    const auto v = rng.uniform_int(-3, 4);
    CHECK(v >= -3);
    CHECK(v <= 4);
    lo_seen |= v == -3;
    hi_seen |= v == 4;
  }
  CHECK(lo_seen);
  CHECK(hi_seen);
  CHECK(rng.uniform_int(5, 5) == 5);
}

TEST_CASE("normal has roughly standard moments") {
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("substreams differ from each other and are order-free") {
  auto s0 = Rng::substream(123, 0);
  auto s1 = Rng::substream(123, 1);
  CHECK(s0.next_u64() != s1.next_u64());
  CHECK(Rng::substream(123, 7).next_u64() == Rng::substream(123, 7).next_u64());
  // Drawing from one substream does not perturb another.
  Rng a(Rng::substream(5, 2));
  const double first = a.uniform01();
  Rng other(Rng::substream(5, 3));
  (void)other.uniform01();
  Rng again(Rng::substream(5, 2));
  CHECK(again.uniform01() == first);
}

TEST_CASE("shuffle produces a permutation and is seed-deterministic") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;
  Rng a(77), b(77);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("parallel_chunks visits every index once, any thread count") {
  for (int threads : {1, 2, 5}) {
    std::vector<std::atomic<int>> hits(101);
    for (auto& h : hits) h = 0;
    parallel_chunks(101, 7, threads, [&](std::int64_t lo, std::int64_t hi, std::int64_t) {
      for (std::int64_t i = lo; i < hi; ++i) hits[static_cast<std::size_t>(i)]++;
    });
    for (auto& h : hits) CHECK(h == 1);
  }
}

TEST_CASE("parallel_for result is independent of thread count") {
  auto run = [](int threads) {
    std::vector<double> out(1000);
    parallel_for(1000, threads, [&](std::int64_t i) {
      Rng rng(Rng::substream(3, static_cast<std::uint64_t>(i)));
      out[static_cast<std::size_t>(i)] = rng.normal();
    });
    return out;
  };
  const auto base = run(1);
  CHECK(run(2) == base);
  CHECK(run(8) == base);
}

TEST_CASE("parallel_chunks propagates exceptions") {
  CHECK_THROWS_AS(
      parallel_chunks(10, 2, 3,
                      [&](std::int64_t lo, std::int64_t, std::int64_t) {
                        if (lo >= 4) throw std::runtime_error("boom");
                      }),
      std::runtime_error);
}
