#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "memotr/memory.hpp"

using namespace memotr;

TEST_CASE("init_memory copies the output") {
  const std::vector<double> o{1, 2, 3};
  const LongTermMemory m = init_memory(o);
  CHECK(m.initialized);
  CHECK(m.value == o);
  CHECK(init_memory(std::vector<double>(4, 0.0)).value == std::vector<double>(4, 0.0));
  CHECK(ema_update(m, std::vector<double>{9, 9, 9}, MemoryConfig{0.0}).value == o);
  CHECK_THROWS_AS(init_memory(std::vector<double>{1.0, NAN}), NumericError);
}

TEST_CASE("ema_update examples") {
  const LongTermMemory zero = init_memory(std::vector<double>{0.0});
  CHECK(ema_update(zero, std::vector<double>{1.0}, MemoryConfig{0.01}).value[0] == doctest::Approx(0.01).epsilon(1e-15));
  const std::vector<double> o{0.3, -7.0, 2.5};
  CHECK(ema_update(init_memory(std::vector<double>{5, 5, 5}), o, MemoryConfig{1.0}).value == o);
  CHECK_THROWS_AS(ema_update(LongTermMemory{}, o, MemoryConfig{}), StateError);
  CHECK_THROWS_AS(MemoryConfig{1.5}.validate(), ValidationError);
  CHECK_THROWS_AS(MemoryConfig{-0.1}.validate(), ValidationError);
}

TEST_CASE("iterative update matches the closed form") {
  memotr::Rng rng(20);
  for (double lambda : {0.005, 0.01, 0.02, 0.04, 0.5}) {
    const memotr::Tensor2 m0 = testing::uniform(rng, 1, 16), o = testing::uniform(rng, 1, 16);
    LongTermMemory m = init_memory(m0.values());
    for (int k = 0; k < 100; ++k) m = ema_update(m, o.values(), MemoryConfig{lambda});
    for (std::size_t i = 0; i < 16; ++i) {
      const double closed = o(0, i) + std::pow(1.0 - lambda, 100) * (m0(0, i) - o(0, i));
      CHECK(std::abs(m.value[i] - closed) < 1e-12);
    }
  }
}

TEST_CASE("drift bound and convexity") {
  memotr::Rng rng(21);
  for (int c = 0; c < 200; ++c) {
    const double lambda = rng.uniform();
    const memotr::Tensor2 a = testing::uniform(rng, 1, 8, -5.0, 5.0), o = testing::uniform(rng, 1, 8, -5.0, 5.0);
    const LongTermMemory m = init_memory(a.values());
    const LongTermMemory next = ema_update(m, o.values(), MemoryConfig{lambda});
    double drift = 0.0, gap = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      drift = std::max(drift, std::abs(next.value[i] - m.value[i]));
      gap = std::max(gap, std::abs(o(0, i) - m.value[i]));
      CHECK(next.value[i] >= std::min(a(0, i), o(0, i)) - 1e-15);
      CHECK(next.value[i] <= std::max(a(0, i), o(0, i)) + 1e-15);
    }
    CHECK(drift == doctest::Approx(lambda * gap).epsilon(1e-12));
    CHECK(std::equal(m.value.begin(), m.value.end(), a.values().begin()));  // input untouched
  }
}

TEST_CASE("commit_gate") {
  const TrackState old_state{{1, 1}, init_memory(std::vector<double>{1, 1})};
  const TrackState fresh{{2, 2}, init_memory(std::vector<double>{3, 3})};
  CHECK(commit_gate(old_state, fresh, 0.6, 0.5) == fresh);
  CHECK(commit_gate(old_state, fresh, 0.5, 0.5) == old_state);
  CHECK(commit_gate(old_state, fresh, 0.0, 0.5) == old_state);

  TrackState s = old_state;
  for (int i = 0; i < 10; ++i) s = commit_gate(s, fresh, 0.3, 0.5);
  CHECK(s == old_state);
}
