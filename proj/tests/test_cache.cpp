#include <gtest/gtest.h>

#include <algorithm>
#include <deque>
#include <random>

#include "csmo/cache.hpp"
#include "support/fixtures.hpp"

using namespace csmo;

namespace {

Problem small_problem(std::size_t n = 6) { return csmo::testing::random_problem(9, {.n = n, .dim = 2, .gamma = 0.8}); }

}  // namespace

TEST(KernelCache, LruTwoColumnBudget) {
  const auto p = small_problem();
  KernelEngine engine(p);
  KernelCache cache(engine, 2 * p.size() * sizeof(double));
  cache.get(0);
  cache.get(1);
  EXPECT_EQ(cache.stats().misses, 2u);
  cache.get(0);
  EXPECT_EQ(cache.stats().hits, 1u);
  cache.get(2);
  EXPECT_EQ(cache.stats().misses, 3u);
  EXPECT_EQ(cache.stats().evictions, 1u);
  EXPECT_TRUE(cache.contains(0));
  EXPECT_FALSE(cache.contains(1));
  EXPECT_TRUE(cache.contains(2));
  EXPECT_EQ(cache.recency(), (std::vector<std::size_t>{2, 0}));
}

TEST(KernelCache, ZeroBudgetRetainsNothing) {
  const auto p = small_problem();
  KernelEngine engine(p);
  KernelCache cache(engine, 0);
  for (int r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < p.size(); ++j) EXPECT_EQ(cache.get(j)->values, engine.column(j).values);
  }
  EXPECT_EQ(cache.stats().hits, 0u);
  EXPECT_EQ(cache.stats().misses, 3 * p.size());
  EXPECT_EQ(cache.stored_bytes(), 0u);
}

TEST(KernelCache, FullBudgetHitsAfterFirstPass) {
  const auto p = small_problem();
  KernelEngine engine(p);
  KernelCache cache(engine, unlimited_cache);
  for (std::size_t j = 0; j < p.size(); ++j) cache.get(j);
  for (int r = 0; r < 4; ++r) {
    for (std::size_t j = 0; j < p.size(); ++j) cache.get(j);
  }
  EXPECT_EQ(cache.stats().misses, p.size());
  EXPECT_EQ(cache.stats().hits, 4 * p.size());
  EXPECT_EQ(cache.stats().evictions, 0u);
}

TEST(KernelCache, OutOfRange) {
  const auto p = small_problem();
  KernelEngine engine(p);
  KernelCache cache(engine, unlimited_cache);
  EXPECT_THROW(cache.get(p.size()), std::out_of_range);
}

TEST(KernelCache, MegabyteConversion) {
  EXPECT_EQ(megabytes_to_bytes(0), 0u);
  EXPECT_EQ(megabytes_to_bytes(1), 1u << 20);
  EXPECT_EQ(megabytes_to_bytes(1e300), unlimited_cache);
  EXPECT_THROW(megabytes_to_bytes(-1), std::invalid_argument);
}

// Random request streams against a reference LRU model: transparency, the LRU
// eviction law, budget accounting and the stats identities.
TEST(KernelCache, MatchesReferenceLruModel) {
  const auto p = small_problem(10);
  KernelEngine engine(p);
  std::vector<std::vector<double>> fresh;
  for (std::size_t j = 0; j < p.size(); ++j) fresh.push_back(engine.column(j).values);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
  for (std::size_t capacity = 0; capacity <= p.size() + 1; ++capacity) {
    KernelCache cache(engine, capacity * p.size() * sizeof(double));
    std::deque<std::size_t> model;  // most recent first
    std::uint64_t hits = 0, misses = 0, evictions = 0;
    for (int r = 0; r < 500; ++r) {
      const std::size_t j = pick(rng);
      ASSERT_EQ(cache.get(j)->values, fresh[j]);
      auto it = std::find(model.begin(), model.end(), j);
      if (it != model.end()) {
        ++hits;
        model.erase(it);
        model.push_front(j);
      } else {
        ++misses;
        if (capacity > 0) {
          if (model.size() == capacity) {
            model.pop_back();
            ++evictions;
          }
          model.push_front(j);
        }
      }
      ASSERT_EQ(cache.recency(), std::vector<std::size_t>(model.begin(), model.end()));
      ASSERT_LE(cache.stored_bytes(), cache.budget_bytes());
    }
    const auto& s = cache.stats();
    EXPECT_EQ(s.hits, hits);
    EXPECT_EQ(s.misses, misses);
    EXPECT_EQ(s.evictions, evictions);
    EXPECT_EQ(s.columns_computed, s.misses);
    EXPECT_EQ(s.requests(), 500u);
  }
}
