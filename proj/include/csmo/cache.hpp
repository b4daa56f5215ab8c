#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <list>
#include <memory>
#include <stdexcept>
#include <vector>

#include "csmo/kernel.hpp"

namespace csmo {

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
  std::uint64_t columns_computed = 0;

  std::uint64_t requests() const noexcept { return hits + misses; }
};

inline constexpr std::size_t unlimited_cache = std::numeric_limits<std::size_t>::max();

inline std::size_t megabytes_to_bytes(double mb) {
  if (!(mb >= 0.0)) throw std::invalid_argument("cache size must be nonnegative");
  double bytes = mb * 1024.0 * 1024.0;
  return bytes >= static_cast<double>(unlimited_cache) ? unlimited_cache : static_cast<std::size_t>(bytes);
}

// LRU store of whole Q columns under a byte budget. A column costs
// N * sizeof(double) bytes. Columns that do not fit the budget at all are
// returned but never retained.
class KernelCache {
 public:
  using ColumnPtr = std::shared_ptr<const QColumn>;

  KernelCache(const KernelEngine& engine, std::size_t budget_bytes) : engine_(engine), budget_(budget_bytes) {
    slots_.resize(engine_.size(), lru_.end());
  }

  KernelCache(const KernelCache&) = delete;
  KernelCache& operator=(const KernelCache&) = delete;

  ColumnPtr get(std::size_t j) {
    if (j >= slots_.size()) throw std::out_of_range("KernelCache: column " + std::to_string(j) + " out of range");
    auto slot = slots_[j];
    if (slot != lru_.end()) {
      ++stats_.hits;
      lru_.splice(lru_.begin(), lru_, slot);
      return *slot;
    }
    ++stats_.misses;
    ++stats_.columns_computed;
    auto column = std::make_shared<const QColumn>(engine_.column(j));
    const std::size_t bytes = column_bytes();
    if (bytes > budget_) return column;
    while (stored_bytes_ + bytes > budget_) evict_one();
    lru_.push_front(column);
    slots_[j] = lru_.begin();
    stored_bytes_ += bytes;
    return column;
  }

  bool contains(std::size_t j) const { return j < slots_.size() && slots_[j] != lru_.end(); }

  // Stored ids, most recent first.
  std::vector<std::size_t> recency() const {
    std::vector<std::size_t> ids;
    for (const auto& c : lru_) ids.push_back(c->index);
    return ids;
  }

  std::size_t budget_bytes() const noexcept { return budget_; }
  std::size_t stored_bytes() const noexcept { return stored_bytes_; }
  std::size_t column_bytes() const noexcept { return engine_.size() * sizeof(double); }
  const CacheStats& stats() const noexcept { return stats_; }

 private:
  void evict_one() {
    const auto& victim = lru_.back();
    slots_[victim->index] = lru_.end();
    lru_.pop_back();
    stored_bytes_ -= column_bytes();
    ++stats_.evictions;
  }

  const KernelEngine& engine_;
  std::size_t budget_;
  std::size_t stored_bytes_ = 0;
  std::list<ColumnPtr> lru_;
  std::vector<std::list<ColumnPtr>::iterator> slots_;
  CacheStats stats_;
};

}  // namespace csmo
