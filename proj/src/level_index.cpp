#include "level_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ehwf::detail {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

LevelIndex::LevelIndex(std::span<const double> gains, double power_max)
    : power_max_(power_max),
      capped_(std::isfinite(power_max)),
      start_rank_(gains.size(), kNone),
      end_rank_(gains.size(), kNone) {
  struct Entry {
    double value;
    std::size_t slot;
    bool is_end;
  };
  std::vector<Entry> entries;
  entries.reserve(2 * gains.size());
  for (std::size_t t = 0; t < gains.size(); ++t) {
    if (!(gains[t] > 0.0)) continue;
    const double start = 1.0 / gains[t];
    entries.push_back({start, t, false});
    if (capped_) entries.push_back({start + power_max, t, true});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& l, const Entry& r) { return l.value < r.value; });
  breakpoint_.resize(entries.size());
  for (std::size_t r = 0; r < entries.size(); ++r) {
    breakpoint_[r] = entries[r].value;
    (entries[r].is_end ? end_rank_ : start_rank_)[entries[r].slot] = r;
  }
  count_tree_.assign(entries.size() + 1, 0.0);
  value_tree_.assign(entries.size() + 1, 0.0);
}

void LevelIndex::add(std::size_t rank, double count, double value) {
  for (std::size_t i = rank + 1; i < count_tree_.size(); i += i & (~i + 1)) {
    count_tree_[i] += count;
    value_tree_[i] += value;
    touched_.push_back(i);
  }
}

double LevelIndex::count_before(std::size_t r) const {
  double acc = 0.0;
  for (std::size_t i = r; i > 0; i -= i & (~i + 1)) acc += count_tree_[i];
  return acc;
}

double LevelIndex::value_before(std::size_t r) const {
  double acc = 0.0;
  for (std::size_t i = r; i > 0; i -= i & (~i + 1)) acc += value_tree_[i];
  return acc;
}

double LevelIndex::absorbed_at_rank(std::size_t r) const {
  return breakpoint_[r] * count_before(r) - value_before(r);
}

void LevelIndex::insert(std::size_t slot) {
  const std::size_t s = start_rank_.at(slot);
  if (s == kNone) return;
  add(s, 1.0, breakpoint_[s]);
  if (capped_) {
    const std::size_t e = end_rank_[slot];
    add(e, -1.0, -breakpoint_[e]);
    max_saturation_ = std::max(max_saturation_, breakpoint_[e]);
  }
  ++usable_;
}

void LevelIndex::clear() {
  for (std::size_t i : touched_) {
    count_tree_[i] = 0.0;
    value_tree_[i] = 0.0;
  }
  touched_.clear();
  usable_ = 0;
  max_saturation_ = 0.0;
}

double LevelIndex::lowest_height_for(double energy) const {
  if (energy <= 0.0) return 0.0;
  if (usable_ == 0) return kInf;
  const std::size_t m = breakpoint_.size();
  // Smallest rank whose breakpoint already absorbs `energy`.
  std::size_t lo = 0, hi = m;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (absorbed_at_rank(mid) >= energy) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  if (lo == m) {
    if (capped_) {
      const double capacity = static_cast<double>(usable_) * power_max_;
      if (energy <= capacity * (1.0 + 1e-12)) return max_saturation_;
      return kInf;
    }
    // Uncapped: beyond the last breakpoint every inserted slot is active.
    const double c = count_before(m);
    return (energy + value_before(m)) / c;
  }
  if (lo == 0) return breakpoint_[0];
  const double c = count_before(lo);
  if (c <= 0.0) return breakpoint_[lo];
  const double h = (energy + value_before(lo)) / c;
  return std::clamp(h, breakpoint_[lo - 1], breakpoint_[lo]);
}

double LevelIndex::highest_height_within(double energy) const {
  if (energy < 0.0) return -kInf;
  if (usable_ == 0) return kInf;
  if (capped_ && energy >= static_cast<double>(usable_) * power_max_) {
    return kInf;
  }
  const std::size_t m = breakpoint_.size();
  // Largest rank whose breakpoint absorbs no more than `energy`.
  std::size_t lo = 0, hi = m;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (absorbed_at_rank(mid) <= energy) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  // lo is the first rank absorbing more; the answer lies in
  // [breakpoint_[lo - 1], breakpoint_[lo]).
  const std::size_t r = lo;  // ranks < r are active
  const double c = count_before(r);
  const double upper = r < m ? breakpoint_[r] : kInf;
  if (c <= 0.0) return upper;
  const double h = (energy + value_before(r)) / c;
  const double lower = r > 0 ? breakpoint_[r - 1] : -kInf;
  return std::clamp(h, lower, upper);
}

}  // namespace ehwf::detail
