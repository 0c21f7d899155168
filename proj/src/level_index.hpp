#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ehwf::detail {

// Water-height queries over a growing set of slots.
//
// The energy absorbed at height h by slot t is clamp(h - 1/g[t], 0, P), a
// piecewise-linear function with breakpoints 1/g[t] and 1/g[t] + P. All
// breakpoints are sorted once; two Fenwick trees over their ranks hold the
// signed count and signed value of the breakpoints of inserted slots, so the
// total absorbed energy at any breakpoint costs O(log M) and a height query
// O(log^2 M).
class LevelIndex {
 public:
  LevelIndex(std::span<const double> gains, double power_max);

  void insert(std::size_t slot);
  void clear();

  std::size_t usable_slots() const { return usable_; }

  // Smallest height at which the inserted slots absorb `energy`.
  // 0 for energy <= 0; +inf when energy exceeds what they can absorb.
  double lowest_height_for(double energy) const;

  // Largest height at which the inserted slots absorb at most `energy`.
  // +inf when they cannot absorb more than `energy`; -inf for energy < 0.
  double highest_height_within(double energy) const;

 private:
  void add(std::size_t rank, double count, double value);
  // Signed count / value sums over ranks [0, r).
  double count_before(std::size_t r) const;
  double value_before(std::size_t r) const;
  double absorbed_at_rank(std::size_t r) const;

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  double power_max_;
  bool capped_;
  std::vector<double> breakpoint_;
  std::vector<std::size_t> start_rank_;
  std::vector<std::size_t> end_rank_;
  std::vector<double> count_tree_;
  std::vector<double> value_tree_;
  std::vector<std::size_t> touched_;
  std::size_t usable_ = 0;
  double max_saturation_ = 0.0;
};

}  // namespace ehwf::detail
