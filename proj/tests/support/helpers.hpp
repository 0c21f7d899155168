#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ehwf/bench.hpp"
#include "ehwf/model.hpp"
#include "ehwf/rng.hpp"

namespace testing {

inline ehwf::UserEnv make_env(std::vector<double> harvest,
                              std::vector<double> gain, double battery_max,
                              double power_max) {
  ehwf::UserEnv env;
  env.harvest = std::move(harvest);
  env.gain = std::move(gain);
  env.battery_max = battery_max;
  env.power_max = power_max;
  return env;
}

inline ehwf::Scenario as_scenario(const ehwf::UserEnv& env) {
  return ehwf::Scenario({env.harvest}, {env.gain}, {env.battery_max},
                        {env.power_max});
}

inline ehwf::Scenario stack(const std::vector<ehwf::UserEnv>& envs) {
  ehwf::Matrix h, g;
  std::vector<double> b, p;
  for (const auto& e : envs) {
    h.push_back(e.harvest);
    g.push_back(e.gain);
    b.push_back(e.battery_max);
    p.push_back(e.power_max);
  }
  return ehwf::Scenario(h, g, b, p);
}

/// Random single-user environment: truncated-Gaussian harvests with a random
/// mean and variance, unit-mean exponential gains, caps drawn from small
/// menus. With `zero_gains`, about one slot in five has gain 0; with
/// `zero_harvest`, about one slot in five harvests nothing.
inline ehwf::UserEnv random_env(ehwf::Rng& rng, std::size_t slots,
                                bool zero_gains = false,
                                bool zero_harvest = false) {
  static constexpr double kBattery[] = {0.5, 2.0, 5.0, 20.0};
  static constexpr double kPower[] = {1.0, 4.0, 15.0};
  const double m = rng.uniform(0.5, 10.0);
  const double v = rng.uniform(0.5, 8.0);
  ehwf::UserEnv env;
  for (std::size_t k = 0; k < slots; ++k) {
    double e = ehwf::truncated_gaussian(m, v, rng);
    if (zero_harvest && rng.uniform() < 0.2) e = 0.0;
    env.harvest.push_back(e);
    double g = rng.exponential(1.0);
    if (zero_gains && rng.uniform() < 0.2) g = 0.0;
    env.gain.push_back(g);
  }
  env.battery_max = kBattery[rng.below(4)];
  env.power_max = kPower[rng.below(3)];
  return env;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return a.size() == b.size() ? worst : HUGE_VAL;
}

inline double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

/// Exhaustive optimum of a two-slot single-user instance: slot 1 spends p1
/// (overflow above B_max wasted), slot 2 spends everything it may. p1 is
/// scanned on a grid and then refined by golden-section search, which is
/// exact here because the value is concave in p1.
inline double two_slot_optimum(const ehwf::UserEnv& env, double* best_p1 = nullptr) {
  const double hi = std::min(env.power_max, env.harvest[0]);
  const auto value = [&](double p1) {
    const double banked =
        std::min(env.harvest[0] - p1, env.battery_max);
    const double p2 = std::min(env.power_max, banked + env.harvest[1]);
    return std::log1p(p1 * env.gain[0]) + std::log1p(p2 * env.gain[1]);
  };
  const double lo = 0.0;
  double a = lo, b = hi;
  for (int i = 0; i < 200; ++i) {
    const double c = b - (b - a) * 0.6180339887498949;
    const double d = a + (b - a) * 0.6180339887498949;
    if (value(c) < value(d)) {
      a = c;
    } else {
      b = d;
    }
  }
  double best = 0.5 * (a + b);
  for (int i = 0; i <= 1000; ++i) {
    const double p1 = lo + (hi - lo) * i / 1000.0;
    if (value(p1) > value(best)) best = p1;
  }
  if (best_p1) *best_p1 = best;
  return value(best);
}

}  // namespace testing
