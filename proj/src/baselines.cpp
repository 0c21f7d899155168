#include "ehwf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ehwf/single_user.hpp"

namespace ehwf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Spends min(want[k], P, banked + harvested) each slot; overflow is wasted.
PolicySchedule spend_with_overflow(const UserEnv& env,
                                   const std::vector<double>& want) {
  PolicySchedule out;
  out.p.resize(env.num_slots());
  out.d.resize(env.num_slots());
  double battery = 0.0;
  for (std::size_t k = 0; k < env.num_slots(); ++k) {
    const double available = battery + env.harvest[k];
    const double p = std::clamp(std::min(want[k], env.power_max), 0.0, available);
    const double d = std::max(available - p - env.battery_max, 0.0);
    battery = available - p - d;
    out.p[k] = p;
    out.d[k] = d;
  }
  return out;
}

}  // namespace

PolicySchedule greedy_policy(const UserEnv& env) {
  WastageResult w = optimal_wastage(env);
  return {std::move(w.p_greedy), std::move(w.d_star)};
}

PolicySchedule balanced_policy(const UserEnv& env) {
  validate(env);
  const std::size_t n = env.num_slots();
  double total = 0.0;
  for (double e : env.harvest) total += e;
  const double tau = n == 0 ? 0.0 : total / static_cast<double>(n);
  return spend_with_overflow(env, std::vector<double>(n, tau));
}

StaircaseResult staircase_wf(const UserEnv& env) {
  validate(env);
  const std::size_t n = env.num_slots();
  const std::vector<double> cumulative = cumulative_harvest(env.harvest);
  const auto energy_at = [&](std::size_t k) {
    return k == 0 ? 0.0 : cumulative[k - 1];
  };

  StaircaseResult out;
  out.p.assign(n, 0.0);
  double consumed = 0.0;
  std::size_t a = 0;
  while (a < n) {
    std::size_t chosen = a + 1;
    SegmentSolution best;
    bool found = false;
    for (std::size_t k = n; k > a && !found; --k) {
      const auto gains = std::span<const double>(env.gain).subspan(a, k - a);
      const bool usable = std::any_of(gains.begin(), gains.end(),
                                      [](double g) { return g > 0.0; });
      const double energy = std::max(0.0, energy_at(k) - consumed);
      SegmentSolution seg;
      if (usable) {
        seg = water_fill_segment(gains, energy, kInf);
      } else {
        seg.p.assign(k - a, 0.0);
      }
      double spent = 0.0;
      bool causal = true;
      for (std::size_t i = a + 1; i < k && causal; ++i) {
        spent += seg.p[i - a - 1];
        causal = spent <= energy_at(i) - consumed + kFeasTol;
      }
      if (causal) {
        chosen = k;
        best = std::move(seg);
        found = true;
      }
    }
    double spent = 0.0;
    for (std::size_t t = a; t < chosen; ++t) {
      out.p[t] = best.p[t - a];
      spent += out.p[t];
    }
    consumed += spent;
    const double previous =
        out.water_levels.empty() ? 0.0 : out.water_levels.back();
    // A segment with no usable slot leaves its energy banked.
    out.water_levels.push_back(spent > 0.0 ? best.height() : previous);
    out.segment_ends.push_back(chosen);
    a = chosen;
  }
  return out;
}

PolicySchedule modified_staircase(const UserEnv& env) {
  return spend_with_overflow(env, staircase_wf(env).p);
}

MacSolution iterative_modified_staircase(const Scenario& scenario, double eps,
                                         std::size_t max_iter) {
  if (!(eps > 0.0)) {
    throw std::invalid_argument("iterative_modified_staircase: eps must be > 0");
  }
  if (max_iter < 1) {
    throw std::invalid_argument(
        "iterative_modified_staircase: max_iter must be >= 1");
  }
  const std::size_t n_users = scenario.num_users();
  const std::size_t n_slots = scenario.num_slots();
  MacSolution out;
  out.p = TransmissionSchedule::zeros(n_users, n_slots);
  out.d = WastageSchedule::zeros(n_users, n_slots);
  out.x.assign(n_users, BdpBfpSet::trivial(n_slots));
  double previous = 0.0;
  for (std::size_t m = 1; m <= max_iter; ++m) {
    for (std::size_t n = 0; n < n_users; ++n) {
      PolicySchedule s = modified_staircase(effective_env(scenario, out.p, n));
      out.p.p[n] = std::move(s.p);
      out.d.d[n] = std::move(s.d);
    }
    const double value = sum_rate(scenario, out.p);
    out.trace.push_back(value);
    out.iterations = m;
    if (std::abs(value - previous) <= eps) {
      out.converged = true;
      break;
    }
    previous = value;
  }
  return out;
}

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::Optimal:
      return "optimal";
    case Policy::Greedy:
      return "greedy";
    case Policy::Balanced:
      return "balanced";
    case Policy::Staircase:
      return "staircase";
    case Policy::StaircaseIter:
      return "staircase-iter";
  }
  return "?";
}

std::optional<Policy> parse_policy(std::string_view name) {
  for (Policy p : all_policies()) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

const std::vector<Policy>& all_policies() {
  static const std::vector<Policy> policies{
      Policy::Optimal, Policy::Greedy, Policy::Balanced, Policy::Staircase,
      Policy::StaircaseIter};
  return policies;
}

MultiuserSchedule non_iterative_multiuser(Policy policy,
                                          const Scenario& scenario) {
  PolicySchedule (*single)(const UserEnv&) = nullptr;
  switch (policy) {
    case Policy::Greedy:
      single = greedy_policy;
      break;
    case Policy::Balanced:
      single = balanced_policy;
      break;
    case Policy::Staircase:
      single = modified_staircase;
      break;
    default:
      throw std::invalid_argument(
          "non_iterative_multiuser: policy must be greedy, balanced or "
          "staircase");
  }
  MultiuserSchedule out;
  for (std::size_t n = 0; n < scenario.num_users(); ++n) {
    PolicySchedule s = single(scenario.user(n));
    out.p.p.push_back(std::move(s.p));
    out.d.d.push_back(std::move(s.d));
  }
  return out;
}

}  // namespace ehwf
