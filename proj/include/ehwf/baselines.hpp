#pragma once

// Comparison policies: greedy, balanced, and (modified) staircase
// water-filling, single-user and multi-user.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ehwf/mac.hpp"
#include "ehwf/model.hpp"

namespace ehwf {

struct PolicySchedule {
  std::vector<double> p;
  std::vector<double> d;
};

/// The greedy recurrence: exactly optimal_wastage's (p_greedy, d_star).
PolicySchedule greedy_policy(const UserEnv& env);

/// Spends tau = sum(harvest) / K per slot when available (less otherwise,
/// with no carried deficit), capped by P; overflow above B_max is wasted.
PolicySchedule balanced_policy(const UserEnv& env);

struct StaircaseResult {
  std::vector<double> p;
  /// Water height of each segment, nondecreasing.
  std::vector<double> water_levels;
  /// Segment end slots (1-based, last one is K).
  std::vector<std::size_t> segment_ends;
};

/// Water-filling under energy causality alone (battery and per-slot cap
/// ignored): repeatedly take the longest segment whose constant-level fill
/// never spends energy before it arrives.
StaircaseResult staircase_wf(const UserEnv& env);

/// Staircase schedule clipped to P and to the energy actually banked, with
/// battery overflow wasted as it happens.
PolicySchedule modified_staircase(const UserEnv& env);

/// Best-response sweeps as in solve_mac, each response being
/// modified_staircase on the effective gains.
MacSolution iterative_modified_staircase(
    const Scenario& scenario, double eps = kDefaultMacEps,
    std::size_t max_iter = kDefaultMacIterations);

enum class Policy { Optimal, Greedy, Balanced, Staircase, StaircaseIter };

std::string_view to_string(Policy policy);
/// "optimal", "greedy", "balanced", "staircase", "staircase-iter".
std::optional<Policy> parse_policy(std::string_view name);
const std::vector<Policy>& all_policies();

/// Each user runs a single-user policy on its raw gains, ignoring the others.
/// Accepts Greedy, Balanced and Staircase; throws std::invalid_argument
/// otherwise.
struct MultiuserSchedule {
  TransmissionSchedule p;
  WastageSchedule d;
};
MultiuserSchedule non_iterative_multiuser(Policy policy,
                                          const Scenario& scenario);

}  // namespace ehwf
