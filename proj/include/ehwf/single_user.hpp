#pragma once

// Single-user optimal energy scheduling under a finite battery and a per-slot
// energy cap: minimal-wastage schedule, constant-level segment water-filling,
// and the forward/backward search that places battery-depletion (BDP) and
// battery-full (BFP) points.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "ehwf/model.hpp"

namespace ehwf {

struct WastageResult {
  std::vector<double> d_star;
  std::vector<double> p_greedy;
  BatteryTrace battery;
};

/// Greedy forward recurrence from an empty battery: spend min(P, banked +
/// harvested) each slot and discard whatever still overflows the battery.
/// The discarded energy is the smallest total any feasible schedule can waste.
WastageResult optimal_wastage(const UserEnv& env);

/// Cumulative harvest net of cumulative wastage.
class EffectiveEnergy {
 public:
  EffectiveEnergy() = default;
  explicit EffectiveEnergy(std::vector<double> cumulative)
      : e_tilde_(std::move(cumulative)) {}

  std::size_t num_slots() const { return e_tilde_.size(); }
  /// Value after slot k (1-based); at(0) is 0.
  double at(std::size_t k) const { return k == 0 ? 0.0 : e_tilde_.at(k - 1); }
  const std::vector<double>& values() const { return e_tilde_; }

 private:
  std::vector<double> e_tilde_;
};

EffectiveEnergy effective_energy(const UserEnv& env,
                                 std::span<const double> wastage);

enum class PointKind { BDP, BFP };

struct BoundaryPoint {
  std::size_t slot;
  PointKind kind;

  friend bool operator==(const BoundaryPoint&, const BoundaryPoint&) = default;
};

/// Ordered boundary points, always starting at (0, BDP) and ending at
/// (K, BDP), slots strictly increasing.
class BdpBfpSet {
 public:
  /// Throws std::invalid_argument when the invariants do not hold.
  BdpBfpSet(std::vector<BoundaryPoint> points, std::size_t num_slots);

  /// {(0, BDP), (K, BDP)}.
  static BdpBfpSet trivial(std::size_t num_slots);

  const std::vector<BoundaryPoint>& points() const { return points_; }
  std::size_t num_slots() const { return num_slots_; }
  std::size_t num_segments() const { return points_.size() - 1; }

  friend bool operator==(const BdpBfpSet&, const BdpBfpSet&) = default;

 private:
  std::vector<BoundaryPoint> points_;
  std::size_t num_slots_;
};

/// [[slot, "BDP" | "BFP"], ...]
nlohmann::json to_json(const BdpBfpSet& set);

/// Total energy the segment (a, b] must consume given its end-point kinds:
/// min(n_usable * P, E~(b) - E~(a) + (1[a is BFP] - 1[b is BFP]) * B_max),
/// clamped at zero. `usable_slots` defaults to b - a.
double segment_target_energy(std::size_t a, PointKind kind_a, std::size_t b,
                             PointKind kind_b, const EffectiveEnergy& e_tilde,
                             double battery_max, double power_max,
                             std::optional<std::size_t> usable_slots = {});

struct SegmentSolution {
  std::vector<double> p;
  /// Inverse water height w; +inf when nothing is allocated.
  double w = std::numeric_limits<double>::infinity();
  /// |sum p - target|.
  double residual = 0.0;
  std::optional<FeasibilityStatus> classification;

  /// Water height 1/w, 0 for the empty allocation.
  double height() const;
};

/// Constant-level water-filling: p[k] = min(P, max(0, 1/w - 1/g[k])) with
/// sum p = target. Zero-gain slots receive nothing. P may be +inf.
/// Throws std::domain_error if the target exceeds what the usable slots can
/// absorb (beyond kFeasTol).
SegmentSolution water_fill_segment(std::span<const double> gains,
                                   double target_energy, double power_max);

struct SegmentBattery {
  FeasibilityStatus status = FeasibilityStatus::Feasible;
  std::vector<double> level;
};

/// Simulates the battery across a segment starting from `start_level`, with
/// `inflow[j]` the effective energy arriving in its j-th slot.
SegmentBattery segment_battery(std::span<const double> p,
                               std::span<const double> inflow,
                               double start_level, double battery_max,
                               double power_max);

FeasibilityStatus classify_segment(std::span<const double> p,
                                   std::span<const double> inflow,
                                   double start_level, double battery_max,
                                   double power_max);

struct SingleUserSolution {
  std::vector<double> p;
  std::vector<double> d;
  BdpBfpSet x = BdpBfpSet::trivial(1);
  /// Water height 1/w of each segment of `x` (0 when nothing is allocated).
  std::vector<double> water_levels;
  /// Largest relative energy residual over every water-fill performed.
  double max_fill_residual = 0.0;
  std::size_t fill_calls = 0;
};

/// Optimal schedule of one user.
SingleUserSolution solve_single(const UserEnv& env);

/// Same, with a caller-supplied feasible wastage schedule in place of the
/// minimal one. In both overloads, energy that would reach a zero-gain slot
/// is reported as extra wastage rather than transmitted.
SingleUserSolution solve_single(const UserEnv& env,
                                std::span<const double> wastage);

namespace detail {
/// solve_single with every candidate segment classified by a full
/// water-fill instead of precomputed height bounds. Reference for tests.
SingleUserSolution solve_single_direct(const UserEnv& env);
}  // namespace detail

}  // namespace ehwf
