#pragma once

// Optimality certificates and independent oracles.
//
// Single-user KKT conditions, written with w^k = sum_{t>=k} (lambda^t - mu^t)
// (lambda for B^t >= 0, mu for B^t <= B_max):
//   H/(1 + pH) = w + alpha - beta      alpha active at p = P, beta at p = 0
//   w^k - w^(k+1) = lambda^k - mu^k    w^(K+1) = 0
//   w^k >= 0, and w^k = 0 wherever d^k > 0
// The certificate never materializes the multipliers; it checks that some
// w satisfies all of these, which is what the water-level structure means:
// one level 1/w per segment, rising only where the battery is empty and
// falling only where it is full.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ehwf/mac.hpp"
#include "ehwf/model.hpp"
#include "ehwf/rng.hpp"
#include "ehwf/single_user.hpp"

namespace ehwf {

/// Relative tolerance on water-level equality.
inline constexpr double kCertTol = 1e-7;

enum class BatteryState { Interior, Empty, Full, EmptyAndFull };

struct CertificateCondition {
  std::string name;
  bool pass = true;
  double residual = 0.0;
  double tolerance = 0.0;
};

struct DualCertificate {
  /// Per slot: implied water level 1/w (+inf when w = 0, 0 when p = 0 and
  /// the slot is not tied to a level).
  std::vector<double> water_levels;
  /// Per slot end: battery at 0, at B_max, both, or neither.
  std::vector<BatteryState> battery_state;
  /// Per slot: p at the cap (alpha may be positive) / p at zero (beta may be).
  std::vector<bool> cap_active;
  std::vector<bool> zero_active;
  /// "feasibility", "water_filling", "level_ordering".
  std::vector<CertificateCondition> conditions;
  bool pass = false;
};

nlohmann::json to_json(const DualCertificate& cert);

/// Checks that (p, d) is feasible and optimal with segments x. Without `d`,
/// the wastage is the overflow left after spending p (energy is discarded
/// only when the battery would exceed B_max).
/// Throws std::invalid_argument on shape mismatch or a set for another K.
DualCertificate kkt_certificate(const UserEnv& env, std::span<const double> p,
                                const BdpBfpSet& x,
                                std::optional<std::span<const double>> d = {});

/// Every slot whose battery ends at 0 (BDP) or at B_max (BFP).
BdpBfpSet infer_boundaries(const UserEnv& env, std::span<const double> p,
                           std::span<const double> d);

/// Overflow wastage implied by spending p: d^k = max(B^(k-1) + e^k - p^k -
/// B_max, 0).
std::vector<double> overflow_wastage(const UserEnv& env,
                                     std::span<const double> p);

/// Per-user certificates of a multi-user schedule, each against the
/// effective gains induced by the other users.
std::vector<DualCertificate> kkt_certificate_mac(const Scenario& scenario,
                                                 const MacSolution& solution);

/// Feasible set of one user's p with wastage eliminated:
///   causality  S_k <= E^k
///   windows    S_k - S_j <= E^k - E^j + B_max   (1 <= j < k)
///   box        0 <= p^k <= P
/// where S_k = p^1 + ... + p^k. A wastage d >= 0 making (p, d) feasible
/// exists iff p satisfies these; the overflow wastage is one such d.
class ReducedPolytope {
 public:
  ReducedPolytope(std::vector<double> cumulative_energy, double battery_max,
                  double power_max);

  std::size_t num_slots() const { return energy_.size(); }
  /// E^k, 1-based.
  double causality_bound(std::size_t k) const { return energy_.at(k - 1); }
  /// E^k - E^j + B_max for 1 <= j < k <= K; +inf when B_max is infinite.
  double window_bound(std::size_t j, std::size_t k) const;
  double power_max() const { return power_max_; }
  double battery_max() const { return battery_max_; }

  /// Largest violation over all three families (0 inside), O(K).
  double max_violation(std::span<const double> p) const;
  bool contains(std::span<const double> p, double tol = kFeasTol) const {
    return max_violation(p) <= tol;
  }

 private:
  std::vector<double> energy_;
  double battery_max_;
  double power_max_;
};

ReducedPolytope reduce_polytope(const UserEnv& env);

/// dC/dp[n][k] = H[n][k] / (1 + sum_i p[i][k] H[i][k]).
Matrix rate_gradient(const Scenario& scenario, const TransmissionSchedule& p);

struct FirstOrderResult {
  bool pass = false;
  /// max over sampled feasible Q of grad C(P) . (Q - P).
  double worst = 0.0;
  std::size_t samples = 0;
  /// Q attaining `worst`.
  TransmissionSchedule worst_direction;
};

/// Samples feasible schedules Q (scaled copies, baseline schedules,
/// coordinate pushes repaired to feasibility, random per-user draws) and
/// tests grad C(P) . (Q - P) <= tol. Throws std::invalid_argument if P is
/// infeasible.
FirstOrderResult first_order_certificate(const Scenario& scenario,
                                         const TransmissionSchedule& p,
                                         std::size_t num_samples, double tol,
                                         std::uint64_t seed = 1);

struct BruteForceResult {
  TransmissionSchedule p;
  double value = 0.0;
  std::size_t evaluations = 0;
};

/// Grid search over the feasible schedules of a tiny instance (N K <= 6).
/// Each user's last-slot energy is set to the most it can spend, which is
/// optimal for any choice of the earlier slots; the earlier slots are
/// gridded on [0, min(P, E^k)] with `resolution` points per axis, then the
/// grid is repeatedly shrunk around the incumbent. Every evaluated point is
/// feasible, so the value never exceeds the optimum.
/// Throws std::invalid_argument when N K > 6 or resolution < 2.
BruteForceResult brute_force_tiny(const Scenario& scenario,
                                  std::size_t resolution = 41,
                                  std::size_t refinements = 8);

struct WastageCheck {
  bool pass = true;
  /// min over samples of sum d - sum d_star (>= -tol on pass).
  double worst_margin = 0.0;
};

/// Every feasible (p, d) wastes at least as much as d_star in total.
/// Throws std::invalid_argument if a sample is not feasible.
WastageCheck wastage_minimality_check(
    const UserEnv& env,
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>&
        samples);

/// A random feasible (p, d): each slot spends a random share of what is
/// banked, then optionally discards part of the rest; candidates that fail
/// check_feasible are redrawn.
std::pair<std::vector<double>, std::vector<double>> random_feasible_pair(
    const UserEnv& env, Rng& rng);

/// Moves wasted energy from a slot k with d_star > 0 to an earlier slot j
/// such that the greedy schedule runs at P on [j, k] and keeps positive
/// charge on [j, k-1]: d[j] += delta, d[k] -= delta with delta = fraction *
/// min(d_star[k], charge on [j, k-1]). Returns nothing when no such pair
/// exists. The result is a feasible wastage for the greedy schedule with the
/// same total.
std::optional<std::vector<double>> reschedule_wastage(const UserEnv& env,
                                                      double fraction,
                                                      Rng& rng);

}  // namespace ehwf
