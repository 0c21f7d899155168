#pragma once

// Problem instances, battery bookkeeping and the sum-rate objective for
// energy-harvesting fading multiple-access channels.
//
// Energies are stored per slot (the increment harvested during the slot);
// cumulative quantities are derived on demand. Rates are in nats.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ehwf {

/// Absolute tolerance used for every constraint comparison.
inline constexpr double kFeasTol = 1e-9;

using Matrix = std::vector<std::vector<double>>;

/// One transmitter's slice of a scenario. `gain` may hold effective gains
/// when the environment is built by the multi-user solver.
struct UserEnv {
  std::vector<double> harvest;
  std::vector<double> gain;
  double battery_max = 0.0;
  double power_max = 0.0;

  std::size_t num_slots() const { return harvest.size(); }
};

/// Throws std::invalid_argument unless the environment is well formed:
/// equal-length vectors, nonnegative finite entries, nonnegative caps.
void validate(const UserEnv& env);

/// Immutable problem instance: N users, K slots.
class Scenario {
 public:
  Scenario(Matrix harvest, Matrix gain, std::vector<double> battery_max,
           std::vector<double> power_max);

  std::size_t num_users() const { return battery_max_.size(); }
  std::size_t num_slots() const { return num_slots_; }

  std::span<const double> harvest(std::size_t user) const;
  std::span<const double> gain(std::size_t user) const;
  double battery_max(std::size_t user) const { return battery_max_.at(user); }
  double power_max(std::size_t user) const { return power_max_.at(user); }

  const Matrix& harvest_matrix() const { return harvest_; }
  const Matrix& gain_matrix() const { return gain_; }

  UserEnv user(std::size_t n) const;

  friend bool operator==(const Scenario&, const Scenario&) = default;

 private:
  Matrix harvest_;
  Matrix gain_;
  std::vector<double> battery_max_;
  std::vector<double> power_max_;
  std::size_t num_slots_ = 0;
};

/// Energy consumed by user n in slot k, p[n][k].
struct TransmissionSchedule {
  Matrix p;

  static TransmissionSchedule zeros(std::size_t users, std::size_t slots);
  std::size_t num_users() const { return p.size(); }
  std::size_t num_slots() const { return p.empty() ? 0 : p.front().size(); }
};

/// Energy discarded by user n in slot k, d[n][k].
struct WastageSchedule {
  Matrix d;

  static WastageSchedule zeros(std::size_t users, std::size_t slots);
  std::size_t num_users() const { return d.size(); }
  std::size_t num_slots() const { return d.empty() ? 0 : d.front().size(); }
};

/// End-of-slot battery levels of one user; level[0] is the level after slot 1.
struct BatteryTrace {
  std::vector<double> level;
};

enum class FeasibilityStatus { Feasible, SemiFeasible, Infeasible };

enum class ConstraintKind {
  NegativeTransmission,
  PowerCapExceeded,
  NegativeWastage,
  BatteryDepleted,
  BatteryOverflow,
};

struct Violation {
  std::size_t user;
  std::size_t slot;
  ConstraintKind kind;
  double magnitude;
};

struct FeasibilityReport {
  FeasibilityStatus status = FeasibilityStatus::Feasible;
  std::vector<Violation> violations;
};

std::string_view to_string(FeasibilityStatus status);
std::string_view to_string(ConstraintKind kind);

/// Prefix sums of per-slot harvest.
std::vector<double> cumulative_harvest(std::span<const double> harvest);

/// B^k = E^k - sum p - sum d for one user, without clamping.
BatteryTrace battery_trace(const Scenario& scenario, std::size_t user,
                           std::span<const double> p,
                           std::span<const double> d);
BatteryTrace battery_trace(std::span<const double> harvest,
                           std::span<const double> p,
                           std::span<const double> d);

FeasibilityReport check_feasible(const Scenario& scenario,
                                 const TransmissionSchedule& p,
                                 const WastageSchedule& d);

/// Sum over slots of ln(1 + sum_n p[n][k] H[n][k]).
double sum_rate(const Scenario& scenario, const TransmissionSchedule& p);

/// Single-user rate sum_k ln(1 + p[k] g[k]).
double single_user_rate(std::span<const double> gain,
                        std::span<const double> p);

// JSON: {"num_users":N,"num_slots":K,"users":[{"harvest":[...],"gain":[...],
//        "battery_max":x,"power_max":y},...]}
nlohmann::json to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);

}  // namespace ehwf
