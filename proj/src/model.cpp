#include "ehwf/model.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace ehwf {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool nonneg_finite(double x) { return std::isfinite(x) && x >= 0.0; }

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                 const char* name) {
  require(m.size() == rows, std::string(name) + ": expected " +
                                std::to_string(rows) + " rows, got " +
                                std::to_string(m.size()));
  for (const auto& row : m) {
    require(row.size() == cols, std::string(name) + ": expected " +
                                    std::to_string(cols) + " columns, got " +
                                    std::to_string(row.size()));
  }
}

}  // namespace

void validate(const UserEnv& env) {
  require(env.gain.size() == env.harvest.size(),
          "user env: harvest and gain lengths differ");
  for (double e : env.harvest) {
    require(nonneg_finite(e), "user env: harvest must be finite and >= 0");
  }
  for (double h : env.gain) {
    require(nonneg_finite(h), "user env: gain must be finite and >= 0");
  }
  require(!std::isnan(env.battery_max) && env.battery_max >= 0.0,
          "user env: battery_max must be >= 0");
  require(!std::isnan(env.power_max) && env.power_max >= 0.0,
          "user env: power_max must be >= 0");
}

Scenario::Scenario(Matrix harvest, Matrix gain, std::vector<double> battery_max,
                   std::vector<double> power_max)
    : harvest_(std::move(harvest)),
      gain_(std::move(gain)),
      battery_max_(std::move(battery_max)),
      power_max_(std::move(power_max)) {
  const std::size_t n = battery_max_.size();
  require(n > 0, "scenario: num_users must be positive");
  require(power_max_.size() == n, "scenario: power_max has wrong length");
  require(!harvest_.empty(), "scenario: harvest matrix is empty");
  num_slots_ = harvest_.front().size();
  require(num_slots_ > 0, "scenario: num_slots must be positive");
  check_shape(harvest_, n, num_slots_, "harvest");
  check_shape(gain_, n, num_slots_, "gain");
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t k = 0; k < num_slots_; ++k) {
      require(nonneg_finite(harvest_[u][k]), "scenario: harvest must be >= 0");
      require(nonneg_finite(gain_[u][k]), "scenario: gain must be >= 0");
    }
    require(std::isfinite(battery_max_[u]) && battery_max_[u] > 0.0,
            "scenario: battery_max must be positive");
    require(std::isfinite(power_max_[u]) && power_max_[u] > 0.0,
            "scenario: power_max must be positive");
  }
}

std::span<const double> Scenario::harvest(std::size_t user) const {
  return harvest_.at(user);
}

std::span<const double> Scenario::gain(std::size_t user) const {
  return gain_.at(user);
}

UserEnv Scenario::user(std::size_t n) const {
  return UserEnv{harvest_.at(n), gain_.at(n), battery_max_.at(n),
                 power_max_.at(n)};
}

TransmissionSchedule TransmissionSchedule::zeros(std::size_t users,
                                                 std::size_t slots) {
  return {Matrix(users, std::vector<double>(slots, 0.0))};
}

WastageSchedule WastageSchedule::zeros(std::size_t users, std::size_t slots) {
  return {Matrix(users, std::vector<double>(slots, 0.0))};
}

std::string_view to_string(FeasibilityStatus status) {
  switch (status) {
    case FeasibilityStatus::Feasible:
      return "feasible";
    case FeasibilityStatus::SemiFeasible:
      return "semi-feasible";
    case FeasibilityStatus::Infeasible:
      return "infeasible";
  }
  return "?";
}

std::string_view to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::NegativeTransmission:
      return "negative-transmission";
    case ConstraintKind::PowerCapExceeded:
      return "power-cap-exceeded";
    case ConstraintKind::NegativeWastage:
      return "negative-wastage";
    case ConstraintKind::BatteryDepleted:
      return "battery-depleted";
    case ConstraintKind::BatteryOverflow:
      return "battery-capacity-exceeded";
  }
  return "?";
}

std::vector<double> cumulative_harvest(std::span<const double> harvest) {
  std::vector<double> out(harvest.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < harvest.size(); ++k) {
    acc += harvest[k];
    out[k] = acc;
  }
  return out;
}

BatteryTrace battery_trace(std::span<const double> harvest,
                           std::span<const double> p,
                           std::span<const double> d) {
  if (p.size() != harvest.size() || d.size() != harvest.size()) {
    throw std::invalid_argument("battery_trace: dimension mismatch");
  }
  BatteryTrace trace;
  trace.level.resize(harvest.size());
  double energy = 0.0, used = 0.0, wasted = 0.0;
  for (std::size_t k = 0; k < harvest.size(); ++k) {
    energy += harvest[k];
    used += p[k];
    wasted += d[k];
    trace.level[k] = energy - used - wasted;
  }
  return trace;
}

BatteryTrace battery_trace(const Scenario& scenario, std::size_t user,
                           std::span<const double> p,
                           std::span<const double> d) {
  if (user >= scenario.num_users()) {
    throw std::invalid_argument("battery_trace: user index out of range");
  }
  return battery_trace(scenario.harvest(user), p, d);
}

FeasibilityReport check_feasible(const Scenario& scenario,
                                 const TransmissionSchedule& p,
                                 const WastageSchedule& d) {
  const std::size_t n_users = scenario.num_users();
  const std::size_t n_slots = scenario.num_slots();
  if (p.p.size() != n_users || d.d.size() != n_users) {
    throw std::invalid_argument("check_feasible: dimension mismatch");
  }
  FeasibilityReport report;
  for (std::size_t n = 0; n < n_users; ++n) {
    if (p.p[n].size() != n_slots || d.d[n].size() != n_slots) {
      throw std::invalid_argument("check_feasible: dimension mismatch");
    }
    const double cap = scenario.power_max(n);
    const double bmax = scenario.battery_max(n);
    const BatteryTrace trace = battery_trace(scenario, n, p.p[n], d.d[n]);
    for (std::size_t k = 0; k < n_slots; ++k) {
      const double pk = p.p[n][k];
      const double dk = d.d[n][k];
      const double b = trace.level[k];
      if (pk < -kFeasTol) {
        report.violations.push_back(
            {n, k, ConstraintKind::NegativeTransmission, -pk});
      }
      if (pk > cap + kFeasTol) {
        report.violations.push_back(
            {n, k, ConstraintKind::PowerCapExceeded, pk - cap});
      }
      if (dk < -kFeasTol) {
        report.violations.push_back(
            {n, k, ConstraintKind::NegativeWastage, -dk});
      }
      if (b < -kFeasTol) {
        report.violations.push_back({n, k, ConstraintKind::BatteryDepleted, -b});
      }
      if (b > bmax + kFeasTol) {
        report.violations.push_back(
            {n, k, ConstraintKind::BatteryOverflow, b - bmax});
      }
    }
  }
  if (report.violations.empty()) {
    report.status = FeasibilityStatus::Feasible;
  } else {
    bool only_overflow = true;
    for (const auto& v : report.violations) {
      only_overflow = only_overflow && v.kind == ConstraintKind::BatteryOverflow;
    }
    report.status = only_overflow ? FeasibilityStatus::SemiFeasible
                                  : FeasibilityStatus::Infeasible;
  }
  return report;
}

double sum_rate(const Scenario& scenario, const TransmissionSchedule& p) {
  const std::size_t n_users = scenario.num_users();
  const std::size_t n_slots = scenario.num_slots();
  if (p.p.size() != n_users) {
    throw std::invalid_argument("sum_rate: dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < n_slots; ++k) {
    double snr = 0.0;
    for (std::size_t n = 0; n < n_users; ++n) {
      snr += p.p[n].at(k) * scenario.gain(n)[k];
    }
    total += std::log1p(snr);
  }
  return total;
}

double single_user_rate(std::span<const double> gain,
                        std::span<const double> p) {
  if (gain.size() != p.size()) {
    throw std::invalid_argument("single_user_rate: dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) total += std::log1p(p[k] * gain[k]);
  return total;
}

nlohmann::json to_json(const Scenario& scenario) {
  nlohmann::json users = nlohmann::json::array();
  for (std::size_t n = 0; n < scenario.num_users(); ++n) {
    users.push_back({{"harvest", scenario.harvest_matrix()[n]},
                     {"gain", scenario.gain_matrix()[n]},
                     {"battery_max", scenario.battery_max(n)},
                     {"power_max", scenario.power_max(n)}});
  }
  return {{"num_users", scenario.num_users()},
          {"num_slots", scenario.num_slots()},
          {"users", std::move(users)}};
}

Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    const auto n = j.at("num_users").get<std::size_t>();
    const auto k = j.at("num_slots").get<std::size_t>();
    const auto& users = j.at("users");
    require(users.is_array() && users.size() == n,
            "scenario json: \"users\" must list num_users entries");
    Matrix harvest, gain;
    std::vector<double> bmax, pmax;
    for (const auto& u : users) {
      harvest.push_back(u.at("harvest").get<std::vector<double>>());
      gain.push_back(u.at("gain").get<std::vector<double>>());
      bmax.push_back(u.at("battery_max").get<double>());
      pmax.push_back(u.at("power_max").get<double>());
      require(harvest.back().size() == k && gain.back().size() == k,
              "scenario json: per-user vectors must have num_slots entries");
    }
    return Scenario(std::move(harvest), std::move(gain), std::move(bmax),
                    std::move(pmax));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("scenario json: ") + e.what());
  }
}

}  // namespace ehwf
