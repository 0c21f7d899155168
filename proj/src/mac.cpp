#include "ehwf/mac.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ehwf {

namespace {

void check_schedule(const Scenario& scenario, const TransmissionSchedule& p) {
  if (p.p.size() != scenario.num_users()) {
    throw std::invalid_argument("mac: schedule has wrong number of users");
  }
  for (const auto& row : p.p) {
    if (row.size() != scenario.num_slots()) {
      throw std::invalid_argument("mac: schedule has wrong number of slots");
    }
  }
}

}  // namespace

double effective_gain(const Scenario& scenario, const TransmissionSchedule& p,
                      std::size_t user, std::size_t slot) {
  double interference = 0.0;
  for (std::size_t i = 0; i < scenario.num_users(); ++i) {
    if (i != user) interference += p.p.at(i).at(slot) * scenario.gain(i)[slot];
  }
  return scenario.gain(user)[slot] / (1.0 + interference);
}

UserEnv effective_env(const Scenario& scenario, const TransmissionSchedule& p,
                      std::size_t user) {
  check_schedule(scenario, p);
  UserEnv env = scenario.user(user);
  for (std::size_t k = 0; k < scenario.num_slots(); ++k) {
    env.gain[k] = effective_gain(scenario, p, user, k);
  }
  return env;
}

std::vector<double> best_response(const Scenario& scenario,
                                  const TransmissionSchedule& p,
                                  std::size_t user) {
  return solve_single(effective_env(scenario, p, user)).p;
}

MacSolution solve_mac(const Scenario& scenario, double eps,
                      std::size_t max_iter) {
  if (!(eps > 0.0)) throw std::invalid_argument("solve_mac: eps must be > 0");
  if (max_iter < 1) {
    throw std::invalid_argument("solve_mac: max_iter must be >= 1");
  }
  const std::size_t n_users = scenario.num_users();
  const std::size_t n_slots = scenario.num_slots();

  MacSolution out;
  out.p = TransmissionSchedule::zeros(n_users, n_slots);
  out.d = WastageSchedule::zeros(n_users, n_slots);
  out.x.assign(n_users, BdpBfpSet::trivial(n_slots));

  // Wastage depends only on a user's own energy profile.
  std::vector<std::vector<double>> wastage(n_users);
  for (std::size_t n = 0; n < n_users; ++n) {
    wastage[n] = optimal_wastage(scenario.user(n)).d_star;
  }

  double previous = 0.0;
  for (std::size_t m = 1; m <= max_iter; ++m) {
    for (std::size_t n = 0; n < n_users; ++n) {
      SingleUserSolution sol =
          solve_single(effective_env(scenario, out.p, n), wastage[n]);
      out.p.p[n] = std::move(sol.p);
      out.d.d[n] = std::move(sol.d);
      out.x[n] = std::move(sol.x);
      out.max_fill_residual =
          std::max(out.max_fill_residual, sol.max_fill_residual);
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

double first_iteration_gap_bound(std::size_t num_users, std::size_t num_slots) {
  if (num_users < 1 || num_slots < 1) {
    throw std::invalid_argument("first_iteration_gap_bound: need N, K >= 1");
  }
  return static_cast<double>(num_users - 1) * static_cast<double>(num_slots) /
         2.0;
}

}  // namespace ehwf
