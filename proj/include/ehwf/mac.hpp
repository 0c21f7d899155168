#pragma once

// Multi-user sum-rate maximization by best-response sweeps: each user in turn
// solves its single-user problem against the interference of the others.

#include <cstddef>
#include <vector>

#include "ehwf/model.hpp"
#include "ehwf/single_user.hpp"

namespace ehwf {

struct MacSolution {
  TransmissionSchedule p;
  WastageSchedule d;
  /// Sum rate after each sweep, V^(1), V^(2), ...
  std::vector<double> trace;
  /// Number of completed sweeps.
  std::size_t iterations = 0;
  bool converged = false;
  /// Boundary points of each user's last best response.
  std::vector<BdpBfpSet> x;
  /// Largest relative water-fill residual over every best response.
  double max_fill_residual = 0.0;
};

/// H[n][k] / (1 + sum_{i != n} p[i][k] H[i][k]).
double effective_gain(const Scenario& scenario, const TransmissionSchedule& p,
                      std::size_t user, std::size_t slot);

/// User n's own energy constraints with the effective gains as its channel.
UserEnv effective_env(const Scenario& scenario, const TransmissionSchedule& p,
                      std::size_t user);

/// Optimal schedule of user n with every other user's schedule held fixed.
std::vector<double> best_response(const Scenario& scenario,
                                  const TransmissionSchedule& p,
                                  std::size_t user);

inline constexpr double kDefaultMacEps = 1e-5;
inline constexpr std::size_t kDefaultMacIterations = 50;

/// Starts from p = 0 (V^(0) = 0) and sweeps users 0..N-1 until the sum rate
/// moves by at most `eps` between sweeps or `max_iter` sweeps have run.
/// Throws std::invalid_argument unless eps > 0 and max_iter >= 1.
MacSolution solve_mac(const Scenario& scenario, double eps = kDefaultMacEps,
                      std::size_t max_iter = kDefaultMacIterations);

/// (N - 1) K / 2 nats: how far the first sweep can be from the optimum.
double first_iteration_gap_bound(std::size_t num_users, std::size_t num_slots);

}  // namespace ehwf
