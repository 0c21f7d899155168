#include "ehwf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ehwf/baselines.hpp"

namespace ehwf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double total_energy(const UserEnv& env) {
  double acc = 0.0;
  for (double e : env.harvest) acc += e;
  return acc;
}

// Absolute tolerance on energies of the size found in this environment.
double energy_tol(const UserEnv& env) {
  return kFeasTol * std::max(1.0, total_energy(env));
}

// Largest violation of 0 <= p <= P, d >= 0, 0 <= B <= B_max.
double pair_violation(const UserEnv& env, std::span<const double> p,
                      std::span<const double> d,
                      std::vector<double>* battery = nullptr) {
  double worst = 0.0, level = 0.0;
  if (battery) battery->resize(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    level += env.harvest[k] - p[k] - d[k];
    if (battery) (*battery)[k] = level;
    worst = std::max({worst, -p[k], p[k] - env.power_max, -d[k], -level,
                      level - env.battery_max});
  }
  return worst;
}

struct Interval {
  double lo = -kInf;
  double hi = kInf;

  Interval intersect(const Interval& o) const {
    return {std::max(lo, o.lo), std::min(hi, o.hi)};
  }
  bool empty() const { return lo > hi; }
  // Relative size of the gap when empty.
  double gap() const {
    if (!empty()) return 0.0;
    const double scale = std::max({std::abs(lo), std::abs(hi), 1e-300});
    return (lo - hi) / scale;
  }
};

enum class Link { Equal, Rise, Fall, Free };

BatteryState classify_level(double level, double bmax, double tol) {
  const bool empty = std::abs(level) <= tol;
  const bool full = std::abs(level - bmax) <= tol;
  if (empty && full) return BatteryState::EmptyAndFull;
  if (empty) return BatteryState::Empty;
  if (full) return BatteryState::Full;
  return BatteryState::Interior;
}

std::string_view to_string(BatteryState s) {
  switch (s) {
    case BatteryState::Interior:
      return "interior";
    case BatteryState::Empty:
      return "empty";
    case BatteryState::Full:
      return "full";
    case BatteryState::EmptyAndFull:
      return "empty-and-full";
  }
  return "?";
}

void check_user_schedule(const UserEnv& env, std::span<const double> p,
                         std::span<const double> d, const char* who) {
  if (p.size() != env.num_slots() || d.size() != env.num_slots()) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  }
}

// Spends min(q, P, banked) slot by slot, wasting overflow; the result lies in
// the user's feasible set.
void repair(const UserEnv& env, std::vector<double>& q) {
  double battery = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double available = battery + env.harvest[k];
    q[k] = std::clamp(q[k], 0.0, std::min(env.power_max, available));
    battery = std::min(available - q[k], env.battery_max);
  }
}

}  // namespace

nlohmann::json to_json(const DualCertificate& cert) {
  nlohmann::json levels = nlohmann::json::array();
  for (double v : cert.water_levels) {
    levels.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json());
  }
  nlohmann::json states = nlohmann::json::array();
  for (auto s : cert.battery_state) states.push_back(to_string(s));
  nlohmann::json conditions = nlohmann::json::array();
  for (const auto& c : cert.conditions) {
    conditions.push_back({{"name", c.name},
                          {"pass", c.pass},
                          {"residual", c.residual},
                          {"tolerance", c.tolerance}});
  }
  return {{"pass", cert.pass},
          {"conditions", std::move(conditions)},
          {"water_levels", std::move(levels)},
          {"battery_state", std::move(states)},
          {"cap_active", cert.cap_active},
          {"zero_active", cert.zero_active}};
}

std::vector<double> overflow_wastage(const UserEnv& env,
                                     std::span<const double> p) {
  if (p.size() != env.num_slots()) {
    throw std::invalid_argument("overflow_wastage: dimension mismatch");
  }
  std::vector<double> d(p.size());
  double battery = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double left = battery + env.harvest[k] - p[k];
    d[k] = std::max(left - env.battery_max, 0.0);
    battery = left - d[k];
  }
  return d;
}

DualCertificate kkt_certificate(const UserEnv& env, std::span<const double> p,
                                const BdpBfpSet& x,
                                std::optional<std::span<const double>> d_in) {
  validate(env);
  const std::size_t n = env.num_slots();
  if (p.size() != n) {
    throw std::invalid_argument("kkt_certificate: p has wrong length");
  }
  if (x.num_slots() != n) {
    throw std::invalid_argument("kkt_certificate: boundary set has wrong K");
  }
  std::vector<double> d_own;
  if (!d_in) d_own = overflow_wastage(env, p);
  const std::span<const double> d = d_in ? *d_in : std::span<const double>(d_own);
  check_user_schedule(env, p, d, "kkt_certificate");

  const double etol = energy_tol(env);
  const double ptol = kFeasTol * std::max(1.0, env.power_max);
  DualCertificate cert;

  std::vector<double> battery;
  const double violation = pair_violation(env, p, d, &battery);
  cert.conditions.push_back(
      {"feasibility", violation <= etol, std::max(violation, 0.0), etol});

  // Admissible w per slot from the pointwise water-filling form; `chain`
  // adds w = 0 where energy is discarded.
  std::vector<Interval> slot(n), chain(n);
  cert.cap_active.resize(n);
  cert.zero_active.resize(n);
  cert.battery_state.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const bool at_zero = p[k] <= ptol;
    const bool at_cap = p[k] >= env.power_max - ptol;
    cert.zero_active[k] = at_zero;
    cert.cap_active[k] = at_cap;
    cert.battery_state[k] = classify_level(battery[k], env.battery_max, etol);
    const double h = env.gain[k];
    Interval iv;
    if (!(at_zero && at_cap)) {
      const double r = h / (1.0 + p[k] * h);
      const double lo = r * (1.0 - kCertTol), hi = r * (1.0 + kCertTol);
      if (at_zero) {
        iv.lo = lo;
      } else if (at_cap) {
        iv.hi = hi;
      } else {
        iv = {lo, hi};
      }
    }
    iv.lo = std::max(iv.lo, 0.0);
    slot[k] = iv;
    if (d[k] > etol) iv.hi = std::min(iv.hi, 0.0);
    chain[k] = iv;
  }

  // Same level throughout each segment of x.
  const auto& pts = x.points();
  double wf_residual = 0.0;
  cert.water_levels.assign(n, 0.0);
  for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
    Interval common;
    for (std::size_t k = pts[s].slot; k < pts[s + 1].slot; ++k) {
      common = common.intersect(slot[k]);
    }
    wf_residual = std::max(wf_residual, common.gap());
    double w = std::isfinite(common.hi) ? 0.5 * (common.lo + common.hi)
                                        : common.lo;
    if (common.empty()) w = common.hi;
    const double level = w > 0.0 ? 1.0 / w : kInf;
    for (std::size_t k = pts[s].slot; k < pts[s + 1].slot; ++k) {
      cert.water_levels[k] = level;
    }
  }
  cert.conditions.push_back(
      {"water_filling", wf_residual == 0.0, wf_residual, kCertTol});

  // Propagate the admissible set of w^k along the chain of slots: the level
  // may rise only at an empty battery and fall only at a full one, and
  // w^(K+1) = 0 closes the chain. Discarding energy inside a segment of x is
  // allowed where the battery is full, so the links follow the battery
  // rather than x.
  double order_residual = 0.0;
  Interval reach = chain[0];
  const auto link_at = [&](std::size_t k) {  // between slots k and k+1, 1-based
    switch (cert.battery_state[k - 1]) {
      case BatteryState::Empty:
        return Link::Rise;  // w^k >= w^(k+1)
      case BatteryState::Full:
        return Link::Fall;  // w^k <= w^(k+1)
      case BatteryState::EmptyAndFull:
        return Link::Free;
      case BatteryState::Interior:
        return Link::Equal;
    }
    return Link::Equal;
  };
  const auto step = [](const Interval& from, Link link) {
    switch (link) {
      case Link::Equal:
        return from;
      case Link::Rise:
        return Interval{-kInf, from.hi};
      case Link::Fall:
        return Interval{from.lo, kInf};
      case Link::Free:
        return Interval{};
    }
    return Interval{};
  };
  for (std::size_t k = 1; k <= n; ++k) {
    if (reach.empty()) {
      order_residual = std::max(order_residual, reach.gap());
      reach = chain[k - 1];
    }
    const Interval next =
        k < n ? chain[k] : Interval{0.0, 0.0};  // w^(K+1) = 0
    Interval moved = step(reach, link_at(k)).intersect(next);
    if (moved.empty()) {
      order_residual = std::max(order_residual, moved.gap());
      moved = next;
    }
    reach = moved;
  }
  cert.conditions.push_back(
      {"level_ordering", order_residual == 0.0, order_residual, kCertTol});

  cert.pass = std::all_of(cert.conditions.begin(), cert.conditions.end(),
                          [](const CertificateCondition& c) { return c.pass; });
  return cert;
}

BdpBfpSet infer_boundaries(const UserEnv& env, std::span<const double> p,
                           std::span<const double> d) {
  check_user_schedule(env, p, d, "infer_boundaries");
  const std::size_t n = env.num_slots();
  std::vector<double> battery;
  pair_violation(env, p, d, &battery);
  const double etol = energy_tol(env);
  std::vector<BoundaryPoint> points{{0, PointKind::BDP}};
  for (std::size_t k = 1; k < n; ++k) {
    switch (classify_level(battery[k - 1], env.battery_max, etol)) {
      case BatteryState::Empty:
      case BatteryState::EmptyAndFull:
        points.push_back({k, PointKind::BDP});
        break;
      case BatteryState::Full:
        points.push_back({k, PointKind::BFP});
        break;
      case BatteryState::Interior:
        break;
    }
  }
  points.push_back({n, PointKind::BDP});
  return BdpBfpSet(std::move(points), n);
}

std::vector<DualCertificate> kkt_certificate_mac(const Scenario& scenario,
                                                 const MacSolution& solution) {
  std::vector<DualCertificate> out;
  for (std::size_t n = 0; n < scenario.num_users(); ++n) {
    const UserEnv env = effective_env(scenario, solution.p, n);
    out.push_back(kkt_certificate(env, solution.p.p.at(n), solution.x.at(n),
                                  std::span<const double>(solution.d.d.at(n))));
  }
  return out;
}

ReducedPolytope::ReducedPolytope(std::vector<double> cumulative_energy,
                                 double battery_max, double power_max)
    : energy_(std::move(cumulative_energy)),
      battery_max_(battery_max),
      power_max_(power_max) {}

double ReducedPolytope::window_bound(std::size_t j, std::size_t k) const {
  if (j < 1 || j >= k || k > energy_.size()) {
    throw std::invalid_argument("window_bound: need 1 <= j < k <= K");
  }
  if (std::isinf(battery_max_)) return kInf;
  return energy_[k - 1] - energy_[j - 1] + battery_max_;
}

double ReducedPolytope::max_violation(std::span<const double> p) const {
  if (p.size() != energy_.size()) {
    throw std::invalid_argument("ReducedPolytope: dimension mismatch");
  }
  double worst = 0.0, sum = 0.0;
  // min over j < k of S_j - E^j, the tightest window start.
  double lowest_start = kInf;
  for (std::size_t k = 0; k < p.size(); ++k) {
    sum += p[k];
    const double slack = sum - energy_[k];
    worst = std::max({worst, -p[k], p[k] - power_max_, slack});
    if (std::isfinite(battery_max_) && std::isfinite(lowest_start)) {
      worst = std::max(worst, slack - lowest_start - battery_max_);
    }
    lowest_start = std::min(lowest_start, slack);
  }
  return worst;
}

ReducedPolytope reduce_polytope(const UserEnv& env) {
  validate(env);
  return ReducedPolytope(cumulative_harvest(env.harvest), env.battery_max,
                         env.power_max);
}

Matrix rate_gradient(const Scenario& scenario, const TransmissionSchedule& p) {
  const std::size_t n_users = scenario.num_users();
  const std::size_t n_slots = scenario.num_slots();
  if (p.p.size() != n_users) {
    throw std::invalid_argument("rate_gradient: dimension mismatch");
  }
  Matrix g(n_users, std::vector<double>(n_slots));
  for (std::size_t k = 0; k < n_slots; ++k) {
    double snr = 0.0;
    for (std::size_t n = 0; n < n_users; ++n) {
      snr += p.p[n].at(k) * scenario.gain(n)[k];
    }
    for (std::size_t n = 0; n < n_users; ++n) {
      g[n][k] = scenario.gain(n)[k] / (1.0 + snr);
    }
  }
  return g;
}

FirstOrderResult first_order_certificate(const Scenario& scenario,
                                         const TransmissionSchedule& p,
                                         std::size_t num_samples, double tol,
                                         std::uint64_t seed) {
  const std::size_t n_users = scenario.num_users();
  const std::size_t n_slots = scenario.num_slots();
  if (p.p.size() != n_users) {
    throw std::invalid_argument("first_order_certificate: dimension mismatch");
  }
  std::vector<UserEnv> envs;
  for (std::size_t n = 0; n < n_users; ++n) {
    envs.push_back(scenario.user(n));
    if (p.p[n].size() != n_slots) {
      throw std::invalid_argument("first_order_certificate: dimension mismatch");
    }
    if (!reduce_polytope(envs[n]).contains(p.p[n], energy_tol(envs[n]))) {
      throw std::invalid_argument(
          "first_order_certificate: schedule is not feasible");
    }
  }
  const Matrix grad = rate_gradient(scenario, p);
  // Directional derivatives are separable across users.
  const auto user_gain = [&](std::size_t n, const std::vector<double>& q) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n_slots; ++k) {
      acc += grad[n][k] * (q[k] - p.p[n][k]);
    }
    return acc;
  };

  FirstOrderResult out;
  out.worst = -kInf;
  const auto consider_all = [&](const TransmissionSchedule& q) {
    double acc = 0.0;
    for (std::size_t n = 0; n < n_users; ++n) acc += user_gain(n, q.p[n]);
    ++out.samples;
    if (acc > out.worst) {
      out.worst = acc;
      out.worst_direction = q;
    }
  };
  const auto consider_user = [&](std::size_t n, const std::vector<double>& q) {
    TransmissionSchedule full = p;
    full.p[n] = q;
    consider_all(full);
  };

  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    TransmissionSchedule q = p;
    for (auto& row : q.p) {
      for (double& v : row) v *= t;
    }
    consider_all(q);
  }
  for (Policy policy : {Policy::Greedy, Policy::Balanced, Policy::Staircase}) {
    const MultiuserSchedule s = non_iterative_multiuser(policy, scenario);
    consider_all(s.p);
    for (std::size_t n = 0; n < n_users; ++n) consider_user(n, s.p.p[n]);
  }
  for (std::size_t n = 0; n < n_users; ++n) {
    consider_user(n, solve_single(envs[n]).p);
  }

  Rng rng(seed);
  for (std::size_t s = 0; s < num_samples; ++s) {
    const std::size_t n = static_cast<std::size_t>(rng.below(n_users));
    const UserEnv& env = envs[n];
    std::vector<double> q = p.p[n];
    if (s % 2 == 0) {
      // Push one coordinate, or move energy between two slots.
      const std::size_t k = static_cast<std::size_t>(rng.below(n_slots));
      const std::size_t j = static_cast<std::size_t>(rng.below(n_slots));
      const double u = rng.uniform();
      const double delta = u * u * std::max(env.power_max, 1e-12);
      switch (rng.below(3)) {
        case 0:
          q[k] += delta;
          break;
        case 1:
          q[k] -= delta;
          break;
        default:
          q[k] -= delta;
          q[j] += delta;
          break;
      }
    } else {
      // Fresh draw, biased toward spending nothing or everything.
      for (double& v : q) {
        const double f = rng.uniform();
        v = f < 0.25 ? 0.0 : f > 0.75 ? kInf : rng.uniform() * env.power_max;
      }
    }
    repair(env, q);
    consider_user(n, q);
  }
  out.pass = out.worst <= tol;
  return out;
}

BruteForceResult brute_force_tiny(const Scenario& scenario,
                                  std::size_t resolution,
                                  std::size_t refinements) {
  const std::size_t n_users = scenario.num_users();
  const std::size_t n_slots = scenario.num_slots();
  if (n_users * n_slots > 6) {
    throw std::invalid_argument("brute_force_tiny: needs N*K <= 6");
  }
  if (resolution < 2) {
    throw std::invalid_argument("brute_force_tiny: resolution must be >= 2");
  }
  // Free variables: p[n][k] for k < K - 1.
  const std::size_t free_per_user = n_slots - 1;
  const std::size_t dims = n_users * free_per_user;
  std::vector<double> lo(dims, 0.0), hi(dims);
  for (std::size_t n = 0; n < n_users; ++n) {
    double energy = 0.0;
    for (std::size_t k = 0; k < free_per_user; ++k) {
      energy += scenario.harvest(n)[k];
      hi[n * free_per_user + k] = std::min(scenario.power_max(n), energy);
    }
  }

  const std::vector<double> top = hi;

  BruteForceResult best;
  best.value = -kInf;
  TransmissionSchedule q = TransmissionSchedule::zeros(n_users, n_slots);
  // Completes q from the free variables; false when infeasible.
  const auto complete = [&](const std::vector<double>& v) {
    for (std::size_t n = 0; n < n_users; ++n) {
      const auto e = scenario.harvest(n);
      const double cap = scenario.power_max(n);
      const double bmax = scenario.battery_max(n);
      double battery = 0.0;
      for (std::size_t k = 0; k + 1 < n_slots; ++k) {
        const double available = battery + e[k];
        double pk = v[n * free_per_user + k];
        if (pk > available + 1e-12) return false;
        pk = std::min(pk, available);
        q.p[n][k] = pk;
        battery = std::min(available - pk, bmax);
      }
      q.p[n][n_slots - 1] = std::min(cap, battery + e[n_slots - 1]);
    }
    return true;
  };

  std::vector<double> point(dims), center(dims);
  for (std::size_t round = 0; round <= refinements; ++round) {
    std::vector<std::size_t> idx(dims, 0);
    for (;;) {
      for (std::size_t i = 0; i < dims; ++i) {
        point[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(idx[i]) /
                               static_cast<double>(resolution - 1);
      }
      if (complete(point)) {
        ++best.evaluations;
        const double value = sum_rate(scenario, q);
        if (value > best.value) {
          best.value = value;
          best.p = q;
          center = point;
        }
      }
      std::size_t i = 0;
      while (i < dims && ++idx[i] == resolution) idx[i++] = 0;
      if (i == dims) break;
    }
    if (dims == 0) break;
    // Shrink to three grid steps either side of the incumbent.
    for (std::size_t i = 0; i < dims; ++i) {
      const double step = (hi[i] - lo[i]) / static_cast<double>(resolution - 1);
      lo[i] = std::max(0.0, center[i] - 3.0 * step);
      hi[i] = std::min(top[i], center[i] + 3.0 * step);
    }
  }
  return best;
}

WastageCheck wastage_minimality_check(
    const UserEnv& env,
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>&
        samples) {
  const WastageResult w = optimal_wastage(env);
  double minimal = 0.0;
  for (double v : w.d_star) minimal += v;
  const double etol = energy_tol(env);
  WastageCheck out;
  out.worst_margin = kInf;
  for (const auto& [p, d] : samples) {
    check_user_schedule(env, p, d, "wastage_minimality_check");
    if (pair_violation(env, p, d) > etol) {
      throw std::invalid_argument(
          "wastage_minimality_check: sample is not feasible");
    }
    double wasted = 0.0;
    for (double v : d) wasted += v;
    out.worst_margin = std::min(out.worst_margin, wasted - minimal);
  }
  out.pass = samples.empty() || out.worst_margin >= -etol;
  if (samples.empty()) out.worst_margin = 0.0;
  return out;
}

std::pair<std::vector<double>, std::vector<double>> random_feasible_pair(
    const UserEnv& env, Rng& rng) {
  validate(env);
  const std::size_t n = env.num_slots();
  for (;;) {
    std::vector<double> p(n), d(n);
    double battery = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double available = battery + env.harvest[k];
      const double f = rng.uniform();
      const double share = f < 0.2 ? 0.0 : f > 0.8 ? 1.0 : rng.uniform();
      p[k] = share * std::min(env.power_max, available);
      const double rest = available - p[k];
      const double forced = std::max(rest - env.battery_max, 0.0);
      const double extra =
          rng.uniform() < 0.3 ? rng.uniform() * (rest - forced) : 0.0;
      d[k] = forced + extra;
      battery = rest - d[k];
    }
    if (pair_violation(env, p, d) <= kFeasTol) return {std::move(p), std::move(d)};
  }
}

std::optional<std::vector<double>> reschedule_wastage(const UserEnv& env,
                                                      double fraction,
                                                      Rng& rng) {
  const WastageResult w = optimal_wastage(env);
  const std::size_t n = env.num_slots();
  const double etol = energy_tol(env);
  const double ptol = kFeasTol * std::max(1.0, env.power_max);
  struct Move {
    std::size_t from, to;
    double amount;
  };
  std::vector<Move> moves;
  for (std::size_t k = 1; k < n; ++k) {
    if (w.d_star[k] <= etol || w.p_greedy[k] < env.power_max - ptol) continue;
    double charge = kInf;
    for (std::size_t j = k; j-- > 0;) {
      if (w.p_greedy[j] < env.power_max - ptol) break;
      charge = std::min(charge, w.battery.level[j]);
      if (charge <= etol) break;
      moves.push_back({k, j, std::min(w.d_star[k], charge)});
    }
  }
  if (moves.empty()) return std::nullopt;
  const Move m = moves[static_cast<std::size_t>(rng.below(moves.size()))];
  std::vector<double> d = w.d_star;
  const double delta = fraction * m.amount;
  d[m.to] += delta;
  d[m.from] -= delta;
  return d;
}

}  // namespace ehwf
