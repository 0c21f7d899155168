#include "ehwf/single_user.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "level_index.hpp"

namespace ehwf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cap_of(std::size_t usable, double power_max) {
  return usable == 0 ? 0.0 : static_cast<double>(usable) * power_max;
}

void allocate(std::span<const double> gains, double height, double cap,
              std::vector<double>& p) {
  p.resize(gains.size());
  for (std::size_t k = 0; k < gains.size(); ++k) {
    p[k] = gains[k] > 0.0 ? std::clamp(height - 1.0 / gains[k], 0.0, cap) : 0.0;
  }
}

double total(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

}  // namespace

namespace {

// Forward greedy pass: each slot spends min(cap, available) and discards what
// still overflows the battery. `prior` is wastage already committed.
WastageResult greedy_pass(const UserEnv& env, std::span<const double> prior,
                          bool skip_dead_slots) {
  const std::size_t n = env.num_slots();
  WastageResult out;
  out.d_star.resize(n);
  out.p_greedy.resize(n);
  out.battery.level.resize(n);
  double battery = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double available =
        battery + env.harvest[k] - (prior.empty() ? 0.0 : prior[k]);
    const double cap =
        skip_dead_slots && !(env.gain[k] > 0.0) ? 0.0 : env.power_max;
    const double p = std::clamp(available, 0.0, cap);
    const double d = std::max(available - p - env.battery_max, 0.0);
    battery = available - p - d;
    out.p_greedy[k] = p;
    out.d_star[k] = d;
    out.battery.level[k] = battery;
  }
  return out;
}

bool has_dead_slot(const UserEnv& env) {
  return std::any_of(env.gain.begin(), env.gain.end(),
                     [](double g) { return !(g > 0.0); });
}

}  // namespace

WastageResult optimal_wastage(const UserEnv& env) {
  validate(env);
  return greedy_pass(env, {}, false);
}

EffectiveEnergy effective_energy(const UserEnv& env,
                                 std::span<const double> wastage) {
  if (wastage.size() != env.num_slots()) {
    throw std::invalid_argument("effective_energy: dimension mismatch");
  }
  std::vector<double> cumulative(env.num_slots());
  double harvested = 0.0, wasted = 0.0;
  for (std::size_t k = 0; k < env.num_slots(); ++k) {
    harvested += env.harvest[k];
    wasted += wastage[k];
    cumulative[k] = harvested - wasted;
  }
  return EffectiveEnergy(std::move(cumulative));
}

BdpBfpSet::BdpBfpSet(std::vector<BoundaryPoint> points, std::size_t num_slots)
    : points_(std::move(points)), num_slots_(num_slots) {
  if (num_slots_ == 0) {
    throw std::invalid_argument("BdpBfpSet: num_slots must be positive");
  }
  if (points_.size() < 2) {
    throw std::invalid_argument("BdpBfpSet: needs at least two points");
  }
  if (points_.front() != BoundaryPoint{0, PointKind::BDP}) {
    throw std::invalid_argument("BdpBfpSet: must start with (0, BDP)");
  }
  if (points_.back() != BoundaryPoint{num_slots_, PointKind::BDP}) {
    throw std::invalid_argument("BdpBfpSet: must end with (K, BDP)");
  }
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (points_[i].slot <= points_[i - 1].slot) {
      throw std::invalid_argument("BdpBfpSet: slots must strictly increase");
    }
  }
}

BdpBfpSet BdpBfpSet::trivial(std::size_t num_slots) {
  return BdpBfpSet({{0, PointKind::BDP}, {num_slots, PointKind::BDP}},
                   num_slots);
}

nlohmann::json to_json(const BdpBfpSet& set) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& pt : set.points()) {
    out.push_back({pt.slot, pt.kind == PointKind::BDP ? "BDP" : "BFP"});
  }
  return out;
}

double segment_target_energy(std::size_t a, PointKind kind_a, std::size_t b,
                             PointKind kind_b, const EffectiveEnergy& e_tilde,
                             double battery_max, double power_max,
                             std::optional<std::size_t> usable_slots) {
  if (a >= b || b > e_tilde.num_slots()) {
    throw std::invalid_argument("segment_target_energy: need 0 <= a < b <= K");
  }
  const int shift = (kind_a == PointKind::BFP ? 1 : 0) -
                    (kind_b == PointKind::BFP ? 1 : 0);
  double energy = e_tilde.at(b) - e_tilde.at(a);
  if (shift != 0) energy += shift * battery_max;
  const double cap = cap_of(usable_slots.value_or(b - a), power_max);
  return std::max(0.0, std::min(cap, energy));
}

double SegmentSolution::height() const {
  return std::isinf(w) ? 0.0 : 1.0 / w;
}

SegmentSolution water_fill_segment(std::span<const double> gains,
                                   double target_energy, double power_max) {
  if (std::isnan(target_energy) || target_energy < -kFeasTol) {
    throw std::invalid_argument("water_fill_segment: negative target energy");
  }
  if (std::isnan(power_max) || power_max < 0.0) {
    throw std::invalid_argument("water_fill_segment: negative power cap");
  }
  SegmentSolution out;
  out.p.assign(gains.size(), 0.0);
  const double target = std::max(target_energy, 0.0);
  if (target == 0.0) return out;

  std::size_t usable = 0;
  double highest = 0.0;
  for (double g : gains) {
    if (std::isnan(g) || g < 0.0) {
      throw std::invalid_argument("water_fill_segment: negative gain");
    }
    if (g > 0.0) {
      ++usable;
      highest = std::max(highest, 1.0 / g);
    }
  }
  if (usable == 0) {
    throw std::domain_error(
        "water_fill_segment: positive target on a segment with no usable slot");
  }
  if (target > cap_of(gains.size(), power_max) + kFeasTol) {
    throw std::domain_error("water_fill_segment: target exceeds segment capacity");
  }
  const double capacity = cap_of(usable, power_max);
  if (target > capacity + kFeasTol) {
    throw std::domain_error(
        "water_fill_segment: target exceeds what the usable slots absorb");
  }

  if (target >= capacity) {
    // Every usable slot runs at the cap; report the lowest such height.
    allocate(gains, highest + power_max, power_max, out.p);
    out.w = 1.0 / (highest + power_max);
    out.residual = std::abs(total(out.p) - target);
    return out;
  }

  // Walk the sorted breakpoints 1/g and 1/g + P; the absorbed energy is
  // linear between consecutive ones.
  std::vector<double> inverse;
  inverse.reserve(usable);
  for (double g : gains) {
    if (g > 0.0) inverse.push_back(1.0 / g);
  }
  std::sort(inverse.begin(), inverse.end());
  const bool capped = std::isfinite(power_max);
  double hi = kInf, slope = 0.0, offset = 0.0, previous = inverse.front();
  for (std::size_t i = 0, j = 0; i < inverse.size() || (capped && j < i);) {
    const bool is_start =
        i < inverse.size() && (!capped || inverse[i] <= inverse[j] + power_max);
    const double t = is_start ? inverse[i] : inverse[j] + power_max;
    if (slope > 0.0 && t * slope - offset >= target) {
      hi = std::clamp((target + offset) / slope, previous, t);
      break;
    }
    if (is_start) {
      slope += 1.0;
      offset += t;
      ++i;
    } else {
      slope -= 1.0;
      offset -= t;
      ++j;
    }
    previous = t;
  }
  if (std::isinf(hi)) hi = slope > 0.0 ? (target + offset) / slope : previous;

  // Close the remaining gap exactly on the linear piece containing `hi`.
  double height = hi;
  std::size_t free_count = 0, saturated = 0;
  double free_inverse = 0.0;
  for (double g : gains) {
    if (!(g > 0.0)) continue;
    const double x = 1.0 / g;
    if (hi - x >= power_max) {
      ++saturated;
    } else if (hi > x) {
      ++free_count;
      free_inverse += x;
    }
  }
  std::vector<double> p_hi;
  allocate(gains, hi, power_max, p_hi);
  double best_residual = std::abs(total(p_hi) - target);
  out.p = std::move(p_hi);
  if (free_count > 0) {
    const double sat_energy =
        saturated == 0 ? 0.0 : static_cast<double>(saturated) * power_max;
    const double exact =
        (target - sat_energy + free_inverse) / static_cast<double>(free_count);
    std::vector<double> p_exact;
    allocate(gains, exact, power_max, p_exact);
    const double residual = std::abs(total(p_exact) - target);
    if (residual < best_residual) {
      best_residual = residual;
      out.p = std::move(p_exact);
      height = exact;
    }
  }
  out.w = 1.0 / height;
  out.residual = best_residual;
  return out;
}

SegmentBattery segment_battery(std::span<const double> p,
                               std::span<const double> inflow,
                               double start_level, double battery_max,
                               double power_max) {
  if (p.size() != inflow.size()) {
    throw std::invalid_argument("segment_battery: dimension mismatch");
  }
  SegmentBattery out;
  out.level.resize(p.size());
  bool overflow = false, broken = false;
  double level = start_level;
  for (std::size_t j = 0; j < p.size(); ++j) {
    level += inflow[j] - p[j];
    out.level[j] = level;
    if (p[j] < -kFeasTol || p[j] > power_max + kFeasTol) broken = true;
    if (level < -kFeasTol) broken = true;
    if (level > battery_max + kFeasTol) overflow = true;
  }
  out.status = broken     ? FeasibilityStatus::Infeasible
               : overflow ? FeasibilityStatus::SemiFeasible
                          : FeasibilityStatus::Feasible;
  return out;
}

FeasibilityStatus classify_segment(std::span<const double> p,
                                   std::span<const double> inflow,
                                   double start_level, double battery_max,
                                   double power_max) {
  return segment_battery(p, inflow, start_level, battery_max, power_max).status;
}

namespace {

constexpr double kHeightSlack = 1e-9;

// x exceeds bound by more than the height tolerance.
bool above(double x, double bound) {
  return x > bound * (1.0 + kHeightSlack) + 1e-12;
}

// Max segment tree answering "last index before `end` whose value is above x".
class RightmostAbove {
 public:
  void assign(const std::vector<double>& values) {
    size_ = 1;
    while (size_ < values.size()) size_ *= 2;
    tree_.assign(2 * size_, -kInf);
    std::copy(values.begin(), values.end(), tree_.begin() + size_);
    for (std::size_t i = size_ - 1; i > 0; --i) {
      tree_[i] = std::max(tree_[2 * i], tree_[2 * i + 1]);
    }
  }

  std::optional<std::size_t> find(std::size_t end, double x) const {
    return descend(1, 0, size_, end, x);
  }

 private:
  std::optional<std::size_t> descend(std::size_t node, std::size_t lo,
                                     std::size_t hi, std::size_t end,
                                     double x) const {
    if (lo >= end || !above(tree_[node], x)) return std::nullopt;
    if (hi - lo == 1) return lo;
    const std::size_t mid = lo + (hi - lo) / 2;
    if (auto right = descend(2 * node + 1, mid, hi, end, x)) return right;
    return descend(2 * node, lo, mid, end, x);
  }

  std::size_t size_ = 0;
  std::vector<double> tree_;
};

// Thrown when the height-based classification disagrees with a direct
// evaluation; the caller then reruns the search evaluating every candidate.
struct SearchMismatch {};

// Forward/backward search over boundary points. The recursion of the search
// is a chain of tail calls, so it runs as a loop over a single pending task.
//
// A segment (a, k] with water height h overdraws the battery at slot i iff
// h exceeds the highest height at which (a, i] stays within the energy
// available by i, and overflows it iff h is below the lowest height at which
// (a, i] absorbs everything beyond B_max. Every task shares its start a with
// the last accepted point, so these per-slot bounds are computed once per
// accepted point and each classification becomes a lookup. Accepted segments
// are always re-evaluated directly.
class DynamicWaterFilling {
 public:
  DynamicWaterFilling(const UserEnv& env, std::span<const double> wastage,
                      bool direct)
      : env_(env),
        wastage_(wastage.begin(), wastage.end()),
        energy_(effective_energy(env, wastage)),
        index_(env.gain, env.power_max),
        direct_(direct) {
    const std::size_t n = env.num_slots();
    inflow_.resize(n);
    usable_prefix_.assign(n + 1, 0);
    for (std::size_t k = 1; k <= n; ++k) {
      inflow_[k - 1] = energy_.at(k) - energy_.at(k - 1);
      usable_prefix_[k] = usable_prefix_[k - 1] + (env.gain[k - 1] > 0.0 ? 1 : 0);
    }
  }

  SingleUserSolution run();

 private:
  struct Endpoint {
    std::size_t slot;
    PointKind kind;

    bool operator==(const Endpoint&) const = default;
  };

  struct Evaluation {
    SegmentSolution segment;
    SegmentBattery battery;
  };

  // Height bounds for segments starting at one point; index t is slot a+1+t.
  struct Bounds {
    Endpoint start;
    std::vector<double> min_ceiling;  // min over (a, i] of the overdraw bound
    RightmostAbove floor;             // overflow bound per slot
    std::vector<double> height_bdp;
    std::vector<double> height_bfp;
  };

  double start_level(PointKind kind) const {
    return kind == PointKind::BFP ? env_.battery_max : 0.0;
  }

  std::size_t usable(std::size_t a, std::size_t b) const {
    return usable_prefix_[b] - usable_prefix_[a];
  }

  double target(Endpoint a, Endpoint b) const {
    return segment_target_energy(a.slot, a.kind, b.slot, b.kind, energy_,
                                 env_.battery_max, env_.power_max,
                                 usable(a.slot, b.slot));
  }

  Evaluation evaluate(Endpoint a, Endpoint b);
  FeasibilityStatus status(Endpoint a, Endpoint b);
  std::optional<std::size_t> last_overflow(Endpoint a, Endpoint b);
  void prepare(Endpoint a);

  const UserEnv& env_;
  std::vector<double> wastage_;
  EffectiveEnergy energy_;
  std::vector<double> inflow_;
  std::vector<std::size_t> usable_prefix_;
  detail::LevelIndex index_;
  bool direct_;
  Bounds bounds_;
  double max_residual_ = 0.0;
  std::size_t fills_ = 0;
  struct Cached {
    Endpoint a, b;
    Evaluation eval;
  };
  std::optional<Cached> last_;
};

DynamicWaterFilling::Evaluation DynamicWaterFilling::evaluate(Endpoint a,
                                                              Endpoint b) {
  if (last_ && last_->a == a && last_->b == b) return last_->eval;
  const double energy = target(a, b);
  const std::size_t len = b.slot - a.slot;
  Evaluation ev;
  ev.segment = water_fill_segment(
      std::span<const double>(env_.gain).subspan(a.slot, len), energy,
      env_.power_max);
  ++fills_;
  if (energy > 0.0) {
    max_residual_ = std::max(max_residual_, ev.segment.residual / energy);
  }
  ev.battery = segment_battery(
      ev.segment.p, std::span<const double>(inflow_).subspan(a.slot, len),
      start_level(a.kind), env_.battery_max, env_.power_max);
  ev.segment.classification = ev.battery.status;
  last_ = Cached{a, b, ev};
  return ev;
}

void DynamicWaterFilling::prepare(Endpoint a) {
  const std::size_t n = env_.num_slots();
  const double consumed_before = energy_.at(a.slot) - start_level(a.kind);
  const double bmax = env_.battery_max;
  const std::size_t len = n - a.slot;
  std::vector<double> floor(len);
  bounds_.start = a;
  bounds_.min_ceiling.resize(len);
  bounds_.height_bdp.resize(len);
  bounds_.height_bfp.resize(len);
  index_.clear();
  double ceiling = kInf;
  for (std::size_t t = 0; t < len; ++t) {
    const std::size_t i = a.slot + 1 + t;
    index_.insert(i - 1);
    const double room = energy_.at(i) - consumed_before;
    const double cap = cap_of(usable(a.slot, i), env_.power_max);
    // Same absolute tolerance as the direct battery check.
    ceiling = std::min(ceiling, index_.highest_height_within(room + kFeasTol));
    bounds_.min_ceiling[t] = ceiling;
    floor[t] = index_.lowest_height_for(room - bmax - kFeasTol);
    bounds_.height_bdp[t] =
        index_.lowest_height_for(std::max(0.0, std::min(cap, room)));
    bounds_.height_bfp[t] =
        index_.lowest_height_for(std::max(0.0, std::min(cap, room - bmax)));
  }
  bounds_.floor.assign(floor);
}

std::optional<std::size_t> DynamicWaterFilling::last_overflow(Endpoint a,
                                                              Endpoint b) {
  if (direct_) {
    const Evaluation ev = evaluate(a, b);
    for (std::size_t j = ev.battery.level.size(); j > 0; --j) {
      if (ev.battery.level[j - 1] > env_.battery_max + kFeasTol) {
        return a.slot + j;
      }
    }
    return std::nullopt;
  }
  const std::size_t t = b.slot - a.slot - 1;
  const double h = b.kind == PointKind::BDP ? bounds_.height_bdp[t]
                                            : bounds_.height_bfp[t];
  const auto hit = bounds_.floor.find(t + 1, h);
  if (!hit) return std::nullopt;
  return a.slot + 1 + *hit;
}

FeasibilityStatus DynamicWaterFilling::status(Endpoint a, Endpoint b) {
  if (direct_) return evaluate(a, b).battery.status;
  const std::size_t t = b.slot - a.slot - 1;
  const double h = b.kind == PointKind::BDP ? bounds_.height_bdp[t]
                                            : bounds_.height_bfp[t];
  if (t > 0 && above(h, bounds_.min_ceiling[t - 1])) {
    return FeasibilityStatus::Infeasible;
  }
  return last_overflow(a, b) ? FeasibilityStatus::SemiFeasible
                             : FeasibilityStatus::Feasible;
}

SingleUserSolution DynamicWaterFilling::run() {
  const std::size_t n = env_.num_slots();
  std::vector<BoundaryPoint> points{{0, PointKind::BDP}};
  std::vector<SegmentSolution> segments;

  const auto accept = [&](Endpoint a, Endpoint end) {
    Evaluation ev = evaluate(a, end);
    if (ev.battery.status != FeasibilityStatus::Feasible) {
      if (direct_) throw std::logic_error("solve_single: inconsistent search");
      throw SearchMismatch{};
    }
    points.push_back({end.slot, end.kind});
    segments.push_back(std::move(ev.segment));
    if (!direct_ && end.slot < n) prepare(end);
  };

  enum class Op { Forward, Backward };
  struct Task {
    Op op;
    Endpoint a, b;
  };
  Task task{Op::Forward, {0, PointKind::BDP}, {n, PointKind::BDP}};
  if (!direct_) prepare(task.a);

  const std::size_t step_limit = 8 * n * n + 64;
  for (std::size_t step = 0;; ++step) {
    if (step > step_limit) {
      throw std::logic_error("solve_single: boundary search did not terminate");
    }
    const Endpoint a = task.a;
    if (task.op == Op::Forward) {
      if (a.slot == n) break;
      // Largest end point whose schedule is feasible or semi-feasible; points
      // before b are tried as BDPs, b keeps its own kind.
      std::optional<Endpoint> end;
      FeasibilityStatus st = FeasibilityStatus::Infeasible;
      for (std::size_t k = task.b.slot; k > a.slot; --k) {
        const Endpoint cand{k, k == task.b.slot ? task.b.kind : PointKind::BDP};
        st = status(a, cand);
        if (st != FeasibilityStatus::Infeasible) {
          end = cand;
          break;
        }
      }
      if (!end) {
        if (direct_) {
          throw std::logic_error("solve_single: no admissible segment end point");
        }
        throw SearchMismatch{};
      }
      if (st == FeasibilityStatus::Feasible) {
        accept(a, *end);
        task = {Op::Forward, *end, {n, PointKind::BDP}};
      } else {
        task = {Op::Backward, a, *end};
      }
      continue;
    }

    // Backward: pin the last point that overflows the battery as a BFP.
    const auto overflow = last_overflow(a, task.b);
    if (!overflow) {
      if (status(a, task.b) != FeasibilityStatus::Feasible) {
        if (direct_) throw std::logic_error("solve_single: inconsistent search");
        throw SearchMismatch{};
      }
      accept(a, task.b);
      task = {Op::Forward, task.b, {n, PointKind::BDP}};
      continue;
    }
    const Endpoint full{*overflow, PointKind::BFP};
    switch (status(a, full)) {
      case FeasibilityStatus::Feasible:
        accept(a, full);
        task = {Op::Forward, full, {n, PointKind::BDP}};
        break;
      case FeasibilityStatus::SemiFeasible:
        task = {Op::Backward, a, full};
        break;
      case FeasibilityStatus::Infeasible:
        task = {Op::Forward, a, full};
        break;
    }
  }

  SingleUserSolution out;
  out.p.reserve(n);
  for (const auto& seg : segments) {
    out.p.insert(out.p.end(), seg.p.begin(), seg.p.end());
    out.water_levels.push_back(seg.height());
  }
  // A full battery at the horizon is still reported as the closing (K, BDP).
  points.back().kind = PointKind::BDP;
  out.x = BdpBfpSet(std::move(points), n);
  out.d = wastage_;
  out.max_fill_residual = max_residual_;
  out.fill_calls = fills_;
  return out;
}

SingleUserSolution run_search(const UserEnv& env,
                              std::span<const double> wastage, bool direct) {
  if (!direct) {
    try {
      return DynamicWaterFilling(env, wastage, false).run();
    } catch (const SearchMismatch&) {
    }
  }
  return DynamicWaterFilling(env, wastage, true).run();
}

}  // namespace

namespace {

SingleUserSolution solve_with(const UserEnv& env,
                              std::span<const double> wastage, bool direct) {
  validate(env);
  if (env.num_slots() == 0) {
    throw std::invalid_argument("solve_single: need at least one slot");
  }
  if (wastage.size() != env.num_slots()) {
    throw std::invalid_argument("solve_single: wastage has wrong length");
  }
  for (double d : wastage) {
    if (!(d >= 0.0)) {
      throw std::invalid_argument("solve_single: wastage must be >= 0");
    }
  }
  if (!has_dead_slot(env)) return run_search(env, wastage, direct);
  // Energy a zero-gain slot would spend is wasted either way; book it as
  // wastage so that every segment can absorb its target.
  const WastageResult extra = greedy_pass(env, wastage, true);
  std::vector<double> total(wastage.begin(), wastage.end());
  for (std::size_t k = 0; k < total.size(); ++k) total[k] += extra.d_star[k];
  return run_search(env, total, direct);
}

}  // namespace

SingleUserSolution solve_single(const UserEnv& env,
                                std::span<const double> wastage) {
  return solve_with(env, wastage, false);
}

SingleUserSolution solve_single(const UserEnv& env) {
  validate(env);
  return solve_with(env, greedy_pass(env, {}, false).d_star, false);
}

namespace detail {

SingleUserSolution solve_single_direct(const UserEnv& env) {
  validate(env);
  return solve_with(env, greedy_pass(env, {}, false).d_star, true);
}

}  // namespace detail

}  // namespace ehwf
