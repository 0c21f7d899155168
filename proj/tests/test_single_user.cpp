#include <doctest.h>

#include <cmath>

#include "convex_oracle.hpp"
#include "ehwf/single_user.hpp"
#include "ehwf/verify.hpp"
#include "helpers.hpp"

using namespace ehwf;
using testing::make_env;
using testing::max_abs_diff;

namespace {

// Battery at the end of every slot under the solver's own (p, d).
std::vector<double> levels_of(const UserEnv& env, const SingleUserSolution& s) {
  return battery_trace(env.harvest, s.p, s.d).level;
}

}  // namespace

TEST_CASE("optimal_wastage examples") {
  {
    const WastageResult w = optimal_wastage(make_env({10, 2}, {1, 1}, 3, 4));
    CHECK(w.d_star == std::vector<double>{3, 0});
    CHECK(w.p_greedy == std::vector<double>{4, 4});
    CHECK(w.battery.level == std::vector<double>{3, 1});
  }
  {
    const WastageResult w = optimal_wastage(make_env({0, 0, 0}, {1, 1, 1}, 3, 4));
    CHECK(w.d_star == std::vector<double>{0, 0, 0});
    CHECK(w.p_greedy == std::vector<double>{0, 0, 0});
  }
  {
    const WastageResult w = optimal_wastage(make_env({2, 2}, {1, 1}, 10, 5));
    CHECK(w.d_star == std::vector<double>{0, 0});
    CHECK(w.p_greedy == std::vector<double>{2, 2});
  }
  {
    const WastageResult w = optimal_wastage(make_env({5}, {1}, 0, 3));
    CHECK(w.d_star == std::vector<double>{2});
    CHECK(w.p_greedy == std::vector<double>{3});
  }
}

TEST_CASE("optimal_wastage spends the largest achievable total") {
  Rng rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const UserEnv env = testing::random_env(rng, 2 + rng.below(6));
    const WastageResult w = optimal_wastage(env);
    const auto lp = oracle::max_total_energy(env, 1e-10);
    CHECK(testing::sum(w.p_greedy) == doctest::Approx(lp.value).epsilon(1e-7));
    CHECK(check_feasible(testing::as_scenario(env), {{w.p_greedy}}, {{w.d_star}})
              .status == FeasibilityStatus::Feasible);
  }
}

TEST_CASE("effective_energy") {
  const UserEnv env = make_env({10, 2}, {1, 1}, 3, 4);
  const std::vector<double> d = {3, 0};
  CHECK(effective_energy(env, d).values() == std::vector<double>{7, 9});
  CHECK(effective_energy(env, d).at(0) == 0.0);
  const std::vector<double> none = {0, 0};
  CHECK(effective_energy(env, none).values() == std::vector<double>{10, 12});

  const UserEnv dead = make_env({3, 4}, {1, 1}, 0, 0);
  const auto w = optimal_wastage(dead);
  CHECK(effective_energy(dead, w.d_star).values() == std::vector<double>{0, 0});
}

TEST_CASE("segment_target_energy") {
  const EffectiveEnergy a({2, 4});
  CHECK(segment_target_energy(0, PointKind::BDP, 2, PointKind::BDP, a, 100, 3) ==
        doctest::Approx(4));
  const EffectiveEnergy b({2, 3, 5});
  CHECK(segment_target_energy(1, PointKind::BFP, 3, PointKind::BDP, b, 2, 10) ==
        doctest::Approx(5));
  const EffectiveEnergy c({3, 6});
  CHECK(segment_target_energy(0, PointKind::BDP, 2, PointKind::BFP, c, 2, 10) ==
        doctest::Approx(4));
  // Capped by the slots that can transmit.
  CHECK(segment_target_energy(0, PointKind::BDP, 2, PointKind::BDP, c, 2, 10, 1) ==
        doctest::Approx(6));
  CHECK(segment_target_energy(0, PointKind::BDP, 2, PointKind::BDP, c, 2, 1) ==
        doctest::Approx(2));
  // Never negative.
  CHECK(segment_target_energy(0, PointKind::BDP, 1, PointKind::BFP, c, 5, 10) ==
        0.0);
}

TEST_CASE("water_fill_segment examples") {
  {
    const auto s = water_fill_segment(std::vector<double>{1, 1}, 2, 10);
    CHECK(s.p[0] == doctest::Approx(1));
    CHECK(s.p[1] == doctest::Approx(1));
    CHECK(s.w == doctest::Approx(0.5));
  }
  {
    const auto s = water_fill_segment(std::vector<double>{2, 1}, 1, 10);
    CHECK(s.p[0] == doctest::Approx(0.75));
    CHECK(s.p[1] == doctest::Approx(0.25));
    CHECK(s.w == doctest::Approx(0.8));
  }
  {
    const auto s = water_fill_segment(std::vector<double>{2, 1}, 1, 0.6);
    CHECK(s.p[0] == doctest::Approx(0.6));
    CHECK(s.p[1] == doctest::Approx(0.4));
    CHECK(s.w == doctest::Approx(1 / 1.4));
  }
  {
    const auto s = water_fill_segment(std::vector<double>{2, 1}, 0, 5);
    CHECK(s.p == std::vector<double>{0, 0});
    CHECK(std::isinf(s.w));
    CHECK(s.height() == 0.0);
  }
  {
    // Zero-gain slots receive nothing.
    const auto s = water_fill_segment(std::vector<double>{0, 1}, 3, 10);
    CHECK(s.p[0] == 0.0);
    CHECK(s.p[1] == doctest::Approx(3));
  }
  {
    // Uncapped.
    const auto s = water_fill_segment(std::vector<double>{1, 0.5}, 5,
                                      std::numeric_limits<double>::infinity());
    CHECK(s.p[0] == doctest::Approx(3));
    CHECK(s.p[1] == doctest::Approx(2));
  }
  CHECK_THROWS_AS(water_fill_segment(std::vector<double>{1, 1}, 5, 2),
                  std::domain_error);
  CHECK_THROWS_AS(water_fill_segment(std::vector<double>{0, 0}, 1, 2),
                  std::domain_error);
  CHECK_THROWS_AS(water_fill_segment(std::vector<double>{0, 1}, 3, 2),
                  std::domain_error);
}

TEST_CASE("water_fill_segment agrees with bisection") {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + rng.below(12);
    std::vector<double> g(k);
    std::size_t usable = 0;
    for (double& x : g) {
      x = rng.uniform() < 0.15 ? 0.0 : rng.exponential();
      usable += x > 0.0;
    }
    if (usable == 0) continue;
    const double cap = rng.uniform() < 0.2 ? 1e300 : rng.uniform(0.2, 5);
    const double target =
        rng.uniform() * (cap > 1e299 ? 20.0 : cap * static_cast<double>(usable));
    const auto s = water_fill_segment(g, target, cap > 1e299 ? INFINITY : cap);
    double height = 0.0;
    const auto ref = oracle::bisection_fill(g, target, cap, &height);
    CHECK(max_abs_diff(s.p, ref) <= 1e-9 * std::max(1.0, target));
    CHECK(s.residual <= 1e-10 * std::max(1.0, target));
    // Every transmitting slot below the cap sits exactly on the level.
    for (std::size_t i = 0; i < k; ++i) {
      if (s.p[i] > 1e-12 && s.p[i] < cap - 1e-12) {
        CHECK(s.p[i] + 1 / g[i] == doctest::Approx(s.height()).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("classify_segment") {
  const std::vector<double> inflow = {1, 1};
  CHECK(classify_segment(std::vector<double>{1, 1}, inflow, 0, 5, 10) ==
        FeasibilityStatus::Feasible);
  CHECK(classify_segment(std::vector<double>{0}, std::vector<double>{5.5}, 0, 5,
                         10) == FeasibilityStatus::SemiFeasible);
  CHECK(classify_segment(std::vector<double>{1.1}, std::vector<double>{1}, 0, 5,
                         10) == FeasibilityStatus::Infeasible);
  CHECK(classify_segment(std::vector<double>{0, 3}, std::vector<double>{6, 0}, 0,
                         5, 10) == FeasibilityStatus::SemiFeasible);
  const auto b = segment_battery(std::vector<double>{1, 0}, inflow, 2, 5, 10);
  CHECK(b.level == std::vector<double>{2, 3});
}

TEST_CASE("BdpBfpSet invariants") {
  CHECK_NOTHROW(BdpBfpSet({{0, PointKind::BDP}, {2, PointKind::BFP},
                           {3, PointKind::BDP}}, 3));
  CHECK_THROWS_AS(BdpBfpSet({{0, PointKind::BFP}, {3, PointKind::BDP}}, 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(BdpBfpSet({{0, PointKind::BDP}, {3, PointKind::BFP}}, 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(BdpBfpSet({{0, PointKind::BDP}, {2, PointKind::BDP},
                             {2, PointKind::BFP}, {3, PointKind::BDP}}, 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(BdpBfpSet({{0, PointKind::BDP}, {2, PointKind::BDP}}, 3),
                  std::invalid_argument);
  CHECK(BdpBfpSet::trivial(4).num_segments() == 1);
  CHECK(to_json(BdpBfpSet({{0, PointKind::BDP}, {1, PointKind::BFP},
                           {2, PointKind::BDP}}, 2))
            .dump() == R"([[0,"BDP"],[1,"BFP"],[2,"BDP"]])");
}

TEST_CASE("solve_single examples") {
  SUBCASE("energy up front, constant channel") {
    const auto s = solve_single(make_env({3, 0, 0}, {1, 1, 1}, 5, 10));
    CHECK(max_abs_diff(s.p, std::vector<double>{1, 1, 1}) < 1e-12);
    CHECK(s.x == BdpBfpSet::trivial(3));
    REQUIRE(s.water_levels.size() == 1);
    CHECK(s.water_levels[0] == doctest::Approx(2));
  }
  SUBCASE("depletion after slot 1") {
    const UserEnv env = make_env({1, 3}, {1, 1}, 10, 10);
    const auto s = solve_single(env);
    CHECK(max_abs_diff(s.p, std::vector<double>{1, 3}) < 1e-12);
    CHECK(s.x == BdpBfpSet({{0, PointKind::BDP}, {1, PointKind::BDP},
                            {2, PointKind::BDP}}, 2));
    REQUIRE(s.water_levels.size() == 2);
    CHECK(s.water_levels[0] == doctest::Approx(2));
    CHECK(s.water_levels[1] == doctest::Approx(4));
    CHECK(single_user_rate(env.gain, s.p) ==
          doctest::Approx(testing::two_slot_optimum(env)).epsilon(1e-12));
  }
  SUBCASE("full battery after slot 1") {
    const UserEnv env = make_env({6, 0}, {1, 1}, 2, 10);
    const auto s = solve_single(env);
    CHECK(max_abs_diff(s.p, std::vector<double>{4, 2}) < 1e-12);
    CHECK(s.x == BdpBfpSet({{0, PointKind::BDP}, {1, PointKind::BFP},
                            {2, PointKind::BDP}}, 2));
    REQUIRE(s.water_levels.size() == 2);
    CHECK(s.water_levels[0] == doctest::Approx(5));
    CHECK(s.water_levels[1] == doctest::Approx(3));
    double p1 = 0.0;
    CHECK(single_user_rate(env.gain, s.p) ==
          doctest::Approx(testing::two_slot_optimum(env, &p1)).epsilon(1e-12));
    CHECK(p1 == doctest::Approx(4).epsilon(1e-6));
  }
}

TEST_CASE("solve_single matches the two-slot exhaustive optimum") {
  Rng rng(8);
  for (int trial = 0; trial < 400; ++trial) {
    const UserEnv env = testing::random_env(rng, 2, rng.uniform() < 0.2,
                                            rng.uniform() < 0.2);
    const auto s = solve_single(env);
    const double value = single_user_rate(env.gain, s.p);
    const double best = testing::two_slot_optimum(env);
    CHECK(value >= best - 1e-9);
    CHECK(value <= best + 1e-9);
  }
}

TEST_CASE("solve_single matches the interior-point optimum") {
  Rng rng(9);
  for (int trial = 0; trial < 80; ++trial) {
    const UserEnv env = testing::random_env(rng, 2 + rng.below(7));
    const auto s = solve_single(env);
    const auto ref = oracle::max_sum_rate(testing::as_scenario(env), 1e-11);
    const double value = single_user_rate(env.gain, s.p);
    CHECK(value >= ref.value - 1e-9);
    CHECK(value <= ref.value + ref.gap + 1e-9);
  }
}

TEST_CASE("solve_single structural properties") {
  Rng rng(10);
  for (int trial = 0; trial < 400; ++trial) {
    const UserEnv env = testing::random_env(rng, 1 + rng.below(30),
                                            trial % 3 == 0, trial % 4 == 0);
    const auto s = solve_single(env);
    const auto scenario = testing::as_scenario(env);
    REQUIRE(check_feasible(scenario, {{s.p}}, {{s.d}}).status ==
            FeasibilityStatus::Feasible);
    CHECK(s.max_fill_residual <= 1e-10);

    const auto levels = levels_of(env, s);
    const auto& pts = s.x.points();
    REQUIRE(s.water_levels.size() == pts.size() - 1);
    const double tol = 1e-9 * std::max(1.0, testing::sum(env.harvest));
    // A segment whose every usable slot sits at the cap reports the lowest
    // level consistent with it; any higher level fits just as well.
    const auto saturated = [&](std::size_t seg) {
      for (std::size_t k = pts[seg].slot; k < pts[seg + 1].slot; ++k) {
        if (env.gain[k] > 0.0 && s.p[k] < env.power_max - 1e-12) return false;
      }
      return true;
    };
    for (std::size_t i = 0; i + 1 < s.water_levels.size(); ++i) {
      const std::size_t slot = pts[i + 1].slot;
      const double before = s.water_levels[i], after = s.water_levels[i + 1];
      const double battery = levels[slot - 1];
      // A level may rise only where the battery is empty and fall only where
      // it is full; the point's label says which. Level 0 marks a segment
      // with nothing to spend and has no ordering.
      const bool real = before > 0.0 && after > 0.0;
      if (real && after > before * (1 + 1e-9) && !saturated(i)) {
        CHECK(battery <= tol);
      }
      if (real && after < before * (1 - 1e-9) && !saturated(i + 1)) {
        CHECK(battery >= env.battery_max - tol);
      }
      if (pts[i + 1].kind == PointKind::BDP) {
        CHECK(battery <= tol);
      } else {
        CHECK(battery >= env.battery_max - tol);
      }
    }
    // Pointwise water-filling form within each segment.
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double h = s.water_levels[i];
      for (std::size_t k = pts[i].slot; k < pts[i + 1].slot; ++k) {
        const double g = env.gain[k];
        const double expect =
            (g > 0.0 && h > 0.0)
                ? std::min(env.power_max, std::max(0.0, h - 1.0 / g))
                : 0.0;
        CHECK(s.p[k] == doctest::Approx(expect).epsilon(1e-9).scale(1.0));
      }
    }
  }
}

TEST_CASE("solve_single indexed and direct searches agree") {
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const UserEnv env = testing::random_env(rng, 1 + rng.below(40),
                                            trial % 2 == 0, trial % 5 == 0);
    const auto fast = solve_single(env);
    const auto slow = detail::solve_single_direct(env);
    CHECK(max_abs_diff(fast.p, slow.p) <= 1e-12);
    CHECK(fast.x == slow.x);
  }
}

TEST_CASE("solve_single degenerate cases") {
  SUBCASE("no battery spends each slot's harvest") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
      UserEnv env = testing::random_env(rng, 1 + rng.below(15));
      env.battery_max = 0.0;
      const auto s = solve_single(env);
      for (std::size_t k = 0; k < env.num_slots(); ++k) {
        const double expect =
            env.gain[k] > 0.0 ? std::min(env.power_max, env.harvest[k]) : 0.0;
        CHECK(s.p[k] == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
  SUBCASE("zero harvest") {
    const auto s = solve_single(make_env({0, 0, 0}, {1, 2, 3}, 5, 5));
    CHECK(s.p == std::vector<double>{0, 0, 0});
  }
  SUBCASE("zero gains waste what they cannot use") {
    const UserEnv env = make_env({4, 4}, {0, 0}, 2, 5);
    const auto s = solve_single(env);
    CHECK(s.p == std::vector<double>{0, 0});
    CHECK(check_feasible(testing::as_scenario(env), {{s.p}}, {{s.d}}).status ==
          FeasibilityStatus::Feasible);
  }
  SUBCASE("K = 1") {
    const auto s = solve_single(make_env({7}, {0.3}, 5, 4));
    CHECK(s.p == std::vector<double>{4});
  }
  SUBCASE("invalid env throws") {
    CHECK_THROWS_AS(solve_single(make_env({1, 1}, {1}, 1, 1)),
                    std::invalid_argument);
  }
}

TEST_CASE("rescheduled wastage leaves the schedule unchanged") {
  Rng rng(14);
  std::size_t engineered = 0;
  for (int trial = 0; trial < 400 && engineered < 60; ++trial) {
    UserEnv env = testing::random_env(rng, 4 + rng.below(12));
    env.power_max = 2.0;
    env.battery_max = 3.0;
    const auto d = reschedule_wastage(env, rng.uniform(0.2, 1.0), rng);
    if (!d) continue;
    ++engineered;
    const auto base = solve_single(env);
    const auto moved = solve_single(env, *d);
    CHECK(max_abs_diff(base.p, moved.p) <= 1e-8);
  }
  CHECK(engineered >= 30);
}
