#include <doctest.h>

#include "ehwf/baselines.hpp"
#include "ehwf/bench.hpp"
#include "ehwf/single_user.hpp"
#include "helpers.hpp"

using namespace ehwf;
using testing::as_scenario;
using testing::make_env;
using testing::max_abs_diff;

namespace {

bool feasible(const UserEnv& env, const PolicySchedule& s) {
  return check_feasible(as_scenario(env), {{s.p}}, {{s.d}}).status ==
         FeasibilityStatus::Feasible;
}

}  // namespace

TEST_CASE("greedy_policy") {
  const UserEnv env = make_env({10, 2}, {1, 1}, 3, 4);
  CHECK(greedy_policy(env).p == std::vector<double>{4, 4});
  CHECK(greedy_policy(env).d == optimal_wastage(env).d_star);
  CHECK(greedy_policy(make_env({0, 0}, {1, 1}, 3, 4)).p ==
        std::vector<double>{0, 0});
  CHECK(greedy_policy(make_env({2, 2}, {1, 1}, 3, 5)).p ==
        std::vector<double>{2, 2});
}

TEST_CASE("balanced_policy") {
  CHECK(balanced_policy(make_env({2, 2}, {1, 1}, 5, 5)).p ==
        std::vector<double>{2, 2});
  CHECK(balanced_policy(make_env({4, 0}, {1, 1}, 2, 5)).p ==
        std::vector<double>{2, 2});
  CHECK(balanced_policy(make_env({0, 4}, {1, 1}, 5, 5)).p ==
        std::vector<double>{0, 2});
  // tau = 4 is capped by P = 3; the rest overflows a 1-unit battery.
  const auto s = balanced_policy(make_env({8, 0}, {1, 1}, 1, 3));
  CHECK(s.p == std::vector<double>{3, 1});
  CHECK(s.d == std::vector<double>{4, 0});
}

TEST_CASE("staircase_wf") {
  {
    const auto s = staircase_wf(make_env({1, 3}, {1, 1}, 0.1, 0.1));
    CHECK(max_abs_diff(s.p, std::vector<double>{1, 3}) < 1e-12);
    REQUIRE(s.water_levels.size() == 2);
    CHECK(s.water_levels[0] == doctest::Approx(2));
    CHECK(s.water_levels[1] == doctest::Approx(4));
    CHECK(s.segment_ends == std::vector<std::size_t>{1, 2});
  }
  {
    const auto s = staircase_wf(make_env({9, 0, 0}, {2, 2, 2}, 1, 1));
    CHECK(max_abs_diff(s.p, std::vector<double>{3, 3, 3}) < 1e-12);
    CHECK(s.segment_ends == std::vector<std::size_t>{3});
  }
  {
    const auto s = staircase_wf(make_env({4.5}, {0.2}, 1, 1));
    CHECK(s.p == std::vector<double>{4.5});
  }
}

TEST_CASE("staircase levels never decrease") {
  Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const UserEnv env = testing::random_env(rng, 1 + rng.below(25),
                                            trial % 3 == 0, trial % 4 == 0);
    const auto s = staircase_wf(env);
    for (std::size_t i = 1; i < s.water_levels.size(); ++i) {
      CHECK(s.water_levels[i] >= s.water_levels[i - 1] * (1 - 1e-12));
    }
    // Causality alone: never spend energy before it arrives, spend it all.
    const auto e = cumulative_harvest(env.harvest);
    double spent = 0.0;
    for (std::size_t k = 0; k < env.num_slots(); ++k) {
      spent += s.p[k];
      CHECK(spent <= e[k] + 1e-9);
    }
    const bool any_gain = std::any_of(env.gain.begin(), env.gain.end(),
                                      [](double g) { return g > 0.0; });
    if (any_gain && env.gain.back() > 0.0) {
      CHECK(spent == doctest::Approx(e.back()).epsilon(1e-9));
    }
  }
}

TEST_CASE("modified_staircase") {
  // Staircase gives [6, 2] here: levels 7 - 1 and 7 - 5.
  const UserEnv env = make_env({8, 0}, {1, 0.2}, 100, 4);
  REQUIRE(max_abs_diff(staircase_wf(env).p, std::vector<double>{6, 2}) < 1e-12);
  const auto s = modified_staircase(env);
  CHECK(max_abs_diff(s.p, std::vector<double>{4, 2}) < 1e-12);
  CHECK(s.d == std::vector<double>{0, 0});

  const UserEnv slack = make_env({1, 3}, {1, 1}, 10, 10);
  CHECK(max_abs_diff(modified_staircase(slack).p, staircase_wf(slack).p) < 1e-12);

  const UserEnv mute = make_env({1, 3}, {1, 1}, 2, 0);
  const auto z = modified_staircase(mute);
  CHECK(z.p == std::vector<double>{0, 0});
  CHECK(z.d == std::vector<double>{0, 2});
}

TEST_CASE("baseline outputs are feasible") {
  Rng rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    const UserEnv env = testing::random_env(rng, 1 + rng.below(25),
                                            trial % 3 == 0, trial % 4 == 0);
    CHECK(feasible(env, greedy_policy(env)));
    CHECK(feasible(env, balanced_policy(env)));
    CHECK(feasible(env, modified_staircase(env)));
    const double opt = single_user_rate(env.gain, solve_single(env).p);
    for (const auto& s : {greedy_policy(env), balanced_policy(env),
                          modified_staircase(env)}) {
      CHECK(single_user_rate(env.gain, s.p) <= opt + 1e-9);
    }
  }
}

TEST_CASE("iterative_modified_staircase") {
  Rng rng(43);
  const UserEnv env = testing::random_env(rng, 12);
  const MacSolution one = iterative_modified_staircase(as_scenario(env));
  CHECK(one.p.p[0] == modified_staircase(env).p);
  CHECK(one.converged);

  const Scenario zero({{0, 0}, {0, 0}}, {{1, 2}, {3, 4}}, {1, 1}, {1, 1});
  CHECK(sum_rate(zero, iterative_modified_staircase(zero).p) == 0.0);

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    GenParams g;
    g.num_users = 5;
    g.harvest_mean = 8;
    g.harvest_var = 3.5;
    g.seed = seed;
    const Scenario s = gen_scenario(g);
    const MacSolution it = iterative_modified_staircase(s);
    CHECK(check_feasible(s, it.p, it.d).status == FeasibilityStatus::Feasible);
    CHECK(sum_rate(s, it.p) <= sum_rate(s, solve_mac(s, 1e-10, 1000).p) + 1e-5);
  }
  CHECK_THROWS_AS(iterative_modified_staircase(zero, 0.0), std::invalid_argument);
}

TEST_CASE("non_iterative_multiuser") {
  Rng rng(44);
  const UserEnv env = testing::random_env(rng, 9);
  CHECK(non_iterative_multiuser(Policy::Greedy, as_scenario(env)).p.p[0] ==
        greedy_policy(env).p);
  CHECK(non_iterative_multiuser(Policy::Balanced, as_scenario(env)).p.p[0] ==
        balanced_policy(env).p);
  CHECK(non_iterative_multiuser(Policy::Staircase, as_scenario(env)).p.p[0] ==
        modified_staircase(env).p);

  const Scenario twin = testing::stack({env, env});
  for (Policy p : {Policy::Greedy, Policy::Balanced, Policy::Staircase}) {
    const auto s = non_iterative_multiuser(p, twin);
    CHECK(s.p.p[0] == s.p.p[1]);
  }
  CHECK_THROWS_AS(non_iterative_multiuser(Policy::Optimal, twin),
                  std::invalid_argument);
  CHECK_THROWS_AS(non_iterative_multiuser(Policy::StaircaseIter, twin),
                  std::invalid_argument);

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    GenParams g;
    g.num_users = 5;
    g.harvest_mean = 6;
    g.harvest_var = 8;
    g.seed = seed;
    const Scenario s = gen_scenario(g);
    const double best = sum_rate(s, solve_mac(s, 1e-10, 1000).p);
    for (Policy p : {Policy::Greedy, Policy::Balanced, Policy::Staircase}) {
      const auto m = non_iterative_multiuser(p, s);
      CHECK(check_feasible(s, m.p, m.d).status == FeasibilityStatus::Feasible);
      CHECK(sum_rate(s, m.p) <= best + 1e-6);
    }
  }
}

TEST_CASE("policy names") {
  for (Policy p : all_policies()) CHECK(parse_policy(to_string(p)) == p);
  CHECK(parse_policy("staircase-iter") == Policy::StaircaseIter);
  CHECK_FALSE(parse_policy("Optimal").has_value());
  CHECK(all_policies().size() == 5);
}
