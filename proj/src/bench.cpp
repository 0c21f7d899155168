#include "ehwf/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "ehwf/mac.hpp"

namespace ehwf {
namespace {

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string short_num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

void check_label(const std::string& s, const char* what) {
  if (s.find_first_of(",/\"\n\r") != std::string::npos)
    throw std::invalid_argument(std::string(what) +
                                " must not contain , / \" or newlines");
}

}  // namespace

void validate(const GenParams& params) {
  if (params.num_users < 1) throw std::invalid_argument("num_users must be >= 1");
  if (params.num_slots < 1) throw std::invalid_argument("num_slots must be >= 1");
  if (!(std::isfinite(params.harvest_mean) && params.harvest_mean >= 0.0))
    throw std::invalid_argument("harvest_mean must be finite and >= 0");
  if (!finite_positive(params.harvest_var))
    throw std::invalid_argument("harvest_var must be finite and > 0");
  if (!finite_positive(params.battery_max))
    throw std::invalid_argument("battery_max must be finite and > 0");
  if (!finite_positive(params.power_max))
    throw std::invalid_argument("power_max must be finite and > 0");
}

double truncated_gaussian(double mean, double var, Rng& rng) {
  const double sd = std::sqrt(var);
  for (;;) {
    const double x = mean + sd * rng.normal();
    if (x >= 0.0) return x;
  }
}

Scenario gen_scenario(const GenParams& params) {
  validate(params);
  const std::size_t n_users = params.num_users;
  const std::size_t k_slots = params.num_slots;
  Matrix harvest(n_users, std::vector<double>(k_slots));
  Matrix gain(n_users, std::vector<double>(k_slots));
  for (std::size_t n = 0; n < n_users; ++n) {
    Rng energy_rng(derive_seed(params.seed, {n, 0}));
    Rng gain_rng(derive_seed(params.seed, {n, 1}));
    for (std::size_t k = 0; k < k_slots; ++k) {
      harvest[n][k] =
          truncated_gaussian(params.harvest_mean, params.harvest_var, energy_rng);
      gain[n][k] = gain_rng.exponential(1.0);
    }
  }
  return Scenario(std::move(harvest), std::move(gain),
                  std::vector<double>(n_users, params.battery_max),
                  std::vector<double>(n_users, params.power_max));
}

// Presets ------------------------------------------------------------------

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"fig5", "fig6", "fig7",
                                                 "fig8", "fig9", "fig10"};
  return names;
}

ExperimentConfig preset(std::string_view name, std::size_t trials) {
  if (trials == 0) throw std::invalid_argument("trials must be >= 1");
  ExperimentConfig cfg;
  cfg.name = std::string(name);
  cfg.trials = trials;
  const std::vector<Policy> single = {Policy::Optimal, Policy::Greedy,
                                      Policy::Balanced, Policy::Staircase};

  GenParams base;
  base.num_users = 1;
  base.num_slots = 20;
  base.battery_max = 20.0;
  base.power_max = 15.0;

  auto sweep_v = [&](double m) {
    cfg.policies = single;
    for (int v = 1; v <= 6; ++v) {
      GenParams g = base;
      g.harvest_mean = m;
      g.harvest_var = v;
      cfg.points.push_back({cfg.name + ":v=" + std::to_string(v), g});
    }
  };
  auto sweep_b = [&](double pmax) {
    cfg.policies = single;
    for (int b = 15; b <= 30; b += 3) {
      GenParams g = base;
      g.harvest_mean = 7.5;
      g.harvest_var = 3.5;
      g.power_max = pmax;
      g.battery_max = b;
      cfg.points.push_back({cfg.name + ":B=" + std::to_string(b), g});
    }
  };
  auto sweep_m = [&](double v) {
    cfg.policies = all_policies();
    for (int m = 5; m <= 10; ++m) {
      GenParams g = base;
      g.num_users = 5;
      g.harvest_mean = m;
      g.harvest_var = v;
      cfg.points.push_back({cfg.name + ":m=" + std::to_string(m), g});
    }
  };

  if (name == "fig5") {
    sweep_v(5.0);
  } else if (name == "fig6") {
    sweep_v(10.0);
  } else if (name == "fig7") {
    sweep_b(15.0);
  } else if (name == "fig8") {
    sweep_b(10.0);
  } else if (name == "fig9") {
    sweep_m(3.5);
  } else if (name == "fig10") {
    sweep_m(8.0);
    cfg.traces = true;
  } else {
    throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
  }
  return cfg;
}

// Config parsing -------------------------------------------------------------

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& what) {
  throw ConfigError(what, 0, 0);
}

void line_column(std::string_view text, std::size_t byte, std::size_t& line,
                 std::size_t& column) {
  line = 1;
  column = 1;
  const std::size_t end = std::min(byte, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
}

double get_number(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number()) config_fail(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

std::size_t get_count(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number_unsigned())
    config_fail(std::string("'") + key + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

std::uint64_t get_seed(const json& j) {
  const json& v = j.at("seed");
  if (!v.is_number_unsigned())
    config_fail("'seed' must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

void set_param(GenParams& g, const std::string& key, double value) {
  auto count = [&](std::size_t& field) {
    if (!(value >= 1.0) || value != std::floor(value) || value > 1e9)
      config_fail("'" + key + "' must be a positive integer");
    field = static_cast<std::size_t>(value);
  };
  if (key == "num_users") {
    count(g.num_users);
  } else if (key == "num_slots") {
    count(g.num_slots);
  } else if (key == "harvest_mean") {
    g.harvest_mean = value;
  } else if (key == "harvest_var") {
    g.harvest_var = value;
  } else if (key == "battery_max") {
    g.battery_max = value;
  } else if (key == "power_max") {
    g.power_max = value;
  } else {
    config_fail("unknown parameter '" + key + "'");
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const char* where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok)
      config_fail(std::string("unknown key '") + item.key() + "' in " + where);
  }
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) config_fail("config must be a JSON object");
  ExperimentConfig cfg;
  if (j.contains("preset")) {
    check_keys(j, {"preset", "trials", "seed", "eps", "max_iter", "traces"},
               "preset config");
    if (!j.at("preset").is_string()) config_fail("'preset' must be a string");
    std::size_t trials = kDefaultTrials;
    if (j.contains("trials")) trials = get_count(j, "trials");
    try {
      cfg = preset(j.at("preset").get<std::string>(), trials);
    } catch (const std::invalid_argument& e) {
      config_fail(e.what());
    }
  } else {
    check_keys(j,
               {"name", "params", "sweep", "policies", "trials", "seed", "eps",
                "max_iter", "traces"},
               "config");
    cfg.name = "custom";
    if (j.contains("name")) {
      if (!j.at("name").is_string()) config_fail("'name' must be a string");
      cfg.name = j.at("name").get<std::string>();
    }
    GenParams base;
    if (j.contains("params")) {
      const json& p = j.at("params");
      if (!p.is_object()) config_fail("'params' must be an object");
      for (const auto& item : p.items()) {
        if (!item.value().is_number())
          config_fail("parameter '" + item.key() + "' must be a number");
        set_param(base, item.key(), item.value().get<double>());
      }
    }
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      if (!s.is_object()) config_fail("'sweep' must be an object");
      check_keys(s, {"parameter", "values"}, "sweep");
      if (!s.contains("parameter") || !s.at("parameter").is_string())
        config_fail("'sweep.parameter' must be a string");
      if (!s.contains("values") || !s.at("values").is_array() ||
          s.at("values").empty())
        config_fail("'sweep.values' must be a nonempty array");
      const std::string param = s.at("parameter").get<std::string>();
      for (const json& v : s.at("values")) {
        if (!v.is_number()) config_fail("sweep values must be numbers");
        GenParams g = base;
        set_param(g, param, v.get<double>());
        cfg.points.push_back(
            {cfg.name + ":" + param + "=" + short_num(v.get<double>()), g});
      }
    } else {
      cfg.points.push_back({cfg.name, base});
    }
    cfg.policies = all_policies();
    if (j.contains("policies")) {
      const json& ps = j.at("policies");
      if (!ps.is_array() || ps.empty())
        config_fail("'policies' must be a nonempty array");
      cfg.policies.clear();
      for (const json& p : ps) {
        if (!p.is_string()) config_fail("policy names must be strings");
        const auto policy = parse_policy(p.get<std::string>());
        if (!policy) config_fail("unknown policy '" + p.get<std::string>() + "'");
        if (std::find(cfg.policies.begin(), cfg.policies.end(), *policy) ==
            cfg.policies.end())
          cfg.policies.push_back(*policy);
      }
    }
    if (j.contains("trials")) cfg.trials = get_count(j, "trials");
  }
  if (j.contains("seed")) cfg.seed = get_seed(j);
  if (j.contains("eps")) cfg.eps = get_number(j, "eps");
  if (j.contains("max_iter")) cfg.max_iter = get_count(j, "max_iter");
  if (j.contains("traces")) {
    if (!j.at("traces").is_boolean()) config_fail("'traces' must be a boolean");
    cfg.traces = j.at("traces").get<bool>();
  }

  if (cfg.trials == 0) config_fail("'trials' must be >= 1");
  if (!finite_positive(cfg.eps)) config_fail("'eps' must be > 0");
  if (cfg.max_iter == 0) config_fail("'max_iter' must be >= 1");
  try {
    check_label(cfg.name, "name");
    for (const SweepPoint& pt : cfg.points) validate(pt.params);
  } catch (const std::invalid_argument& e) {
    config_fail(e.what());
  }
  return cfg;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 0;
    std::size_t column = 0;
    // byte is 1-based and points just past the offending character.
    line_column(text, e.byte == 0 ? 0 : e.byte - 1, line, column);
    throw ConfigError("syntax error at line " + std::to_string(line) +
                          ", column " + std::to_string(column),
                      line, column);
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what(), 0, 0);
  }
}

// Running ----------------------------------------------------------------------

std::uint64_t trial_seed(std::uint64_t base, std::size_t trial) {
  return derive_seed(base, {static_cast<std::uint64_t>(trial)});
}

PolicyRun run_policy(Policy policy, const Scenario& scenario, double eps,
                     std::size_t max_iter) {
  PolicyRun run;
  switch (policy) {
    case Policy::Optimal:
    case Policy::StaircaseIter: {
      MacSolution s = policy == Policy::Optimal
                          ? solve_mac(scenario, eps, max_iter)
                          : iterative_modified_staircase(scenario, eps, max_iter);
      run.p = std::move(s.p);
      run.d = std::move(s.d);
      run.iterations = s.iterations;
      run.trace = std::move(s.trace);
      break;
    }
    case Policy::Greedy:
    case Policy::Balanced:
    case Policy::Staircase: {
      MultiuserSchedule s = non_iterative_multiuser(policy, scenario);
      run.p = std::move(s.p);
      run.d = std::move(s.d);
      break;
    }
  }
  return run;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("EHWF_THREADS")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                std::size_t threads) {
  if (config.points.empty()) throw std::invalid_argument("no sweep points");
  if (config.policies.empty()) throw std::invalid_argument("no policies");
  if (config.trials == 0) throw std::invalid_argument("trials must be >= 1");
  check_label(config.name, "name");
  for (const SweepPoint& pt : config.points) {
    check_label(pt.label, "label");
    validate(pt.params);
  }

  const std::size_t n_pol = config.policies.size();
  const std::size_t n_tasks = config.points.size() * config.trials;

  ExperimentResult result;
  result.name = config.name;
  result.rows.resize(n_tasks * n_pol);
  std::vector<std::vector<TraceRow>> traces(config.traces ? n_tasks : 0);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= n_tasks) return;
      try {
        const std::size_t point = task / config.trials;
        const std::size_t trial = task % config.trials;
        GenParams params = config.points[point].params;
        params.seed = trial_seed(config.seed, trial);
        const Scenario scenario = gen_scenario(params);
        const std::string id =
            config.points[point].label + "/" + std::to_string(trial);
        for (std::size_t q = 0; q < n_pol; ++q) {
          const Policy policy = config.policies[q];
          const auto t0 = std::chrono::steady_clock::now();
          PolicyRun run = run_policy(policy, scenario, config.eps, config.max_iter);
          const auto t1 = std::chrono::steady_clock::now();
          ResultRow& row = result.rows[task * n_pol + q];
          row.scenario_id = id;
          row.seed = params.seed;
          row.policy = policy;
          row.sum_rate_nats = sum_rate(scenario, run.p);
          row.iterations = run.iterations;
          row.wall_time_ms =
              config.timing
                  ? std::chrono::duration<double, std::milli>(t1 - t0).count()
                  : 0.0;
          if (config.traces && policy == Policy::Optimal) {
            for (std::size_t i = 0; i < run.trace.size(); ++i)
              traces[task].push_back({id, i + 1, run.trace[i]});
          }
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n_tasks);
        return;
      }
    }
  };

  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min(threads == 0 ? worker_count() : threads,
                                        n_tasks));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (auto& t : traces)
    for (TraceRow& row : t) result.traces.push_back(std::move(row));

  for (std::size_t point = 0; point < config.points.size(); ++point) {
    for (std::size_t q = 0; q < n_pol; ++q) {
      PointSummary s;
      s.label = config.points[point].label;
      s.policy = config.policies[q];
      s.trials = config.trials;
      double sum = 0.0;
      double iters = 0.0;
      for (std::size_t t = 0; t < config.trials; ++t) {
        const ResultRow& r = result.rows[(point * config.trials + t) * n_pol + q];
        sum += r.sum_rate_nats;
        iters += static_cast<double>(r.iterations);
      }
      const double n = static_cast<double>(config.trials);
      s.mean = sum / n;
      s.mean_iterations = iters / n;
      if (config.trials > 1) {
        double ss = 0.0;
        for (std::size_t t = 0; t < config.trials; ++t) {
          const double x =
              result.rows[(point * config.trials + t) * n_pol + q].sum_rate_nats -
              s.mean;
          ss += x * x;
        }
        s.std_error = std::sqrt(ss / (n - 1.0) / n);
      }
      result.summary.push_back(s);
    }
  }
  return result;
}

void write_results_csv(std::ostream& out, const ExperimentResult& result) {
  out << "scenario_id,seed,policy,sum_rate_nats,iterations,wall_time_ms\n";
  for (const ResultRow& r : result.rows) {
    out << r.scenario_id << ',' << r.seed << ',' << to_string(r.policy) << ','
        << fmt(r.sum_rate_nats) << ',' << r.iterations << ','
        << fmt(r.wall_time_ms) << '\n';
  }
}

void write_trace_csv(std::ostream& out, const ExperimentResult& result) {
  out << "scenario_id,iteration,sum_rate_nats\n";
  for (const TraceRow& r : result.traces)
    out << r.scenario_id << ',' << r.iteration << ',' << fmt(r.sum_rate_nats)
        << '\n';
}

void write_summary(std::ostream& out, const ExperimentResult& result) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %-15s %8s %12s %10s %8s\n", "point",
                "policy", "trials", "mean_nats", "std_err", "iters");
  out << buf;
  for (const PointSummary& s : result.summary) {
    std::snprintf(buf, sizeof buf, "%-20s %-15s %8zu %12.6f %10.6f %8.3f\n",
                  s.label.c_str(), std::string(to_string(s.policy)).c_str(),
                  s.trials, s.mean, s.std_error, s.mean_iterations);
    out << buf;
  }
}

}  // namespace ehwf
