#include "ehwf/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ehwf/baselines.hpp"
#include "ehwf/bench.hpp"
#include "ehwf/mac.hpp"
#include "ehwf/model.hpp"
#include "ehwf/verify.hpp"

namespace ehwf {
namespace {

// Default convergence threshold of `solve --certify` for iterative policies:
// the certificate checks levels to 1e-7 relative, which a 1e-5 stop on the
// sum rate does not guarantee.
constexpr double kCertifyEps = 1e-14;
constexpr std::size_t kCertifyIterations = 2000;
constexpr std::size_t kCertifySamples = 4000;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("error writing '" + path + "'");
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

struct SolveOptions {
  std::string in;
  std::string policy = "optimal";
  bool certify = false;
  bool json = false;
  std::optional<double> eps;
  std::optional<std::size_t> max_iter;
};

struct ExperimentOptions {
  std::string preset;
  std::string config;
  std::optional<std::size_t> trials;
  bool full = false;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string trace_out;
  bool timing = false;
};

struct GenOptions {
  std::size_t n = 1;
  std::size_t k = 20;
  double m = 5.0;
  double v = 1.0;
  double bmax = 20.0;
  double pmax = 15.0;
  std::uint64_t seed = 1;
  std::string out;
};

int do_solve(const SolveOptions& o, std::ostream& out) {
  const auto policy = parse_policy(o.policy);
  if (!policy) throw std::runtime_error("unknown policy '" + o.policy + "'");
  nlohmann::json input;
  try {
    input = nlohmann::json::parse(read_file(o.in));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("'" + o.in + "': " + e.what());
  }
  const Scenario scenario = scenario_from_json(input);
  const std::size_t n_users = scenario.num_users();

  const bool iterative =
      *policy == Policy::Optimal || *policy == Policy::StaircaseIter;
  const double eps =
      o.eps.value_or(o.certify && iterative ? kCertifyEps : kDefaultMacEps);
  const std::size_t max_iter = o.max_iter.value_or(
      o.certify && iterative ? kCertifyIterations : kDefaultMacIterations);
  if (!(eps > 0.0)) throw std::runtime_error("--eps must be > 0");
  if (max_iter == 0) throw std::runtime_error("--max-iter must be >= 1");

  TransmissionSchedule p;
  WastageSchedule d;
  std::vector<BdpBfpSet> x;
  std::size_t iterations = 0;
  bool converged = true;
  if (iterative) {
    MacSolution s = *policy == Policy::Optimal
                        ? solve_mac(scenario, eps, max_iter)
                        : iterative_modified_staircase(scenario, eps, max_iter);
    p = std::move(s.p);
    d = std::move(s.d);
    iterations = s.iterations;
    converged = s.converged;
    if (*policy == Policy::Optimal) x = std::move(s.x);
  } else {
    MultiuserSchedule s = non_iterative_multiuser(*policy, scenario);
    p = std::move(s.p);
    d = std::move(s.d);
  }
  const double rate = sum_rate(scenario, p);

  nlohmann::json certificate;
  bool cert_pass = false;
  if (o.certify) {
    cert_pass = true;
    nlohmann::json users = nlohmann::json::array();
    for (std::size_t n = 0; n < n_users; ++n) {
      const UserEnv env = effective_env(scenario, p, n);
      const BdpBfpSet xs =
          x.empty() ? infer_boundaries(env, p.p[n], d.d[n]) : x[n];
      const DualCertificate c = kkt_certificate(
          env, p.p[n], xs, std::span<const double>(d.d[n]));
      cert_pass = cert_pass && c.pass;
      users.push_back(to_json(c));
    }
    const double tol = 1e-6 * static_cast<double>(scenario.num_slots());
    const FirstOrderResult fo =
        first_order_certificate(scenario, p, kCertifySamples, tol);
    cert_pass = cert_pass && fo.pass;
    certificate = {{"pass", cert_pass},
                   {"kkt", std::move(users)},
                   {"first_order",
                    {{"pass", fo.pass},
                     {"worst", fo.worst},
                     {"tolerance", tol},
                     {"samples", fo.samples}}}};
  }

  if (o.json) {
    nlohmann::json j = {{"policy", to_string(*policy)},
                        {"sum_rate_nats", rate},
                        {"iterations", iterations},
                        {"converged", converged},
                        {"p", p.p},
                        {"d", d.d}};
    if (!x.empty()) {
      nlohmann::json xs = nlohmann::json::array();
      for (const BdpBfpSet& s : x) xs.push_back(to_json(s));
      j["boundaries"] = std::move(xs);
    }
    if (o.certify) j["certificate"] = std::move(certificate);
    out << j.dump(2) << '\n';
  } else {
    out << "policy: " << to_string(*policy) << '\n';
    out << "sum_rate_nats: " << fmt(rate) << '\n';
    if (iterative) {
      out << "iterations: " << iterations
          << (converged ? "" : " (not converged)") << '\n';
    }
    for (std::size_t n = 0; n < n_users; ++n) {
      out << "user " << n << " p:";
      for (double v : p.p[n]) out << ' ' << fmt(v);
      out << "\nuser " << n << " d:";
      for (double v : d.d[n]) out << ' ' << fmt(v);
      out << '\n';
    }
    if (o.certify) {
      out << "first_order_worst: " << fmt(certificate["first_order"]["worst"])
          << '\n';
      out << "certificate: " << (cert_pass ? "PASS" : "FAIL") << '\n';
    }
  }
  return o.certify && !cert_pass ? 1 : 0;
}

int do_experiment(const ExperimentOptions& o, std::ostream& out) {
  if (o.preset.empty() == o.config.empty())
    throw std::runtime_error("give exactly one of --preset and --config");
  ExperimentConfig cfg;
  if (!o.preset.empty()) {
    cfg = preset(o.preset, o.full ? kFullTrials : kDefaultTrials);
  } else {
    try {
      cfg = parse_config(read_file(o.config));
    } catch (const ConfigError& e) {
      throw std::runtime_error("'" + o.config + "': " + e.what());
    }
    if (o.full) cfg.trials = kFullTrials;
  }
  if (o.trials) {
    if (*o.trials == 0) throw std::runtime_error("--trials must be >= 1");
    cfg.trials = *o.trials;
  }
  if (o.seed) cfg.seed = *o.seed;
  cfg.timing = o.timing;
  if (!o.trace_out.empty()) cfg.traces = true;

  const ExperimentResult result = run_experiment(cfg);

  std::ostringstream csv;
  write_results_csv(csv, result);
  if (o.out.empty()) {
    out << csv.str();
  } else {
    write_file(o.out, csv.str());
  }
  if (!o.trace_out.empty()) {
    std::ostringstream traces;
    write_trace_csv(traces, result);
    write_file(o.trace_out, traces.str());
  }
  if (!o.out.empty()) write_summary(out, result);
  return 0;
}

int do_gen(const GenOptions& o, std::ostream& out) {
  GenParams g;
  g.num_users = o.n;
  g.num_slots = o.k;
  g.harvest_mean = o.m;
  g.harvest_var = o.v;
  g.battery_max = o.bmax;
  g.power_max = o.pmax;
  g.seed = o.seed;
  try {
    validate(g);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
  const std::string text = to_json(gen_scenario(g)).dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
  } else {
    write_file(o.out, text);
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Energy scheduling for energy-harvesting multiple-access channels",
               "ehwf"};
  app.require_subcommand(1);

  SolveOptions solve;
  CLI::App* solve_cmd = app.add_subcommand("solve", "Solve a scenario file");
  solve_cmd->add_option("--in", solve.in, "Scenario JSON")->required();
  solve_cmd
      ->add_option("--policy", solve.policy,
                   "optimal, greedy, balanced, staircase or staircase-iter")
      ->capture_default_str();
  solve_cmd->add_flag("--certify", solve.certify,
                      "Check KKT and first-order optimality certificates");
  solve_cmd->add_flag("--json", solve.json, "Print JSON");
  solve_cmd->add_option("--eps", solve.eps, "Convergence threshold (nats)");
  solve_cmd->add_option("--max-iter", solve.max_iter, "Sweep limit");

  ExperimentOptions exp;
  CLI::App* exp_cmd =
      app.add_subcommand("experiment", "Run a Monte Carlo experiment");
  exp_cmd->add_option("--preset", exp.preset, "fig5 .. fig10");
  exp_cmd->add_option("--config", exp.config, "Experiment config JSON");
  exp_cmd->add_option("--trials", exp.trials, "Trials per sweep point");
  exp_cmd->add_flag("--full", exp.full, "Use 2000 trials per sweep point");
  exp_cmd->add_option("--seed", exp.seed, "Base seed");
  exp_cmd->add_option("--out", exp.out, "Results CSV (default: stdout)");
  exp_cmd->add_option("--trace-out", exp.trace_out,
                      "Per-sweep sum-rate traces CSV");
  exp_cmd->add_flag("--timing", exp.timing, "Record wall time per run");

  GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Emit a random scenario");
  gen_cmd->add_option("--n", gen.n, "Users")->capture_default_str();
  gen_cmd->add_option("--k", gen.k, "Slots")->capture_default_str();
  gen_cmd->add_option("--m", gen.m, "Harvest mean")->capture_default_str();
  gen_cmd->add_option("--v", gen.v, "Harvest variance")->capture_default_str();
  gen_cmd->add_option("--bmax", gen.bmax, "Battery capacity")
      ->capture_default_str();
  gen_cmd->add_option("--pmax", gen.pmax, "Per-slot energy cap")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output file (default: stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (solve_cmd->parsed()) return do_solve(solve, out);
    if (exp_cmd->parsed()) return do_experiment(exp, out);
    if (gen_cmd->parsed()) return do_gen(gen, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace ehwf
