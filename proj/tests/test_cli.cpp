#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ehwf/cli.hpp"
#include "ehwf/model.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = ehwf::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ehwf_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("gen emits a valid scenario") {
  const Run r = cli({"gen", "--n", "5", "--k", "20", "--m", "5", "--v", "8",
                     "--seed", "7"});
  REQUIRE(r.code == 0);
  const auto s = ehwf::scenario_from_json(nlohmann::json::parse(r.out));
  CHECK(s.num_users() == 5);
  CHECK(s.num_slots() == 20);
  CHECK(cli({"gen", "--n", "5", "--k", "20", "--m", "5", "--v", "8", "--seed",
             "7"}).out == r.out);
  CHECK(cli({"gen", "--v", "0"}).code != 0);
}

TEST_CASE("solve prints the rate and a certificate verdict") {
  const fs::path in = scratch("s.json");
  REQUIRE(cli({"gen", "--n", "3", "--k", "10", "--v", "8", "--seed", "2",
               "--out", in.string()}).code == 0);
  {
    const Run r = cli({"solve", "--policy", "optimal", "--in", in.string(),
                       "--certify"});
    CHECK(r.code == 0);
    CHECK(r.out.find("sum_rate_nats: ") != std::string::npos);
    CHECK(r.out.find("certificate: PASS") != std::string::npos);
  }
  {
    const Run r = cli({"solve", "--policy", "greedy", "--in", in.string(),
                       "--certify"});
    CHECK(r.code == 1);
    CHECK(r.out.find("certificate: FAIL") != std::string::npos);
  }
  {
    const Run r = cli({"solve", "--in", in.string(), "--json"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["policy"] == "optimal");
    CHECK(j["p"].size() == 3);
    CHECK(j["boundaries"].size() == 3);
    CHECK(j["sum_rate_nats"].get<double>() > 0.0);
  }
  for (const char* policy : {"balanced", "staircase", "staircase-iter"}) {
    CHECK(cli({"solve", "--policy", policy, "--in", in.string()}).code == 0);
  }
}

TEST_CASE("experiment writes results and traces") {
  const fs::path out = scratch("r.csv"), traces = scratch("t.csv");
  const Run r = cli({"experiment", "--preset", "fig10", "--trials", "2",
                     "--out", out.string(), "--trace-out", traces.string()});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(out);
  CHECK(csv.rfind("scenario_id,seed,policy,sum_rate_nats,iterations,wall_time_ms",
                  0) == 0);
  // 6 points x 2 trials x 5 policies + header.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 61);
  CHECK(slurp(traces).rfind("scenario_id,iteration,sum_rate_nats", 0) == 0);
  CHECK(r.out.find("fig10:m=10") != std::string::npos);

  const fs::path cfg = scratch("c.json");
  std::ofstream(cfg) << R"({"params": {"num_slots": 5}, "policies": ["greedy"],
                            "trials": 3})";
  const Run c = cli({"experiment", "--config", cfg.string(), "--seed", "4"});
  REQUIRE(c.code == 0);
  CHECK(std::count(c.out.begin(), c.out.end(), '\n') == 4);
}

TEST_CASE("bad input fails with a message") {
  CHECK(cli({}).code != 0);
  CHECK(cli({"frobnicate"}).code != 0);
  {
    const Run r = cli({"solve", "--in", scratch("missing.json").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("cannot open") != std::string::npos);
  }
  {
    const fs::path bad = scratch("bad.json");
    std::ofstream(bad) << "{ not json";
    CHECK(cli({"solve", "--in", bad.string()}).code != 0);
  }
  {
    const fs::path in = scratch("ok.json");
    REQUIRE(cli({"gen", "--out", in.string()}).code == 0);
    CHECK(cli({"solve", "--in", in.string(), "--policy", "magic"}).code != 0);
    CHECK(cli({"solve", "--in", in.string(), "--eps", "0"}).code != 0);
  }
  CHECK(cli({"experiment"}).code != 0);
  CHECK(cli({"experiment", "--preset", "fig99"}).code != 0);
  {
    const fs::path cfg = scratch("broken.json");
    std::ofstream(cfg) << "{\n  \"trials\": ,\n}";
    const Run r = cli({"experiment", "--config", cfg.string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("line 2") != std::string::npos);
  }
  CHECK(cli({"solve", "--help"}).code == 0);
}
