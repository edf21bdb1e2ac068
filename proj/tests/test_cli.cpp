#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("adastoch_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI with `args`, silencing its stdout and stderr; returns the exit code.
int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" ADASTOCH_CLI_PATH "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string out(const std::string& name) { return (scratch() / name).string(); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  for (std::string f; std::getline(s, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::string> data_lines(const std::string& path) {
  std::vector<std::string> out;
  for (auto& l : lines(path))
    if (l.empty() || l[0] != '#') out.push_back(l);
  return out;
}

const char* kZeroNoiseSass =
    "optimize --method sass --dim 2 --conditioning 1 --x0-scale 2 --sigma-f 0 --mc 0 --mv 0 --oracle single "
    "--theta 0.1 --alpha0 1 --alpha-max 1 --r 0 --epsilon 1e-3";

}  // namespace

TEST_CASE("walk output schema and row counts", "[cli]") {
  const auto path = out("walk.csv");
  REQUIRE(run("walk --n 20 --reps 200 --seed 3 --out " + path) == 0);
  const auto table = lines(path);
  REQUIRE(table.front() == "gamma,mode,k,alpha_walk_min_so_far,alpha_star");
  REQUIRE(table.size() == 1 + 5 * 3 * 21);
  const auto summary = lines(out("walk_summary.csv"));
  REQUIRE(summary.front() == "gamma,n,reps,alpha_star,dips,dip_fraction,dip_ci_lower,dip_ci_upper,failure_bound");
  REQUIRE(summary.size() == 6);
}

TEST_CASE("walk at the reference parameters keeps the dip fraction under 0.012", "[cli]") {
  const auto path = out("walk_ref.csv");
  REQUIRE(run("walk --p 0.8 --gammas 0.5 --alpha-bar 1 --omega 1 --n 100 --reps 10000 --seed 1 --out " + path) == 0);
  const auto summary = lines(out("walk_ref_summary.csv"));
  REQUIRE(summary.size() == 2);
  const auto f = fields(summary[1]);
  REQUIRE(std::stod(f[3]) == Catch::Approx(4.7e-4).epsilon(0.01));
  REQUIRE(std::stod(f[5]) <= 0.012);
  REQUIRE(std::stod(f[8]) == Catch::Approx(0.012));
}

TEST_CASE("walk with p = 1 never dips", "[cli]") {
  const auto path = out("walk_p1.csv");
  REQUIRE(run("walk --p 1 --gammas 0.5,0.9 --n 30 --reps 50 --out " + path) == 0);
  const auto table = lines(path);
  for (std::size_t i = 1; i < table.size(); ++i) REQUIRE(std::stod(fields(table[i])[3]) == 1.0);
  const auto summary = lines(out("walk_p1_summary.csv"));
  for (std::size_t i = 1; i < summary.size(); ++i) REQUIRE(fields(summary[i])[4] == "0");
}

TEST_CASE("hitting table spot checks", "[cli]") {
  const auto path = out("hitting.csv");
  REQUIRE(run("hitting --p 0.8 --l-max 12 --n 100 --reps 2000 --out " + path) == 0);
  const auto table = lines(path);
  REQUIRE(table.front() == "l,exact,bound,mc_estimate,mc_ci_halfwidth");
  REQUIRE(table.size() == 14);
  REQUIRE(std::stod(fields(table[1])[1]) == 1.0);
  REQUIRE(std::stod(fields(table[11])[2]) == Catch::Approx(2.16e-3).epsilon(0.005));
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto f = fields(table[i]);
    REQUIRE(std::stod(f[1]) <= std::stod(f[2]));
  }

  const auto short_path = out("hitting_short.csv");
  REQUIRE(run("hitting --p 0.8 --l-max 10 --n 8 --reps 100 --out " + short_path) == 0);
  const auto s = lines(short_path);
  REQUIRE(std::stod(fields(s[10])[1]) == 0.0);
  REQUIRE(std::stod(fields(s[11])[1]) == 0.0);
}

TEST_CASE("zero-noise step search stops after one iteration", "[cli]") {
  const auto path = out("opt.csv");
  REQUIRE(run(std::string(kZeroNoiseSass) + " --out " + path) == 0);
  const auto trace = lines(path);
  REQUIRE(trace.front() == "k,alpha,success,cost0,cost1,true_grad_norm,true_gap");
  REQUIRE(trace.size() == 3);
  const auto summary = data_lines(out("opt_summary.csv"));
  REQUIRE(summary.size() == 2);
  REQUIRE(summary[0] == "T_eps,toc0,toc1,toc");
  REQUIRE(summary[1] == "1,2,1,3");
  REQUIRE(slurp(out("opt_summary.csv")).find("# kind=quadratic") != std::string::npos);
}

TEST_CASE("an unreached tolerance leaves T_eps empty", "[cli]") {
  const auto path = out("opt_cap.csv");
  REQUIRE(run("optimize --method storm --max-iterations 2 --epsilon 1e-3 --out " + path) == 0);
  const auto summary = data_lines(out("opt_cap_summary.csv"));
  REQUIRE(summary.size() == 2);
  REQUIRE(summary[1].rfind(",", 0) == 0);
  REQUIRE(lines(path).size() == 4);
}

TEST_CASE("identical flags give identical output and seeds matter", "[cli]") {
  const std::string args = "optimize --method storm --dim 4 --epsilon 0.2 --gamma 0.8";
  REQUIRE(run(args + " --seed 5 --out " + out("det_a.csv")) == 0);
  REQUIRE(run(args + " --seed 5 --out " + out("det_b.csv")) == 0);
  REQUIRE(run(args + " --seed 6 --out " + out("det_c.csv")) == 0);
  REQUIRE(slurp(out("det_a.csv")) == slurp(out("det_b.csv")));
  REQUIRE(slurp(out("det_a_summary.csv")) == slurp(out("det_b_summary.csv")));
  REQUIRE(slurp(out("det_a.csv")) != slurp(out("det_c.csv")));

  REQUIRE(run("hitting --reps 500 --seed 9 --out " + out("det_h1.csv")) == 0);
  REQUIRE(run("hitting --reps 500 --seed 9 --out " + out("det_h2.csv")) == 0);
  REQUIRE(slurp(out("det_h1.csv")) == slurp(out("det_h2.csv")));
}

TEST_CASE("sweep output schemas", "[cli]") {
  const auto path = out("sweep.csv");
  REQUIRE(run("sweep --method storm --epsilons 0.2,0.1 --reps 5 --seed 2 --out " + path) == 0);
  const auto table = lines(path);
  REQUIRE(table.front() == "epsilon,mean_T,mean_toc0,mean_toc1,bound_expected,bound_highprob,exceed_frac");
  REQUIRE(table.size() == 3);
  const auto bounds = lines(out("sweep_bounds.csv"));
  REQUIRE(bounds.front() == "epsilon,n,gamma,bound_expected,bound_highprob,failure_prob,mc_mean,mc_p50,mc_p95,exceed_frac");
  REQUIRE(bounds.size() == 3);

  const auto sass = out("sweep_sass.csv");
  REQUIRE(run("sweep --method sass --measure strongly_convex --conditioning 10 --gamma 0.5 --epsilons 0.1,0.01 "
              "--reps 5 --gamma-policy corollary --out " + sass) == 0);
  REQUIRE(lines(sass).size() == 3);
}

TEST_CASE("exit codes", "[cli]") {
  REQUIRE(run("--help") == 0);
  REQUIRE(run("walk --help") == 0);
  REQUIRE(run("") == 1);
  REQUIRE(run("walk --no-such-flag 1") == 1);
  REQUIRE(run("walk --p 0.3 --out " + out("bad.csv")) == 1);
  REQUIRE(run("optimize --method newton") == 1);
  REQUIRE(run("hitting --reps 10 --out " + out("walk.csv") + "/deeper/h.csv") == 3);
  REQUIRE(run("hitting --config /nonexistent_dir/c.json") == 3);
  // A calibration that puts alpha_bar far above any step taken makes the
  // high-probability bound tiny, so the sweep detects a contradiction.
  REQUIRE(run("sweep --method storm --epsilons 0.2 --reps 3 --zeta 0.001 --c2 100 --out " + out("viol.csv")) == 2);
}

TEST_CASE("JSON config supplies defaults and flags win", "[cli]") {
  const auto cfg = out("cfg.json");
  {
    std::ofstream f(cfg);
    f << R"({"seed": 4, "reps": 300, "hitting": {"p": 0.9, "n": 50, "l_max": 6}})";
  }
  REQUIRE(run("hitting --config " + cfg + " --out " + out("cfg_a.csv")) == 0);
  REQUIRE(run("hitting --p 0.9 --n 50 --l-max 6 --seed 4 --reps 300 --out " + out("cfg_b.csv")) == 0);
  REQUIRE(slurp(out("cfg_a.csv")) == slurp(out("cfg_b.csv")));
  REQUIRE(lines(out("cfg_a.csv")).size() == 8);

  REQUIRE(run("hitting --config " + cfg + " --n 20 --out " + out("cfg_c.csv")) == 0);
  REQUIRE(run("hitting --p 0.9 --n 20 --l-max 6 --seed 4 --reps 300 --out " + out("cfg_d.csv")) == 0);
  REQUIRE(slurp(out("cfg_c.csv")) == slurp(out("cfg_d.csv")));

  const auto bad = out("bad.json");
  {
    std::ofstream f(bad);
    f << R"({"hitting": {"unknown_key": 1}})";
  }
  REQUIRE(run("hitting --config " + bad) == 1);
  {
    std::ofstream f(bad);
    f << "{not json";
  }
  REQUIRE(run("hitting --config " + bad) == 1);
}

TEST_CASE("output directory comes from the environment when --out is absent", "[cli]") {
  const fs::path dir = scratch() / "envdir";
  fs::create_directories(dir);
  REQUIRE(run("hitting --reps 100 --l-max 3", "ADASTOCH_OUTPUT_DIR='" + dir.string() + "'") == 0);
  REQUIRE(fs::exists(dir / "hitting.csv"));
}
