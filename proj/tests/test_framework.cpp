#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "adastoch/framework.hpp"
#include "adastoch/stats.hpp"

using namespace adastoch;
using Catch::Approx;

namespace {

std::vector<IterationRecord> records_with_norms(std::initializer_list<double> norms) {
  std::vector<IterationRecord> out;
  std::size_t k = 0;
  for (double n : norms) {
    IterationRecord r;
    r.k = k++;
    r.true_grad_norm = n;
    out.push_back(r);
  }
  return out;
}

Problem identity_quadratic(Vector x0, NoiseSpec noise = NoiseSpec::none()) {
  return make_problem(ProblemKind::quadratic, static_cast<std::size_t>(x0.size()), 1.0, noise, 1).with_x0(x0);
}

// Checks the two-outcome step-size law on every consecutive pair.
void check_step_law(const RunTrace& t) {
  const double g = t.config.gamma;
  for (std::size_t k = 0; k + 1 < t.records.size(); ++k) {
    const auto& a = t.records[k];
    const auto& b = t.records[k + 1];
    const double expected = update_step_size(a.alpha, a.success, g, t.config.alpha_max);
    REQUIRE(b.alpha == Approx(expected).epsilon(1e-12));
    if (a.success) {
      REQUIRE((b.exponent == a.exponent - 1 || (b.exponent == 0 && b.anchor == t.config.alpha_max)));
    } else {
      REQUIRE(b.exponent == a.exponent + 1);
      REQUIRE(b.anchor == a.anchor);
    }
  }
}

}  // namespace

TEST_CASE("step-size update law", "[framework]") {
  REQUIRE(update_step_size(1.0, true, 0.5, 10.0) == 2.0);
  REQUIRE(update_step_size(8.0, true, 0.5, 10.0) == 10.0);
  REQUIRE(update_step_size(1.0, false, 0.5, 10.0) == 0.5);
  REQUIRE_THROWS_AS(update_step_size(0.0, true, 0.5, 10.0), InvalidParameter);
  REQUIRE_THROWS_AS(update_step_size(1.0, true, 1.0, 10.0), InvalidParameter);
  REQUIRE_THROWS_AS(update_step_size(1.0, true, 0.0, 10.0), InvalidParameter);
}

TEST_CASE("lattice step size tracks the multiplicative law", "[framework]") {
  const double gamma = 0.7, alpha_max = 2.0;
  StepSize s{1.0, 0};
  double direct = 1.0;
  Rng rng = make_stream(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const bool success = bernoulli(rng, 0.55);
    s.advance(success, gamma, alpha_max);
    direct = update_step_size(direct, success, gamma, alpha_max);
    // Recompute the direct value from the lattice to avoid accumulating drift in the reference itself.
    REQUIRE(s.value(gamma) == Approx(direct).epsilon(1e-9));
    direct = s.value(gamma);
  }
  REQUIRE(s.anchor == alpha_max);
}

TEST_CASE("configuration validation", "[framework]") {
  AlgoConfig c;
  REQUIRE_NOTHROW(c.validate());
  for (auto mutate : std::vector<void (*)(AlgoConfig&)>{
           [](AlgoConfig& x) { x.theta = 0.0; }, [](AlgoConfig& x) { x.theta = 1.0; },
           [](AlgoConfig& x) { x.gamma = 1.0; }, [](AlgoConfig& x) { x.alpha0 = 2.0; },
           [](AlgoConfig& x) { x.alpha0 = 0.0; }, [](AlgoConfig& x) { x.r = -1.0; },
           [](AlgoConfig& x) { x.theta2 = -1.0; }}) {
    AlgoConfig bad;
    mutate(bad);
    REQUIRE_THROWS_AS(bad.validate(), InvalidParameter);
  }
}

TEST_CASE("stopping time is the first index meeting the rule", "[framework]") {
  const auto recs = records_with_norms({3, 2, 0.5});
  REQUIRE(stopping_time(recs, 1.0, Optimality::nonconvex) == 2u);
  REQUIRE_FALSE(stopping_time(recs, 0.1, Optimality::nonconvex).has_value());

  auto gaps = records_with_norms({9, 9});
  gaps[0].true_gap = 5.0;
  gaps[1].true_gap = 0.9;
  REQUIRE(stopping_time(gaps, 1.0, Optimality::strongly_convex) == 1u);

  auto unknown = records_with_norms({1, 1});
  REQUIRE_THROWS_AS(stopping_time(unknown, 1.0, Optimality::strongly_convex), MissingGroundTruth);
}

TEST_CASE("one exact step-search iteration solves the identity quadratic", "[framework]") {
  Vector x0(2);
  x0 << 2.0, 0.0;
  AlgoConfig c;
  c.theta = 0.1;
  c.alpha0 = c.alpha_max = 1.0;
  c.r = 0.0;
  const auto t = run_adaptive(identity_quadratic(x0), Sass{}, OracleSuite::single_sample(OracleContract::step_search),
                              c, {1e-3, Optimality::nonconvex});
  REQUIRE(t.stopping_iteration == 1u);
  REQUIRE(t.records[0].success);
  REQUIRE(t.records[1].true_grad_norm == 0.0);
  REQUIRE(t.iterations() == 1);
  REQUIRE(t.total_cost0() == 2);
  REQUIRE(t.total_cost1() == 1);
}

TEST_CASE("a start at the minimiser stops at zero with no work", "[framework]") {
  const auto t = run_adaptive(identity_quadratic(Vector::Zero(3)), Storm{},
                              OracleSuite::storm(StormOracleSpec{}), AlgoConfig{}, {0.1, Optimality::nonconvex});
  REQUIRE(t.stopping_iteration == 0u);
  REQUIRE(t.iterations() == 0);
  REQUIRE(t.total_cost0() == 0);
  REQUIRE(t.total_cost1() == 0);

  const auto s = run_adaptive(identity_quadratic(Vector::Zero(3)), Sass{},
                              OracleSuite::single_sample(OracleContract::step_search), AlgoConfig{},
                              {0.1, Optimality::strongly_convex});
  REQUIRE(s.stopping_iteration == 0u);
}

TEST_CASE("identical seeds give bit-identical traces", "[framework]") {
  const Problem p = make_problem(ProblemKind::quadratic, 5, 10.0, NoiseSpec::gaussian_uniform(1, 1), 2);
  AlgoConfig c;
  c.gamma = 0.8;
  c.alpha0 = c.alpha_max = 0.2;
  c.seed = 99;
  const auto oracles = OracleSuite::storm(StormOracleSpec{});
  const auto a = run_adaptive(p, Storm{}, oracles, c, {0.2, Optimality::nonconvex});
  const auto b = run_adaptive(p, Storm{}, oracles, c, {0.2, Optimality::nonconvex});
  std::ostringstream sa, sb;
  write_trace_csv(sa, a);
  write_trace_csv(sb, b);
  REQUIRE(sa.str() == sb.str());
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE(a.records[i].alpha == b.records[i].alpha);
    REQUIRE(a.records[i].true_grad_norm == b.records[i].true_grad_norm);
  }
  c.seed = 100;
  std::ostringstream sc;
  write_trace_csv(sc, run_adaptive(p, Storm{}, oracles, c, {0.2, Optimality::nonconvex}));
  REQUIRE(sc.str() != sa.str());
}

TEST_CASE("method and oracle contracts must agree", "[framework]") {
  const Problem p = identity_quadratic(Vector::Ones(2));
  REQUIRE_THROWS_AS(run_adaptive(p, Storm{}, OracleSuite::single_sample(OracleContract::step_search), AlgoConfig{},
                                 {0.1, Optimality::nonconvex}),
                    ConfigurationError);
  REQUIRE_THROWS_AS(run_adaptive(p, Method{Sass{}}, OracleSuite::storm(StormOracleSpec{}), AlgoConfig{},
                                 {0.1, Optimality::nonconvex}),
                    ConfigurationError);
}

TEST_CASE("optimality-gap stopping needs a known minimum", "[framework]") {
  const Problem p = make_problem(ProblemKind::logistic_synthetic, 2, 1.0, NoiseSpec::none(), 1);
  REQUIRE_THROWS_AS(run_adaptive(p, Sass{}, OracleSuite::single_sample(OracleContract::step_search), AlgoConfig{},
                                 {0.1, Optimality::strongly_convex}),
                    MissingGroundTruth);
}

TEST_CASE("non-finite oracle output names the iteration", "[framework]") {
  const Problem p = identity_quadratic(Vector::Ones(2));
  const auto oracles = OracleSuite::single_sample(OracleContract::step_search)
                           .with_corruption({1.0, 0.0, std::numeric_limits<double>::infinity(), 1.0});
  try {
    run_adaptive(p, Sass{}, oracles, AlgoConfig{}, {0.1, Optimality::nonconvex});
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    REQUIRE(std::string(e.what()).find("iteration 0") != std::string::npos);
  }
}

TEST_CASE("hitting max_iterations leaves the stopping index empty", "[framework]") {
  AlgoConfig c;
  c.max_iterations = 5;
  c.alpha0 = c.alpha_max = 0.01;
  const auto t = run_adaptive(identity_quadratic(Vector::Ones(2) * 100.0), Sass{},
                              OracleSuite::single_sample(OracleContract::step_search), c, {1e-9, Optimality::nonconvex});
  REQUIRE_FALSE(t.stopping_iteration.has_value());
  REQUIRE(t.iterations() == 5);
  REQUIRE(t.records.back().cost0 == 0);
}

TEST_CASE("noisy traces obey the step-size law and the batch accounting", "[framework]") {
  const Problem p = make_problem(ProblemKind::quadratic, 8, 10.0, NoiseSpec::gaussian_uniform(1, 1), 3);
  const StormOracleSpec spec;
  const auto oracles = OracleSuite::storm(spec);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    AlgoConfig c;
    c.gamma = 0.8;
    c.alpha0 = 0.05;
    c.alpha_max = 0.2;
    c.seed = seed;
    const auto t = run_adaptive(p, Storm{}, oracles, c, {0.2, Optimality::nonconvex});
    REQUIRE(t.stopping_iteration.has_value());
    check_step_law(t);
    std::int64_t c0 = 0, c1 = 0;
    for (std::size_t k = 0; k < t.iterations(); ++k) {
      const auto& r = t.records[k];
      REQUIRE(r.cost0 == 2 * oracles.value_cost().batch(r.alpha));
      REQUIRE(r.cost1 == oracles.gradient_cost().batch(r.alpha));
      c0 += r.cost0;
      c1 += r.cost1;
    }
    REQUIRE(t.total_cost0() == c0);
    REQUIRE(t.total_cost1() == c1);
    REQUIRE(stopping_time(t, 0.2, Optimality::nonconvex) == t.stopping_iteration);
  }

  const Problem q = make_problem(ProblemKind::quadratic, 4, 10.0, NoiseSpec::gaussian_relative(1, 1, 1), 3);
  AlgoConfig c;
  c.gamma = 0.5;
  c.r = 0.1;
  const auto t = run_adaptive(q, Sass{}, OracleSuite::sass(0.1, SassOracleSpec{}, q.noise(), Optimality::strongly_convex),
                              c, {0.1, Optimality::strongly_convex});
  check_step_law(t);
}

TEST_CASE("exact oracles below the success threshold always succeed", "[framework]") {
  const Problem p = make_problem(ProblemKind::quadratic, 4, 10.0, NoiseSpec::none(), 1);
  AlgoConfig c;
  c.alpha0 = c.alpha_max = 0.9 / p.smoothness();
  const std::vector<RunTrace> traces{run_adaptive(
      p, Sass{}, OracleSuite::single_sample(OracleContract::step_search), c, {1e-6, Optimality::nonconvex})};
  const auto est = empirical_success_probability(traces, c.alpha_max);
  REQUIRE(est.count > 0);
  REQUIRE(est.p_hat == 1.0);
}

TEST_CASE("corrupted oracles succeed with probability at least 1 - delta0 - delta1", "[framework]") {
  const Problem p = make_problem(ProblemKind::quadratic, 4, 10.0, NoiseSpec::none(), 1);
  const Corruption corruption{0.1, 0.1, 1e6, 1.0};
  const auto oracles = OracleSuite::single_sample(OracleContract::step_search).with_corruption(corruption);
  AlgoConfig c;
  c.alpha0 = c.alpha_max = 0.9 / p.smoothness();
  c.max_iterations = 2000;
  std::vector<RunTrace> traces;
  for (std::uint64_t s = 0; s < 8; ++s) {
    c.seed = s;
    traces.push_back(run_adaptive(p, Sass{}, oracles, c, {1e-200, Optimality::nonconvex}));
  }
  const auto est = empirical_success_probability(traces, c.alpha_max);
  REQUIRE(est.count >= 10000);
  const Interval ci = wilson_interval(est.successes, est.count);
  REQUIRE(ci.upper >= 1.0 - corruption.delta0 - corruption.delta1);
  REQUIRE(ci.contains(corruption.clean_probability()));
}

TEST_CASE("no qualifying iterations gives an undefined estimate", "[framework]") {
  const std::vector<RunTrace> none;
  REQUIRE_FALSE(empirical_success_probability(none, 1.0).p_hat.has_value());
  const Problem p = identity_quadratic(Vector::Ones(2));
  AlgoConfig c;
  c.max_iterations = 3;
  const std::vector<RunTrace> big_steps{
      run_adaptive(p.with_x0(Vector::Ones(2) * 50), Sass{}, OracleSuite::single_sample(OracleContract::step_search), c,
                   {1e-12, Optimality::nonconvex})};
  REQUIRE_FALSE(empirical_success_probability(big_steps, 1e-6).p_hat.has_value());
}

TEST_CASE("trace CSV schema", "[framework]") {
  Vector x0(2);
  x0 << 2.0, 0.0;
  const auto t = run_adaptive(identity_quadratic(x0), Sass{}, OracleSuite::single_sample(OracleContract::step_search),
                              AlgoConfig{}, {1e-3, Optimality::nonconvex});
  std::ostringstream out;
  write_trace_csv(out, t);
  std::istringstream in(out.str());
  std::string header, row0, row1, extra;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  REQUIRE(header == "k,alpha,success,cost0,cost1,true_grad_norm,true_gap");
  REQUIRE(row0.rfind("0,", 0) == 0);
  REQUIRE(row0.find(",1,2,1,") != std::string::npos);
  REQUIRE_FALSE(std::getline(in, extra));
}
