#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "ufl/bayesopt.hpp"
#include "ufl/error.hpp"

using namespace ufl;

namespace {

// Matérn-5/2 written out independently of the library.
double k52(double dist, double ls, double sf2) {
  const double r = std::sqrt(5.0) * dist / ls;
  return sf2 * (1.0 + r + r * r / 3.0) * std::exp(-r);
}

Eigen::MatrixXd col(std::initializer_list<double> v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

GpHyper hyper1(double ls, double sf2, double sn2) {
  return GpHyper{Eigen::VectorXd::Constant(1, std::log(ls)), std::log(sf2), std::log(sn2)};
}

BoConfig quick_config() {
  BoConfig cfg;
  cfg.initial_points = 5;
  cfg.candidates = 256;
  cfg.gp.restarts = 2;
  return cfg;
}

}  // namespace

TEST_CASE("one-point GP posterior in closed form") {
  struct Case {
    double x1, t, ls, sf2, sn2, xq;
  };
  for (const Case& c : {Case{0.2, 3.0, 0.5, 1.0, 1e-6, 0.7}, Case{0.5, -1.0, 0.1, 2.0, 1e-4, 0.55},
                        Case{0.0, 0.0, 1.0, 0.5, 1e-3, 1.0}, Case{0.9, 10.0, 0.3, 1.5, 1e-8, 0.9},
                        Case{0.4, 2.5, 2.0, 0.1, 1e-2, 0.1}}) {
    const GpModel gp(col({c.x1}), Eigen::VectorXd::Constant(1, c.t), hyper1(c.ls, c.sf2, c.sn2));
    const GpPrediction p = gp.predict(Eigen::VectorXd::Constant(1, c.xq));
    // A single standardized target is zero, so the mean is the target itself.
    const double k = k52(std::abs(c.xq - c.x1), c.ls, c.sf2);
    const double var = c.sf2 - k * k / (c.sf2 + c.sn2);
    CHECK(std::abs(p.mean - c.t) < 1e-8);
    CHECK(std::abs(p.variance - var) < 1e-8);
  }
}

TEST_CASE("two-point GP posterior in closed form") {
  const double ls = 0.3, sf2 = 1.2, sn2 = 1e-4;
  const double x1 = 0.1, x2 = 0.6, t1 = 1.0, t2 = 4.0;
  const GpModel gp(col({x1, x2}), Eigen::Vector2d(t1, t2), hyper1(ls, sf2, sn2));
  // Standardized targets are -1 and +1 with scale 1.5 around 2.5.
  const double a = sf2 + sn2, b = k52(x2 - x1, ls, sf2);
  const double det = a * a - b * b;
  for (double xq : {0.0, 0.35, 0.6, 1.0}) {
    const double k1 = k52(std::abs(xq - x1), ls, sf2), k2 = k52(std::abs(xq - x2), ls, sf2);
    const double w1 = (a * k1 - b * k2) / det, w2 = (a * k2 - b * k1) / det;
    const double mean = 2.5 + 1.5 * (-w1 + w2);
    const double var = (sf2 - (k1 * w1 + k2 * w2)) * 1.5 * 1.5;
    const GpPrediction p = gp.predict(Eigen::VectorXd::Constant(1, xq));
    CHECK(std::abs(p.mean - mean) < 1e-8);
    CHECK(std::abs(p.variance - var) < 1e-8);
  }
}

TEST_CASE("matern kernel values") {
  CHECK(matern52(0.0, 2.0) == 2.0);
  CHECK(matern52(1.0, 1.0) == doctest::Approx(k52(1.0, 1.0, 1.0)).epsilon(1e-14));
  CHECK(matern52(4.0, 1.0) < matern52(1.0, 1.0));
}

TEST_CASE("expected improvement cases") {
  CHECK(expected_improvement(0.0, 1.0, 0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK(expected_improvement(2.0, 0.0, 1.0) == 1.0);
  CHECK(expected_improvement(0.0, 0.0, 1.0) == 0.0);
  CHECK(expected_improvement(-50.0, 1.0, 0.0) >= 0.0);
  // Increasing in the mean and in the variance.
  double prev = 0.0;
  for (double m = -3.0; m <= 3.0; m += 0.5) {
    const double ei = expected_improvement(m, 1.0, 0.0);
    CHECK(ei > prev);
    prev = ei;
  }
  prev = 0.0;
  for (double v = 0.01; v <= 4.0; v *= 2.0) {
    const double ei = expected_improvement(0.0, v, 0.5);
    CHECK(ei > prev);
    prev = ei;
  }
}

TEST_CASE("constant targets do not break the GP") {
  const Eigen::MatrixXd X = col({0.1, 0.4, 0.8});
  const GpModel gp = GpModel::fit(X, Eigen::VectorXd::Constant(3, 7.0), GpConfig{}, 101);
  const GpPrediction p = gp.predict(Eigen::VectorXd::Constant(1, 0.6));
  CHECK(p.mean == doctest::Approx(7.0).epsilon(1e-9));
  CHECK(std::isfinite(p.variance));
}

TEST_CASE("a fitted GP interpolates and shrinks variance at data") {
  Eigen::MatrixXd X(8, 2);
  Eigen::VectorXd y(8);
  Rng rng(102);
  for (Eigen::Index i = 0; i < 8; ++i) {
    X(i, 0) = uniform01(rng);
    X(i, 1) = uniform01(rng);
    y(i) = std::sin(4 * X(i, 0)) + X(i, 1);
  }
  const GpModel gp = GpModel::fit(X, y, GpConfig{}, 103);
  CHECK(std::isfinite(gp.log_marginal_likelihood()));
  for (Eigen::Index i = 0; i < 8; ++i) {
    const GpPrediction p = gp.predict(X.row(i).transpose());
    CHECK(p.mean == doctest::Approx(y(i)).epsilon(0.05).scale(1.0));
    CHECK(p.variance < gp.predict(Eigen::Vector2d(5.0, 5.0)).variance);
  }
  CHECK_THROWS_AS(gp.predict(Eigen::VectorXd::Zero(3)), DimensionMismatchError);
  CHECK_THROWS_AS(GpModel::fit(col({0.5}), Eigen::VectorXd::Zero(1), GpConfig{}, 1), std::invalid_argument);
}

TEST_CASE("BO finds the maximum of a 1-D concave function") {
  BoConfig cfg = quick_config();
  cfg.iterations = 30;
  BoTrace trace;
  bo_maximize(1, [](const Eigen::VectorXd& x) { return -(x[0] - 0.37) * (x[0] - 0.37); }, cfg, 104, trace);
  REQUIRE(trace.X.size() == 35);
  const auto best = std::max_element(trace.y.begin(), trace.y.end()) - trace.y.begin();
  CHECK(std::abs(trace.X[static_cast<std::size_t>(best)][0] - 0.37) < 1e-2);
}

TEST_CASE("zero iterations only evaluates the initial design") {
  BoConfig cfg = quick_config();
  cfg.iterations = 0;
  const BoResult r = bo_optimize(problem(ProblemName::DTLZ2), ExpertFn{ProblemName::DTLZ2}, cfg, 105);
  CHECK(r.history.size() == 5);
  CHECK(r.best_x.size() == 7);
}

TEST_CASE("BO history: x0 fixed, best so far non-decreasing, deterministic") {
  BoConfig cfg = quick_config();
  cfg.iterations = 8;
  const ProblemDef& p = problem(ProblemName::CAR);
  const BoResult a = bo_optimize(p, ExpertFn{p.name}, cfg, 106);
  const BoResult b = bo_optimize(p, ExpertFn{p.name}, cfg, 106);
  REQUIRE(a.history.size() == 13);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].x[0] == p.reference_x0);
    CHECK(a.history[i].x == b.history[i].x);
    CHECK(a.history[i].objective == doctest::Approx(a.history[i].utility - 10.0 * a.history[i].violation));
    if (i > 0) CHECK(a.history[i].best_so_far >= a.history[i - 1].best_so_far);
  }
  // The reported best is the best feasible query.
  double best = -1.0;
  for (const auto& r : a.history)
    if (r.violation == 0.0) best = std::max(best, r.objective);
  if (a.best_feasible) CHECK(a.best_utility == best);

  cfg.x0 = 0.7;
  const BoResult c = bo_optimize(p, ExpertFn{p.name}, cfg, 106);
  CHECK(c.history.front().x[0] == 0.7);
  cfg.x0 = 7.0;
  CHECK_THROWS_AS(bo_optimize(p, ExpertFn{p.name}, cfg, 106), ConfigError);
}

TEST_CASE("BO on the expert beats random search with the same budget over 5 seeds") {
  const ProblemDef& p = problem(ProblemName::DTLZ2);
  BoConfig cfg = quick_config();
  cfg.iterations = 25;
  double bo_total = 0.0, rs_total = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    bo_total += bo_optimize(p, ExpertFn{p.name}, cfg, derive_seed(107, {s})).best_expert;
    Rng rng(derive_seed(108, {s}));
    double best = 0.0;
    for (int i = 0; i < 30; ++i) best = std::max(best, expert_score(p.name, evaluate_problem(p, sample_input(p, rng, p.reference_x0)).y));
    rs_total += best;
  }
  INFO("BO mean ", bo_total / 5, ", random mean ", rs_total / 5);
  CHECK(bo_total >= rs_total);
}

TEST_CASE("manual bound grows with the number of draws") {
  const ProblemDef& p = problem(ProblemName::DTLZ2);
  double prev = -1.0;
  for (std::size_t m : {1u, 10u, 100u, 1000u}) {
    const double b = manual_upper_bound(p, ExpertFn{p.name}, m, 109);
    CHECK(b >= prev);
    CHECK(b <= 1.0);
    prev = b;
  }
  CHECK_THROWS_AS(manual_upper_bound(p, ExpertFn{p.name}, 0, 1), std::invalid_argument);
}

TEST_CASE("BO config validation") {
  BoConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.initial_points = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.iterations = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.refit_every = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("BO history CSV") {
  BoRecord r;
  r.iteration = 3;
  r.x = {0.5, 0.25};
  r.utility = 0.75;
  r.objective = 0.75;
  r.expert = 0.5;
  r.best_so_far = 0.75;
  std::ostringstream out;
  write_bo_history_csv(out, {r});
  CHECK(out.str() == "iteration,x_0,x_1,utility,violation,objective,expert,best_so_far\n3,0.5,0.25,0.75,0,0.75,0.5,0.75\n");
}
