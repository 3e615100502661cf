#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "ufl/error.hpp"
#include "ufl/preference.hpp"
#include "ufl/problems.hpp"
#include "ufl/rng.hpp"

using namespace ufl;

namespace {

Example ex(std::vector<double> y, bool feasible = true) {
  Example e;
  e.y = std::move(y);
  e.feasible = feasible;
  return e;
}

std::vector<std::vector<double>> outputs_of(const std::vector<Example>& examples) {
  std::vector<std::vector<double>> out;
  for (const auto& e : examples) out.push_back(e.y);
  return out;
}

Eigen::VectorXd random_theta(Rng& rng, std::size_t dim, double radius) {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(dim));
  for (auto& v : theta) v = uniform(rng, -radius, radius);
  return theta;
}

}  // namespace

TEST_CASE("ten distinct examples yield 45 oriented preferences") {
  std::vector<Example> examples;
  for (int i = 0; i < 10; ++i) examples.push_back(ex({static_cast<double>(i)}));
  const auto prefs = generate_preferences(examples, [](std::span<const double> y) { return y[0]; });
  CHECK(prefs.size() == 45);
  for (const auto& p : prefs) CHECK(examples[p.preferred].y[0] > examples[p.dominated].y[0]);
}

TEST_CASE("ties and infeasible examples are skipped") {
  const std::vector<Example> examples = {ex({1.0}), ex({1.0}), ex({2.0}), ex({5.0}, false)};
  const auto prefs = generate_preferences(examples, [](std::span<const double> y) { return y[0]; });
  REQUIRE(prefs.size() == 2);
  for (const auto& p : prefs) {
    CHECK(p.preferred == 2);
    CHECK(p.dominated != 3);
  }
}

TEST_CASE("fulfillment probability examples") {
  const UtilitySpec spec = make_linear_template(std::vector<Interval>{{0.0, 1.0}, {0.0, 1.0}});
  const std::vector<double> a = {0.5, 0.5};
  CHECK(fulfillment_probability(spec, a, a) == 0.5);

  UtilitySpec unit = spec;
  unit.weights = {1.0, 0.0};
  const std::vector<double> hi = {1.0, 0.0};
  const std::vector<double> lo = {0.0, 0.0};
  CHECK(fulfillment_probability(unit, hi, lo) == doctest::Approx(0.7310585786300049).epsilon(1e-14));
}

TEST_CASE("fulfillment probabilities of swapped pairs sum to exactly one (property)") {
  Rng rng(31);
  const std::vector<Interval> ranges = {{0.0, 1.0}, {-2.0, 2.0}, {0.0, 10.0}};
  UtilitySpec spec = make_adaptable_template(ranges);
  for (int i = 0; i < 1000; ++i) {
    for (auto& t : spec.terms) {
      t.b = uniform01(rng);
      t.d = uniform(rng, kDFloor, 1.0);
      t.pw = uniform(rng, kPwLo, kPwHi);
    }
    for (auto& w : spec.weights) w = uniform(rng, -20.0, 20.0);
    std::vector<double> y0(3), y1(3);
    for (std::size_t k = 0; k < 3; ++k) {
      y0[k] = uniform(rng, ranges[k].lo - 1, ranges[k].hi + 1);
      y1[k] = uniform(rng, ranges[k].lo - 1, ranges[k].hi + 1);
    }
    CHECK(fulfillment_probability(spec, y0, y1) + fulfillment_probability(spec, y1, y0) == 1.0);
  }
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
}

TEST_CASE("indistinguishable outputs give log 2 per preference") {
  const std::vector<Interval> ranges = {{0.0, 1.0}, {0.0, 1.0}};
  const ParamSpace space(make_linear_template(ranges));
  const std::vector<Example> examples = {ex({0.3, 0.4}), ex({0.3, 0.4}), ex({0.3, 0.4})};
  const std::vector<Preference> prefs = {{0, 1}, {1, 2}, {0, 2}};
  const PreferenceDensity density(space, outputs_of(examples), prefs, PriorMode::Flat);
  Rng rng(32);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd theta = random_theta(rng, space.dim(), 5.0);
    CHECK(density.likelihood_nll(theta) == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-14));
  }
}

TEST_CASE("likelihood is additive over preferences and ignores their order") {
  const ProblemDef& p = problem(ProblemName::CAR);
  const auto examples = generate_random_examples(p, 8, 33);
  const auto prefs = generate_preferences(examples, ExpertFn{p.name});
  REQUIRE(prefs.size() >= 4);
  const ParamSpace space(make_space_template(p, SpaceKind::Informed));
  Rng rng(34);
  const Eigen::VectorXd theta = random_theta(rng, space.dim(), 2.0);

  const std::size_t half = prefs.size() / 2;
  const std::vector<Preference> first(prefs.begin(), prefs.begin() + static_cast<long>(half));
  const std::vector<Preference> second(prefs.begin() + static_cast<long>(half), prefs.end());
  const auto outs = outputs_of(examples);
  const double whole = PreferenceDensity(space, outs, prefs).likelihood_nll(theta);
  const double parts = PreferenceDensity(space, outs, first).likelihood_nll(theta) +
                       PreferenceDensity(space, outs, second).likelihood_nll(theta);
  CHECK(whole == doctest::Approx(parts).epsilon(1e-12));

  std::vector<Preference> shuffled = prefs;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(PreferenceDensity(space, outs, shuffled).nll(theta) ==
        doctest::Approx(PreferenceDensity(space, outs, prefs).nll(theta)).epsilon(1e-12));
}

TEST_CASE("NLL gradient matches central finite differences in every space (property)") {
  for (ProblemName name : {ProblemName::ZDT3, ProblemName::CAR, ProblemName::WATER}) {
    const ProblemDef& p = problem(name);
    const auto examples = generate_random_examples(p, 10, 35);
    const auto prefs = generate_preferences(examples, ExpertFn{name});
    for (SpaceKind kind : {SpaceKind::Linear, SpaceKind::Adaptable, SpaceKind::Informed}) {
      for (PriorMode prior : {PriorMode::Weakly, PriorMode::Flat}) {
        const PreferenceDensity density(ParamSpace(make_space_template(p, kind)), outputs_of(examples), prefs, prior);
        Rng rng(derive_seed(36, {static_cast<std::uint64_t>(name), static_cast<std::uint64_t>(kind)}));
        int checked = 0;
        for (int i = 0; i < 120; ++i) {
          const Eigen::VectorXd theta = random_theta(rng, density.dim(), 2.5);
          Eigen::VectorXd grad;
          density.nll_and_gradient(theta, grad);
          for (Eigen::Index k = 0; k < theta.size(); ++k) {
            const double h = 1e-6;
            Eigen::VectorXd hi = theta, lo = theta;
            hi[k] += h;
            lo[k] -= h;
            const double fd = (density.nll(hi) - density.nll(lo)) / (2 * h);
            // The utility has kinks where a term saturates; a step that crosses one spoils
            // the difference quotient, so compare only against one-sided agreement.
            const double fwd = (density.nll(hi) - density.nll(theta)) / h;
            const double bwd = (density.nll(theta) - density.nll(lo)) / h;
            if (std::abs(fwd - bwd) > 1e-3 * (1.0 + std::abs(fd))) continue;
            CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
            ++checked;
          }
        }
        CHECK(checked > 100);
      }
    }
  }
}

TEST_CASE("free-function forms agree with the density object") {
  const ProblemDef& p = problem(ProblemName::ZDT3);
  const auto examples = generate_random_examples(p, 6, 37);
  const auto prefs = generate_preferences(examples, ExpertFn{p.name});
  const ParamSpace space(make_space_template(p, SpaceKind::Informed));
  const PreferenceDensity density(space, outputs_of(examples), prefs);
  Rng rng(38);
  const Eigen::VectorXd theta = random_theta(rng, space.dim(), 1.0);
  Eigen::VectorXd grad;
  const double f = density.nll_and_gradient(theta, grad);
  CHECK(negative_log_likelihood(theta, prefs, examples, space) == doctest::Approx(f).epsilon(1e-14));
  CHECK((nll_gradient(theta, prefs, examples, space) - grad).norm() < 1e-12);
  Eigen::VectorXd g2;
  CHECK(density.log_density(theta, g2) == doctest::Approx(-f).epsilon(1e-14));
  CHECK((g2 + grad).norm() < 1e-12);
}

TEST_CASE("wrong-sized parameter vectors are rejected") {
  const ParamSpace space(make_linear_template(std::vector<Interval>{{0.0, 1.0}}));
  const PreferenceDensity density(space, {{0.1}, {0.2}}, {{1, 0}});
  CHECK_THROWS_AS(density.nll(Eigen::VectorXd::Zero(3)), DimensionMismatchError);
}

TEST_CASE("preference CSV round trip") {
  const std::vector<Preference> prefs = {{3, 1}, {0, 2}, {7, 4}};
  std::stringstream buf;
  write_preferences_csv(buf, prefs);
  CHECK(buf.str().rfind("preferred_index,dominated_index\n", 0) == 0);
  CHECK(read_preferences_csv(buf) == prefs);
}
