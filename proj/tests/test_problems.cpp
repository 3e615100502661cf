#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "ufl/error.hpp"
#include "ufl/problems.hpp"

using namespace ufl;

namespace {

void check_close(const std::vector<double>& got, const std::vector<double>& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(std::abs(got[i] - want[i]) <= 1e-9 * std::max(1.0, std::abs(want[i])));
}

// Raw outputs whose normalized values are `s` under the problem's ranges.
std::vector<double> denormalize(ProblemName name, const std::vector<double>& s) {
  const ProblemDef& p = problem(name);
  std::vector<double> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) y[i] = p.output_ranges[i].lo + s[i] * p.output_ranges[i].width();
  return y;
}

double mean_expert(const ProblemDef& p, const std::vector<Example>& ex) {
  double s = 0.0;
  for (const auto& e : ex) s += expert_score(p.name, e.y);
  return s / static_cast<double>(ex.size());
}

const ProblemName kAll[] = {ProblemName::ZDT3, ProblemName::DTLZ2, ProblemName::CAR, ProblemName::WATER};

}  // namespace

TEST_CASE("problem dimensions") {
  struct Dims {
    ProblemName name;
    std::size_t in, out, cons;
  };
  for (const Dims& d : {Dims{ProblemName::ZDT3, 30, 2, 0}, Dims{ProblemName::DTLZ2, 7, 3, 0},
                        Dims{ProblemName::CAR, 7, 3, 10}, Dims{ProblemName::WATER, 3, 5, 7}}) {
    const ProblemDef& p = problem(d.name);
    CHECK(p.input_dim() == d.in);
    CHECK(p.output_dim == d.out);
    CHECK(p.n_constraints == d.cons);
    CHECK(p.output_ranges.size() == d.out);
    CHECK(p.truncated.size() == d.out);
    CHECK(p.constraint_scales.size() == d.cons);
    CHECK(problem_from_string(to_string(d.name)) == d.name);
  }
  CHECK_THROWS_AS(problem_from_string("ZDT1"), ConfigError);
}

TEST_CASE("ZDT3 and DTLZ2 identities") {
  const std::vector<double> zero(30, 0.0);
  const Evaluation z = evaluate_problem(problem(ProblemName::ZDT3), zero);
  CHECK(z.y[0] == 0.0);
  CHECK(z.constraints.empty());
  CHECK(z.feasible());

  Rng rng(61);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(7, 0.5);
    x[0] = uniform01(rng);
    x[1] = uniform01(rng);
    const Evaluation e = evaluate_problem(problem(ProblemName::DTLZ2), x);
    CHECK(e.y[0] * e.y[0] + e.y[1] * e.y[1] + e.y[2] * e.y[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.constraints.empty());
  }
}

TEST_CASE("golden outputs") {
  // Reference values from an independent evaluation of the canonical formulas.
  std::vector<double> z2(30, 0.1);
  z2[0] = 0.25;
  std::vector<double> z3(30);
  z3[0] = 0.9;
  for (int i = 1; i < 30; ++i) z3[static_cast<std::size_t>(i)] = (i - 1) / 29.0;
  const ProblemDef& zdt3 = problem(ProblemName::ZDT3);
  check_close(evaluate_problem(zdt3, std::vector<double>(30, 0.0)).y, {0.0, 1.0});
  check_close(evaluate_problem(zdt3, z2).y, {0.25, 0.9607975623954892});
  check_close(evaluate_problem(zdt3, z3).y, {0.9, 3.151577753746807});

  const ProblemDef& dtlz2 = problem(ProblemName::DTLZ2);
  check_close(evaluate_problem(dtlz2, std::vector<double>(7, 0.5)).y, {0.5, 0.5, 0.7071067811865475});
  check_close(evaluate_problem(dtlz2, std::vector<double>{0.0, 1.0, 0.2, 0.4, 0.6, 0.8, 1.0}).y, {0.0, 1.45, 0.0});
  check_close(evaluate_problem(dtlz2, std::vector<double>{0.3, 0.7, 0.5, 0.5, 0.5, 0.5, 0.5}).y,
              {0.4045084971874737, 0.7938926261462366, 0.45399049973954675});

  const ProblemDef& car = problem(ProblemName::CAR);
  check_close(evaluate_problem(car, std::vector<double>{1.0, 0.9, 1.0, 1.0, 1.75, 0.8, 0.8}).y,
              {29.172008, 4.049, 12.1232625});
  check_close(evaluate_problem(car, std::vector<double>{0.5, 0.45, 0.5, 0.5, 0.875, 0.4, 0.4}).y,
              {15.576004, 4.42725, 13.09138125});
  check_close(evaluate_problem(car, std::vector<double>{1.5, 1.35, 1.5, 1.5, 2.625, 1.2, 1.2}).y,
              {42.768012, 3.58525, 10.61064375});

  const ProblemDef& water = problem(ProblemName::WATER);
  check_close(evaluate_problem(water, std::vector<double>{0.23, 0.055, 0.055}).y,
              {73450.5107, 690.0, 1569407.930717979, 1716128.1535797808, 7539.535573122529});
  check_close(evaluate_problem(water, std::vector<double>{0.01, 0.01, 0.01}).y,
              {63840.2774, 30.0, 285346.896494178, 6575303.126234903, 346735.0});
  check_close(evaluate_problem(water, std::vector<double>{0.45, 0.1, 0.1}).y,
              {83060.744, 1350.0, 2853468.96494178, 447902.6720089092, 11122.222222222223});
}

TEST_CASE("out-of-box and wrong-sized inputs are rejected") {
  const ProblemDef& car = problem(ProblemName::CAR);
  CHECK_THROWS_AS(evaluate_problem(car, std::vector<double>{0.1, 0.9, 1.0, 1.0, 1.75, 0.8, 0.8}), OutOfBoundsError);
  CHECK_THROWS_AS(evaluate_problem(car, std::vector<double>{1.0}), DimensionMismatchError);
  CHECK_THROWS_AS(expert_score(ProblemName::CAR, std::vector<double>{1.0}), DimensionMismatchError);
}

TEST_CASE("expert score examples") {
  CHECK(expert_score(ProblemName::ZDT3, denormalize(ProblemName::ZDT3, {0.3, 0.6})) ==
        doctest::Approx(0.6).epsilon(1e-12));
  CHECK(expert_score(ProblemName::ZDT3, denormalize(ProblemName::ZDT3, {0.5, 0.9})) == 1.0);
  CHECK(expert_score(ProblemName::ZDT3, denormalize(ProblemName::ZDT3, {0.7, 0.5})) == 1.0);
  CHECK(expert_score(ProblemName::DTLZ2, denormalize(ProblemName::DTLZ2, {0.0, 0.0, 0.5})) ==
        doctest::Approx(0.7).epsilon(1e-12));
  CHECK(expert_score(ProblemName::CAR, denormalize(ProblemName::CAR, {1.0, 1.0, 1.0})) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(expert_score(ProblemName::WATER, denormalize(ProblemName::WATER, {1.0, 1.0, 1.0, 1.0, 1.0})) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // Outside the ranges the normalized values clamp.
  CHECK(expert_score(ProblemName::ZDT3, std::vector<double>{-5.0, 100.0}) == 0.0);
}

TEST_CASE("expert scores lie in [0, 1] (property)") {
  Rng rng(62);
  for (ProblemName name : kAll) {
    const ProblemDef& p = problem(name);
    for (int i = 0; i < 5000; ++i) {
      std::vector<double> y(p.output_dim);
      for (std::size_t k = 0; k < y.size(); ++k) {
        const Interval& r = p.output_ranges[k];
        y[k] = uniform(rng, r.lo - 0.5 * r.width(), r.hi + 0.5 * r.width());
      }
      const double e = expert_score(name, y);
      CHECK(e >= 0.0);
      CHECK(e <= 1.0);
    }
  }
}

TEST_CASE("observed outputs stay within the declared ranges up to 1% spill (property)") {
  for (ProblemName name : kAll) {
    const ProblemDef& p = problem(name);
    Rng rng(derive_seed(63, {static_cast<std::uint64_t>(name)}));
    std::vector<std::size_t> spill(p.output_dim, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const auto x = sample_input(p, rng, std::nullopt);
      const Evaluation e = evaluate_problem(p, x);
      for (std::size_t k = 0; k < p.output_dim; ++k)
        if (e.y[k] < p.output_ranges[k].lo || e.y[k] > p.output_ranges[k].hi) ++spill[k];
    }
    for (std::size_t k = 0; k < p.output_dim; ++k) {
      INFO(to_string(name), " output ", k);
      CHECK(static_cast<double>(spill[k]) <= 0.01 * n);
    }
  }
}

TEST_CASE("evaluation is deterministic bit for bit") {
  Rng rng(64);
  for (ProblemName name : kAll) {
    const ProblemDef& p = problem(name);
    const auto x = sample_input(p, rng, std::nullopt);
    const Evaluation a = evaluate_problem(p, x);
    const Evaluation b = evaluate_problem(p, x);
    CHECK(a.y == b.y);
    CHECK(a.constraints == b.constraints);
  }
}

TEST_CASE("informed ranges halve truncated outputs") {
  const auto r = informed_ranges(problem(ProblemName::ZDT3));
  CHECK(r[0].hi == 0.5);
  CHECK(r[1].hi == 4.0);
  const auto c = informed_ranges(problem(ProblemName::CAR));
  CHECK(c[0] == problem(ProblemName::CAR).output_ranges[0]);
  CHECK(c[2].hi == 12.0);
  for (ProblemName name : kAll)
    for (SpaceKind kind : {SpaceKind::Linear, SpaceKind::Adaptable, SpaceKind::Informed})
      CHECK_NOTHROW(validate(make_space_template(problem(name), kind)));
}

TEST_CASE("random examples: N distinct x0 values, feasible, deterministic") {
  for (ProblemName name : kAll) {
    const ProblemDef& p = problem(name);
    const auto a = generate_random_examples(p, 10, 65);
    REQUIRE(a.size() == 10);
    std::set<double> x0;
    for (const auto& e : a) {
      x0.insert(e.x[0]);
      CHECK(e.x[0] != p.reference_x0);
      CHECK(e.y.size() == p.output_dim);
      CHECK(e.constraint_values.size() == p.n_constraints);
      if (!p.constrained()) CHECK(e.feasible);
    }
    CHECK(x0.size() == 10);
    const auto b = generate_random_examples(p, 10, 65);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].x == b[i].x);
      CHECK(a[i].y == b[i].y);
    }
    const auto c = generate_random_examples(p, 10, 66);
    CHECK(c[0].x != a[0].x);
  }
}

TEST_CASE("constrained generation finds feasible examples") {
  for (ProblemName name : {ProblemName::CAR, ProblemName::WATER}) {
    const auto ex = generate_random_examples(problem(name), 20, 67);
    for (const auto& e : ex) {
      CHECK(e.feasible);
      for (double c : e.constraint_values) CHECK(c <= 0.0);
    }
  }
}

TEST_CASE("sample_feasible_example reports failure after the cap") {
  // WATER with x_0 pinned at its lower bound is almost never feasible with one attempt.
  const ProblemDef& p = problem(ProblemName::WATER);
  Rng rng(68);
  const Example e = sample_feasible_example(p, rng, 0.01, 1);
  CHECK(e.x[0] == 0.01);
  CHECK(e.feasible == evaluate_problem(p, e.x).feasible());
}

TEST_CASE("biased examples beat random ones on average over 20 seeds") {
  for (ProblemName name : kAll) {
    const ProblemDef& p = problem(name);
    int wins = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto biased = generate_biased_examples(p, 10, 100, derive_seed(69, {s}));
      const auto random = generate_random_examples(p, 10, derive_seed(69, {s}));
      REQUIRE(biased.size() == 10);
      if (mean_expert(p, biased) >= mean_expert(p, random)) ++wins;
    }
    INFO(to_string(name));
    CHECK(wins == 20);
  }
  CHECK(kDefaultBiasPool == 1000);
}

TEST_CASE("examples CSV round trip") {
  const ProblemDef& p = problem(ProblemName::CAR);
  const auto ex = generate_random_examples(p, 5, 70);
  std::stringstream buf;
  write_examples_csv(buf, p, ex, true);
  const std::string header = buf.str().substr(0, buf.str().find('\n'));
  CHECK(header.rfind("x_0,", 0) == 0);
  CHECK(header.find("expert_score") != std::string::npos);
  const auto back = read_examples_csv(buf, p);
  REQUIRE(back.size() == ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    CHECK(back[i].x == ex[i].x);
    CHECK(back[i].y == ex[i].y);
    CHECK(back[i].constraint_values == ex[i].constraint_values);
    CHECK(back[i].feasible == ex[i].feasible);
  }
}
