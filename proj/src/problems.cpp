#include "ufl/problems.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "ufl/error.hpp"

namespace ufl {

std::string_view to_string(ProblemName name) {
  switch (name) {
    case ProblemName::ZDT3:
      return "ZDT3";
    case ProblemName::DTLZ2:
      return "DTLZ2";
    case ProblemName::CAR:
      return "CAR";
    case ProblemName::WATER:
      return "WATER";
  }
  return "?";
}

ProblemName problem_from_string(std::string_view name) {
  if (name == "ZDT3") return ProblemName::ZDT3;
  if (name == "DTLZ2") return ProblemName::DTLZ2;
  if (name == "CAR") return ProblemName::CAR;
  if (name == "WATER") return ProblemName::WATER;
  throw ConfigError("unknown problem: " + std::string(name));
}

namespace {

ProblemDef make_zdt3() {
  ProblemDef p;
  p.name = ProblemName::ZDT3;
  p.input_bounds.assign(30, {0.0, 1.0});
  p.output_dim = 2;
  p.output_ranges = {{0.0, 1.0}, {0.0, 8.0}};
  p.truncated = {true, true};
  p.reference_x0 = 0.5;
  return p;
}

ProblemDef make_dtlz2() {
  ProblemDef p;
  p.name = ProblemName::DTLZ2;
  p.input_bounds.assign(7, {0.0, 1.0});
  p.output_dim = 3;
  p.output_ranges = {{0.0, 3.0}, {0.0, 3.0}, {0.0, 3.0}};
  p.truncated = {false, false, true};
  // x_0 drives f_3 = (1 + g) sin(x_0 pi / 2). At the midpoint the best reachable expert
  // score is ~0.74; 0.88 puts it at the published random-search bound of ~0.703.
  p.reference_x0 = 0.88;
  return p;
}

ProblemDef make_car() {
  ProblemDef p;
  p.name = ProblemName::CAR;
  p.input_bounds = {{0.5, 1.5}, {0.45, 1.35}, {0.5, 1.5}, {0.5, 1.5}, {0.875, 2.625}, {0.4, 1.2}, {0.4, 1.2}};
  p.output_dim = 3;
  p.n_constraints = 10;
  p.output_ranges = {{16.0, 42.0}, {3.0, 5.0}, {10.0, 14.0}};
  p.truncated = {false, false, true};
  p.constraint_scales = {1.0, 0.32, 0.32, 0.32, 32.0, 32.0, 32.0, 4.0, 9.9, 15.7};
  p.reference_x0 = 1.0;
  return p;
}

ProblemDef make_water() {
  ProblemDef p;
  p.name = ProblemName::WATER;
  p.input_bounds = {{0.01, 0.45}, {0.01, 0.10}, {0.01, 0.10}};
  p.output_dim = 5;
  p.n_constraints = 7;
  p.output_ranges = {{63842.0, 83055.0}, {30.0, 1350.0}, {285346.0, 2853469.0}, {183960.0, 16013931.0},
                     {27.0, 350746.0}};
  p.truncated = {false, false, false, false, true};
  p.constraint_scales = {1.0, 1.0, 50000.0, 16000.0, 10000.0, 2000.0, 550.0};
  p.reference_x0 = 0.23;
  return p;
}

void eval_zdt3(std::span<const double> x, Evaluation& out) {
  const std::size_t n = x.size();
  double tail = 0.0;
  for (std::size_t i = 1; i < n; ++i) tail += x[i];
  const double f1 = x[0];
  const double g = 1.0 + 9.0 * tail / static_cast<double>(n - 1);
  const double r = f1 / g;
  const double h = 1.0 - std::sqrt(r) - r * std::sin(10.0 * std::numbers::pi * f1);
  out.y = {f1, g * h};
}

void eval_dtlz2(std::span<const double> x, Evaluation& out) {
  // Three objectives; x_2..x_6 are the distance variables.
  double g = 0.0;
  for (std::size_t i = 2; i < x.size(); ++i) g += (x[i] - 0.5) * (x[i] - 0.5);
  const double half_pi = 0.5 * std::numbers::pi;
  const double r = 1.0 + g;
  out.y = {r * std::cos(x[0] * half_pi) * std::cos(x[1] * half_pi),
           r * std::cos(x[0] * half_pi) * std::sin(x[1] * half_pi), r * std::sin(x[0] * half_pi)};
}

void eval_car(std::span<const double> x, Evaluation& out) {
  const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3], x5 = x[4], x6 = x[5], x7 = x[6];
  const double weight = 1.98 + 4.9 * x1 + 6.67 * x2 + 6.98 * x3 + 4.01 * x4 + 1.78 * x5 + 0.00001 * x6 + 2.73 * x7;
  const double pubic_force = 4.72 - 0.5 * x4 - 0.19 * x2 * x3;
  const double v_mbp = 10.58 - 0.674 * x1 * x2 - 0.67275 * x2;
  const double v_fd = 16.45 - 0.489 * x3 * x7 - 0.843 * x5 * x6;
  out.y = {weight, pubic_force, 0.5 * (v_mbp + v_fd)};
  out.constraints = {
      1.16 - 0.3717 * x2 * x4 - 0.0092928 * x3 - 1.0,
      0.261 - 0.0159 * x1 * x2 - 0.06486 * x1 - 0.019 * x2 * x7 + 0.0144 * x3 * x5 + 0.0154464 * x6 - 0.32,
      0.214 + 0.00817 * x5 - 0.045195 * x1 - 0.0135168 * x1 + 0.03099 * x2 * x6 - 0.018 * x2 * x7 +
          0.007176 * x3 + 0.023232 * x3 - 0.00364 * x5 * x6 - 0.018 * x2 * x2 - 0.32,
      0.74 - 0.61 * x2 - 0.031296 * x3 - 0.031872 * x7 + 0.227 * x2 * x2 - 0.32,
      28.98 + 3.818 * x3 - 4.2 * x1 * x2 + 1.27296 * x6 - 2.68065 * x7 - 32.0,
      33.86 + 2.95 * x3 - 5.057 * x1 * x2 - 3.795 * x2 - 3.4431 * x7 + 1.45728 - 32.0,
      46.36 - 9.9 * x2 - 4.4505 * x1 - 32.0,
      pubic_force - 4.0,
      v_mbp - 9.9,
      v_fd - 15.7,
  };
}

void eval_water(std::span<const double> x, Evaluation& out) {
  const double x1 = x[0], x2 = x[1], x3 = x[2];
  const double inv = 1.0 / (x1 * x2);
  out.y = {
      106780.37 * (x2 + x3) + 61704.67,
      3000.0 * x1,
      305700.0 * 2289.0 * x2 / std::pow(0.06 * 2289.0, 0.65),
      250.0 * 2289.0 * std::exp(-39.75 * x2 + 9.9 * x3 + 2.74),
      25.0 * (1.39 * inv + 4940.0 * x3 - 80.0),
  };
  out.constraints = {
      0.00139 * inv + 4.94 * x3 - 0.08 - 1.0,
      0.000306 * inv + 1.082 * x3 - 0.0986 - 1.0,
      12.307 * inv + 49408.24 * x3 + 4051.02 - 50000.0,
      2.098 * inv + 8046.33 * x3 - 696.71 - 16000.0,
      2.138 * inv + 7883.39 * x3 - 705.04 - 10000.0,
      0.417 * x1 * x2 + 1721.26 * x3 - 136.54 - 2000.0,
      0.164 * inv + 631.13 * x3 - 54.48 - 550.0,
  };
}

double normalized(const ProblemDef& p, std::span<const double> y, std::size_t i) {
  return normalize_output(y[i], p.output_ranges[i].lo, p.output_ranges[i].hi);
}

double truncate_half(double v) { return 2.0 * std::min(0.5, v); }

}  // namespace

const ProblemDef& problem(ProblemName name) {
  static const ProblemDef zdt3 = make_zdt3();
  static const ProblemDef dtlz2 = make_dtlz2();
  static const ProblemDef car = make_car();
  static const ProblemDef water = make_water();
  switch (name) {
    case ProblemName::ZDT3:
      return zdt3;
    case ProblemName::DTLZ2:
      return dtlz2;
    case ProblemName::CAR:
      return car;
    case ProblemName::WATER:
      return water;
  }
  throw ConfigError("unknown problem");
}

bool Evaluation::feasible() const {
  return std::all_of(constraints.begin(), constraints.end(), [](double c) { return c <= 0.0; });
}

Evaluation evaluate_problem(const ProblemDef& p, std::span<const double> x) {
  if (x.size() != p.input_dim()) throw DimensionMismatchError("input has wrong dimensionality");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= p.input_bounds[i].lo && x[i] <= p.input_bounds[i].hi))
      throw OutOfBoundsError("input coordinate " + std::to_string(i) + " outside its bounds");
  }
  Evaluation out;
  switch (p.name) {
    case ProblemName::ZDT3:
      eval_zdt3(x, out);
      break;
    case ProblemName::DTLZ2:
      eval_dtlz2(x, out);
      break;
    case ProblemName::CAR:
      eval_car(x, out);
      break;
    case ProblemName::WATER:
      eval_water(x, out);
      break;
  }
  return out;
}

double total_violation(const ProblemDef& p, std::span<const double> constraints) {
  double v = 0.0;
  for (std::size_t i = 0; i < constraints.size(); ++i) v += std::max(0.0, constraints[i]) / p.constraint_scales[i];
  return v;
}

double expert_score(ProblemName name, std::span<const double> y) {
  const ProblemDef& p = problem(name);
  if (y.size() != p.output_dim) throw DimensionMismatchError("expert input has wrong dimensionality");
  auto f = [&](std::size_t i) { return normalized(p, y, i); };
  switch (name) {
    case ProblemName::ZDT3:
      return truncate_half(f(0)) * truncate_half(f(1));
    case ProblemName::DTLZ2:
    case ProblemName::CAR: {
      const double t = truncate_half(f(2));
      return 0.3 * f(0) * f(1) + 0.7 * t * t;
    }
    case ProblemName::WATER: {
      const double t = truncate_half(f(4));
      return 0.2 * f(0) * f(1) + 0.4 * f(2) * f(3) + 0.4 * t * t;
    }
  }
  return 0.0;
}

std::vector<Interval> informed_ranges(const ProblemDef& p) {
  std::vector<Interval> out = p.output_ranges;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (p.truncated[i]) out[i].hi = out[i].mid();
  return out;
}

UtilitySpec make_space_template(const ProblemDef& p, SpaceKind kind) {
  switch (kind) {
    case SpaceKind::Linear:
      return make_linear_template(p.output_ranges);
    case SpaceKind::Adaptable:
      return make_adaptable_template(p.output_ranges);
    case SpaceKind::Informed: {
      const auto ranges = informed_ranges(p);
      const std::vector<int> rising(ranges.size(), 1);
      return make_informed_template(ranges, rising);
    }
  }
  throw ConfigError("unknown space kind");
}

std::vector<double> sample_input(const ProblemDef& p, Rng& rng, std::optional<double> fixed_x0) {
  std::vector<double> x(p.input_dim());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = uniform(rng, p.input_bounds[i].lo, p.input_bounds[i].hi);
  if (fixed_x0) x[0] = *fixed_x0;
  return x;
}

Example sample_feasible_example(const ProblemDef& p, Rng& rng, std::optional<double> fixed_x0, int max_attempts) {
  Example best;
  double best_violation = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < std::max(1, max_attempts); ++attempt) {
    std::vector<double> x = sample_input(p, rng, fixed_x0);
    Evaluation ev = evaluate_problem(p, x);
    const double violation = total_violation(p, ev.constraints);
    if (violation < best_violation) {
      best_violation = violation;
      best = Example{std::move(x), std::move(ev.y), std::move(ev.constraints), false};
    }
    if (violation == 0.0 && ev.feasible()) {
      best.feasible = true;
      return best;
    }
  }
  return best;
}

namespace {

std::vector<double> draw_variant_x0(const ProblemDef& p, std::size_t n, Rng& rng) {
  const Interval b = p.input_bounds[0];
  std::vector<double> values;
  while (values.size() < n) {
    const double v = uniform(rng, b.lo, b.hi);
    if (v == p.reference_x0 || std::find(values.begin(), values.end(), v) != values.end()) continue;
    values.push_back(v);
  }
  return values;
}

}  // namespace

std::vector<Example> generate_random_examples(const ProblemDef& p, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("need at least two examples");
  Rng rng(seed);
  std::vector<Example> out;
  for (double x0 : draw_variant_x0(p, n, rng)) out.push_back(sample_feasible_example(p, rng, x0));
  return out;
}

std::vector<Example> generate_biased_examples(const ProblemDef& p, std::size_t n, std::size_t pool_size,
                                              std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("need at least two examples");
  if (pool_size < 1) throw std::invalid_argument("pool size must be positive");
  Rng rng(seed);
  std::vector<Example> out;
  for (double x0 : draw_variant_x0(p, n, rng)) {
    Example best;
    double best_score = -std::numeric_limits<double>::infinity();
    bool have = false;
    for (std::size_t k = 0; k < pool_size; ++k) {
      Example cand = sample_feasible_example(p, rng, x0);
      if (!cand.feasible) {
        if (!have) best = std::move(cand);
        continue;
      }
      const double score = expert_score(p.name, cand.y);
      if (!have || score > best_score) {
        best_score = score;
        best = std::move(cand);
        have = true;
      }
    }
    out.push_back(std::move(best));
  }
  return out;
}

void write_examples_csv(std::ostream& out, const ProblemDef& p, std::span<const Example> examples,
                        bool with_expert_score) {
  for (std::size_t i = 0; i < p.input_dim(); ++i) out << "x_" << i << ',';
  for (std::size_t i = 0; i < p.output_dim; ++i) out << "y_" << i << ',';
  for (std::size_t i = 0; i < p.n_constraints; ++i) out << "c_" << i << ',';
  out << "feasible";
  if (with_expert_score) out << ",expert_score";
  out << '\n';
  std::ostringstream row;
  row.precision(17);
  for (const auto& e : examples) {
    row.str("");
    for (double v : e.x) row << v << ',';
    for (double v : e.y) row << v << ',';
    for (double v : e.constraint_values) row << v << ',';
    row << (e.feasible ? 1 : 0);
    if (with_expert_score) row << ',' << expert_score(p.name, e.y);
    out << row.str() << '\n';
  }
}

std::vector<Example> read_examples_csv(std::istream& in, const ProblemDef& p) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty example CSV");
  const bool has_score = line.find("expert_score") != std::string::npos;
  std::vector<Example> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    auto next = [&] {
      if (!std::getline(row, cell, ',')) throw ConfigError("example CSV row is short: " + line);
      return std::stod(cell);
    };
    Example e;
    for (std::size_t i = 0; i < p.input_dim(); ++i) e.x.push_back(next());
    for (std::size_t i = 0; i < p.output_dim; ++i) e.y.push_back(next());
    for (std::size_t i = 0; i < p.n_constraints; ++i) e.constraint_values.push_back(next());
    e.feasible = next() != 0.0;
    if (has_score) next();  // debug column, never used for learning
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace ufl
