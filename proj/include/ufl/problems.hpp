#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ufl/preference.hpp"
#include "ufl/rng.hpp"
#include "ufl/utility_model.hpp"

namespace ufl {

enum class ProblemName { ZDT3, DTLZ2, CAR, WATER };

std::string_view to_string(ProblemName name);
ProblemName problem_from_string(std::string_view name);

/// A benchmark problem with its expert-side metadata.
struct ProblemDef {
  ProblemName name;
  std::vector<Interval> input_bounds;
  std::size_t output_dim = 0;
  std::size_t n_constraints = 0;
  /// Per-output normalization ranges used by the expert and the general bounds.
  std::vector<Interval> output_ranges;
  /// Outputs the expert truncates at half range (2 * min(0.5, f)).
  std::vector<bool> truncated;
  /// Constraint magnitudes used to normalise violations.
  std::vector<double> constraint_scales;
  /// Held-out value of x_0 used for optimisation runs (never drawn for training variants).
  double reference_x0 = 0.0;

  std::size_t input_dim() const { return input_bounds.size(); }
  bool constrained() const { return n_constraints > 0; }
};

const ProblemDef& problem(ProblemName name);

struct Evaluation {
  std::vector<double> y;
  /// value <= 0 means satisfied.
  std::vector<double> constraints;

  bool feasible() const;
};

/// Throws OutOfBoundsError when x leaves the box.
Evaluation evaluate_problem(const ProblemDef& p, std::span<const double> x);

/// Sum of normalized constraint violations, max(0, c_i) / scale_i.
double total_violation(const ProblemDef& p, std::span<const double> constraints);

/// Synthetic expert evaluation over raw outputs (normalized and clamped internally).
double expert_score(ProblemName name, std::span<const double> y);

struct ExpertFn {
  ProblemName problem;
  double operator()(std::span<const double> y) const { return expert_score(problem, y); }
};

/// Saturation ranges an expert would supply: the normalization range, truncated to its
/// lower half for outputs the expert truncates.
std::vector<Interval> informed_ranges(const ProblemDef& p);

/// Function-space template for a problem.
UtilitySpec make_space_template(const ProblemDef& p, SpaceKind kind);

/// Uniform input; x_0 is fixed when `fixed_x0` is given.
std::vector<double> sample_input(const ProblemDef& p, Rng& rng, std::optional<double> fixed_x0);

inline constexpr int kRejectionCap = 10000;

/// Uniform draws (x_0 fixed if given) until a feasible point is found or the cap is hit;
/// on failure returns the least-violating draw flagged infeasible.
Example sample_feasible_example(const ProblemDef& p, Rng& rng, std::optional<double> fixed_x0,
                                int max_attempts = kRejectionCap);

/// N examples from N distinct uniformly drawn values of x_0 (the reference value excluded).
std::vector<Example> generate_random_examples(const ProblemDef& p, std::size_t n, std::uint64_t seed);

inline constexpr std::size_t kDefaultBiasPool = 1000;

/// Per variant, the expert-best of `pool_size` feasible candidates.
std::vector<Example> generate_biased_examples(const ProblemDef& p, std::size_t n, std::size_t pool_size,
                                              std::uint64_t seed);

/// CSV: x_*, y_*, c_*, feasible and (optionally) an expert_score debug column.
void write_examples_csv(std::ostream& out, const ProblemDef& p, std::span<const Example> examples,
                        bool with_expert_score = false);
std::vector<Example> read_examples_csv(std::istream& in, const ProblemDef& p);

}  // namespace ufl
