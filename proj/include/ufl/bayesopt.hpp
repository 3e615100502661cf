#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ufl/evaluation.hpp"
#include "ufl/gp.hpp"
#include "ufl/problems.hpp"

namespace ufl {

struct BoConfig {
  int iterations = 150;
  int initial_points = 10;
  int candidates = 1024;
  int refine_starts = 4;
  int refine_steps = 40;
  /// Full hyperparameter refit period; in between, hyperparameters are reused.
  int refit_every = 10;
  /// Weight of the summed normalized constraint violation.
  double penalty = 10.0;
  /// Held-out x_0; defaults to the problem's reference value.
  std::optional<double> x0;
  GpConfig gp;

  void validate() const;
};

struct BoRecord {
  int iteration = 0;
  std::vector<double> x;
  /// Surrogate utility of f(x).
  double utility = 0.0;
  double violation = 0.0;
  /// utility - penalty * violation, the quantity the GP models.
  double objective = 0.0;
  /// Expert re-score; reporting only, never seen by the optimizer.
  double expert = 0.0;
  double best_so_far = 0.0;
};

struct BoResult {
  std::vector<double> best_x;
  double best_utility = 0.0;
  double best_expert = 0.0;
  bool best_feasible = false;
  std::vector<BoRecord> history;
};

/// Queried unit-box points and their objective values, in query order.
struct BoTrace {
  std::vector<Eigen::VectorXd> X;
  std::vector<double> y;
};

/// GP-EI maximization of f over [0,1]^dim: config.initial_points uniform points, then
/// config.iterations EI-argmax queries. `trace` holds everything evaluated so far, also
/// when f throws.
void bo_maximize(std::size_t dim, const std::function<double(const Eigen::VectorXd&)>& f, const BoConfig& config,
                 std::uint64_t seed, BoTrace& trace);

/// GP-EI maximization of objective(f(x)) with x_0 held fixed. Iterations count the queries
/// after the initial design. The returned best point is the feasible query with the
/// highest objective (the highest penalized objective if none is feasible).
BoResult bo_optimize(const ProblemDef& p, const UtilityEvaluator& objective, const BoConfig& config,
                     std::uint64_t seed);

/// As above, filling `result` as it goes so the history survives an evaluator error.
void bo_optimize(const ProblemDef& p, const UtilityEvaluator& objective, const BoConfig& config, std::uint64_t seed,
                 BoResult& result);

/// Largest expert score over M feasible uniform draws with x_0 fixed.
double manual_upper_bound(const ProblemDef& p, const ExpertFn& expert, std::size_t M, std::uint64_t seed,
                          std::optional<double> x0 = std::nullopt);

/// CSV: iteration, x_*, utility, violation, objective, expert, best_so_far.
void write_bo_history_csv(std::ostream& out, const std::vector<BoRecord>& history);

}  // namespace ufl
