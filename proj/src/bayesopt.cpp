#include "ufl/bayesopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "ufl/error.hpp"
#include "ufl/rng.hpp"

namespace ufl {

void BoConfig::validate() const {
  if (iterations < 0) throw ConfigError("BO iterations must be >= 0");
  if (initial_points < 2) throw ConfigError("BO needs at least two initial points");
  if (candidates < 1 || refine_starts < 0 || refine_steps < 0) throw ConfigError("invalid BO candidate settings");
  if (refit_every < 1) throw ConfigError("refit_every must be >= 1");
  if (!(penalty >= 0.0)) throw ConfigError("penalty must be >= 0");
  if (gp.restarts < 1) throw ConfigError("GP restarts must be >= 1");
}

namespace {

Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& rows, std::size_t dim) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return X;
}

Eigen::VectorXd random_point(Rng& rng, std::size_t dim) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
  for (auto& v : x) v = uniform01(rng);
  return x;
}

struct Scored {
  Eigen::VectorXd x;
  double ei = 0.0;
};

// Accept-if-better Gaussian perturbations, shrinking the step after each rejection.
Scored refine(const GpModel& model, Scored start, double best, int steps, Rng& rng) {
  double sigma = 0.1;
  for (int s = 0; s < steps; ++s) {
    Eigen::VectorXd x = start.x;
    for (auto& v : x) v = std::clamp(v + sigma * standard_normal(rng), 0.0, 1.0);
    const double ei = acquisition_ei(model, x, best);
    if (ei > start.ei) {
      start = {std::move(x), ei};
    } else {
      sigma *= 0.85;
    }
  }
  return start;
}

}  // namespace

void bo_maximize(std::size_t dim, const std::function<double(const Eigen::VectorXd&)>& f, const BoConfig& config,
                 std::uint64_t seed, BoTrace& trace) {
  config.validate();
  if (dim == 0) throw std::invalid_argument("bo_maximize needs at least one free dimension");
  Rng rng(derive_seed(seed, {0}));
  auto query = [&](Eigen::VectorXd x) {
    const double v = f(x);
    if (!std::isfinite(v)) throw NonFiniteError("BO objective returned a non-finite value");
    trace.X.push_back(std::move(x));
    trace.y.push_back(v);
  };
  for (int i = 0; i < config.initial_points; ++i) query(random_point(rng, dim));

  std::optional<GpHyper> hyper;
  for (int it = 0; it < config.iterations; ++it) {
    const Eigen::MatrixXd X = stack(trace.X, dim);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(trace.y.data(), static_cast<Eigen::Index>(trace.y.size()));
    std::optional<GpModel> model;
    if (hyper && it % config.refit_every != 0) {
      try {
        model.emplace(X, y, *hyper);
      } catch (const FactorizationError&) {
      }
    }
    if (!model) {
      model.emplace(GpModel::fit(X, y, config.gp, derive_seed(seed, {1, static_cast<std::uint64_t>(it)}), hyper));
      hyper = model->hyper();
    }
    const double best = *std::max_element(trace.y.begin(), trace.y.end());

    std::vector<Scored> pool;
    pool.reserve(static_cast<std::size_t>(config.candidates));
    for (int c = 0; c < config.candidates; ++c) {
      Eigen::VectorXd x = random_point(rng, dim);
      const double ei = acquisition_ei(*model, x, best);
      pool.push_back({std::move(x), ei});
    }
    const std::size_t top = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(config.refine_starts));
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(top), pool.end(),
                      [](const Scored& a, const Scored& b) { return a.ei > b.ei; });
    Scored chosen = pool.front();
    for (std::size_t k = 0; k < top; ++k) {
      Scored r = refine(*model, pool[k], best, config.refine_steps, rng);
      if (r.ei > chosen.ei) chosen = std::move(r);
    }
    query(std::move(chosen.x));
  }
}

void bo_optimize(const ProblemDef& p, const UtilityEvaluator& objective, const BoConfig& config, std::uint64_t seed,
                 BoResult& result) {
  const double x0 = config.x0.value_or(p.reference_x0);
  if (!(x0 >= p.input_bounds[0].lo && x0 <= p.input_bounds[0].hi)) throw ConfigError("BO x0 outside its bounds");
  const std::size_t dim = p.input_dim() - 1;
  result = BoResult{};
  double best_objective = -std::numeric_limits<double>::infinity();
  double best_feasible = -std::numeric_limits<double>::infinity();
  double best_any = -std::numeric_limits<double>::infinity();

  const auto f = [&](const Eigen::VectorXd& u) {
    BoRecord rec;
    rec.iteration = static_cast<int>(result.history.size());
    rec.x.resize(p.input_dim());
    rec.x[0] = x0;
    for (std::size_t i = 0; i < dim; ++i) {
      const Interval& b = p.input_bounds[i + 1];
      rec.x[i + 1] = std::clamp(b.lo + b.width() * u(static_cast<Eigen::Index>(i)), b.lo, b.hi);
    }
    const Evaluation ev = evaluate_problem(p, rec.x);
    rec.utility = objective(ev.y);
    rec.violation = total_violation(p, ev.constraints);
    rec.objective = rec.utility - config.penalty * rec.violation;
    rec.expert = expert_score(p.name, ev.y);
    best_objective = std::max(best_objective, rec.objective);
    rec.best_so_far = best_objective;

    const bool feasible = ev.feasible();
    if ((feasible && rec.objective > best_feasible) || (best_feasible == -std::numeric_limits<double>::infinity() &&
                                                        !feasible && rec.objective > best_any)) {
      result.best_x = rec.x;
      result.best_utility = rec.utility;
      result.best_expert = rec.expert;
      result.best_feasible = feasible;
    }
    if (feasible) best_feasible = std::max(best_feasible, rec.objective);
    best_any = std::max(best_any, rec.objective);
    const double value = rec.objective;
    result.history.push_back(std::move(rec));
    return value;
  };
  BoTrace trace;
  bo_maximize(dim, f, config, seed, trace);
}

BoResult bo_optimize(const ProblemDef& p, const UtilityEvaluator& objective, const BoConfig& config,
                     std::uint64_t seed) {
  BoResult result;
  bo_optimize(p, objective, config, seed, result);
  return result;
}

double manual_upper_bound(const ProblemDef& p, const ExpertFn& expert, std::size_t M, std::uint64_t seed,
                          std::optional<double> x0) {
  if (M == 0) throw std::invalid_argument("manual_upper_bound needs M >= 1");
  const double fixed = x0.value_or(p.reference_x0);
  Rng rng(seed);
  double best = -std::numeric_limits<double>::infinity();
  std::size_t found = 0;
  // Each draw is retried until feasible; a draw that exhausts the cap is dropped.
  for (std::size_t i = 0; i < M; ++i) {
    const Example e = sample_feasible_example(p, rng, fixed);
    if (!e.feasible) continue;
    best = std::max(best, expert(e.y));
    ++found;
  }
  if (found == 0) throw EmptyPosteriorError("no feasible draw found for the manual bound");
  return best;
}

void write_bo_history_csv(std::ostream& out, const std::vector<BoRecord>& history) {
  const std::size_t d = history.empty() ? 0 : history.front().x.size();
  out << "iteration";
  for (std::size_t i = 0; i < d; ++i) out << ",x_" << i;
  out << ",utility,violation,objective,expert,best_so_far\n";
  const auto old = out.precision(17);
  for (const auto& r : history) {
    out << r.iteration;
    for (double v : r.x) out << ',' << v;
    out << ',' << r.utility << ',' << r.violation << ',' << r.objective << ',' << r.expert << ',' << r.best_so_far
        << '\n';
  }
  out.precision(old);
}

}  // namespace ufl
