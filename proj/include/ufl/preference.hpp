#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ufl/param_space.hpp"
#include "ufl/utility_model.hpp"

namespace ufl {

/// One historical result.
struct Example {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> constraint_values;
  bool feasible = true;
};

/// `preferred` was judged better than `dominated` (indices into an example list).
struct Preference {
  std::size_t preferred = 0;
  std::size_t dominated = 0;

  bool operator==(const Preference&) const = default;
};

using ExpertEvaluator = std::function<double(std::span<const double>)>;

/// One preference per unordered pair of feasible examples, oriented toward the higher
/// expert score. Exact ties and infeasible examples are skipped.
std::vector<Preference> generate_preferences(std::span<const Example> examples, const ExpertEvaluator& expert);

/// sigmoid(g(y0) - g(y1)); p(a,b) + p(b,a) == 1 exactly.
double fulfillment_probability(const UtilitySpec& spec, std::span<const double> y0, std::span<const double> y1);

/// Logistic function with the exact complement property sigmoid(x) + sigmoid(-x) == 1.
double sigmoid(double x);

enum class PriorMode {
  /// Uniform on b and d, log-uniform on pw, half-normal / normal on weights.
  Weakly,
  /// No explicit prior factor; only the change-of-variables Jacobian is kept.
  Flat,
};

/// Negative log posterior over unconstrained parameters:
///   -sum_i log sigmoid(g(p, y_i0) - g(p, y_i1)) - log prior(p) - log |J(theta)|
/// up to an additive constant. Evaluation is const and safe to share across threads.
class PreferenceDensity {
 public:
  PreferenceDensity(ParamSpace space, std::vector<std::vector<double>> outputs, std::vector<Preference> prefs,
                    PriorMode prior = PriorMode::Weakly);

  const ParamSpace& space() const { return space_; }
  std::size_t dim() const { return space_.dim(); }
  std::size_t n_preferences() const { return prefs_.size(); }

  double likelihood_nll(const Eigen::VectorXd& theta) const;
  double prior_nll(const Eigen::VectorXd& theta) const;
  double nll(const Eigen::VectorXd& theta) const;

  Eigen::VectorXd likelihood_gradient(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd prior_gradient(const Eigen::VectorXd& theta) const;
  /// Full NLL and its gradient in one pass. Throws NonFiniteError on NaN/inf.
  double nll_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;

  /// Log density (negated NLL) with gradient, the form consumed by the sampler.
  double log_density(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;

 private:
  double likelihood_impl(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const;
  double prior_impl(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const;

  ParamSpace space_;
  std::vector<std::vector<double>> outputs_;
  std::vector<Preference> prefs_;
  PriorMode prior_;
};

/// Free-function forms of the density.
double negative_log_likelihood(const Eigen::VectorXd& theta, std::span<const Preference> prefs,
                               std::span<const Example> examples, const ParamSpace& space,
                               PriorMode prior = PriorMode::Weakly);
Eigen::VectorXd nll_gradient(const Eigen::VectorXd& theta, std::span<const Preference> prefs,
                             std::span<const Example> examples, const ParamSpace& space,
                             PriorMode prior = PriorMode::Weakly);

/// CSV with header `preferred_index,dominated_index`.
void write_preferences_csv(std::ostream& out, std::span<const Preference> prefs);
std::vector<Preference> read_preferences_csv(std::istream& in);

}  // namespace ufl
