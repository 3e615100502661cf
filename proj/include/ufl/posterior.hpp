#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ufl/param_space.hpp"
#include "ufl/preference.hpp"
#include "ufl/sampler.hpp"

namespace ufl {

/// Objective in minimisation form: returns f(x) and writes grad f(x).
using NllFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct DescentOptions {
  int max_steps = 500;
  double gradient_tolerance = 1e-6;
};

struct MaxEstimate {
  Eigen::VectorXd theta;
  double nll = 0.0;
  double start_nll = 0.0;
  bool converged = false;
  int steps = 0;
};

/// Gradient descent with Armijo backtracking (Barzilai-Borwein trial steps).
MaxEstimate minimize_descent(const NllFn& objective, Eigen::VectorXd start, const DescentOptions& options = {});

/// Lowest-NLL posterior draw refined by gradient descent.
MaxEstimate estimate_max(const PosteriorSamples& posterior, const NllFn& objective,
                         const DescentOptions& options = {});
/// As above for a preference posterior, decoded (and weight-normalized for interpretable spaces).
UtilitySpec estimate_max(const PosteriorSamples& posterior, const PreferenceDensity& density,
                         MaxEstimate* details = nullptr);

enum class MeanSpace { Unconstrained, Constrained };

/// Posterior-mean parameters.
UtilitySpec estimate_mean(const PosteriorSamples& posterior, const ParamSpace& space,
                          MeanSpace where = MeanSpace::Unconstrained);

inline constexpr std::size_t kDefaultDistSize = 20000;

/// k draws from the pool: without replacement when k <= pool size, with replacement otherwise.
PosteriorSamples estimate_dist(const PosteriorSamples& posterior, std::size_t k, std::uint64_t seed);

/// Mean utility over posterior draws, mean_p g(p, y). Not g(mean p, y).
double posterior_mean_utility(const PosteriorSamples& posterior, const ParamSpace& space, std::span<const double> y);

/// A set of decoded utility functions evaluated through their mean. Decoding happens once.
class PosteriorUtility {
 public:
  PosteriorUtility(const PosteriorSamples& posterior, const ParamSpace& space);
  explicit PosteriorUtility(std::vector<UtilitySpec> specs);

  double operator()(std::span<const double> y) const;
  const std::vector<UtilitySpec>& specs() const { return specs_; }

 private:
  void flatten();

  std::vector<UtilitySpec> specs_;
  // Row-major [spec][output] copies of the fields used in evaluation.
  std::size_t n_out_ = 0;
  bool linear_ = false;
  std::vector<double> weight_;
  std::vector<double> lo_;
  std::vector<double> inv_span_;
  std::vector<double> b_;
  std::vector<double> inv_d_;
  std::vector<double> pw_;
  std::vector<int> m_;
};

}  // namespace ufl
