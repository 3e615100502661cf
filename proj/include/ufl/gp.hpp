#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace ufl {

/// Log-scale GP hyperparameters. Variances refer to standardized targets.
struct GpHyper {
  Eigen::VectorXd log_lengthscales;
  double log_signal_var = 0.0;
  double log_noise_var = -9.0;
};

struct GpConfig {
  /// Total gradient-ascent starts for the marginal likelihood, including the warm start.
  int restarts = 8;
  int max_steps = 60;
  double lengthscale_lo = 1e-2;
  double lengthscale_hi = 1e2;
  double signal_var_lo = 1e-6;
  double signal_var_hi = 1e2;
  double noise_var_lo = 1e-8;
  double noise_var_hi = 1e-1;
};

struct GpPrediction {
  double mean = 0.0;
  /// Latent-function variance, clamped at zero.
  double variance = 0.0;
};

/// Zero-mean GP with a Matérn-5/2 ARD kernel on unit-box inputs.
/// Targets are standardized internally; predictions are in target units.
class GpModel {
 public:
  /// Fixed hyperparameters.
  GpModel(Eigen::MatrixXd X, Eigen::VectorXd targets, GpHyper hyper);

  /// Hyperparameters by multi-start marginal-likelihood maximization. `warm_start`, when
  /// given, replaces the default first start.
  static GpModel fit(Eigen::MatrixXd X, Eigen::VectorXd targets, const GpConfig& config, std::uint64_t seed,
                     const std::optional<GpHyper>& warm_start = std::nullopt);

  GpPrediction predict(const Eigen::VectorXd& x) const;
  const GpHyper& hyper() const { return hyper_; }
  /// Log marginal likelihood of the standardized targets.
  double log_marginal_likelihood() const { return lml_; }
  double jitter() const { return jitter_; }
  std::size_t size() const { return static_cast<std::size_t>(X_.rows()); }

 private:
  void factorize();

  Eigen::MatrixXd X_;
  Eigen::VectorXd targets_;
  double shift_ = 0.0;
  double scale_ = 1.0;
  GpHyper hyper_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
  double lml_ = 0.0;
};

/// Matérn-5/2 kernel value for a squared scaled distance r^2.
double matern52(double r2, double signal_var);

/// Expected improvement of a maximization problem over `best`.
double expected_improvement(double mean, double variance, double best);
double acquisition_ei(const GpModel& model, const Eigen::VectorXd& x, double best);

}  // namespace ufl
