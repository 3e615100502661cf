#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ufl/param_space.hpp"
#include "ufl/rng.hpp"

namespace ufl {

/// Log density with gradient: returns log p(theta) and writes d log p / d theta.
/// Must be safe to call concurrently from several chains.
using LogDensityFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct ChainConfig {
  int n_chains = 4;
  double psr_threshold = 1.1;
  long max_total_samples = 100000;
  double warmup_fraction = 0.5;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 0;
  /// Post-warmup draws per chain between two convergence checks.
  int round_size = 1000;
  /// Chains start at init + U(-init_radius, init_radius) per coordinate.
  double init_radius = 2.0;
  /// Post-warmup divergence share above which sampling aborts.
  double max_divergence_rate = 0.25;

  void validate() const;
  /// Warmup iterations per chain implied by warmup_fraction and round_size.
  int warmup_iterations() const;
};

using Draws = std::vector<Eigen::VectorXd>;

/// One NUTS chain with dual-averaging step-size adaptation and an identity metric.
class NutsChain {
 public:
  NutsChain(LogDensityFn density, Eigen::VectorXd init, double target_accept, int max_tree_depth,
            std::uint64_t seed);

  /// Adaptation iterations; the step size is frozen at the dual-averaging average afterwards.
  void warmup(int iterations);
  /// Fixed-step transitions; appends draws to `out`.
  void sample(int iterations, Draws& out);

  double step_size() const { return step_size_; }
  long divergences() const { return divergences_; }
  long transitions() const { return transitions_; }
  double mean_accept_stat() const { return transitions_ ? accept_sum_ / static_cast<double>(transitions_) : 0.0; }
  const Eigen::VectorXd& position() const { return state_.q; }

  struct State {
    Eigen::VectorXd q;
    Eigen::VectorXd p;
    Eigen::VectorXd grad;
    double logp = 0.0;
  };

 private:
  struct Tree;

  void transition(double& accept_stat);
  Tree build_tree(const State& start, int direction, int depth, double log_slice, double joint0);
  State leapfrog(const State& s, double eps) const;
  void find_reasonable_step_size();

  LogDensityFn density_;
  State state_;
  double target_accept_;
  int max_tree_depth_;
  Rng rng_;
  double step_size_ = 1.0;
  bool adapting_ = false;
  bool divergent_ = false;
  long divergences_ = 0;
  long transitions_ = 0;
  double accept_sum_ = 0.0;
  // Dual averaging state.
  double mu_ = 0.0;
  double h_bar_ = 0.0;
  double log_eps_bar_ = 0.0;
  long adapt_count_ = 0;
};

struct ChainDiagnostics {
  double step_size = 0.0;
  long divergences = 0;
  long transitions = 0;
  double mean_accept_stat = 0.0;
};

/// Runs config.n_chains chains in parallel: warmup_iterations() adaptation steps, then
/// `draws_per_chain` draws each. Deterministic for a given seed.
std::vector<Draws> nuts_sample(const LogDensityFn& density, const Eigen::VectorXd& init, const ChainConfig& config,
                               int draws_per_chain, std::vector<ChainDiagnostics>* diagnostics = nullptr);

/// Split-R-hat per coordinate. A coordinate with zero within-chain variance yields +inf.
Eigen::VectorXd potential_scale_reduction(const std::vector<Draws>& chains);

enum class StopReason { Converged, SampleCap };

struct PosteriorSamples {
  std::vector<Eigen::VectorXd> samples;
  std::vector<int> chain_ids;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

struct SamplingRun {
  PosteriorSamples posterior;
  StopReason stop_reason = StopReason::SampleCap;
  bool converged = false;
  double max_rhat = std::numeric_limits<double>::infinity();
  int rounds = 0;
  std::vector<ChainDiagnostics> chains;
};

/// Samples in rounds until max split-R-hat < psr_threshold or the post-warmup draw
/// count (all chains) reaches max_total_samples.
SamplingRun run_until_converged(const LogDensityFn& density, const Eigen::VectorXd& init, const ChainConfig& config);

/// CSV: header `chain_id,theta_0,...`, one row per draw.
void write_posterior_csv(std::ostream& out, const PosteriorSamples& posterior);
PosteriorSamples read_posterior_csv(std::istream& in);

}  // namespace ufl
