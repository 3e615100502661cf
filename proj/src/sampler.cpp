#include "ufl/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "ufl/error.hpp"
#include "ufl/parallel.hpp"

namespace ufl {

namespace {

constexpr double kMaxDeltaH = 1000.0;
// Dual-averaging constants.
constexpr double kGamma = 0.05;
constexpr double kT0 = 10.0;
constexpr double kKappa = 0.75;

double evaluate(const LogDensityFn& density, const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
  try {
    const double lp = density(q, grad);
    if (!std::isfinite(lp) || !grad.allFinite()) return -std::numeric_limits<double>::infinity();
    return lp;
  } catch (const NonFiniteError&) {
    // Far out in parameter space the density over/underflows; the trajectory is divergent.
    grad.setZero(q.size());
    return -std::numeric_limits<double>::infinity();
  }
}

bool no_u_turn(const NutsChain::State& minus, const NutsChain::State& plus) {
  const Eigen::VectorXd dq = plus.q - minus.q;
  return dq.dot(minus.p) >= 0.0 && dq.dot(plus.p) >= 0.0;
}

}  // namespace

void ChainConfig::validate() const {
  if (n_chains < 1) throw ConfigError("n_chains must be positive");
  if (!(psr_threshold > 1.0)) throw ConfigError("psr_threshold must exceed 1");
  if (max_total_samples < 1) throw ConfigError("max_total_samples must be positive");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) throw ConfigError("warmup_fraction must lie in (0,1)");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("target_accept must lie in (0,1)");
  if (max_tree_depth < 1) throw ConfigError("max_tree_depth must be positive");
  if (round_size < 4) throw ConfigError("round_size must be at least 4");
  if (!(init_radius >= 0.0)) throw ConfigError("init_radius must be nonnegative");
}

int ChainConfig::warmup_iterations() const {
  return static_cast<int>(std::lround(round_size * warmup_fraction / (1.0 - warmup_fraction)));
}

struct NutsChain::Tree {
  State minus;
  State plus;
  State proposal;
  double n = 0.0;
  bool ok = true;
  double alpha_sum = 0.0;
  long n_alpha = 0;
};

NutsChain::NutsChain(LogDensityFn density, Eigen::VectorXd init, double target_accept, int max_tree_depth,
                     std::uint64_t seed)
    : density_(std::move(density)), target_accept_(target_accept), max_tree_depth_(max_tree_depth), rng_(seed) {
  state_.q = std::move(init);
  state_.p = Eigen::VectorXd::Zero(state_.q.size());
  state_.logp = evaluate(density_, state_.q, state_.grad);
  if (!std::isfinite(state_.logp)) throw NonFiniteError("NUTS chain initialised at a point of zero density");
  find_reasonable_step_size();
}

NutsChain::State NutsChain::leapfrog(const State& s, double eps) const {
  State out;
  out.p = s.p + 0.5 * eps * s.grad;
  out.q = s.q + eps * out.p;
  out.logp = evaluate(density_, out.q, out.grad);
  out.p += 0.5 * eps * out.grad;
  return out;
}

void NutsChain::find_reasonable_step_size() {
  step_size_ = 1.0;
  State s = state_;
  for (auto& v : s.p) v = standard_normal(rng_);
  const double joint0 = s.logp - 0.5 * s.p.squaredNorm();
  auto log_ratio = [&] {
    const State t = leapfrog(s, step_size_);
    const double joint = t.logp - 0.5 * t.p.squaredNorm();
    return std::isfinite(joint) ? joint - joint0 : -std::numeric_limits<double>::infinity();
  };
  double lr = log_ratio();
  const double direction = lr > std::log(0.5) ? 1.0 : -1.0;
  for (int i = 0; i < 100; ++i) {
    if (direction * lr <= -direction * std::log(2.0)) break;
    step_size_ *= std::pow(2.0, direction);
    lr = log_ratio();
  }
  mu_ = std::log(10.0 * step_size_);
}

NutsChain::Tree NutsChain::build_tree(const State& start, int direction, int depth, double log_slice,
                                      double joint0) {
  if (depth == 0) {
    Tree t;
    t.proposal = leapfrog(start, direction * step_size_);
    const double joint = std::isfinite(t.proposal.logp)
                             ? t.proposal.logp - 0.5 * t.proposal.p.squaredNorm()
                             : -std::numeric_limits<double>::infinity();
    t.minus = t.proposal;
    t.plus = t.proposal;
    t.n = log_slice <= joint ? 1.0 : 0.0;
    t.ok = log_slice < joint + kMaxDeltaH;
    if (!t.ok) divergent_ = true;
    t.alpha_sum = std::isfinite(joint) ? std::min(1.0, std::exp(joint - joint0)) : 0.0;
    t.n_alpha = 1;
    return t;
  }
  Tree t = build_tree(start, direction, depth - 1, log_slice, joint0);
  if (!t.ok) return t;
  Tree t2 = build_tree(direction == -1 ? t.minus : t.plus, direction, depth - 1, log_slice, joint0);
  if (direction == -1) {
    t.minus = std::move(t2.minus);
  } else {
    t.plus = std::move(t2.plus);
  }
  const double u = uniform01(rng_);
  if (t2.n > 0.0 && u < t2.n / (t.n + t2.n)) t.proposal = std::move(t2.proposal);
  t.alpha_sum += t2.alpha_sum;
  t.n_alpha += t2.n_alpha;
  t.ok = t2.ok && no_u_turn(t.minus, t.plus);
  t.n += t2.n;
  return t;
}

void NutsChain::transition(double& accept_stat) {
  for (auto& v : state_.p) v = standard_normal(rng_);
  const double joint0 = state_.logp - 0.5 * state_.p.squaredNorm();
  const double log_slice = joint0 + std::log(1.0 - uniform01(rng_));

  State minus = state_;
  State plus = state_;
  double n = 1.0;
  bool ok = true;
  double alpha_sum = 0.0;
  long n_alpha = 0;
  divergent_ = false;
  for (int depth = 0; ok && depth < max_tree_depth_; ++depth) {
    const int direction = uniform01(rng_) < 0.5 ? -1 : 1;
    Tree t = build_tree(direction == -1 ? minus : plus, direction, depth, log_slice, joint0);
    if (direction == -1) {
      minus = t.minus;
    } else {
      plus = t.plus;
    }
    const double u = uniform01(rng_);
    if (t.ok && t.n > 0.0 && u < std::min(1.0, t.n / n)) {
      state_.q = t.proposal.q;
      state_.grad = t.proposal.grad;
      state_.logp = t.proposal.logp;
    }
    n += t.n;
    alpha_sum += t.alpha_sum;
    n_alpha += t.n_alpha;
    ok = t.ok && no_u_turn(minus, plus);
  }
  accept_stat = n_alpha > 0 ? alpha_sum / static_cast<double>(n_alpha) : 0.0;
}

void NutsChain::warmup(int iterations) {
  for (int i = 0; i < iterations; ++i) {
    double accept = 0.0;
    transition(accept);
    ++adapt_count_;
    const double m = static_cast<double>(adapt_count_);
    const double eta = 1.0 / (m + kT0);
    h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_accept_ - accept);
    const double log_eps = mu_ - std::sqrt(m) / kGamma * h_bar_;
    const double weight = std::pow(m, -kKappa);
    log_eps_bar_ = weight * log_eps + (1.0 - weight) * log_eps_bar_;
    step_size_ = std::exp(log_eps);
  }
  if (adapt_count_ > 0) step_size_ = std::exp(log_eps_bar_);
}

void NutsChain::sample(int iterations, Draws& out) {
  for (int i = 0; i < iterations; ++i) {
    double accept = 0.0;
    transition(accept);
    ++transitions_;
    accept_sum_ += accept;
    if (divergent_) ++divergences_;
    out.push_back(state_.q);
  }
}

namespace {

std::vector<NutsChain> make_chains(const LogDensityFn& density, const Eigen::VectorXd& init,
                                   const ChainConfig& config) {
  std::vector<NutsChain> chains;
  chains.reserve(static_cast<std::size_t>(config.n_chains));
  for (int c = 0; c < config.n_chains; ++c) {
    const std::uint64_t seed = derive_seed(config.seed, {static_cast<std::uint64_t>(c)});
    Rng init_rng(derive_seed(seed, {0x1417}));
    Eigen::VectorXd start = init;
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      start = init;
      for (auto& v : start) v += uniform(init_rng, -config.init_radius, config.init_radius);
      Eigen::VectorXd g;
      placed = std::isfinite(evaluate(density, start, g));
    }
    if (!placed) throw NonFiniteError("could not find a finite-density starting point near init");
    chains.emplace_back(density, start, config.target_accept, config.max_tree_depth, seed);
  }
  return chains;
}

void check_health(const std::vector<NutsChain>& chains, double max_rate) {
  long div = 0;
  long total = 0;
  for (const auto& c : chains) {
    div += c.divergences();
    total += c.transitions();
  }
  if (total > 0 && static_cast<double>(div) > max_rate * static_cast<double>(total)) {
    std::ostringstream msg;
    msg << "NUTS divergence rate " << static_cast<double>(div) / static_cast<double>(total) << " exceeds "
        << max_rate << " (" << div << " of " << total << " transitions; step sizes:";
    for (const auto& c : chains) msg << ' ' << c.step_size();
    msg << ')';
    throw SamplerHealthError(msg.str());
  }
}

std::vector<ChainDiagnostics> diagnostics_of(const std::vector<NutsChain>& chains) {
  std::vector<ChainDiagnostics> out;
  for (const auto& c : chains)
    out.push_back({c.step_size(), c.divergences(), c.transitions(), c.mean_accept_stat()});
  return out;
}

}  // namespace

std::vector<Draws> nuts_sample(const LogDensityFn& density, const Eigen::VectorXd& init, const ChainConfig& config,
                               int draws_per_chain, std::vector<ChainDiagnostics>* diagnostics) {
  config.validate();
  auto chains = make_chains(density, init, config);
  std::vector<Draws> draws(chains.size());
  const int warmup = config.warmup_iterations();
  parallel_for(chains.size(), chains.size(), [&](std::size_t c) {
    chains[c].warmup(warmup);
    draws[c].reserve(static_cast<std::size_t>(draws_per_chain));
    chains[c].sample(draws_per_chain, draws[c]);
  });
  if (diagnostics) *diagnostics = diagnostics_of(chains);
  check_health(chains, config.max_divergence_rate);
  return draws;
}

Eigen::VectorXd potential_scale_reduction(const std::vector<Draws>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("split-Rhat needs at least two chains");
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 4) throw std::invalid_argument("split-Rhat needs at least four draws per chain");
  const auto dim = chains.front().front().size();
  const std::size_t half = n / 2;

  // Each chain contributes its first and last `half` draws as two sequences.
  std::vector<std::pair<const Draws*, std::size_t>> seqs;
  for (const auto& c : chains) {
    seqs.emplace_back(&c, 0);
    seqs.emplace_back(&c, c.size() - half);
  }
  const double m = static_cast<double>(seqs.size());
  const double len = static_cast<double>(half);

  Eigen::VectorXd rhat(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    std::vector<double> means;
    double within = 0.0;
    for (const auto& [draws, offset] : seqs) {
      double mean = 0.0;
      for (std::size_t i = 0; i < half; ++i) mean += (*draws)[offset + i][k];
      mean /= len;
      double ss = 0.0;
      for (std::size_t i = 0; i < half; ++i) {
        const double dv = (*draws)[offset + i][k] - mean;
        ss += dv * dv;
      }
      within += ss / (len - 1.0);
      means.push_back(mean);
    }
    within /= m;
    double grand = 0.0;
    for (double mu : means) grand += mu;
    grand /= m;
    double between = 0.0;
    for (double mu : means) between += (mu - grand) * (mu - grand);
    between *= len / (m - 1.0);
    if (!(within > 0.0)) {
      rhat[k] = std::numeric_limits<double>::infinity();
      continue;
    }
    const double var_plus = (len - 1.0) / len * within + between / len;
    rhat[k] = std::sqrt(var_plus / within);
  }
  return rhat;
}

SamplingRun run_until_converged(const LogDensityFn& density, const Eigen::VectorXd& init, const ChainConfig& config) {
  config.validate();
  auto chains = make_chains(density, init, config);
  const std::size_t n_chains = chains.size();
  std::vector<Draws> draws(n_chains);

  parallel_for(n_chains, n_chains, [&](std::size_t c) { chains[c].warmup(config.warmup_iterations()); });

  SamplingRun run;
  long total = 0;
  while (true) {
    const long remaining = config.max_total_samples - total;
    const long per_chain_cap = (remaining + static_cast<long>(n_chains) - 1) / static_cast<long>(n_chains);
    const int batch = static_cast<int>(std::max<long>(4, std::min<long>(config.round_size, per_chain_cap)));
    parallel_for(n_chains, n_chains, [&](std::size_t c) { chains[c].sample(batch, draws[c]); });
    total += static_cast<long>(batch) * static_cast<long>(n_chains);
    ++run.rounds;
    check_health(chains, config.max_divergence_rate);

    if (n_chains >= 2) {
      run.max_rhat = potential_scale_reduction(draws).maxCoeff();
    } else {
      run.max_rhat = std::numeric_limits<double>::infinity();
    }
    if (run.max_rhat < config.psr_threshold) {
      run.stop_reason = StopReason::Converged;
      run.converged = true;
      break;
    }
    if (total >= config.max_total_samples) {
      run.stop_reason = StopReason::SampleCap;
      break;
    }
  }

  for (std::size_t c = 0; c < n_chains; ++c) {
    for (auto& q : draws[c]) {
      run.posterior.samples.push_back(std::move(q));
      run.posterior.chain_ids.push_back(static_cast<int>(c));
    }
  }
  run.chains = diagnostics_of(chains);
  return run;
}

void write_posterior_csv(std::ostream& out, const PosteriorSamples& posterior) {
  const auto dim = posterior.empty() ? 0 : posterior.samples.front().size();
  out << "chain_id";
  for (Eigen::Index k = 0; k < dim; ++k) out << ",theta_" << k;
  out << '\n';
  std::ostringstream row;
  row.precision(17);
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    row.str("");
    row << posterior.chain_ids[i];
    for (Eigen::Index k = 0; k < dim; ++k) row << ',' << posterior.samples[i][k];
    out << row.str() << '\n';
  }
}

PosteriorSamples read_posterior_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("chain_id", 0) != 0)
    throw ConfigError("posterior CSV must start with a chain_id header");
  const auto dim = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  PosteriorSamples post;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    post.chain_ids.push_back(std::stoi(cell));
    Eigen::VectorXd q(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      if (!std::getline(row, cell, ',')) throw ConfigError("posterior CSV row is short: " + line);
      q[k] = std::stod(cell);
    }
    post.samples.push_back(std::move(q));
  }
  return post;
}

}  // namespace ufl
