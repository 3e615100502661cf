#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/LU>

#include "ufl/error.hpp"
#include "ufl/sampler.hpp"

using namespace ufl;

namespace {

LogDensityFn gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  const Eigen::MatrixXd prec = cov.inverse();
  return [mean, prec](const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
    const Eigen::VectorXd d = q - mean;
    grad = -prec * d;
    return -0.5 * d.dot(prec * d);
  };
}

Eigen::VectorXd sample_mean(const PosteriorSamples& post) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(post.samples.front().size());
  for (const auto& s : post.samples) m += s;
  return m / static_cast<double>(post.size());
}

Eigen::MatrixXd sample_cov(const PosteriorSamples& post) {
  const Eigen::VectorXd m = sample_mean(post);
  const auto d = m.size();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : post.samples) c += (s - m) * (s - m).transpose();
  return c / static_cast<double>(post.size() - 1);
}

Draws iid_chain(Rng& rng, double shift, int n) {
  Draws d;
  for (int i = 0; i < n; ++i) d.push_back(Eigen::VectorXd::Constant(1, shift + standard_normal(rng)));
  return d;
}

}  // namespace

TEST_CASE("NUTS recovers a 1-D standard normal") {
  ChainConfig cfg;
  cfg.seed = 41;
  cfg.max_total_samples = 20000;
  const SamplingRun run = run_until_converged(gaussian(Eigen::VectorXd::Constant(1, 3.0), Eigen::MatrixXd::Identity(1, 1)),
                                              Eigen::VectorXd::Zero(1), cfg);
  CHECK(run.converged);
  CHECK(run.stop_reason == StopReason::Converged);
  CHECK(run.max_rhat < 1.1);
  CHECK(sample_mean(run.posterior)[0] == doctest::Approx(3.0).epsilon(0.05 / 3.0));
  CHECK(sample_cov(run.posterior)(0, 0) == doctest::Approx(1.0).epsilon(0.1));
  for (const auto& c : run.chains) {
    CHECK(c.divergences == 0);
    CHECK(c.mean_accept_stat > 0.6);
  }
}

TEST_CASE("NUTS recovers a correlated 2-D normal") {
  Eigen::Matrix2d cov;
  cov << 1.0, 0.8, 0.8, 1.0;
  ChainConfig cfg;
  cfg.seed = 42;
  cfg.max_total_samples = 16000;
  cfg.psr_threshold = 1.01;
  const SamplingRun run = run_until_converged(gaussian(Eigen::Vector2d(1.0, -1.0), cov), Eigen::VectorXd::Zero(2), cfg);
  const Eigen::MatrixXd c = sample_cov(run.posterior);
  const double corr = c(0, 1) / std::sqrt(c(0, 0) * c(1, 1));
  CHECK(corr == doctest::Approx(0.8).epsilon(0.05 / 0.8));
  CHECK(sample_mean(run.posterior)[0] == doctest::Approx(1.0).epsilon(0.1));
  CHECK(sample_mean(run.posterior)[1] == doctest::Approx(-1.0).epsilon(0.1));
}

TEST_CASE("split R-hat: same distribution near one, shifted chains far above") {
  Rng rng(43);
  std::vector<Draws> same = {iid_chain(rng, 0, 2000), iid_chain(rng, 0, 2000), iid_chain(rng, 0, 2000),
                             iid_chain(rng, 0, 2000)};
  CHECK(potential_scale_reduction(same)[0] < 1.01);

  std::vector<Draws> apart = {iid_chain(rng, -10, 500), iid_chain(rng, 10, 500)};
  CHECK(potential_scale_reduction(apart)[0] > 3.0);

  // A drifting chain looks converged to classic R-hat but not once split.
  Draws drift;
  for (int i = 0; i < 1000; ++i) drift.push_back(Eigen::VectorXd::Constant(1, i < 500 ? -5 + standard_normal(rng) : 5 + standard_normal(rng)));
  CHECK(potential_scale_reduction({drift, drift})[0] > 2.0);
}

TEST_CASE("split R-hat of constant chains is infinite") {
  const Draws flat(100, Eigen::VectorXd::Constant(1, 2.0));
  const Eigen::VectorXd r = potential_scale_reduction({flat, flat});
  CHECK(r[0] == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(potential_scale_reduction({flat}), std::invalid_argument);
  CHECK_THROWS_AS(potential_scale_reduction({Draws(3, Eigen::VectorXd::Zero(1)), Draws(3, Eigen::VectorXd::Zero(1))}),
                  std::invalid_argument);
}

TEST_CASE("the sample cap stops a run that cannot converge") {
  // A single chain never yields a finite R-hat, so the cap is the only exit.
  ChainConfig cfg;
  cfg.n_chains = 1;
  cfg.seed = 44;
  cfg.round_size = 100;
  cfg.max_total_samples = 350;
  const SamplingRun run = run_until_converged(gaussian(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)),
                                              Eigen::VectorXd::Zero(1), cfg);
  CHECK_FALSE(run.converged);
  CHECK(run.stop_reason == StopReason::SampleCap);
  CHECK(run.posterior.size() == 350);
  CHECK(run.rounds == 4);
}

TEST_CASE("posterior size never exceeds the cap by more than one batch (property)") {
  for (long cap : {10L, 99L, 1000L, 2501L}) {
    ChainConfig cfg;
    cfg.seed = 45;
    cfg.round_size = 200;
    cfg.max_total_samples = cap;
    cfg.psr_threshold = 1.0000001;
    const SamplingRun run = run_until_converged(gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)),
                                                Eigen::VectorXd::Zero(2), cfg);
    CHECK(static_cast<long>(run.posterior.size()) >= std::min(cap, 16L));
    CHECK(static_cast<long>(run.posterior.size()) < cap + 4L * cfg.n_chains);
    CHECK(run.posterior.chain_ids.size() == run.posterior.size());
  }
}

TEST_CASE("sampling is deterministic for a fixed seed") {
  ChainConfig cfg;
  cfg.seed = 46;
  cfg.max_total_samples = 2000;
  const auto density = gaussian(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  const SamplingRun a = run_until_converged(density, Eigen::VectorXd::Zero(3), cfg);
  const SamplingRun b = run_until_converged(density, Eigen::VectorXd::Zero(3), cfg);
  REQUIRE(a.posterior.size() == b.posterior.size());
  for (std::size_t i = 0; i < a.posterior.size(); ++i) CHECK(a.posterior.samples[i] == b.posterior.samples[i]);
  cfg.seed = 47;
  const SamplingRun c = run_until_converged(density, Eigen::VectorXd::Zero(3), cfg);
  CHECK(c.posterior.samples.front() != a.posterior.samples.front());
}

TEST_CASE("nuts_sample returns the requested draws per chain") {
  ChainConfig cfg;
  cfg.seed = 48;
  cfg.n_chains = 3;
  std::vector<ChainDiagnostics> diag;
  const auto draws = nuts_sample(gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)),
                                 Eigen::VectorXd::Zero(2), cfg, 50, &diag);
  REQUIRE(draws.size() == 3);
  for (const auto& d : draws) CHECK(d.size() == 50);
  REQUIRE(diag.size() == 3);
  for (const auto& c : diag) CHECK(c.step_size > 0.0);
}

TEST_CASE("chain config validation") {
  ChainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.warmup_iterations() == 1000);
  cfg.psr_threshold = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.warmup_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.n_chains = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("a density that is nowhere finite is reported") {
  const LogDensityFn bad = [](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(q.size());
    return -std::numeric_limits<double>::infinity();
  };
  ChainConfig cfg;
  cfg.max_total_samples = 100;
  CHECK_THROWS_AS(run_until_converged(bad, Eigen::VectorXd::Zero(1), cfg), NonFiniteError);
}

TEST_CASE("posterior CSV round trip is exact") {
  ChainConfig cfg;
  cfg.seed = 49;
  cfg.max_total_samples = 200;
  cfg.round_size = 50;
  const SamplingRun run = run_until_converged(gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)),
                                              Eigen::VectorXd::Zero(2), cfg);
  std::stringstream buf;
  write_posterior_csv(buf, run.posterior);
  CHECK(buf.str().rfind("chain_id,theta_0,theta_1\n", 0) == 0);
  const PosteriorSamples back = read_posterior_csv(buf);
  REQUIRE(back.size() == run.posterior.size());
  CHECK(back.chain_ids == run.posterior.chain_ids);
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back.samples[i] == run.posterior.samples[i]);
}
