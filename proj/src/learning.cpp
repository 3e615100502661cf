#include "ufl/learning.hpp"

#include <string>

#include "ufl/error.hpp"

namespace ufl {

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::Max:
      return "Max";
    case Estimator::Mean:
      return "Mean";
    case Estimator::Dist:
      return "Dist";
  }
  return "?";
}

Estimator estimator_from_string(std::string_view name) {
  if (name == "Max") return Estimator::Max;
  if (name == "Mean") return Estimator::Mean;
  if (name == "Dist") return Estimator::Dist;
  throw ConfigError("unknown estimator: " + std::string(name));
}

void LearningConfig::validate() const {
  chain.validate();
  if (dist_size == 0) throw ConfigError("dist_size must be positive");
}

UtilitySpec learning_template(const ProblemDef& p, SpaceKind kind, const LearningConfig& config) {
  UtilitySpec tmpl = make_space_template(p, kind);
  if (!config.learn_pw) {
    for (auto& m : tmpl.free_mask.terms) m.pw = false;
    for (auto& t : tmpl.terms) t.pw = 1.0;
  }
  return tmpl;
}

LearnedPosterior learn_posterior(const ProblemDef& p, SpaceKind kind, std::span<const Example> examples,
                                 const LearningConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<Preference> prefs = generate_preferences(examples, ExpertFn{p.name});
  std::vector<std::vector<double>> outputs;
  outputs.reserve(examples.size());
  for (const auto& e : examples) outputs.push_back(e.y);

  LearnedPosterior out{PreferenceDensity(ParamSpace(learning_template(p, kind, config)), std::move(outputs),
                                         std::move(prefs), config.prior),
                       {}};
  ChainConfig chain = config.chain;
  chain.seed = seed;
  const PreferenceDensity& density = out.density;
  const LogDensityFn logp = [&density](const Eigen::VectorXd& t, Eigen::VectorXd& g) {
    return density.log_density(t, g);
  };
  out.run = run_until_converged(logp, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(density.dim())), chain);
  return out;
}

PosteriorUtility make_surrogate(const LearnedPosterior& learned, Estimator estimator, const LearningConfig& config,
                                std::uint64_t seed) {
  const PosteriorSamples& post = learned.run.posterior;
  switch (estimator) {
    case Estimator::Max:
      return PosteriorUtility(std::vector<UtilitySpec>{estimate_max(post, learned.density)});
    case Estimator::Mean:
      return PosteriorUtility(std::vector<UtilitySpec>{estimate_mean(post, learned.density.space(), config.mean_space)});
    case Estimator::Dist:
      return PosteriorUtility(estimate_dist(post, config.dist_size, seed), learned.density.space());
  }
  throw ConfigError("unknown estimator");
}

}  // namespace ufl
