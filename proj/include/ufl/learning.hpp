#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "ufl/posterior.hpp"
#include "ufl/preference.hpp"
#include "ufl/problems.hpp"
#include "ufl/sampler.hpp"

namespace ufl {

enum class Estimator { Max, Mean, Dist };

std::string_view to_string(Estimator e);
Estimator estimator_from_string(std::string_view name);

struct LearningConfig {
  /// The seed field is ignored; learn_posterior takes the seed explicitly.
  ChainConfig chain;
  PriorMode prior = PriorMode::Weakly;
  MeanSpace mean_space = MeanSpace::Unconstrained;
  std::size_t dist_size = kDefaultDistSize;
  /// When false, pw stays at 1 in every term.
  bool learn_pw = true;

  void validate() const;
};

/// Function-space template with the learning config's free mask applied.
UtilitySpec learning_template(const ProblemDef& p, SpaceKind kind, const LearningConfig& config);

struct LearnedPosterior {
  PreferenceDensity density;
  SamplingRun run;
};

/// Preferences from the expert, then NUTS over the space's unconstrained parameters.
/// Chains start around theta = 0.
LearnedPosterior learn_posterior(const ProblemDef& p, SpaceKind kind, std::span<const Example> examples,
                                 const LearningConfig& config, std::uint64_t seed);

/// Utility used for scoring: one spec for Max and Mean, the Dist draw set otherwise.
/// `seed` only affects Dist subsampling.
PosteriorUtility make_surrogate(const LearnedPosterior& learned, Estimator estimator, const LearningConfig& config,
                                std::uint64_t seed);

}  // namespace ufl
