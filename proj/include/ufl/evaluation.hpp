#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ufl/problems.hpp"

namespace ufl {

/// Kendall's tau-a: (concordant - discordant) / (n (n - 1) / 2). Pairs tied in either
/// vector count as neither. O(n log n).
double kendall_tau(std::span<const double> a, std::span<const double> b);

using UtilityEvaluator = std::function<double(std::span<const double>)>;

/// Feasible, freely sampled inputs (x_0 not fixed) with their outputs and expert scores.
struct EvaluationSet {
  std::vector<std::vector<double>> outputs;
  std::vector<double> expert_scores;
};

inline constexpr std::size_t kDefaultEvalSamples = 10000;
inline constexpr std::size_t kDeskEvalSamples = 2000;

EvaluationSet make_evaluation_set(const ProblemDef& p, std::size_t n_eval, std::uint64_t seed);

/// Kendall's tau between expert and surrogate scores over an evaluation set.
double ranking_similarity(const EvaluationSet& set, const UtilityEvaluator& surrogate);

double ranking_similarity(const ProblemDef& p, const ExpertFn& expert, const UtilityEvaluator& surrogate,
                          std::size_t n_eval, std::uint64_t seed);

}  // namespace ufl
