#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ufl/bayesopt.hpp"
#include "ufl/learning.hpp"

namespace ufl {

enum class SampleMode { Random, Biased };

std::string_view to_string(SampleMode mode);
SampleMode sample_mode_from_string(std::string_view name);

enum class ExperimentKind { Similarity, Optimization };

/// One sweep. Similarity runs rank every (problem, mode, N, trial, space, estimator) cell by
/// Kendall's tau; optimization runs BO on every (problem, mode, trial, space) surrogate and
/// compute the Manual bound per problem.
struct ExperimentConfig {
  std::string name = "experiment";
  /// Table whose reference values the means are compared against; 0 for none.
  int table_id = 0;
  ExperimentKind kind = ExperimentKind::Similarity;
  std::vector<ProblemName> problems;
  std::vector<SpaceKind> spaces;
  std::vector<Estimator> estimators;
  std::vector<std::size_t> n_values;
  std::vector<SampleMode> sample_modes;
  int trials = 5;
  std::uint64_t seed = 0;
  std::size_t eval_samples = kDeskEvalSamples;
  std::size_t bias_pool = kDefaultBiasPool;
  LearningConfig learning;
  BoConfig bo;
  /// Optimization runs: uniform draws for the Manual bound.
  std::size_t manual_samples = 100000;
  /// Optimization runs: per-problem override of the held-out x_0.
  std::map<ProblemName, double> x0;
  std::string output_dir = "results";
  std::size_t workers = 1;
  bool write_posteriors = true;

  /// Throws ConfigError on the first invalid field.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

enum class Scale { Smoke, Desk, Paper };

std::string_view to_string(Scale scale);
Scale scale_from_string(std::string_view name);

/// Preset for reproducing table 3..7 at a given scale. Throws ConfigError for other ids.
ExperimentConfig table_preset(int table_id, Scale scale);

struct SimilarityRow {
  ProblemName problem;
  SpaceKind space;
  Estimator estimator;
  std::size_t n = 0;
  SampleMode mode;
  int trial = 0;
  /// NaN when the cell failed.
  double tau = 0.0;
  std::string error;
};

struct OptimizationRow {
  ProblemName problem;
  SpaceKind space;
  Estimator estimator;
  std::size_t n = 0;
  SampleMode mode;
  int trial = 0;
  double best_expert = 0.0;
  double best_utility = 0.0;
  bool best_feasible = false;
  std::string error;
};

struct ManualRow {
  ProblemName problem;
  double bound = 0.0;
};

/// Mean of a table cell next to its reference value.
struct ComparisonRow {
  std::string row;
  std::string column;
  double obtained = 0.0;
  std::optional<double> reference;
};

struct ExperimentResult {
  std::vector<SimilarityRow> similarity;
  std::vector<OptimizationRow> optimization;
  std::vector<ManualRow> manual;
  std::vector<ComparisonRow> comparison;
  std::size_t failed_cells = 0;
  std::filesystem::path output_dir;
};

/// Runs the sweep and writes its outputs (cells.csv, means.csv, comparison.csv, learned
/// utilities, posteriors, BO histories and manifest.json) under config.output_dir.
/// Cell failures are recorded, not thrown.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Reference value for a table cell, keyed by the row/column labels used in means.csv.
std::optional<double> reference_value(int table_id, std::string_view row, std::string_view column);

/// Runs table_preset(table_id, scale), with optional overrides, and attaches the reference
/// comparison.
ExperimentResult reproduce_table(int table_id, Scale scale, std::optional<std::uint64_t> seed = std::nullopt,
                                 std::optional<std::string> output_dir = std::nullopt,
                                 std::optional<std::size_t> workers = std::nullopt);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace ufl
