#include "ufl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>

#include <Eigen/Core>
#include <openssl/evp.h>

#include "ufl/error.hpp"
#include "ufl/parallel.hpp"

namespace ufl {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr std::string_view kVersion = "0.1.0";

std::string_view to_string(SampleMode mode) { return mode == SampleMode::Random ? "random" : "biased"; }

SampleMode sample_mode_from_string(std::string_view name) {
  if (name == "random") return SampleMode::Random;
  if (name == "biased") return SampleMode::Biased;
  throw ConfigError("unknown sample mode: " + std::string(name));
}

std::string_view to_string(Scale scale) {
  switch (scale) {
    case Scale::Smoke:
      return "smoke";
    case Scale::Desk:
      return "desk";
    case Scale::Paper:
      return "paper";
  }
  return "?";
}

Scale scale_from_string(std::string_view name) {
  if (name == "smoke") return Scale::Smoke;
  if (name == "desk") return Scale::Desk;
  if (name == "paper") return Scale::Paper;
  throw ConfigError("unknown scale: " + std::string(name));
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  std::string hex;
  hex.reserve(2 * len);
  static constexpr char kDigits[] = "0123456789abcdef";
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kDigits[digest[i] >> 4]);
    hex.push_back(kDigits[digest[i] & 0xf]);
  }
  return hex;
}

// ---------------------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("name must not be empty");
  if (table_id != 0 && (table_id < 3 || table_id > 7)) throw ConfigError("table_id must be 0 or 3..7");
  if (problems.empty()) throw ConfigError("problems must not be empty");
  if (spaces.empty()) throw ConfigError("spaces must not be empty");
  if (estimators.empty()) throw ConfigError("estimators must not be empty");
  if (n_values.empty()) throw ConfigError("n_values must not be empty");
  for (std::size_t n : n_values)
    if (n < 2) throw ConfigError("every N must be >= 2");
  if (sample_modes.empty()) throw ConfigError("sample_modes must not be empty");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (eval_samples < 2) throw ConfigError("eval_samples must be >= 2");
  if (bias_pool < 1) throw ConfigError("bias_pool must be >= 1");
  if (manual_samples < 1) throw ConfigError("manual_samples must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  learning.validate();
  bo.validate();
  for (const auto& [name, v] : x0) {
    const Interval& b = problem(name).input_bounds[0];
    if (!(v >= b.lo && v <= b.hi)) throw ConfigError("x0 for " + std::string(to_string(name)) + " outside bounds");
  }
}

namespace {

template <typename T>
json names(const std::vector<T>& values) {
  json out = json::array();
  for (const auto& v : values) out.push_back(std::string(to_string(v)));
  return out;
}

std::string_view to_string(ExperimentKind k) { return k == ExperimentKind::Similarity ? "similarity" : "optimization"; }

// Reads an object and rejects keys that were never consumed.
class StrictObject {
 public:
  StrictObject(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return doc_.contains(key) ? &doc_.at(key) : nullptr;
  }

  template <typename T, typename Parse>
  void get_list(const char* key, std::vector<T>& out, Parse parse) {
    std::vector<std::string> raw;
    bool present = doc_.contains(key);
    get(key, raw);
    if (!present) return;
    out.clear();
    for (const auto& s : raw) out.push_back(parse(s));
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items())
      if (!seen_.count(key)) throw ConfigError("unknown key " + where_ + "." + key);
  }

 private:
  const json& doc_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const ExperimentConfig& c) {
  const ChainConfig& m = c.learning.chain;
  json x0 = json::object();
  for (const auto& [name, v] : c.x0) x0[std::string(to_string(name))] = v;
  return json{
      {"name", c.name},
      {"table_id", c.table_id},
      {"kind", std::string(to_string(c.kind))},
      {"problems", names(c.problems)},
      {"spaces", names(c.spaces)},
      {"estimators", names(c.estimators)},
      {"n_values", c.n_values},
      {"sample_modes", names(c.sample_modes)},
      {"trials", c.trials},
      {"seed", c.seed},
      {"eval_samples", c.eval_samples},
      {"bias_pool", c.bias_pool},
      {"mcmc",
       {{"n_chains", m.n_chains},
        {"psr_threshold", m.psr_threshold},
        {"max_total_samples", m.max_total_samples},
        {"warmup_fraction", m.warmup_fraction},
        {"target_accept", m.target_accept},
        {"max_tree_depth", m.max_tree_depth},
        {"round_size", m.round_size},
        {"init_radius", m.init_radius},
        {"max_divergence_rate", m.max_divergence_rate}}},
      {"learning",
       {{"prior", c.learning.prior == PriorMode::Weakly ? "weakly" : "flat"},
        {"mean_space", c.learning.mean_space == MeanSpace::Unconstrained ? "unconstrained" : "constrained"},
        {"dist_size", c.learning.dist_size},
        {"learn_pw", c.learning.learn_pw}}},
      {"bo",
       {{"iterations", c.bo.iterations},
        {"initial_points", c.bo.initial_points},
        {"candidates", c.bo.candidates},
        {"refine_starts", c.bo.refine_starts},
        {"refine_steps", c.bo.refine_steps},
        {"refit_every", c.bo.refit_every},
        {"penalty", c.bo.penalty},
        {"gp",
         {{"restarts", c.bo.gp.restarts},
          {"max_steps", c.bo.gp.max_steps},
          {"lengthscale_lo", c.bo.gp.lengthscale_lo},
          {"lengthscale_hi", c.bo.gp.lengthscale_hi},
          {"signal_var_lo", c.bo.gp.signal_var_lo},
          {"signal_var_hi", c.bo.gp.signal_var_hi},
          {"noise_var_lo", c.bo.gp.noise_var_lo},
          {"noise_var_hi", c.bo.gp.noise_var_hi}}}}},
      {"manual_samples", c.manual_samples},
      {"x0", x0},
      {"output_dir", c.output_dir},
      {"workers", c.workers},
      {"write_posteriors", c.write_posteriors},
  };
}

ExperimentConfig experiment_config_from_json(const json& doc) {
  ExperimentConfig c;
  StrictObject root(doc, "config");
  root.get("name", c.name);
  root.get("table_id", c.table_id);
  std::string kind = std::string(to_string(c.kind));
  root.get("kind", kind);
  if (kind == "similarity") {
    c.kind = ExperimentKind::Similarity;
  } else if (kind == "optimization") {
    c.kind = ExperimentKind::Optimization;
  } else {
    throw ConfigError("unknown experiment kind: " + kind);
  }
  root.get_list("problems", c.problems, [](const std::string& s) { return problem_from_string(s); });
  root.get_list("spaces", c.spaces, [](const std::string& s) { return space_kind_from_string(s); });
  root.get_list("estimators", c.estimators, [](const std::string& s) { return estimator_from_string(s); });
  root.get("n_values", c.n_values);
  root.get_list("sample_modes", c.sample_modes, [](const std::string& s) { return sample_mode_from_string(s); });
  root.get("trials", c.trials);
  root.get("seed", c.seed);
  root.get("eval_samples", c.eval_samples);
  root.get("bias_pool", c.bias_pool);
  if (const json* m = root.child("mcmc")) {
    StrictObject o(*m, "mcmc");
    ChainConfig& ch = c.learning.chain;
    o.get("n_chains", ch.n_chains);
    o.get("psr_threshold", ch.psr_threshold);
    o.get("max_total_samples", ch.max_total_samples);
    o.get("warmup_fraction", ch.warmup_fraction);
    o.get("target_accept", ch.target_accept);
    o.get("max_tree_depth", ch.max_tree_depth);
    o.get("round_size", ch.round_size);
    o.get("init_radius", ch.init_radius);
    o.get("max_divergence_rate", ch.max_divergence_rate);
    o.finish();
  }
  if (const json* l = root.child("learning")) {
    StrictObject o(*l, "learning");
    std::string prior = "weakly", mean_space = "unconstrained";
    o.get("prior", prior);
    o.get("mean_space", mean_space);
    o.get("dist_size", c.learning.dist_size);
    o.get("learn_pw", c.learning.learn_pw);
    o.finish();
    if (prior == "weakly") {
      c.learning.prior = PriorMode::Weakly;
    } else if (prior == "flat") {
      c.learning.prior = PriorMode::Flat;
    } else {
      throw ConfigError("unknown prior: " + prior);
    }
    if (mean_space == "unconstrained") {
      c.learning.mean_space = MeanSpace::Unconstrained;
    } else if (mean_space == "constrained") {
      c.learning.mean_space = MeanSpace::Constrained;
    } else {
      throw ConfigError("unknown mean_space: " + mean_space);
    }
  }
  if (const json* b = root.child("bo")) {
    StrictObject o(*b, "bo");
    o.get("iterations", c.bo.iterations);
    o.get("initial_points", c.bo.initial_points);
    o.get("candidates", c.bo.candidates);
    o.get("refine_starts", c.bo.refine_starts);
    o.get("refine_steps", c.bo.refine_steps);
    o.get("refit_every", c.bo.refit_every);
    o.get("penalty", c.bo.penalty);
    if (const json* g = o.child("gp")) {
      StrictObject go(*g, "bo.gp");
      go.get("restarts", c.bo.gp.restarts);
      go.get("max_steps", c.bo.gp.max_steps);
      go.get("lengthscale_lo", c.bo.gp.lengthscale_lo);
      go.get("lengthscale_hi", c.bo.gp.lengthscale_hi);
      go.get("signal_var_lo", c.bo.gp.signal_var_lo);
      go.get("signal_var_hi", c.bo.gp.signal_var_hi);
      go.get("noise_var_lo", c.bo.gp.noise_var_lo);
      go.get("noise_var_hi", c.bo.gp.noise_var_hi);
      go.finish();
    }
    o.finish();
  }
  root.get("manual_samples", c.manual_samples);
  if (const json* x = root.child("x0")) {
    if (!x->is_object()) throw ConfigError("x0 must be an object");
    for (const auto& [key, value] : x->items()) {
      if (!value.is_number()) throw ConfigError("x0." + key + " must be a number");
      c.x0[problem_from_string(key)] = value.get<double>();
    }
  }
  root.get("output_dir", c.output_dir);
  root.get("workers", c.workers);
  root.get("write_posteriors", c.write_posteriors);
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return experiment_config_from_json(doc);
}

// ---------------------------------------------------------------------------------------
// Presets

ExperimentConfig table_preset(int table_id, Scale scale) {
  ExperimentConfig c;
  c.table_id = table_id;
  c.name = "table" + std::to_string(table_id) + "_" + std::string(to_string(scale));
  c.output_dir = "results/" + c.name;
  c.spaces = {SpaceKind::Linear, SpaceKind::Adaptable, SpaceKind::Informed};
  c.estimators = {Estimator::Max, Estimator::Mean, Estimator::Dist};
  c.n_values = {10, 20, 50};
  c.trials = 5;
  switch (table_id) {
    case 3:
      c.problems = {ProblemName::ZDT3, ProblemName::DTLZ2};
      c.sample_modes = {SampleMode::Random};
      break;
    case 4:
      c.problems = {ProblemName::CAR, ProblemName::WATER};
      c.sample_modes = {SampleMode::Random};
      break;
    case 5:
      c.problems = {ProblemName::ZDT3, ProblemName::DTLZ2};
      c.sample_modes = {SampleMode::Biased};
      break;
    case 6:
      c.problems = {ProblemName::CAR, ProblemName::WATER};
      c.sample_modes = {SampleMode::Biased};
      break;
    case 7:
      c.kind = ExperimentKind::Optimization;
      c.problems = {ProblemName::ZDT3, ProblemName::DTLZ2, ProblemName::CAR, ProblemName::WATER};
      c.spaces = {SpaceKind::Informed, SpaceKind::Adaptable, SpaceKind::Linear};
      c.estimators = {Estimator::Dist};
      c.n_values = {10};
      c.sample_modes = {SampleMode::Random, SampleMode::Biased};
      break;
    default:
      throw ConfigError("unknown table id " + std::to_string(table_id) + " (expected 3..7)");
  }
  switch (scale) {
    case Scale::Paper:
      c.learning.chain.max_total_samples = 1000000;
      c.eval_samples = kDefaultEvalSamples;
      c.bo.iterations = 800;
      c.manual_samples = 10000000;
      break;
    case Scale::Desk:
      c.learning.chain.max_total_samples = 100000;
      c.eval_samples = kDeskEvalSamples;
      c.bo.iterations = 150;
      c.manual_samples = 100000;
      break;
    case Scale::Smoke:
      c.n_values = {10};
      c.trials = 1;
      c.learning.chain.max_total_samples = 2000;
      c.learning.chain.round_size = 250;
      c.learning.dist_size = 2000;
      c.eval_samples = 500;
      c.bias_pool = 100;
      c.bo.iterations = 5;
      c.bo.candidates = 128;
      c.bo.gp.restarts = 2;
      c.manual_samples = 1000;
      if (table_id == 7) c.problems = {ProblemName::ZDT3, ProblemName::CAR};
      break;
  }
  return c;
}

// ---------------------------------------------------------------------------------------
// Reference values

namespace {

struct RefTable {
  std::vector<std::string> columns;
  std::vector<std::pair<std::string, std::vector<double>>> rows;
};

const RefTable* reference_table(int table_id) {
  static const std::vector<std::string> kCols12 = {"ZDT3 N=10", "ZDT3 N=20", "ZDT3 N=50",
                                                   "DTLZ2 N=10", "DTLZ2 N=20", "DTLZ2 N=50"};
  static const std::vector<std::string> kCols34 = {"CAR N=10", "CAR N=20", "CAR N=50",
                                                   "WATER N=10", "WATER N=20", "WATER N=50"};
  static const RefTable t3{kCols12,
                           {{"Linear Max", {0.48, 0.54, 0.64, 0.68, 0.68, 0.82}},
                            {"Linear Mean", {0.54, 0.55, 0.64, 0.71, 0.69, 0.82}},
                            {"Linear Dist", {0.55, 0.55, 0.64, 0.71, 0.69, 0.82}},
                            {"Adaptable Max", {0.21, 0.64, 0.83, 0.48, 0.65, 0.83}},
                            {"Adaptable Mean", {0.38, 0.56, 0.85, 0.64, 0.71, 0.85}},
                            {"Adaptable Dist", {0.45, 0.85, 0.91, 0.74, 0.74, 0.91}},
                            {"Informed Max", {0.52, 0.82, 0.91, 0.36, 0.68, 0.89}},
                            {"Informed Mean", {0.45, 0.87, 0.92, 0.53, 0.76, 0.83}},
                            {"Informed Dist", {0.88, 0.93, 0.94, 0.80, 0.92, 0.94}}}};
  static const RefTable t4{kCols34,
                           {{"Linear Max", {0.16, 0.18, 0.40, 0.52, 0.66, 0.74}},
                            {"Linear Mean", {0.09, 0.18, 0.40, 0.54, 0.67, 0.74}},
                            {"Linear Dist", {0.08, 0.18, 0.40, 0.54, 0.67, 0.74}},
                            {"Adaptable Max", {0.35, 0.60, 0.79, 0.43, 0.56, 0.75}},
                            {"Adaptable Mean", {0.27, 0.66, 0.57, 0.50, 0.58, 0.72}},
                            {"Adaptable Dist", {0.43, 0.70, 0.68, 0.53, 0.63, 0.77}},
                            {"Informed Max", {0.48, 0.63, 0.80, 0.37, 0.58, 0.74}},
                            {"Informed Mean", {0.50, 0.75, 0.80, 0.49, 0.63, 0.75}},
                            {"Informed Dist", {0.64, 0.77, 0.80, 0.56, 0.65, 0.77}}}};
  static const RefTable t5{kCols12,
                           {{"Linear Max", {0.48, 0.48, 0.54, 0.68, 0.73, 0.79}},
                            {"Linear Mean", {0.54, 0.51, 0.54, 0.71, 0.73, 0.80}},
                            {"Linear Dist", {0.55, 0.51, 0.54, 0.70, 0.73, 0.80}},
                            {"Adaptable Max", {0.25, 0.36, 0.40, 0.53, 0.41, 0.80}},
                            {"Adaptable Mean", {0.39, 0.38, 0.41, 0.74, 0.68, 0.77}},
                            {"Adaptable Dist", {0.43, 0.40, 0.50, 0.77, 0.75, 0.70}},
                            {"Informed Max", {0.88, 0.74, 0.55, 0.55, 0.63, 0.79}},
                            {"Informed Mean", {0.49, 0.52, 0.58, 0.71, 0.71, 0.77}},
                            {"Informed Dist", {0.88, 0.87, 0.88, 0.87, 0.77, 0.79}}}};
  static const RefTable t6{kCols34,
                           {{"Linear Max", {0.01, -0.05, -0.05, 0.35, 0.58, 0.45}},
                            {"Linear Mean", {0.0, -0.02, -0.05, 0.42, 0.55, 0.47}},
                            {"Linear Dist", {-0.01, -0.02, -0.05, 0.42, 0.55, 0.47}},
                            {"Adaptable Max", {-0.19, -0.13, -0.12, 0.26, 0.19, -0.05}},
                            {"Adaptable Mean", {-0.06, -0.12, -0.10, 0.32, 0.27, 0.29}},
                            {"Adaptable Dist", {-0.05, -0.1, -0.08, 0.21, 0.32, 0.42}},
                            {"Informed Max", {-0.14, -0.20, 0.24, 0.17, 0.06, 0.26}},
                            {"Informed Mean", {-0.03, -0.12, 0.03, 0.37, 0.26, 0.37}},
                            {"Informed Dist", {0.06, 0.02, 0.14, 0.42, 0.32, 0.43}}}};
  static const RefTable t7{{"random Informed", "random Adaptable", "random Linear", "biased Informed",
                            "biased Adaptable", "biased Linear", "Manual"},
                           {{"ZDT3", {1.0, 0.426, 0.355, 1.0, 0.353, 0.347, 1.0}},
                            {"DTLZ2", {0.701, 0.700, 0.700, 0.702, 0.700, 0.700, 0.703}},
                            {"CAR", {0.806, 0.585, 0.497, 0.803, 0.388, 0.310, 0.816}},
                            {"WATER", {0.201, 0.177, 0.166, 0.208, 0.208, 0.208, 0.413}}}};
  switch (table_id) {
    case 3:
      return &t3;
    case 4:
      return &t4;
    case 5:
      return &t5;
    case 6:
      return &t6;
    case 7:
      return &t7;
    default:
      return nullptr;
  }
}

}  // namespace

std::optional<double> reference_value(int table_id, std::string_view row, std::string_view column) {
  const RefTable* t = reference_table(table_id);
  if (!t) return std::nullopt;
  const auto col = std::find(t->columns.begin(), t->columns.end(), column);
  if (col == t->columns.end()) return std::nullopt;
  for (const auto& [label, values] : t->rows)
    if (label == row) return values[static_cast<std::size_t>(col - t->columns.begin())];
  return std::nullopt;
}

// ---------------------------------------------------------------------------------------
// Runner

namespace {

// Stream tags for derive_seed; part of the documented seed hierarchy.
enum SeedStream : std::uint64_t { kData = 1, kChains = 2, kDist = 3, kEval = 4, kBo = 5, kManual = 6 };

std::uint64_t u(ProblemName p) { return static_cast<std::uint64_t>(p); }
std::uint64_t u(SpaceKind s) { return static_cast<std::uint64_t>(s); }
std::uint64_t u(Estimator e) { return static_cast<std::uint64_t>(e); }
std::uint64_t u(SampleMode m) { return static_cast<std::uint64_t>(m); }

// One posterior: every estimator (and, for optimization runs, every BO run) shares it.
struct Unit {
  ProblemName problem;
  SampleMode mode;
  std::size_t n;
  int trial;
  SpaceKind space;

  std::string label() const {
    std::ostringstream s;
    s << to_string(problem) << '_' << to_string(mode) << "_N" << n << "_t" << trial << '_' << to_string(space);
    return s.str();
  }
};

std::string format_value(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

class OutputWriter {
 public:
  explicit OutputWriter(fs::path root) : root_(std::move(root)) {}

  void write(const fs::path& rel, const std::string& content) {
    std::lock_guard lock(mutex_);
    const fs::path full = root_ / rel;
    fs::create_directories(full.parent_path());
    std::ofstream out(full, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + full.string());
    out << content;
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::mutex mutex_;
};

std::vector<Example> make_examples(const ExperimentConfig& c, const Unit& unit) {
  const ProblemDef& p = problem(unit.problem);
  const std::uint64_t seed =
      derive_seed(c.seed, {kData, u(unit.problem), u(unit.mode), unit.n, static_cast<std::uint64_t>(unit.trial)});
  return unit.mode == SampleMode::Random ? generate_random_examples(p, unit.n, seed)
                                         : generate_biased_examples(p, unit.n, c.bias_pool, seed);
}

std::uint64_t unit_seed(const ExperimentConfig& c, std::uint64_t stream, const Unit& unit,
                        std::optional<Estimator> est = std::nullopt) {
  return derive_seed(c.seed, {stream, u(unit.problem), u(unit.mode), unit.n, static_cast<std::uint64_t>(unit.trial),
                              u(unit.space), est ? u(*est) : 0xffu});
}

void write_posterior_files(OutputWriter& out, const Unit& unit, const LearnedPosterior& learned) {
  std::ostringstream csv;
  write_posterior_csv(csv, learned.run.posterior);
  out.write(fs::path("posteriors") / (unit.label() + ".csv"), csv.str());
  json chains = json::array();
  for (const auto& d : learned.run.chains) {
    chains.push_back({{"step_size", d.step_size},
                      {"divergences", d.divergences},
                      {"transitions", d.transitions},
                      {"mean_accept_stat", d.mean_accept_stat}});
  }
  const json side{{"param_space", to_json(learned.density.space())},
                  {"n_preferences", learned.density.n_preferences()},
                  {"draws", learned.run.posterior.size()},
                  {"converged", learned.run.converged},
                  {"stop_reason", learned.run.stop_reason == StopReason::Converged ? "converged" : "sample_cap"},
                  {"max_rhat", std::isfinite(learned.run.max_rhat) ? json(learned.run.max_rhat) : json(nullptr)},
                  {"rounds", learned.run.rounds},
                  {"chains", chains}};
  out.write(fs::path("posteriors") / (unit.label() + ".json"), side.dump(2) + "\n");
}

struct UnitOutcome {
  std::vector<SimilarityRow> similarity;
  std::vector<OptimizationRow> optimization;
  double seconds = 0.0;
  std::string error;
};

UnitOutcome run_similarity_unit(const ExperimentConfig& c, const Unit& unit, const EvaluationSet& eval,
                                OutputWriter& out) {
  UnitOutcome o;
  std::optional<LearnedPosterior> learned;
  try {
    const std::vector<Example> examples = make_examples(c, unit);
    learned.emplace(learn_posterior(problem(unit.problem), unit.space, examples, c.learning,
                                    unit_seed(c, kChains, unit)));
    if (c.write_posteriors) write_posterior_files(out, unit, *learned);
  } catch (const std::exception& e) {
    o.error = e.what();
  }
  for (Estimator est : c.estimators) {
    SimilarityRow row{unit.problem, unit.space, est, unit.n, unit.mode, unit.trial,
                      std::numeric_limits<double>::quiet_NaN(), o.error};
    if (learned) {
      try {
        const PosteriorUtility g = make_surrogate(*learned, est, c.learning, unit_seed(c, kDist, unit, est));
        row.tau = ranking_similarity(eval, [&g](std::span<const double> y) { return g(y); });
        if (est != Estimator::Dist) {
          out.write(fs::path("utilities") / (unit.label() + "_" + std::string(to_string(est)) + ".json"),
                    to_json(g.specs().front()).dump(2) + "\n");
        }
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
    o.similarity.push_back(std::move(row));
  }
  return o;
}

UnitOutcome run_optimization_unit(const ExperimentConfig& c, const Unit& unit, OutputWriter& out) {
  UnitOutcome o;
  const ProblemDef& p = problem(unit.problem);
  std::optional<LearnedPosterior> learned;
  try {
    const std::vector<Example> examples = make_examples(c, unit);
    learned.emplace(learn_posterior(p, unit.space, examples, c.learning, unit_seed(c, kChains, unit)));
    if (c.write_posteriors) write_posterior_files(out, unit, *learned);
  } catch (const std::exception& e) {
    o.error = e.what();
  }
  BoConfig bo = c.bo;
  if (const auto it = c.x0.find(unit.problem); it != c.x0.end()) bo.x0 = it->second;
  for (Estimator est : c.estimators) {
    OptimizationRow row{unit.problem, unit.space, est, unit.n, unit.mode, unit.trial, std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::quiet_NaN(), false, o.error};
    if (learned) {
      BoResult result;
      try {
        const PosteriorUtility g = make_surrogate(*learned, est, c.learning, unit_seed(c, kDist, unit, est));
        if (est != Estimator::Dist) {
          out.write(fs::path("utilities") / (unit.label() + "_" + std::string(to_string(est)) + ".json"),
                    to_json(g.specs().front()).dump(2) + "\n");
        }
        bo_optimize(p, [&g](std::span<const double> y) { return g(y); }, bo, unit_seed(c, kBo, unit, est), result);
        row.best_expert = result.best_expert;
        row.best_utility = result.best_utility;
        row.best_feasible = result.best_feasible;
        row.error.clear();
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      std::ostringstream csv;
      write_bo_history_csv(csv, result.history);
      out.write(fs::path("bo") / (unit.label() + "_" + std::string(to_string(est)) + ".csv"), csv.str());
    }
    o.optimization.push_back(std::move(row));
  }
  return o;
}

std::vector<Unit> enumerate_units(const ExperimentConfig& c) {
  std::vector<Unit> units;
  for (ProblemName p : c.problems)
    for (SampleMode m : c.sample_modes)
      for (std::size_t n : c.n_values)
        for (int t = 0; t < c.trials; ++t)
          for (SpaceKind s : c.spaces) units.push_back({p, m, n, t, s});
  return units;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Means table in the layout of the reference tables: rows "Space Estimator", columns
// "PROBLEM N=n" (with the sample mode when several are swept).
std::string similarity_means(const ExperimentConfig& c, const std::vector<SimilarityRow>& rows,
                             std::vector<ComparisonRow>& comparison) {
  const bool multi_mode = c.sample_modes.size() > 1;
  struct Col {
    ProblemName p;
    SampleMode m;
    std::size_t n;
    std::string label;
  };
  std::vector<Col> cols;
  for (ProblemName p : c.problems)
    for (SampleMode m : c.sample_modes)
      for (std::size_t n : c.n_values) {
        std::string label = std::string(to_string(p)) + (multi_mode ? " " + std::string(to_string(m)) : "") +
                            " N=" + std::to_string(n);
        cols.push_back({p, m, n, label});
      }
  std::ostringstream out;
  out << "space,estimator";
  for (const auto& col : cols) out << ',' << col.label;
  out << '\n';
  for (SpaceKind s : c.spaces) {
    for (Estimator e : c.estimators) {
      const std::string row_label = std::string(to_string(s)) + " " + std::string(to_string(e));
      out << to_string(s) << ',' << to_string(e);
      for (const auto& col : cols) {
        std::vector<double> taus;
        for (const auto& r : rows)
          if (r.problem == col.p && r.mode == col.m && r.n == col.n && r.space == s && r.estimator == e &&
              std::isfinite(r.tau))
            taus.push_back(r.tau);
        const double m = mean_of(taus);
        out << ',' << format_value(m);
        comparison.push_back({row_label, col.label, m, reference_value(c.table_id, row_label, col.label)});
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string optimization_means(const ExperimentConfig& c, const std::vector<OptimizationRow>& rows,
                               const std::vector<ManualRow>& manual, std::vector<ComparisonRow>& comparison) {
  std::vector<std::pair<std::pair<SampleMode, SpaceKind>, std::string>> cols;
  for (SampleMode m : c.sample_modes)
    for (SpaceKind s : c.spaces)
      cols.push_back({{m, s}, std::string(to_string(m)) + " " + std::string(to_string(s))});
  const bool suffix = c.estimators.size() > 1 || c.n_values.size() > 1;
  std::ostringstream out;
  out << "problem";
  for (Estimator e : c.estimators)
    for (const auto& col : cols) out << ',' << col.second << (suffix ? " " + std::string(to_string(e)) : "");
  out << ",Manual\n";
  for (ProblemName p : c.problems) {
    const std::string row_label(to_string(p));
    out << row_label;
    for (Estimator e : c.estimators) {
      for (const auto& col : cols) {
        std::vector<double> v;
        for (const auto& r : rows)
          if (r.problem == p && r.estimator == e && r.mode == col.first.first && r.space == col.first.second &&
              std::isfinite(r.best_expert))
            v.push_back(r.best_expert);
        const double m = mean_of(v);
        out << ',' << format_value(m);
        const std::string label = col.second + (suffix ? " " + std::string(to_string(e)) : "");
        comparison.push_back({row_label, label, m, reference_value(c.table_id, row_label, label)});
      }
    }
    double bound = std::numeric_limits<double>::quiet_NaN();
    for (const auto& m : manual)
      if (m.problem == p) bound = m.bound;
    out << ',' << format_value(bound) << '\n';
    comparison.push_back({row_label, "Manual", bound, reference_value(c.table_id, row_label, "Manual")});
  }
  return out.str();
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "row,column,obtained,reference,delta\n";
  for (const auto& r : rows) {
    out << csv_field(r.row) << ',' << csv_field(r.column) << ',' << format_value(r.obtained) << ',';
    if (r.reference) {
      out << format_value(*r.reference) << ',' << format_value(r.obtained - *r.reference);
    } else {
      out << ',';
    }
    out << '\n';
  }
  return out.str();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json versions() {
  char eigen[32];
  std::snprintf(eigen, sizeof eigen, "%d.%d.%d", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
  char nl[32];
  std::snprintf(nl, sizeof nl, "%d.%d.%d", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                NLOHMANN_JSON_VERSION_PATCH);
  return json{{"ufl", std::string(kVersion)},
              {"compiler", __VERSION__},
              {"cxx_standard", static_cast<long>(__cplusplus)},
              {"eigen", eigen},
              {"nlohmann_json", nl},
              {"openssl", OPENSSL_VERSION_TEXT}};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.output_dir = config.output_dir;
  fs::create_directories(result.output_dir);
  OutputWriter out(result.output_dir);
  for (const char* sub : {"posteriors", "utilities", "bo"}) fs::remove_all(result.output_dir / sub);

  // Evaluation sets depend only on (problem, trial) so every space and N is scored on the same points.
  std::map<std::pair<ProblemName, int>, EvaluationSet> eval_sets;
  if (config.kind == ExperimentKind::Similarity) {
    for (ProblemName p : config.problems)
      for (int t = 0; t < config.trials; ++t)
        eval_sets.emplace(std::make_pair(p, t),
                          make_evaluation_set(problem(p), config.eval_samples,
                                              derive_seed(config.seed, {kEval, u(p), static_cast<std::uint64_t>(t)})));
  }

  const std::vector<Unit> units = enumerate_units(config);
  std::vector<UnitOutcome> outcomes(units.size());
  parallel_for(units.size(), config.workers, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Unit& unit = units[i];
    outcomes[i] = config.kind == ExperimentKind::Similarity
                      ? run_similarity_unit(config, unit, eval_sets.at({unit.problem, unit.trial}), out)
                      : run_optimization_unit(config, unit, out);
    outcomes[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  std::vector<std::pair<std::string, double>> manual_times;
  if (config.kind == ExperimentKind::Optimization) {
    for (ProblemName p : config.problems) {
      const auto t0 = std::chrono::steady_clock::now();
      std::optional<double> x0;
      if (const auto it = config.x0.find(p); it != config.x0.end()) x0 = it->second;
      const double bound = manual_upper_bound(problem(p), ExpertFn{p}, config.manual_samples,
                                              derive_seed(config.seed, {kManual, u(p)}), x0);
      result.manual.push_back({p, bound});
      manual_times.emplace_back(std::string(to_string(p)),
                                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
  }

  json failures = json::array();
  json unit_times = json::object();
  for (std::size_t i = 0; i < units.size(); ++i) {
    unit_times[units[i].label()] = outcomes[i].seconds;
    for (auto& r : outcomes[i].similarity) {
      if (!r.error.empty()) failures.push_back({{"cell", units[i].label() + "_" + std::string(to_string(r.estimator))},
                                                {"error", r.error}});
      result.similarity.push_back(std::move(r));
    }
    for (auto& r : outcomes[i].optimization) {
      if (!r.error.empty()) failures.push_back({{"cell", units[i].label()}, {"error", r.error}});
      result.optimization.push_back(std::move(r));
    }
  }
  result.failed_cells = failures.size();

  if (config.kind == ExperimentKind::Similarity) {
    std::ostringstream cells;
    cells << "problem,space,estimator,N,sample_mode,trial,tau\n";
    for (const auto& r : result.similarity) {
      cells << to_string(r.problem) << ',' << to_string(r.space) << ',' << to_string(r.estimator) << ',' << r.n << ','
            << to_string(r.mode) << ',' << r.trial << ',' << format_value(r.tau) << '\n';
    }
    out.write("cells.csv", cells.str());
    out.write("means.csv", similarity_means(config, result.similarity, result.comparison));
  } else {
    std::ostringstream cells;
    cells << "problem,space,estimator,N,sample_mode,trial,best_expert,best_utility,best_feasible\n";
    for (const auto& r : result.optimization) {
      cells << to_string(r.problem) << ',' << to_string(r.space) << ',' << to_string(r.estimator) << ',' << r.n << ','
            << to_string(r.mode) << ',' << r.trial << ','
            << format_value(r.best_expert) << ',' << format_value(r.best_utility) << ',' << (r.best_feasible ? 1 : 0)
            << '\n';
    }
    out.write("cells.csv", cells.str());
    std::ostringstream manual;
    manual << "problem,manual_bound,samples\n";
    for (const auto& m : result.manual)
      manual << to_string(m.problem) << ',' << format_value(m.bound) << ',' << config.manual_samples << '\n';
    out.write("manual.csv", manual.str());
    out.write("means.csv", optimization_means(config, result.optimization, result.manual, result.comparison));
  }
  out.write("comparison.csv", comparison_csv(result.comparison));

  const json cfg = to_json(config);
  json files = json::array();
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(result.output_dir))
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  for (const auto& path : paths) {
    const std::string content = read_file(path);
    files.push_back({{"path", fs::relative(path, result.output_dir).generic_string()},
                     {"sha256", sha256_hex(content)},
                     {"bytes", content.size()}});
  }
  json manual_json = json::object();
  for (const auto& [name, secs] : manual_times) manual_json[name] = secs;
  const json manifest{
      {"config", cfg},
      {"config_sha256", sha256_hex(cfg.dump())},
      {"seeds",
       {{"master", config.seed},
        {"derivation",
         "derive_seed(master, {stream, problem, sample_mode, N, trial, space, estimator}); streams: data=1 "
         "(without space/estimator), chains=2 (chain c adds {c}), dist=3, eval=4 {problem, trial}, bo=5, "
         "manual=6 {problem}"}}},
      {"versions", versions()},
      {"wall_seconds",
       {{"total", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
        {"units", unit_times},
        {"manual", manual_json}}},
      {"failed_cells", result.failed_cells},
      {"failures", failures},
      {"files", files}};
  out.write("manifest.json", manifest.dump(2) + "\n");
  return result;
}

ExperimentResult reproduce_table(int table_id, Scale scale, std::optional<std::uint64_t> seed,
                                 std::optional<std::string> output_dir, std::optional<std::size_t> workers) {
  ExperimentConfig c = table_preset(table_id, scale);
  if (seed) c.seed = *seed;
  if (output_dir) c.output_dir = *output_dir;
  if (workers) c.workers = *workers;
  return run_experiment(c);
}

}  // namespace ufl
