#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ufl {

/// Smallest admissible width of the monotone segment.
inline constexpr double kDFloor = 1e-3;
/// Support of the power exponent (sampled on a log scale).
inline constexpr double kPwLo = 0.25;
inline constexpr double kPwHi = 4.0;

enum class SpaceKind { Linear, Adaptable, Informed };

std::string_view to_string(SpaceKind kind);
SpaceKind space_kind_from_string(std::string_view name);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double mid() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

/// Parameters of one monotone utility term.
///
/// The output y is first mapped to s in [0,1] by the saturation bounds, reflected
/// (s -> 1 - s) when the term is falling, and then shaped by
///   u = clamp((s - b) / d, 0, 1) ^ pw.
/// b moves the start of the monotone segment, d its length, pw its curvature.
struct UtilityTermParams {
  double y_min = 0.0;
  double y_max = 1.0;
  double b = 0.0;
  double d = 1.0;
  double pw = 1.0;
  int m = 1;

  bool operator==(const UtilityTermParams&) const = default;
};

/// Which fields of a term are learned. Fixed fields keep their template value.
struct TermMask {
  bool y_min = false;
  bool y_max = false;
  bool b = true;
  bool d = true;
  bool pw = true;
  bool m = false;

  bool operator==(const TermMask&) const = default;
};

struct FreeMask {
  std::vector<TermMask> terms;
  bool weights = true;

  bool operator==(const FreeMask&) const = default;
};

/// A complete utility function: G(y) = sum_i w_i u_i(y_i).
///
/// Linear specs carry no terms; their outputs are normalized by `linear_bounds`.
struct UtilitySpec {
  SpaceKind space_kind = SpaceKind::Informed;
  std::vector<UtilityTermParams> terms;
  std::vector<double> weights;
  FreeMask free_mask;
  std::vector<Interval> linear_bounds;

  std::size_t output_dim() const { return weights.size(); }
  /// Informed and Linear results are reported with L1-normalized weights.
  bool interpretable() const { return space_kind != SpaceKind::Adaptable; }

  bool operator==(const UtilitySpec&) const = default;
};

/// Throws InvalidBoundsError / std::invalid_argument when an invariant is broken.
void validate(const UtilityTermParams& params);
void validate(const UtilitySpec& spec);

/// clamp((y - y_min) / (y_max - y_min), 0, 1).
double normalize_output(double y, double y_min, double y_max);

double eval_monotone_term(const UtilityTermParams& params, double y);

/// Partial derivatives of a term with respect to its shape parameters.
/// On the saturated plateaus all three are zero (one-sided subgradient).
struct TermGradient {
  double value = 0.0;
  double d_b = 0.0;
  double d_d = 0.0;
  double d_pw = 0.0;
};

TermGradient eval_monotone_term_grad(const UtilityTermParams& params, double y);

double eval_aggregate(const UtilitySpec& spec, std::span<const double> y);

/// Scales weights to unit L1 norm. For Adaptable specs a negative weight is folded
/// into the direction flag of its term.
UtilitySpec normalize_weights(const UtilitySpec& spec);

/// Template specs for the three spaces. `general` are the broad per-output ranges;
/// `informed` holds the expert-supplied saturation ranges for Informed terms.
UtilitySpec make_linear_template(std::span<const Interval> general);
UtilitySpec make_adaptable_template(std::span<const Interval> general);
UtilitySpec make_informed_template(std::span<const Interval> informed, std::span<const int> directions);

nlohmann::json to_json(const UtilitySpec& spec);
UtilitySpec utility_spec_from_json(const nlohmann::json& doc);

}  // namespace ufl
