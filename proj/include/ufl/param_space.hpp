#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "ufl/utility_model.hpp"

namespace ufl {

/// Which constrained quantity an unconstrained coordinate drives.
enum class ParamField { B, D, Pw, Weight };

struct ParamSlot {
  ParamField field;
  std::size_t index;  // term / weight index
};

double logistic(double t);
double logit(double p);
/// log(logistic(t)), stable for large |t|.
double log_logistic(double t);

/// Bijection between the learnable fields of a UtilitySpec and R^dim.
///
///   b   = logistic(t)
///   d   = d_floor + (1 - d_floor) logistic(t)
///   pw  = exp(log pw_lo + (log pw_hi - log pw_lo) logistic(t))
///   w   = exp(t) for Informed (nonnegative) weights, w = t otherwise
///
/// Fields not marked free keep the template's values.
class ParamSpace {
 public:
  explicit ParamSpace(UtilitySpec tmpl);

  std::size_t dim() const { return slots_.size(); }
  const UtilitySpec& template_spec() const { return template_; }
  const std::vector<ParamSlot>& slots() const { return slots_; }
  bool log_weights() const { return template_.space_kind == SpaceKind::Informed; }

  Eigen::VectorXd transform(const UtilitySpec& spec) const;
  /// Total on finite input.
  UtilitySpec decode(const Eigen::VectorXd& theta) const;
  /// decode() followed by L1 weight normalization when the space is interpretable.
  UtilitySpec decode_for_use(const Eigen::VectorXd& theta) const;

  /// Derivative of the constrained value with respect to coordinate k at theta.
  double jacobian(std::size_t k, double t) const;

 private:
  UtilitySpec template_;
  std::vector<ParamSlot> slots_;
};

nlohmann::json to_json(const ParamSpace& space);
ParamSpace param_space_from_json(const nlohmann::json& doc);

}  // namespace ufl
