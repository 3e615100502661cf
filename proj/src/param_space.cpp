#include "ufl/param_space.hpp"

#include <algorithm>
#include <cmath>

#include "ufl/error.hpp"

namespace ufl {

namespace {

const double kLogPwLo = std::log(kPwLo);
const double kLogPwSpan = std::log(kPwHi) - std::log(kPwLo);

}  // namespace

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double log_logistic(double t) {
  // -softplus(-t)
  if (t >= 0.0) return -std::log1p(std::exp(-t));
  return t - std::log1p(std::exp(t));
}

ParamSpace::ParamSpace(UtilitySpec tmpl) : template_(std::move(tmpl)) {
  validate(template_);
  if (template_.space_kind != SpaceKind::Linear) {
    for (std::size_t i = 0; i < template_.terms.size(); ++i) {
      const TermMask& m = template_.free_mask.terms[i];
      if (m.y_min || m.y_max || m.m)
        throw ConfigError("saturation bounds and direction cannot be sampled; fix them in the template");
      if (m.b) slots_.push_back({ParamField::B, i});
      if (m.d) slots_.push_back({ParamField::D, i});
      if (m.pw) slots_.push_back({ParamField::Pw, i});
    }
  }
  if (template_.free_mask.weights) {
    for (std::size_t i = 0; i < template_.weights.size(); ++i) slots_.push_back({ParamField::Weight, i});
  }
}

Eigen::VectorXd ParamSpace::transform(const UtilitySpec& spec) const {
  validate(spec);
  if (spec.space_kind != template_.space_kind || spec.weights.size() != template_.weights.size())
    throw DimensionMismatchError("spec does not belong to this parameter space");
  Eigen::VectorXd theta(dim());
  for (std::size_t k = 0; k < slots_.size(); ++k) {
    const ParamSlot& s = slots_[k];
    switch (s.field) {
      case ParamField::B:
        theta[k] = logit(spec.terms[s.index].b);
        break;
      case ParamField::D:
        theta[k] = logit((spec.terms[s.index].d - kDFloor) / (1.0 - kDFloor));
        break;
      case ParamField::Pw:
        theta[k] = logit((std::log(spec.terms[s.index].pw) - kLogPwLo) / kLogPwSpan);
        break;
      case ParamField::Weight:
        theta[k] = log_weights() ? std::log(spec.weights[s.index]) : spec.weights[s.index];
        break;
    }
  }
  return theta;
}

UtilitySpec ParamSpace::decode(const Eigen::VectorXd& theta) const {
  if (static_cast<std::size_t>(theta.size()) != dim())
    throw DimensionMismatchError("parameter vector has wrong dimensionality");
  UtilitySpec spec = template_;
  for (std::size_t k = 0; k < slots_.size(); ++k) {
    const ParamSlot& s = slots_[k];
    const double t = theta[static_cast<Eigen::Index>(k)];
    switch (s.field) {
      case ParamField::B:
        spec.terms[s.index].b = logistic(t);
        break;
      case ParamField::D:
        spec.terms[s.index].d = std::clamp(kDFloor + (1.0 - kDFloor) * logistic(t), kDFloor, 1.0);
        break;
      case ParamField::Pw:
        spec.terms[s.index].pw = std::clamp(std::exp(kLogPwLo + kLogPwSpan * logistic(t)), kPwLo, kPwHi);
        break;
      case ParamField::Weight:
        spec.weights[s.index] = log_weights() ? std::exp(t) : t;
        break;
    }
  }
  return spec;
}

UtilitySpec ParamSpace::decode_for_use(const Eigen::VectorXd& theta) const {
  UtilitySpec spec = decode(theta);
  if (!spec.interpretable()) return spec;
  double l1 = 0.0;
  for (double w : spec.weights) l1 += std::abs(w);
  // All-zero weights only arise from underflow; such a sample ranks nothing.
  return l1 > 0.0 ? normalize_weights(spec) : spec;
}

double ParamSpace::jacobian(std::size_t k, double t) const {
  const double sig = logistic(t);
  const double dsig = sig * (1.0 - sig);
  switch (slots_[k].field) {
    case ParamField::B:
      return dsig;
    case ParamField::D:
      return (1.0 - kDFloor) * dsig;
    case ParamField::Pw:
      return std::exp(kLogPwLo + kLogPwSpan * sig) * kLogPwSpan * dsig;
    case ParamField::Weight:
      return log_weights() ? std::exp(t) : 1.0;
  }
  return 0.0;
}

nlohmann::json to_json(const ParamSpace& space) {
  nlohmann::json doc;
  doc["template"] = to_json(space.template_spec());
  doc["dim"] = space.dim();
  doc["coordinates"] = nlohmann::json::array();
  for (const auto& s : space.slots()) {
    const char* field = s.field == ParamField::B    ? "b"
                        : s.field == ParamField::D  ? "d"
                        : s.field == ParamField::Pw ? "pw"
                                                    : "weight";
    doc["coordinates"].push_back({{"field", field}, {"index", s.index}});
  }
  return doc;
}

ParamSpace param_space_from_json(const nlohmann::json& doc) {
  return ParamSpace(utility_spec_from_json(doc.at("template")));
}

}  // namespace ufl
