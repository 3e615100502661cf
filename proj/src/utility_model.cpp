#include "ufl/utility_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ufl/error.hpp"

namespace ufl {

std::string_view to_string(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::Linear:
      return "Linear";
    case SpaceKind::Adaptable:
      return "Adaptable";
    case SpaceKind::Informed:
      return "Informed";
  }
  return "?";
}

SpaceKind space_kind_from_string(std::string_view name) {
  if (name == "Linear") return SpaceKind::Linear;
  if (name == "Adaptable") return SpaceKind::Adaptable;
  if (name == "Informed") return SpaceKind::Informed;
  throw ConfigError("unknown space kind: " + std::string(name));
}

void validate(const UtilityTermParams& p) {
  if (!(p.y_min < p.y_max)) throw InvalidBoundsError("utility term requires y_min < y_max");
  if (!(p.b >= 0.0 && p.b <= 1.0)) throw std::invalid_argument("utility term offset b outside [0,1]");
  if (!(p.d >= kDFloor && p.d <= 1.0)) throw std::invalid_argument("utility term width d outside [d_floor,1]");
  if (!(p.pw >= kPwLo && p.pw <= kPwHi)) throw std::invalid_argument("utility term power outside its support");
  if (p.m != 1 && p.m != -1) throw std::invalid_argument("utility term direction must be +1 or -1");
}

void validate(const UtilitySpec& spec) {
  const std::size_t n = spec.weights.size();
  if (spec.space_kind == SpaceKind::Linear) {
    if (!spec.terms.empty()) throw std::invalid_argument("Linear spec must not carry terms");
    if (spec.linear_bounds.size() != n) throw DimensionMismatchError("Linear spec needs one bound per weight");
    for (const auto& b : spec.linear_bounds)
      if (!(b.lo < b.hi)) throw InvalidBoundsError("Linear normalization bound requires lo < hi");
  } else {
    if (spec.terms.size() != n) throw DimensionMismatchError("spec needs one term per weight");
    for (const auto& t : spec.terms) validate(t);
  }
  if (spec.space_kind == SpaceKind::Informed) {
    for (double w : spec.weights)
      if (w < 0.0) throw std::invalid_argument("Informed weights must be nonnegative");
    for (const auto& m : spec.free_mask.terms)
      if (m.m || m.y_min || m.y_max) throw std::invalid_argument("Informed spec must fix m, y_min and y_max");
  }
  if (spec.space_kind != SpaceKind::Linear && spec.free_mask.terms.size() != n)
    throw DimensionMismatchError("free mask needs one entry per term");
}

double normalize_output(double y, double y_min, double y_max) {
  if (!(y_min < y_max)) throw InvalidBoundsError("normalize_output requires y_min < y_max");
  return std::clamp((y - y_min) / (y_max - y_min), 0.0, 1.0);
}

namespace {

double reflected_input(const UtilityTermParams& p, double y) {
  const double s = normalize_output(y, p.y_min, p.y_max);
  return p.m == 1 ? s : 1.0 - s;
}

}  // namespace

double eval_monotone_term(const UtilityTermParams& p, double y) {
  const double z = std::clamp((reflected_input(p, y) - p.b) / p.d, 0.0, 1.0);
  // The outer clamp is redundant once the base is clamped; kept to mirror the formula.
  return std::min(1.0, std::max(0.0, std::pow(z, p.pw)));
}

TermGradient eval_monotone_term_grad(const UtilityTermParams& p, double y) {
  TermGradient g;
  const double q = (reflected_input(p, y) - p.b) / p.d;
  if (q <= 0.0) return g;
  if (q >= 1.0) {
    g.value = 1.0;
    return g;
  }
  g.value = std::pow(q, p.pw);
  const double slope = p.pw * g.value / q;  // d u / d q
  g.d_b = -slope / p.d;
  g.d_d = -slope * q / p.d;
  g.d_pw = g.value * std::log(q);
  return g;
}

double eval_aggregate(const UtilitySpec& spec, std::span<const double> y) {
  const std::size_t n = spec.weights.size();
  if (y.size() != n) throw DimensionMismatchError("output vector does not match utility dimensionality");
  double total = 0.0;
  if (spec.space_kind == SpaceKind::Linear) {
    for (std::size_t i = 0; i < n; ++i)
      total += spec.weights[i] * normalize_output(y[i], spec.linear_bounds[i].lo, spec.linear_bounds[i].hi);
  } else {
    for (std::size_t i = 0; i < n; ++i) total += spec.weights[i] * eval_monotone_term(spec.terms[i], y[i]);
  }
  return total;
}

UtilitySpec normalize_weights(const UtilitySpec& spec) {
  double l1 = 0.0;
  for (double w : spec.weights) l1 += std::abs(w);
  if (!(l1 > 0.0)) throw DegenerateWeightsError("cannot normalize all-zero weights");
  UtilitySpec out = spec;
  for (std::size_t i = 0; i < out.weights.size(); ++i) {
    out.weights[i] /= l1;
    if (out.space_kind == SpaceKind::Adaptable && out.weights[i] < 0.0) {
      out.weights[i] = -out.weights[i];
      out.terms[i].m = -out.terms[i].m;
    }
  }
  return out;
}

UtilitySpec make_linear_template(std::span<const Interval> general) {
  UtilitySpec spec;
  spec.space_kind = SpaceKind::Linear;
  spec.weights.assign(general.size(), 1.0 / static_cast<double>(general.size()));
  spec.linear_bounds.assign(general.begin(), general.end());
  spec.free_mask.weights = true;
  return spec;
}

UtilitySpec make_adaptable_template(std::span<const Interval> general) {
  UtilitySpec spec;
  spec.space_kind = SpaceKind::Adaptable;
  for (const auto& r : general) {
    spec.terms.push_back({.y_min = r.lo, .y_max = r.hi, .b = 0.0, .d = 1.0, .pw = 1.0, .m = 1});
    spec.free_mask.terms.push_back({});
  }
  spec.weights.assign(general.size(), 1.0 / static_cast<double>(general.size()));
  return spec;
}

UtilitySpec make_informed_template(std::span<const Interval> informed, std::span<const int> directions) {
  if (informed.size() != directions.size()) throw DimensionMismatchError("one direction per informed range");
  UtilitySpec spec;
  spec.space_kind = SpaceKind::Informed;
  for (std::size_t i = 0; i < informed.size(); ++i) {
    spec.terms.push_back(
        {.y_min = informed[i].lo, .y_max = informed[i].hi, .b = 0.0, .d = 1.0, .pw = 1.0, .m = directions[i]});
    spec.free_mask.terms.push_back({});
  }
  spec.weights.assign(informed.size(), 1.0 / static_cast<double>(informed.size()));
  return spec;
}

nlohmann::json to_json(const UtilitySpec& spec) {
  nlohmann::json doc;
  doc["space_kind"] = std::string(to_string(spec.space_kind));
  doc["terms"] = nlohmann::json::array();
  for (const auto& t : spec.terms) {
    doc["terms"].push_back(
        {{"y_min", t.y_min}, {"y_max", t.y_max}, {"b", t.b}, {"d", t.d}, {"pw", t.pw}, {"m", t.m}});
  }
  doc["weights"] = spec.weights;
  nlohmann::json mask;
  mask["weights"] = spec.free_mask.weights;
  mask["terms"] = nlohmann::json::array();
  for (const auto& m : spec.free_mask.terms) {
    mask["terms"].push_back({{"y_min", m.y_min},
                             {"y_max", m.y_max},
                             {"b", m.b},
                             {"d", m.d},
                             {"pw", m.pw},
                             {"m", m.m}});
  }
  doc["free_mask"] = mask;
  if (!spec.linear_bounds.empty()) {
    doc["linear_bounds"] = nlohmann::json::array();
    for (const auto& b : spec.linear_bounds) doc["linear_bounds"].push_back({b.lo, b.hi});
  }
  return doc;
}

UtilitySpec utility_spec_from_json(const nlohmann::json& doc) {
  UtilitySpec spec;
  spec.space_kind = space_kind_from_string(doc.at("space_kind").get<std::string>());
  for (const auto& t : doc.at("terms")) {
    spec.terms.push_back({.y_min = t.at("y_min").get<double>(),
                          .y_max = t.at("y_max").get<double>(),
                          .b = t.at("b").get<double>(),
                          .d = t.at("d").get<double>(),
                          .pw = t.at("pw").get<double>(),
                          .m = t.at("m").get<int>()});
  }
  spec.weights = doc.at("weights").get<std::vector<double>>();
  const auto& mask = doc.at("free_mask");
  spec.free_mask.weights = mask.at("weights").get<bool>();
  for (const auto& m : mask.at("terms")) {
    spec.free_mask.terms.push_back({.y_min = m.at("y_min").get<bool>(),
                                    .y_max = m.at("y_max").get<bool>(),
                                    .b = m.at("b").get<bool>(),
                                    .d = m.at("d").get<bool>(),
                                    .pw = m.at("pw").get<bool>(),
                                    .m = m.at("m").get<bool>()});
  }
  if (doc.contains("linear_bounds")) {
    for (const auto& b : doc.at("linear_bounds")) spec.linear_bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
  }
  validate(spec);
  return spec;
}

}  // namespace ufl
