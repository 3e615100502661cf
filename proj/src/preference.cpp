#include "ufl/preference.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ufl/error.hpp"

namespace ufl {

std::vector<Preference> generate_preferences(std::span<const Example> examples, const ExpertEvaluator& expert) {
  std::vector<double> score(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i)
    if (examples[i].feasible) score[i] = expert(examples[i].y);

  std::vector<Preference> prefs;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!examples[i].feasible) continue;
    for (std::size_t j = i + 1; j < examples.size(); ++j) {
      if (!examples[j].feasible || score[i] == score[j]) continue;
      prefs.push_back(score[i] > score[j] ? Preference{i, j} : Preference{j, i});
    }
  }
  return prefs;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  // 1 - s is exact for s in [0.5, 1], which makes sigmoid(x) + sigmoid(-x) == 1.
  return 1.0 - 1.0 / (1.0 + std::exp(x));
}

double fulfillment_probability(const UtilitySpec& spec, std::span<const double> y0, std::span<const double> y1) {
  return sigmoid(eval_aggregate(spec, y0) - eval_aggregate(spec, y1));
}

namespace {

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NonFiniteError(std::string(what) + " is not finite");
}

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw NonFiniteError(std::string(what) + " has non-finite components");
}

std::vector<std::vector<double>> outputs_of(std::span<const Example> examples) {
  std::vector<std::vector<double>> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.y);
  return out;
}

}  // namespace

PreferenceDensity::PreferenceDensity(ParamSpace space, std::vector<std::vector<double>> outputs,
                                     std::vector<Preference> prefs, PriorMode prior)
    : space_(std::move(space)), outputs_(std::move(outputs)), prefs_(std::move(prefs)), prior_(prior) {
  const std::size_t n_out = space_.template_spec().output_dim();
  for (const auto& y : outputs_)
    if (y.size() != n_out) throw DimensionMismatchError("example output does not match the utility space");
  for (const auto& p : prefs_) {
    if (p.preferred >= outputs_.size() || p.dominated >= outputs_.size())
      throw std::out_of_range("preference refers to a missing example");
    if (p.preferred == p.dominated) throw std::invalid_argument("preference compares an example with itself");
  }
}

double PreferenceDensity::likelihood_impl(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  const UtilitySpec spec = space_.decode(theta);
  const std::size_t n_ex = outputs_.size();
  const std::size_t n_out = spec.output_dim();
  const bool linear = spec.space_kind == SpaceKind::Linear;

  // Per example: utility and per-term partials.
  std::vector<double> utility(n_ex, 0.0);
  std::vector<TermGradient> partials(grad ? n_ex * n_out : 0);
  for (std::size_t k = 0; k < n_ex; ++k) {
    const auto& y = outputs_[k];
    double g = 0.0;
    for (std::size_t i = 0; i < n_out; ++i) {
      TermGradient tg;
      if (linear) {
        tg.value = normalize_output(y[i], spec.linear_bounds[i].lo, spec.linear_bounds[i].hi);
      } else if (grad) {
        tg = eval_monotone_term_grad(spec.terms[i], y[i]);
      } else {
        tg.value = eval_monotone_term(spec.terms[i], y[i]);
      }
      g += spec.weights[i] * tg.value;
      if (grad) partials[k * n_out + i] = tg;
    }
    utility[k] = g;
  }

  double total = 0.0;
  std::vector<double> coef(grad ? n_ex : 0, 0.0);
  for (const auto& p : prefs_) {
    const double diff = utility[p.preferred] - utility[p.dominated];
    total += softplus(-diff);
    if (grad) {
      const double c = -sigmoid(-diff);
      coef[p.preferred] += c;
      coef[p.dominated] -= c;
    }
  }
  require_finite(total, "preference negative log-likelihood");
  if (!grad) return total;

  grad->setZero(static_cast<Eigen::Index>(space_.dim()));
  const auto& slots = space_.slots();
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const ParamSlot& slot = slots[s];
    const double jac = space_.jacobian(s, theta[static_cast<Eigen::Index>(s)]);
    double acc = 0.0;
    for (std::size_t k = 0; k < n_ex; ++k) {
      if (coef[k] == 0.0) continue;
      const TermGradient& tg = partials[k * n_out + slot.index];
      double dg = 0.0;
      switch (slot.field) {
        case ParamField::B:
          dg = spec.weights[slot.index] * tg.d_b;
          break;
        case ParamField::D:
          dg = spec.weights[slot.index] * tg.d_d;
          break;
        case ParamField::Pw:
          dg = spec.weights[slot.index] * tg.d_pw;
          break;
        case ParamField::Weight:
          dg = tg.value;
          break;
      }
      acc += coef[k] * dg;
    }
    (*grad)[static_cast<Eigen::Index>(s)] = acc * jac;
  }
  require_finite(*grad, "preference likelihood gradient");
  return total;
}

double PreferenceDensity::prior_impl(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  if (static_cast<std::size_t>(theta.size()) != space_.dim())
    throw DimensionMismatchError("parameter vector has wrong dimensionality");
  if (grad) grad->setZero(theta.size());
  double total = 0.0;
  const auto& slots = space_.slots();
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const auto k = static_cast<Eigen::Index>(s);
    const double t = theta[k];
    double v = 0.0;
    double dv = 0.0;
    switch (slots[s].field) {
      case ParamField::B:
      case ParamField::D:
      case ParamField::Pw: {
        // Uniform on the bounded support (log-uniform for pw) times the logistic Jacobian.
        const double sig = logistic(t);
        v = -(log_logistic(t) + log_logistic(-t));
        dv = 2.0 * sig - 1.0;
        if (prior_ == PriorMode::Flat && slots[s].field == ParamField::Pw) {
          // Flat in pw itself: one more factor of pw from d pw / d log pw.
          const double span = std::log(kPwHi) - std::log(kPwLo);
          v -= std::log(kPwLo) + span * sig;
          dv -= span * sig * (1.0 - sig);
        }
        break;
      }
      case ParamField::Weight:
        if (space_.log_weights()) {
          const double w = std::exp(t);
          v = prior_ == PriorMode::Weakly ? 0.5 * w * w - t : -t;
          dv = prior_ == PriorMode::Weakly ? w * w - 1.0 : -1.0;
        } else if (prior_ == PriorMode::Weakly) {
          v = 0.5 * t * t;
          dv = t;
        }
        break;
    }
    total += v;
    if (grad) (*grad)[k] = dv;
  }
  require_finite(total, "prior negative log-density");
  if (grad) require_finite(*grad, "prior gradient");
  return total;
}

double PreferenceDensity::likelihood_nll(const Eigen::VectorXd& theta) const { return likelihood_impl(theta, nullptr); }

double PreferenceDensity::prior_nll(const Eigen::VectorXd& theta) const { return prior_impl(theta, nullptr); }

double PreferenceDensity::nll(const Eigen::VectorXd& theta) const {
  return likelihood_impl(theta, nullptr) + prior_impl(theta, nullptr);
}

Eigen::VectorXd PreferenceDensity::likelihood_gradient(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd g;
  likelihood_impl(theta, &g);
  return g;
}

Eigen::VectorXd PreferenceDensity::prior_gradient(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd g;
  prior_impl(theta, &g);
  return g;
}

double PreferenceDensity::nll_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
  Eigen::VectorXd gp;
  const double prior = prior_impl(theta, &gp);
  const double lik = likelihood_impl(theta, &grad);
  grad += gp;
  return lik + prior;
}

double PreferenceDensity::log_density(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
  const double v = nll_and_gradient(theta, grad);
  grad = -grad;
  return -v;
}

double negative_log_likelihood(const Eigen::VectorXd& theta, std::span<const Preference> prefs,
                               std::span<const Example> examples, const ParamSpace& space, PriorMode prior) {
  PreferenceDensity density(space, outputs_of(examples), {prefs.begin(), prefs.end()}, prior);
  return density.nll(theta);
}

Eigen::VectorXd nll_gradient(const Eigen::VectorXd& theta, std::span<const Preference> prefs,
                             std::span<const Example> examples, const ParamSpace& space, PriorMode prior) {
  PreferenceDensity density(space, outputs_of(examples), {prefs.begin(), prefs.end()}, prior);
  Eigen::VectorXd g;
  density.nll_and_gradient(theta, g);
  return g;
}

void write_preferences_csv(std::ostream& out, std::span<const Preference> prefs) {
  out << "preferred_index,dominated_index\n";
  for (const auto& p : prefs) out << p.preferred << ',' << p.dominated << '\n';
}

std::vector<Preference> read_preferences_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("preferred_index,dominated_index", 0) != 0)
    throw ConfigError("preference CSV must start with header preferred_index,dominated_index");
  std::vector<Preference> prefs;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    Preference p;
    char comma = 0;
    if (!(row >> p.preferred >> comma >> p.dominated) || comma != ',')
      throw ConfigError("malformed preference row: " + line);
    if (p.preferred == p.dominated) throw ConfigError("preference compares an example with itself: " + line);
    prefs.push_back(p);
  }
  return prefs;
}

}  // namespace ufl
