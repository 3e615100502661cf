#include "ufl/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ufl/error.hpp"

namespace ufl {

MaxEstimate minimize_descent(const NllFn& objective, Eigen::VectorXd start, const DescentOptions& options) {
  constexpr double kArmijo = 1e-4;
  MaxEstimate out;
  Eigen::VectorXd grad;
  double f = objective(start, grad);
  out.start_nll = f;
  double step = 1.0 / std::max(1.0, grad.norm());
  Eigen::VectorXd prev_x;
  Eigen::VectorXd prev_g;
  int k = 0;
  for (; k < options.max_steps; ++k) {
    if (grad.norm() < options.gradient_tolerance) {
      out.converged = true;
      break;
    }
    if (k > 0) {
      const Eigen::VectorXd s = start - prev_x;
      const Eigen::VectorXd y = grad - prev_g;
      const double sy = s.dot(y);
      if (sy > 0.0) step = std::clamp(s.squaredNorm() / sy, 1e-10, 1e6);
    }
    const double g2 = grad.squaredNorm();
    Eigen::VectorXd next;
    Eigen::VectorXd next_grad;
    double next_f = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      next = start - step * grad;
      next_f = objective(next, next_grad);
      if (std::isfinite(next_f) && next_f <= f - kArmijo * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    prev_x = std::move(start);
    prev_g = std::move(grad);
    start = std::move(next);
    grad = std::move(next_grad);
    f = next_f;
  }
  if (!out.converged && grad.norm() < options.gradient_tolerance) out.converged = true;
  out.theta = std::move(start);
  out.nll = f;
  out.steps = k;
  return out;
}

MaxEstimate estimate_max(const PosteriorSamples& posterior, const NllFn& objective, const DescentOptions& options) {
  if (posterior.empty()) throw EmptyPosteriorError("estimate_max needs at least one posterior draw");
  std::size_t best = 0;
  double best_f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd g;
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    const double f = objective(posterior.samples[i], g);
    if (f < best_f) {
      best_f = f;
      best = i;
    }
  }
  return minimize_descent(objective, posterior.samples[best], options);
}

UtilitySpec estimate_max(const PosteriorSamples& posterior, const PreferenceDensity& density, MaxEstimate* details) {
  if (posterior.empty()) throw EmptyPosteriorError("estimate_max needs at least one posterior draw");
  // Ranking the pool only needs values; gradients are computed for the refinement.
  std::size_t best = 0;
  double best_f = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    const double f = density.nll(posterior.samples[i]);
    if (f < best_f) {
      best_f = f;
      best = i;
    }
  }
  const NllFn objective = [&](const Eigen::VectorXd& t, Eigen::VectorXd& grad) {
    return density.nll_and_gradient(t, grad);
  };
  MaxEstimate est = minimize_descent(objective, posterior.samples[best]);
  UtilitySpec spec = density.space().decode_for_use(est.theta);
  if (details) *details = std::move(est);
  return spec;
}

UtilitySpec estimate_mean(const PosteriorSamples& posterior, const ParamSpace& space, MeanSpace where) {
  if (posterior.empty()) throw EmptyPosteriorError("estimate_mean needs at least one posterior draw");
  const double n = static_cast<double>(posterior.size());
  if (where == MeanSpace::Unconstrained) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.dim()));
    for (const auto& s : posterior.samples) mean += s;
    return space.decode_for_use(mean / n);
  }
  UtilitySpec mean = space.template_spec();
  for (auto& t : mean.terms) t.b = t.d = t.pw = 0.0;
  std::fill(mean.weights.begin(), mean.weights.end(), 0.0);
  for (const auto& s : posterior.samples) {
    const UtilitySpec spec = space.decode(s);
    for (std::size_t i = 0; i < mean.terms.size(); ++i) {
      mean.terms[i].b += spec.terms[i].b / n;
      mean.terms[i].d += spec.terms[i].d / n;
      mean.terms[i].pw += spec.terms[i].pw / n;
    }
    for (std::size_t i = 0; i < mean.weights.size(); ++i) mean.weights[i] += spec.weights[i] / n;
  }
  // Convex combinations stay inside the supports up to rounding.
  for (auto& t : mean.terms) {
    t.b = std::clamp(t.b, 0.0, 1.0);
    t.d = std::clamp(t.d, kDFloor, 1.0);
    t.pw = std::clamp(t.pw, kPwLo, kPwHi);
  }
  return mean.interpretable() ? normalize_weights(mean) : mean;
}

PosteriorSamples estimate_dist(const PosteriorSamples& posterior, std::size_t k, std::uint64_t seed) {
  if (posterior.empty()) throw EmptyPosteriorError("estimate_dist needs at least one posterior draw");
  if (k == 0) throw std::invalid_argument("estimate_dist needs k >= 1");
  Rng rng(seed);
  const std::size_t n = posterior.size();
  std::vector<std::size_t> picks;
  if (k <= n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
    picks.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    picks.resize(k);
    for (auto& p : picks) p = uniform_index(rng, n);
  }
  PosteriorSamples out;
  out.samples.reserve(k);
  out.chain_ids.reserve(k);
  for (std::size_t i : picks) {
    out.samples.push_back(posterior.samples[i]);
    out.chain_ids.push_back(posterior.chain_ids[i]);
  }
  return out;
}

double posterior_mean_utility(const PosteriorSamples& posterior, const ParamSpace& space, std::span<const double> y) {
  if (posterior.empty()) throw EmptyPosteriorError("posterior_mean_utility needs at least one posterior draw");
  double total = 0.0;
  for (const auto& s : posterior.samples) total += eval_aggregate(space.decode_for_use(s), y);
  return total / static_cast<double>(posterior.size());
}

PosteriorUtility::PosteriorUtility(const PosteriorSamples& posterior, const ParamSpace& space) {
  if (posterior.empty()) throw EmptyPosteriorError("posterior utility needs at least one draw");
  specs_.reserve(posterior.size());
  for (const auto& s : posterior.samples) specs_.push_back(space.decode_for_use(s));
  flatten();
}

PosteriorUtility::PosteriorUtility(std::vector<UtilitySpec> specs) : specs_(std::move(specs)) {
  if (specs_.empty()) throw EmptyPosteriorError("posterior utility needs at least one draw");
  for (const auto& s : specs_) validate(s);
  flatten();
}

void PosteriorUtility::flatten() {
  n_out_ = specs_.front().output_dim();
  linear_ = specs_.front().space_kind == SpaceKind::Linear;
  const std::size_t total = specs_.size() * n_out_;
  for (auto* v : {&weight_, &lo_, &inv_span_, &b_, &inv_d_, &pw_}) v->reserve(total);
  m_.reserve(total);
  for (const auto& s : specs_) {
    if (s.output_dim() != n_out_ || (s.space_kind == SpaceKind::Linear) != linear_)
      throw DimensionMismatchError("posterior utility mixes incompatible specs");
    for (std::size_t i = 0; i < n_out_; ++i) {
      weight_.push_back(s.weights[i]);
      if (linear_) {
        lo_.push_back(s.linear_bounds[i].lo);
        inv_span_.push_back(1.0 / s.linear_bounds[i].width());
        b_.push_back(0.0);
        inv_d_.push_back(1.0);
        pw_.push_back(1.0);
        m_.push_back(1);
      } else {
        const auto& t = s.terms[i];
        lo_.push_back(t.y_min);
        inv_span_.push_back(1.0 / (t.y_max - t.y_min));
        b_.push_back(t.b);
        inv_d_.push_back(1.0 / t.d);
        pw_.push_back(t.pw);
        m_.push_back(t.m);
      }
    }
  }
}

double PosteriorUtility::operator()(std::span<const double> y) const {
  if (y.size() != n_out_) throw DimensionMismatchError("output vector does not match utility dimensionality");
  double total = 0.0;
  const std::size_t n = specs_.size();
  for (std::size_t k = 0, j = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n_out_; ++i, ++j) {
      double s = std::clamp((y[i] - lo_[j]) * inv_span_[j], 0.0, 1.0);
      if (!linear_) {
        if (m_[j] == -1) s = 1.0 - s;
        const double z = std::clamp((s - b_[j]) * inv_d_[j], 0.0, 1.0);
        s = pw_[j] == 1.0 ? z : std::pow(z, pw_[j]);
      }
      total += weight_[j] * s;
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace ufl
