#include "ufl/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ufl/error.hpp"
#include "ufl/param_space.hpp"
#include "ufl/posterior.hpp"
#include "ufl/rng.hpp"

namespace ufl {

namespace {

constexpr double kSqrt5 = 2.23606797749978969641;
constexpr double kJitters[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

double scaled_sq_dist(const Eigen::MatrixXd& X, Eigen::Index i, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& inv_ls) {
  double r2 = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double z = (X(i, k) - x(k)) * inv_ls(k);
    r2 += z * z;
  }
  return r2;
}

struct Standardized {
  Eigen::VectorXd y;
  double shift = 0.0;
  double scale = 1.0;
};

Standardized standardize(const Eigen::VectorXd& t) {
  Standardized s;
  const double n = static_cast<double>(t.size());
  s.shift = t.mean();
  const double var = (t.array() - s.shift).square().sum() / n;
  s.scale = var > 1e-24 ? std::sqrt(var) : 1.0;
  s.y = (t.array() - s.shift) / s.scale;
  return s;
}

// Kernel matrix with noise, factorized with the smallest jitter that works.
bool factorize_kernel(const Eigen::MatrixXd& X, const GpHyper& h, Eigen::LLT<Eigen::MatrixXd>& llt, double& jitter,
                      Eigen::MatrixXd* kf_out = nullptr) {
  const Eigen::Index n = X.rows();
  const Eigen::VectorXd inv_ls = (-h.log_lengthscales.array()).exp();
  const double sf2 = std::exp(h.log_signal_var);
  const double sn2 = std::exp(h.log_noise_var);
  Eigen::MatrixXd kf(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    kf(i, i) = sf2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = matern52(scaled_sq_dist(X, i, X.row(j).transpose(), inv_ls), sf2);
      kf(i, j) = kf(j, i) = v;
    }
  }
  for (double jit : kJitters) {
    Eigen::MatrixXd k = kf;
    k.diagonal().array() += sn2 + jit;
    llt.compute(k);
    if (llt.info() == Eigen::Success) {
      jitter = jit;
      if (kf_out) *kf_out = std::move(kf);
      return true;
    }
  }
  return false;
}

// Log marginal likelihood and its gradient with respect to (log ls..., log sf2, log sn2).
double lml_and_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpHyper& h,
                        Eigen::VectorXd* grad) {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  Eigen::MatrixXd kf;
  if (!factorize_kernel(X, h, llt, jitter, &kf)) return -std::numeric_limits<double>::infinity();
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd L = llt.matrixL();
  const double lml = -0.5 * y.dot(alpha) - L.diagonal().array().log().sum() -
                     0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (!grad) return lml;

  const Eigen::MatrixXd W = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::VectorXd inv_ls = (-h.log_lengthscales.array()).exp();
  const double sf2 = std::exp(h.log_signal_var);
  grad->setZero(d + 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r = std::sqrt(scaled_sq_dist(X, i, X.row(j).transpose(), inv_ls));
      // d k / d log ls_k = sf2 (5/3) (1 + sqrt5 r) exp(-sqrt5 r) (dx_k / ls_k)^2
      const double c = W(i, j) * sf2 * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
      for (Eigen::Index k = 0; k < d; ++k) {
        const double z = (X(i, k) - X(j, k)) * inv_ls(k);
        (*grad)(k) += c * z * z;  // symmetric pair counted once, times 2 * 0.5
      }
    }
  }
  (*grad)(d) = 0.5 * (W.array() * kf.array()).sum();
  (*grad)(d + 1) = 0.5 * std::exp(h.log_noise_var) * W.trace();
  return lml;
}

struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

Box log_box(const GpConfig& c, Eigen::Index d) {
  Box b{Eigen::VectorXd(d + 2), Eigen::VectorXd(d + 2)};
  b.lo.head(d).setConstant(std::log(c.lengthscale_lo));
  b.hi.head(d).setConstant(std::log(c.lengthscale_hi));
  b.lo(d) = std::log(c.signal_var_lo);
  b.hi(d) = std::log(c.signal_var_hi);
  b.lo(d + 1) = std::log(c.noise_var_lo);
  b.hi(d + 1) = std::log(c.noise_var_hi);
  return b;
}

GpHyper unpack(const Eigen::VectorXd& v) {
  const Eigen::Index d = v.size() - 2;
  return GpHyper{v.head(d), v(d), v(d + 1)};
}

Eigen::VectorXd pack(const GpHyper& h) {
  const Eigen::Index d = h.log_lengthscales.size();
  Eigen::VectorXd v(d + 2);
  v.head(d) = h.log_lengthscales;
  v(d) = h.log_signal_var;
  v(d + 1) = h.log_noise_var;
  return v;
}

}  // namespace

double matern52(double r2, double signal_var) {
  const double r = std::sqrt(r2);
  return signal_var * (1.0 + kSqrt5 * r + (5.0 / 3.0) * r2) * std::exp(-kSqrt5 * r);
}

GpModel::GpModel(Eigen::MatrixXd X, Eigen::VectorXd targets, GpHyper hyper)
    : X_(std::move(X)), targets_(std::move(targets)), hyper_(std::move(hyper)) {
  if (X_.rows() < 1 || X_.rows() != targets_.size()) throw DimensionMismatchError("GP needs matching inputs and targets");
  if (hyper_.log_lengthscales.size() != X_.cols()) throw DimensionMismatchError("GP length-scale count mismatch");
  factorize();
}

void GpModel::factorize() {
  const Standardized s = standardize(targets_);
  shift_ = s.shift;
  scale_ = s.scale;
  if (!factorize_kernel(X_, hyper_, llt_, jitter_)) throw FactorizationError("GP kernel matrix is not positive definite");
  alpha_ = llt_.solve(s.y);
  lml_ = lml_and_gradient(X_, s.y, hyper_, nullptr);
}

GpModel GpModel::fit(Eigen::MatrixXd X, Eigen::VectorXd targets, const GpConfig& config, std::uint64_t seed,
                     const std::optional<GpHyper>& warm_start) {
  if (X.rows() < 2) throw std::invalid_argument("gp_fit needs at least two points");
  if (X.rows() != targets.size()) throw DimensionMismatchError("GP needs matching inputs and targets");
  const Eigen::Index d = X.cols();
  const Eigen::VectorXd y = standardize(targets).y;
  const Box box = log_box(config, d);
  const Eigen::VectorXd width = box.hi - box.lo;

  // Optimize over z with log-hyperparameter = lo + width * logistic(z).
  auto to_log = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd v(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) v(k) = box.lo(k) + width(k) * logistic(z(k));
    return v;
  };
  auto to_z = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd z(v.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const double u = std::clamp((v(k) - box.lo(k)) / width(k), 1e-6, 1.0 - 1e-6);
      z(k) = logit(u);
    }
    return z;
  };
  const NllFn objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd& g) {
    const Eigen::VectorXd v = to_log(z);
    Eigen::VectorXd gv;
    const double lml = lml_and_gradient(X, y, unpack(v), &gv);
    g.resize(z.size());
    if (!std::isfinite(lml)) {
      g.setZero();
      return std::numeric_limits<double>::infinity();
    }
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      const double s = logistic(z(k));
      g(k) = -gv(k) * width(k) * s * (1.0 - s);
    }
    return -lml;
  };

  GpHyper first;
  if (warm_start) {
    first = *warm_start;
  } else {
    first.log_lengthscales = Eigen::VectorXd::Constant(d, std::log(0.5));
    first.log_signal_var = 0.0;
    first.log_noise_var = std::log(1e-6);
  }
  Rng rng(seed);
  Eigen::VectorXd best_v = pack(first);
  double best_f = std::numeric_limits<double>::infinity();
  const DescentOptions options{config.max_steps, 1e-5};
  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    Eigen::VectorXd z0;
    if (r == 0) {
      z0 = to_z(pack(first));
    } else {
      z0.resize(d + 2);
      for (Eigen::Index k = 0; k < z0.size(); ++k) z0(k) = uniform(rng, -2.0, 2.0);
    }
    Eigen::VectorXd g0;
    if (!std::isfinite(objective(z0, g0))) continue;
    const MaxEstimate est = minimize_descent(objective, z0, options);
    if (est.nll < best_f) {
      best_f = est.nll;
      best_v = to_log(est.theta);
    }
  }
  return GpModel(std::move(X), std::move(targets), unpack(best_v));
}

GpPrediction GpModel::predict(const Eigen::VectorXd& x) const {
  if (x.size() != X_.cols()) throw DimensionMismatchError("GP query has wrong dimensionality");
  const Eigen::VectorXd inv_ls = (-hyper_.log_lengthscales.array()).exp();
  const double sf2 = std::exp(hyper_.log_signal_var);
  const Eigen::Index n = X_.rows();
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) k(i) = matern52(scaled_sq_dist(X_, i, x, inv_ls), sf2);
  const Eigen::VectorXd v = llt_.matrixL().solve(k);
  GpPrediction out;
  out.mean = shift_ + scale_ * k.dot(alpha_);
  out.variance = std::max(0.0, sf2 - v.squaredNorm()) * scale_ * scale_;
  return out;
}

double expected_improvement(double mean, double variance, double best) {
  const double improvement = mean - best;
  if (!(variance > 1e-20)) return std::max(0.0, improvement);
  const double sd = std::sqrt(variance);
  const double z = improvement / sd;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return std::max(0.0, improvement * cdf + sd * pdf);
}

double acquisition_ei(const GpModel& model, const Eigen::VectorXd& x, double best) {
  const GpPrediction p = model.predict(x);
  return expected_improvement(p.mean, p.variance, best);
}

}  // namespace ufl
