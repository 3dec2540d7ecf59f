#include "trialref/aft.h"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "trialref/survival.h"

namespace trialref {
namespace {

struct Standardized {
  std::vector<Eigen::Index> active;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  Eigen::MatrixXd design;  // [1, treated, z_active...]
};

Standardized standardize(const Eigen::MatrixXd& features, std::span<const int> treated) {
  Standardized s;
  const auto n = features.rows();
  const auto p = features.cols();
  s.mean = p > 0 ? Eigen::VectorXd(features.colwise().mean().transpose()) : Eigen::VectorXd(0);
  s.scale = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    s.scale(j) = std::sqrt((features.col(j).array() - s.mean(j)).square().sum() / static_cast<double>(n));
    if (s.scale(j) > 1e-12 * std::max(1.0, std::abs(s.mean(j)))) s.active.push_back(j);
  }
  const auto q = static_cast<Eigen::Index>(s.active.size());
  s.design.resize(n, q + 2);
  s.design.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) s.design(i, 1) = treated[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  for (Eigen::Index c = 0; c < q; ++c) {
    auto j = s.active[static_cast<std::size_t>(c)];
    s.design.col(c + 2) = (features.col(j).array() - s.mean(j)) / s.scale(j);
  }
  return s;
}

struct Derivatives {
  double loglik = 0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

// Parameters: [theta (design columns)..., log_scale].
Derivatives evaluate(const Eigen::MatrixXd& design, const std::vector<double>& log_times,
                     std::span<const int> events, const Eigen::VectorXd& params, bool second_order) {
  const auto k = design.cols();
  const double s = params(k);
  const double sigma = std::exp(s);
  Derivatives d;
  d.gradient = Eigen::VectorXd::Zero(k + 1);
  if (second_order) d.hessian = Eigen::MatrixXd::Zero(k + 1, k + 1);
  Eigen::VectorXd lp = design * params.head(k);
  Eigen::VectorXd coef_theta(design.rows());
  Eigen::VectorXd cross(design.rows());
  double g_s = 0, h_ss = 0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    const double delta = events[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    const double w = (log_times[static_cast<std::size_t>(i)] - lp(i)) / sigma;
    const double ew = std::exp(w);
    d.loglik += delta * (-s - log_times[static_cast<std::size_t>(i)] + w) - ew;
    coef_theta(i) = (ew - delta) / sigma;
    g_s += -delta - w * (delta - ew);
    if (second_order) {
      cross(i) = (delta - ew - w * ew) / sigma;
      h_ss += delta * w - w * ew - w * w * ew;
    }
  }
  d.gradient.head(k) = design.transpose() * coef_theta;
  d.gradient(k) = g_s;
  if (second_order) {
    Eigen::VectorXd hw(design.rows());
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
      double w = (log_times[static_cast<std::size_t>(i)] - lp(i)) / sigma;
      hw(i) = std::exp(w) / (sigma * sigma);
    }
    d.hessian.topLeftCorner(k, k) = -(design.transpose() * hw.asDiagonal() * design);
    Eigen::VectorXd h_theta_s = design.transpose() * cross;
    d.hessian.block(0, k, k, 1) = h_theta_s;
    d.hessian.block(k, 0, 1, k) = h_theta_s.transpose();
    d.hessian(k, k) = h_ss;
  }
  return d;
}

}  // namespace

Eigen::VectorXd WeibullAft::parameters() const {
  Eigen::VectorXd p(feature_coefs.size() + 3);
  p(0) = intercept;
  p(1) = treatment_coef;
  p.segment(2, feature_coefs.size()) = feature_coefs;
  p(p.size() - 1) = log_scale;
  return p;
}

double WeibullAft::linear_predictor(int treated, const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  double lp = intercept + (treated ? treatment_coef : 0.0);
  if (feature_coefs.size() > 0) lp += x.dot(feature_coefs);
  return lp;
}

double WeibullAft::survival(double t, double lp) const {
  if (t <= 0) return 1.0;
  return std::exp(-std::exp((std::log(t) - lp) / std::exp(log_scale)));
}

double WeibullAft::rmst(double tau, double lp) const {
  if (tau <= 0) return 0.0;
  const double shape = std::exp(-log_scale);
  const double x = std::exp(shape * (std::log(tau) - lp));
  if (x == 0.0) return tau;
  const double lambda = std::exp(lp);
  return lambda * std::tgamma(1.0 + 1.0 / shape) * boost::math::gamma_p(1.0 / shape, x);
}

double WeibullAft::rmst_lp_derivative(double tau, double lp) const {
  if (tau <= 0) return 0.0;
  const double shape = std::exp(-log_scale);
  const double x = std::exp(shape * (std::log(tau) - lp));
  if (x == 0.0) return 0.0;
  const double lambda = std::exp(lp);
  return lambda * std::tgamma(1.0 + 1.0 / shape) * boost::math::gamma_p(1.0 + 1.0 / shape, x);
}

WeibullAft aft_fit(const Eigen::MatrixXd& features, std::span<const int> treated, std::span<const double> times,
                   std::span<const int> events) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (treated.size() != n || times.size() != n || events.size() != n) {
    throw std::invalid_argument("aft_fit: size mismatch");
  }
  WeibullAft model;
  model.feature_coefs = Eigen::VectorXd::Zero(features.cols());
  std::size_t n_events = 0;
  double total_time = 0;
  std::vector<double> log_times(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = std::max(times[i], kAftMinTime);
    log_times[i] = std::log(t);
    total_time += t;
    n_events += events[i] ? 1 : 0;
  }
  if (n_events < 10) {
    model.converged = false;
    return model;
  }

  auto st = standardize(features, treated);
  const auto k = st.design.cols();
  Eigen::VectorXd params = Eigen::VectorXd::Zero(k + 1);
  params(0) = std::log(total_time / static_cast<double>(n_events));

  auto current = evaluate(st.design, log_times, events, params, true);
  for (model.iterations = 1; model.iterations <= 200; ++model.iterations) {
    Eigen::MatrixXd neg_h = -current.hessian;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_h);
    Eigen::VectorXd step;
    double damping = 0;
    while (true) {
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        step = ldlt.solve(current.gradient);
        if (step.allFinite()) break;
      }
      damping = damping == 0 ? 1e-8 * (1.0 + neg_h.diagonal().cwiseAbs().maxCoeff()) : damping * 10;
      Eigen::MatrixXd damped = neg_h;
      damped.diagonal().array() += damping;
      ldlt.compute(damped);
    }
    double t = 1.0;
    Eigen::VectorXd next = params + step;
    auto trial = evaluate(st.design, log_times, events, next, true);
    while ((!std::isfinite(trial.loglik) || trial.loglik < current.loglik - 1e-12 * std::abs(current.loglik)) &&
           t > 1e-12) {
      t *= 0.5;
      next = params + t * step;
      trial = evaluate(st.design, log_times, events, next, true);
    }
    double change = (next - params).cwiseAbs().maxCoeff();
    params = next;
    current = std::move(trial);
    if (change < 1e-10 || current.gradient.cwiseAbs().maxCoeff() < 1e-10) break;
  }
  model.iterations = std::min(model.iterations, 200);

  // Back to the original feature scale.
  const auto p = features.cols();
  const auto q = static_cast<Eigen::Index>(st.active.size());
  Eigen::MatrixXd jacobian = Eigen::MatrixXd::Zero(p + 3, k + 1);
  jacobian(0, 0) = 1.0;
  jacobian(1, 1) = 1.0;
  jacobian(p + 2, k) = 1.0;
  model.intercept = params(0);
  model.treatment_coef = params(1);
  for (Eigen::Index c = 0; c < q; ++c) {
    auto j = st.active[static_cast<std::size_t>(c)];
    model.feature_coefs(j) = params(c + 2) / st.scale(j);
    model.intercept -= params(c + 2) * st.mean(j) / st.scale(j);
    jacobian(j + 2, c + 2) = 1.0 / st.scale(j);
    jacobian(0, c + 2) = -st.mean(j) / st.scale(j);
  }
  model.log_scale = params(k);

  Eigen::MatrixXd neg_h = -current.hessian;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_h);
  Eigen::MatrixXd cov_std = ldlt.solve(Eigen::MatrixXd::Identity(k + 1, k + 1));
  model.covariance = jacobian * cov_std * jacobian.transpose();

  // Gradient on the original scale, over all feature columns.
  Eigen::MatrixXd original(static_cast<Eigen::Index>(n), p + 2);
  original.col(0).setOnes();
  original.col(1) = st.design.col(1);
  if (p > 0) original.rightCols(p) = features;
  Eigen::VectorXd original_params(p + 3);
  original_params << model.intercept, model.treatment_coef, model.feature_coefs, model.log_scale;
  auto check = evaluate(original, log_times, events, original_params, false);
  model.max_gradient = check.gradient.cwiseAbs().maxCoeff();
  model.converged = std::isfinite(check.loglik) && model.max_gradient < 1e-6;
  return model;
}

EffectEstimate rmst_regression(const WeibullAft& model, const Eigen::MatrixXd& features, double tau) {
  EffectEstimate est;
  est.scale = EffectScale::kRmstDifferenceDays;
  est.n_used = static_cast<std::size_t>(features.rows());
  if (!model.converged || features.rows() == 0 || !(tau > 0)) {
    est.converged = false;
    est.point = std::numeric_limits<double>::quiet_NaN();
    est.note = !model.converged ? "aft_not_converged" : "invalid_horizon";
    return est;
  }
  const auto n = features.rows();
  const auto p = features.cols();
  std::vector<double> diffs(static_cast<std::size_t>(n));
  // d estimate / d [intercept, treatment, features..., log_scale]
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p + 3);
  const double h = 1e-6;
  WeibullAft up = model, down = model;
  up.log_scale += h;
  down.log_scale -= h;
  double sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto x = features.row(i);
    double lp1 = model.linear_predictor(1, x), lp0 = model.linear_predictor(0, x);
    double diff = model.rmst(tau, lp1) - model.rmst(tau, lp0);
    diffs[static_cast<std::size_t>(i)] = diff;
    sum += diff;
    double d1 = model.rmst_lp_derivative(tau, lp1), d0 = model.rmst_lp_derivative(tau, lp0);
    grad(0) += d1 - d0;
    grad(1) += d1;
    if (p > 0) grad.segment(2, p) += (d1 - d0) * x.transpose();
    grad(p + 2) += ((up.rmst(tau, lp1) - up.rmst(tau, lp0)) - (down.rmst(tau, lp1) - down.rmst(tau, lp0))) / (2 * h);
  }
  const double nd = static_cast<double>(n);
  est.point = sum / nd;
  grad /= nd;
  double ss = 0;
  for (double d : diffs) ss += (d - est.point) * (d - est.point);
  double param_var = grad.dot(model.covariance * grad);
  double sample_var = n > 1 ? ss / (nd - 1) / nd : 0.0;
  est.std_error = std::sqrt(std::max(0.0, param_var) + sample_var);
  est.std_error_model = std::sqrt(std::max(0.0, param_var));
  est.converged = std::isfinite(est.point);
  return est;
}

AipwResult aipw_restricted_mean(std::span<const int> treated, std::span<const double> times,
                                std::span<const int> events, std::span<const double> scores,
                                std::span<const double> m1, std::span<const double> m0, double tau,
                                double ipcw_cap) {
  const auto n = times.size();
  if (treated.size() != n || events.size() != n || scores.size() != n || m1.size() != n || m0.size() != n) {
    throw std::invalid_argument("aipw: size mismatch");
  }
  // Censoring distribution: a censored row is an "event" for G.
  std::vector<int> censored(n);
  for (std::size_t i = 0; i < n; ++i) censored[i] = events[i] ? 0 : 1;
  auto g = km_curve(times, censored);

  AipwResult result;
  std::vector<double> psi(n);
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double z = std::min(times[i], tau);
    bool observed = events[i] || times[i] >= tau;
    double contribution = m1[i] - m0[i];
    if (observed) {
      double g_minus = g.before(z);
      double inv_g = g_minus > 0 ? 1.0 / g_minus : ipcw_cap;
      if (inv_g > ipcw_cap) {
        inv_g = ipcw_cap;
        result.weights_capped = true;
      }
      double e = scores[i];
      double residual = treated[i] ? (z - m1[i]) / e : -(z - m0[i]) / (1.0 - e);
      contribution += inv_g * residual;
    }
    psi[i] = contribution;
    sum += contribution;
  }
  const double nd = static_cast<double>(n);
  result.estimate = sum / nd;
  double ss = 0;
  for (double v : psi) ss += (v - result.estimate) * (v - result.estimate);
  result.std_error = n > 1 ? std::sqrt(ss / (nd - 1) / nd) : 0.0;
  return result;
}

EffectEstimate rmst_aipw(const WeibullAft& model, const Eigen::MatrixXd& outcome_features,
                         std::span<const int> treated, std::span<const double> times, std::span<const int> events,
                         std::span<const double> scores, double tau, double ipcw_cap) {
  EffectEstimate est;
  est.scale = EffectScale::kRmstDifferenceDays;
  est.n_used = times.size();
  if (!model.converged || !(tau > 0)) {
    est.converged = false;
    est.point = std::numeric_limits<double>::quiet_NaN();
    est.note = !model.converged ? "aft_not_converged" : "invalid_horizon";
    return est;
  }
  const auto n = static_cast<std::size_t>(outcome_features.rows());
  std::vector<double> m1(n), m0(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = outcome_features.row(static_cast<Eigen::Index>(i));
    m1[i] = model.rmst(tau, model.linear_predictor(1, x));
    m0[i] = model.rmst(tau, model.linear_predictor(0, x));
  }
  auto r = aipw_restricted_mean(treated, times, events, scores, m1, m0, tau, ipcw_cap);
  est.point = r.estimate;
  est.std_error = r.std_error;
  est.std_error_model = r.std_error;
  est.converged = std::isfinite(r.estimate);
  if (r.weights_capped) est.note = "ipcw_weights_capped";
  return est;
}

}  // namespace trialref
