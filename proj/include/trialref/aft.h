#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "trialref/effect.h"

namespace trialref {

// Weibull accelerated failure time model:
//   log T = intercept + treatment_coef * treated + x' feature_coefs + scale * W
// with W standard minimum extreme value, so S(t) = exp(-exp((log t - lp) / scale)).
struct WeibullAft {
  double intercept = 0;
  double treatment_coef = 0;
  Eigen::VectorXd feature_coefs;
  double log_scale = 0;
  // Covariance of parameters() from the inverse observed information.
  Eigen::MatrixXd covariance;
  bool converged = false;
  int iterations = 0;
  double max_gradient = 0;

  // [intercept, treatment_coef, feature_coefs..., log_scale]
  Eigen::VectorXd parameters() const;
  double linear_predictor(int treated, const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  double survival(double t, double lp) const;
  // Exact integral of the survival curve on [0, tau].
  double rmst(double tau, double lp) const;
  // d rmst / d lp
  double rmst_lp_derivative(double tau, double lp) const;
};

// Times below this are raised to it before taking logs (same-day events).
inline constexpr double kAftMinTime = 0.5;

// Maximum likelihood by Newton's method with step halving. Requires at least
// 10 events; otherwise, or if the gradient max-norm at the end exceeds 1e-6,
// the model is flagged as not converged.
WeibullAft aft_fit(const Eigen::MatrixXd& features, std::span<const int> treated, std::span<const double> times,
                   std::span<const int> events);

// Mean over rows of RMST(treated=1, x) - RMST(treated=0, x) at tau. The
// standard error combines parameter uncertainty (delta method) with the
// sampling variance of the covariate average.
EffectEstimate rmst_regression(const WeibullAft& model, const Eigen::MatrixXd& features, double tau);

struct AipwResult {
  double estimate = 0;
  double std_error = 0;
  bool weights_capped = false;
};

// Augmented IPW on the restricted outcome Z = min(T, tau) with inverse
// probability of censoring weights from the Kaplan-Meier estimate of the
// censoring distribution. `m1`/`m0` are outcome-model predictions of the
// restricted mean under each arm. A row counts as observed when its event
// happened, or when follow-up reached tau. 1/G is capped at `ipcw_cap`.
AipwResult aipw_restricted_mean(std::span<const int> treated, std::span<const double> times,
                                std::span<const int> events, std::span<const double> scores,
                                std::span<const double> m1, std::span<const double> m0, double tau,
                                double ipcw_cap = 100.0);

// AIPW with the AFT model supplying m1/m0.
EffectEstimate rmst_aipw(const WeibullAft& model, const Eigen::MatrixXd& outcome_features,
                         std::span<const int> treated, std::span<const double> times, std::span<const int> events,
                         std::span<const double> scores, double tau, double ipcw_cap = 100.0);

}  // namespace trialref
