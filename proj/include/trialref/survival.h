#pragma once

#include <optional>
#include <span>
#include <vector>

namespace trialref {

struct CoxFit {
  double beta = 0;  // log hazard ratio, treated vs control
  double se_model = 0;
  double se_robust = 0;
  double score = 0;  // partial-likelihood score at beta
  double information = 0;
  bool converged = false;
  int iterations = 0;
};

// Weighted Cox partial likelihood with one binary covariate and Breslow ties.
// Newton-Raphson from 0 (tolerance 1e-8, at most 50 iterations). `weights`
// may be empty for unit weights. When one arm has no events the fit is not
// converged and beta is +/-infinity.
CoxFit cox_fit(std::span<const double> times, std::span<const int> events, std::span<const int> treated,
               std::span<const double> weights = {});

// Right-continuous step function: value[i] holds on [time[i], time[i+1]).
// Starts at (0, 1). Weighted risk-set sizes and event counts are kept per knot
// for variance calculations.
struct SurvivalCurve {
  std::vector<double> times{0.0};
  std::vector<double> values{1.0};
  std::vector<double> at_risk{0.0};
  std::vector<double> events{0.0};

  double at(double t) const;
  // Left limit S(t-).
  double before(double t) const;
};

SurvivalCurve km_curve(std::span<const double> times, std::span<const int> events,
                       std::span<const double> weights = {});

// Integral of the curve over [0, tau]; beyond the last knot the last value is
// held.
double rmst(const SurvivalCurve& curve, double tau);

// Greenwood-type variance of rmst(curve, tau), using the weighted counts.
double rmst_variance(const SurvivalCurve& curve, double tau);

// Nearest-rank 80th percentile of observed event times; empty if no events.
std::optional<double> restriction_horizon(std::span<const double> times, std::span<const int> events,
                                          double quantile = 0.8);

}  // namespace trialref
