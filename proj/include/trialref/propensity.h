#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace trialref {

inline constexpr double kScoreClip = 1e-6;

struct PropensityFit {
  // Intercept first, then one coefficient per feature column (0 for constant
  // columns, which are left out of the fit).
  Eigen::VectorXd coefficients;
  std::vector<double> scores;  // P(treated | x), clipped to [1e-6, 1 - 1e-6]
  bool converged = false;
  int iterations = 0;
};

// Ridge-penalised logistic regression by IRLS. The penalty is
// ridge/2 * sum(beta_j^2) over non-intercept coefficients on the original
// feature scale. Stops when the largest coefficient change is below 1e-8 or
// after 100 iterations. A fit whose scores had to be clipped (typically
// separation) is reported as not converged.
PropensityFit fit_logistic(const Eigen::MatrixXd& features, std::span<const int> treated, double ridge = 1e-6);

double logit(double p);

class UnmatchedCohortError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 1:1 greedy nearest-neighbour matching on logit(score) without replacement.
// Treated rows are visited in a seeded random order; a pair is formed only if
// the logit distance is within caliper_sd * SD(logit scores of all rows).
// Returns (treated row, control row) pairs in visiting order.
std::vector<std::pair<std::size_t, std::size_t>> match_pairs(std::span<const double> scores,
                                                             std::span<const int> treated, double caliper_sd,
                                                             std::uint64_t seed);

enum class WeightMode { kStandardIpw, kOverlap };

struct WeightVector {
  std::vector<double> values;
  WeightMode mode = WeightMode::kOverlap;
};

// Standard IPW: 1/e for treated, 1/(1-e) for controls, capped at `cap`.
// Overlap: 1-e for treated, e for controls.
WeightVector weights(std::span<const double> scores, std::span<const int> treated, WeightMode mode,
                     double cap = 100.0);

}  // namespace trialref
