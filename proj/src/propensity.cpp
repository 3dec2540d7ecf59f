#include "trialref/propensity.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "trialref/random.h"

namespace trialref {
namespace {

double sigmoid(double eta) {
  return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

double log1p_exp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

}  // namespace

double logit(double p) { return std::log(p) - std::log1p(-p); }

PropensityFit fit_logistic(const Eigen::MatrixXd& features, std::span<const int> treated, double ridge) {
  const auto n = features.rows();
  const auto p = features.cols();
  if (static_cast<std::size_t>(n) != treated.size()) throw std::invalid_argument("fit_logistic: size mismatch");
  std::size_t n_treated = 0;
  for (int t : treated) n_treated += t != 0;
  if (n_treated == 0 || n_treated == treated.size()) {
    throw std::invalid_argument("fit_logistic: need at least one row per arm");
  }

  // Centre and scale the non-constant columns; the design is [1, Z].
  std::vector<Eigen::Index> active;
  Eigen::VectorXd mean = features.colwise().mean().transpose();
  Eigen::VectorXd scale(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double var = (features.col(j).array() - mean(j)).square().sum() / static_cast<double>(n);
    scale(j) = std::sqrt(var);
    if (scale(j) > 1e-12 * std::max(1.0, std::abs(mean(j)))) active.push_back(j);
  }
  const auto q = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd design(n, q + 1);
  design.col(0).setOnes();
  for (Eigen::Index c = 0; c < q; ++c) {
    auto j = active[static_cast<std::size_t>(c)];
    design.col(c + 1) = (features.col(j).array() - mean(j)) / scale(j);
  }
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = treated[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  // beta_orig_j = theta_j / scale_j, so the penalty on theta_j is ridge / scale_j^2.
  Eigen::VectorXd penalty = Eigen::VectorXd::Zero(q + 1);
  for (Eigen::Index c = 0; c < q; ++c) {
    double s = scale(active[static_cast<std::size_t>(c)]);
    penalty(c + 1) = ridge / (s * s);
  }

  auto objective = [&](const Eigen::VectorXd& theta) {
    Eigen::VectorXd eta = design * theta;
    double ll = 0;
    for (Eigen::Index i = 0; i < n; ++i) ll += y(i) * eta(i) - log1p_exp(eta(i));
    return ll - 0.5 * (penalty.array() * theta.array().square()).sum();
  };

  PropensityFit fit;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(q + 1);
  double current = objective(theta);
  for (fit.iterations = 1; fit.iterations <= 100; ++fit.iterations) {
    Eigen::VectorXd eta = design * theta;
    Eigen::VectorXd mu(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = sigmoid(eta(i));
      w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-300);
    }
    Eigen::VectorXd gradient = design.transpose() * (y - mu) - (penalty.array() * theta.array()).matrix();
    Eigen::MatrixXd hessian = design.transpose() * w.asDiagonal() * design;
    hessian.diagonal() += penalty;
    Eigen::LDLT<Eigen::MatrixXd> solver(hessian);
    Eigen::VectorXd step = solver.solve(gradient);
    if (!step.allFinite()) {
      Eigen::MatrixXd damped = hessian;
      damped.diagonal().array() += 1e-8 * (1.0 + hessian.diagonal().maxCoeff());
      step = damped.ldlt().solve(gradient);
    }
    double t = 1.0;
    Eigen::VectorXd next = theta + step;
    double value = objective(next);
    while (value < current - 1e-12 * std::abs(current) && t > 1e-10) {
      t *= 0.5;
      next = theta + t * step;
      value = objective(next);
    }
    double change = (next - theta).cwiseAbs().maxCoeff();
    theta = next;
    current = value;
    if (change < 1e-8) {
      fit.converged = true;
      break;
    }
  }
  fit.iterations = std::min(fit.iterations, 100);

  fit.coefficients = Eigen::VectorXd::Zero(p + 1);
  fit.coefficients(0) = theta(0);
  for (Eigen::Index c = 0; c < q; ++c) {
    auto j = active[static_cast<std::size_t>(c)];
    fit.coefficients(j + 1) = theta(c + 1) / scale(j);
    fit.coefficients(0) -= theta(c + 1) * mean(j) / scale(j);
  }
  Eigen::VectorXd eta = design * theta;
  fit.scores.resize(static_cast<std::size_t>(n));
  bool clipped = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    double e = sigmoid(eta(i));
    double c = std::clamp(e, kScoreClip, 1.0 - kScoreClip);
    clipped = clipped || c != e;
    fit.scores[static_cast<std::size_t>(i)] = c;
  }
  if (clipped) fit.converged = false;
  return fit;
}

std::vector<std::pair<std::size_t, std::size_t>> match_pairs(std::span<const double> scores,
                                                             std::span<const int> treated, double caliper_sd,
                                                             std::uint64_t seed) {
  if (scores.size() != treated.size()) throw std::invalid_argument("match_pairs: size mismatch");
  const auto n = scores.size();
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) logits[i] = logit(scores[i]);
  double mean = n ? std::accumulate(logits.begin(), logits.end(), 0.0) / static_cast<double>(n) : 0.0;
  double ss = 0;
  for (double l : logits) ss += (l - mean) * (l - mean);
  double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  double caliper = caliper_sd * sd;

  std::multimap<double, std::size_t> controls;
  std::vector<std::size_t> focal;
  for (std::size_t i = 0; i < n; ++i) {
    if (treated[i]) {
      focal.push_back(i);
    } else {
      controls.emplace(logits[i], i);
    }
  }
  auto rng = make_rng(seed, "match_order");
  std::shuffle(focal.begin(), focal.end(), rng);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (auto t : focal) {
    if (controls.empty()) break;
    auto above = controls.lower_bound(logits[t]);
    auto best = controls.end();
    double best_distance = 0;
    if (above != controls.end()) {
      best = above;
      best_distance = above->first - logits[t];
    }
    if (above != controls.begin()) {
      auto below = std::prev(above);
      // equal keys sit together; take the first of the run for determinism
      auto first_of_run = controls.lower_bound(below->first);
      double d = logits[t] - below->first;
      if (best == controls.end() || d < best_distance) {
        best = first_of_run;
        best_distance = d;
      }
    }
    if (best != controls.end() && best_distance <= caliper) {
      pairs.emplace_back(t, best->second);
      controls.erase(best);
    }
  }
  if (pairs.empty()) throw UnmatchedCohortError("propensity matching formed no pairs");
  return pairs;
}

WeightVector weights(std::span<const double> scores, std::span<const int> treated, WeightMode mode, double cap) {
  if (scores.size() != treated.size()) throw std::invalid_argument("weights: size mismatch");
  WeightVector out;
  out.mode = mode;
  out.values.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    double e = scores[i];
    if (mode == WeightMode::kOverlap) {
      out.values[i] = treated[i] ? 1.0 - e : e;
    } else {
      out.values[i] = std::min(treated[i] ? 1.0 / e : 1.0 / (1.0 - e), cap);
    }
  }
  return out;
}

}  // namespace trialref
