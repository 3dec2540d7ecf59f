#include "trialref/survival.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace trialref {
namespace {

struct EventTime {
  double time;
  double s0;
  double zbar;
  double weighted_events;
};

struct PartialLikelihood {
  double loglik = 0;
  double score = 0;
  double information = 0;
  std::vector<EventTime> event_times;  // ascending
};

class CoxData {
 public:
  CoxData(std::span<const double> times, std::span<const int> events, std::span<const int> treated,
          std::span<const double> weights)
      : times_(times), events_(events), treated_(treated), weights_(weights) {
    order_.resize(times.size());
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t x, std::size_t y) { return times[x] > times[y]; });
  }

  double w(std::size_t i) const { return weights_.empty() ? 1.0 : weights_[i]; }

  PartialLikelihood evaluate(double beta, bool keep_event_times) const {
    PartialLikelihood out;
    const double risk_treated = std::exp(beta);
    double s0 = 0, s1 = 0;
    std::size_t pos = 0;
    const auto n = order_.size();
    while (pos < n) {
      double t = times_[order_[pos]];
      double d_w = 0, dz_w = 0;
      std::size_t end = pos;
      while (end < n && times_[order_[end]] == t) {
        auto i = order_[end];
        double wi = w(i);
        if (treated_[i]) {
          s0 += wi * risk_treated;
          s1 += wi * risk_treated;
        } else {
          s0 += wi;
        }
        if (events_[i]) {
          d_w += wi;
          if (treated_[i]) dz_w += wi;
        }
        ++end;
      }
      if (d_w > 0) {
        double zbar = s1 / s0;
        out.loglik += beta * dz_w - d_w * std::log(s0);
        out.score += dz_w - d_w * zbar;
        out.information += d_w * zbar * (1.0 - zbar);
        if (keep_event_times) out.event_times.push_back({t, s0, zbar, d_w});
      }
      pos = end;
    }
    std::reverse(out.event_times.begin(), out.event_times.end());
    return out;
  }

  // Per-row score residuals for the sandwich variance.
  double robust_variance(double beta, const PartialLikelihood& pl) const {
    const auto& et = pl.event_times;
    // prefix sums over event times in ascending order
    std::vector<double> cum_a(et.size()), cum_b(et.size());
    double a = 0, b = 0;
    for (std::size_t j = 0; j < et.size(); ++j) {
      a += et[j].weighted_events / et[j].s0;
      b += et[j].weighted_events * et[j].zbar / et[j].s0;
      cum_a[j] = a;
      cum_b[j] = b;
    }
    double meat = 0;
    for (std::size_t i = 0; i < times_.size(); ++i) {
      double z = treated_[i] ? 1.0 : 0.0;
      double risk = treated_[i] ? std::exp(beta) : 1.0;
      // last event time <= t_i
      auto it = std::upper_bound(et.begin(), et.end(), times_[i],
                                 [](double t, const EventTime& e) { return t < e.time; });
      double residual = 0;
      if (it != et.begin()) {
        auto j = static_cast<std::size_t>(std::distance(et.begin(), it) - 1);
        residual -= risk * (z * cum_a[j] - cum_b[j]);
        if (events_[i] && et[j].time == times_[i]) residual += z - et[j].zbar;
      }
      double wi = w(i);
      meat += wi * wi * residual * residual;
    }
    return meat / (pl.information * pl.information);
  }

 private:
  std::span<const double> times_;
  std::span<const int> events_;
  std::span<const int> treated_;
  std::span<const double> weights_;
  std::vector<std::size_t> order_;
};

}  // namespace

CoxFit cox_fit(std::span<const double> times, std::span<const int> events, std::span<const int> treated,
               std::span<const double> weights) {
  const auto n = times.size();
  if (events.size() != n || treated.size() != n || (!weights.empty() && weights.size() != n)) {
    throw std::invalid_argument("cox_fit: size mismatch");
  }
  CoxFit fit;
  double events_treated = 0, events_control = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double wi = weights.empty() ? 1.0 : weights[i];
    if (events[i] && wi > 0) (treated[i] ? events_treated : events_control) += wi;
  }
  if (events_treated == 0 || events_control == 0) {
    fit.converged = false;
    fit.beta = events_treated == 0 && events_control == 0 ? std::numeric_limits<double>::quiet_NaN()
               : events_treated == 0                       ? -std::numeric_limits<double>::infinity()
                                                           : std::numeric_limits<double>::infinity();
    fit.se_model = fit.se_robust = std::numeric_limits<double>::infinity();
    return fit;
  }

  CoxData data(times, events, treated, weights);
  double beta = 0;
  auto current = data.evaluate(beta, false);
  bool small_step = false;
  for (fit.iterations = 1; fit.iterations <= 50; ++fit.iterations) {
    if (current.information <= 0) break;
    double step = current.score / current.information;
    double next_beta = beta + step;
    auto next = data.evaluate(next_beta, false);
    int halvings = 0;
    while ((!std::isfinite(next.loglik) || next.loglik < current.loglik - 1e-12 * std::abs(current.loglik)) &&
           halvings < 40) {
      step *= 0.5;
      next_beta = beta + step;
      next = data.evaluate(next_beta, false);
      ++halvings;
    }
    beta = next_beta;
    current = std::move(next);
    if (std::abs(step) < 1e-8) {
      // one extra step once inside the tolerance pins the score to rounding level
      if (small_step) break;
      small_step = true;
    }
  }
  fit.converged = small_step && fit.iterations <= 50;
  fit.iterations = std::min(fit.iterations, 50);
  auto final_pl = data.evaluate(beta, true);
  fit.beta = beta;
  fit.score = final_pl.score;
  fit.information = final_pl.information;
  fit.se_model = final_pl.information > 0 ? 1.0 / std::sqrt(final_pl.information)
                                          : std::numeric_limits<double>::infinity();
  fit.se_robust = final_pl.information > 0 ? std::sqrt(data.robust_variance(beta, final_pl))
                                           : std::numeric_limits<double>::infinity();
  return fit;
}

double SurvivalCurve::at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return values[static_cast<std::size_t>(std::distance(times.begin(), it) - 1)];
}

double SurvivalCurve::before(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return values[static_cast<std::size_t>(std::distance(times.begin(), it) - 1)];
}

SurvivalCurve km_curve(std::span<const double> times, std::span<const int> events, std::span<const double> weights) {
  const auto n = times.size();
  if (events.size() != n || (!weights.empty() && weights.size() != n)) {
    throw std::invalid_argument("km_curve: size mismatch");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return times[x] < times[y]; });
  double at_risk = 0;
  for (std::size_t i = 0; i < n; ++i) at_risk += weights.empty() ? 1.0 : weights[i];

  SurvivalCurve curve;
  double surv = 1.0;
  std::size_t pos = 0;
  while (pos < n) {
    double t = times[order[pos]];
    double d = 0, leaving = 0;
    while (pos < n && times[order[pos]] == t) {
      auto i = order[pos];
      double wi = weights.empty() ? 1.0 : weights[i];
      if (events[i]) d += wi;
      leaving += wi;
      ++pos;
    }
    if (d > 0 && at_risk > 0) {
      surv *= std::max(0.0, 1.0 - d / at_risk);
      if (t <= 0.0) {
        curve.values[0] = surv;
        curve.at_risk[0] = at_risk;
        curve.events[0] = d;
      } else {
        curve.times.push_back(t);
        curve.values.push_back(surv);
        curve.at_risk.push_back(at_risk);
        curve.events.push_back(d);
      }
    }
    at_risk -= leaving;
  }
  return curve;
}

double rmst(const SurvivalCurve& curve, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("rmst: tau must be positive");
  double area = 0;
  for (std::size_t k = 0; k < curve.times.size(); ++k) {
    double start = curve.times[k];
    if (start >= tau) break;
    double end = k + 1 < curve.times.size() ? std::min(curve.times[k + 1], tau) : tau;
    area += curve.values[k] * (end - start);
  }
  return area;
}

double rmst_variance(const SurvivalCurve& curve, double tau) {
  // tail[k]: area under the curve from times[k] to tau
  const auto size = curve.times.size();
  std::vector<double> tail(size + 1, 0.0);
  for (std::size_t k = size; k-- > 0;) {
    double start = curve.times[k];
    double end = k + 1 < size ? std::min(curve.times[k + 1], tau) : tau;
    tail[k] = tail[k + 1] + (start < tau ? curve.values[k] * (end - start) : 0.0);
  }
  double variance = 0;
  for (std::size_t k = 0; k < size; ++k) {
    if (curve.times[k] >= tau) break;
    double d = curve.events[k], r = curve.at_risk[k];
    if (d <= 0 || r - d <= 0) continue;
    variance += tail[k] * tail[k] * d / (r * (r - d));
  }
  return variance;
}

std::optional<double> restriction_horizon(std::span<const double> times, std::span<const int> events,
                                          double quantile) {
  std::vector<double> event_times;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (events[i]) event_times.push_back(times[i]);
  }
  if (event_times.empty()) return std::nullopt;
  std::sort(event_times.begin(), event_times.end());
  auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(event_times.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, event_times.size());
  return event_times[rank - 1];
}

}  // namespace trialref
