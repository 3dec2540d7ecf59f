#include "trialref/exact_stats.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace trialref {
namespace {

// log of pmf(k+1)/pmf(k)
double log_ratio(std::int64_t k, std::int64_t n1, std::int64_t n2, std::int64_t m, double log_psi) {
  auto kd = static_cast<double>(k);
  return log_psi + std::log(static_cast<double>(n1) - kd) + std::log(static_cast<double>(m) - kd) -
         std::log(kd + 1.0) - std::log(static_cast<double>(n2 - m) + kd + 1.0);
}

double clamp_probability(double p) { return std::clamp(p, 0.0, 1.0); }

const double kMinPositive = std::numeric_limits<double>::min();

}  // namespace

bool TableMargins::valid() const {
  return n1 >= 0 && n2 >= 0 && m >= 0 && m <= n1 + n2 && k >= support_min() && k <= support_max();
}

TableMargins margins_of(const ContingencyTable& table) {
  return TableMargins{table.n1, table.n2, table.a + table.b, table.a};
}

double odds_ratio(std::int64_t a, std::int64_t n1, std::int64_t b, std::int64_t n2) {
  if (a == 0 && b == 0) return 1.0;
  double num = static_cast<double>(a) * static_cast<double>(n2 - b);
  double den = static_cast<double>(n1 - a) * static_cast<double>(b);
  if (a == 0) return 0.0;
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

double odds_ratio(const ContingencyTable& t) { return odds_ratio(t.a, t.n1, t.b, t.n2); }

Family family_of(double pooled_or) {
  return (pooled_or > kWeakLowerOr && pooled_or < kWeakUpperOr) ? Family::kWeak : Family::kStrong;
}

NoncentralHypergeometric::NoncentralHypergeometric(std::int64_t n1, std::int64_t n2, std::int64_t m, double psi) {
  if (n1 < 0 || n2 < 0 || m < 0 || m > n1 + n2) throw std::invalid_argument("invalid table margins");
  if (!(psi > 0.0) || !std::isfinite(psi)) throw std::invalid_argument("odds ratio null must be positive");
  lo_ = m > n2 ? m - n2 : 0;
  hi_ = std::min(m, n1);
  const auto size = static_cast<std::size_t>(hi_ - lo_ + 1);
  const double log_psi = std::log(psi);

  // Log-concave: the mode is the first k whose forward ratio drops below 1.
  mode_ = hi_;
  for (auto k = lo_; k < hi_; ++k) {
    if (log_ratio(k, n1, n2, m, log_psi) <= 0.0) {
      mode_ = k;
      break;
    }
  }
  log_weight_.assign(size, 0.0);
  const auto mode_idx = static_cast<std::size_t>(mode_ - lo_);
  for (auto k = mode_; k < hi_; ++k) {
    auto i = static_cast<std::size_t>(k - lo_);
    log_weight_[i + 1] = log_weight_[i] + log_ratio(k, n1, n2, m, log_psi);
  }
  for (auto k = mode_ - 1; k >= lo_; --k) {
    auto i = static_cast<std::size_t>(k - lo_);
    log_weight_[i] = log_weight_[i + 1] - log_ratio(k, n1, n2, m, log_psi);
  }
  // Largest weight is exp(0) at the mode; sum the rest smallest-first.
  double total = 0.0;
  for (std::size_t i = 0; i < mode_idx; ++i) total += std::exp(log_weight_[i]);
  double upper = 0.0;
  for (std::size_t i = size; i-- > mode_idx + 1;) upper += std::exp(log_weight_[i]);
  log_norm_ = std::log1p(total + upper);

  lower_cum_.resize(size);
  double acc = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    acc += std::exp(log_weight_[i] - log_norm_);
    lower_cum_[i] = acc;
  }
  upper_cum_.resize(size);
  acc = 0.0;
  for (std::size_t i = size; i-- > 0;) {
    acc += std::exp(log_weight_[i] - log_norm_);
    upper_cum_[i] = acc;
  }
}

double NoncentralHypergeometric::log_pmf(std::int64_t k) const {
  if (k < lo_ || k > hi_) {
    throw std::domain_error("k=" + std::to_string(k) + " outside support [" + std::to_string(lo_) + ", " +
                            std::to_string(hi_) + "]");
  }
  return log_weight_[static_cast<std::size_t>(k - lo_)] - log_norm_;
}

double NoncentralHypergeometric::pmf(std::int64_t k) const { return std::exp(log_pmf(k)); }

double NoncentralHypergeometric::upper_tail(std::int64_t k) const {
  if (k <= lo_) return 1.0;
  if (k > hi_) return 0.0;
  return clamp_probability(upper_cum_[static_cast<std::size_t>(k - lo_)]);
}

double NoncentralHypergeometric::lower_tail(std::int64_t k) const {
  if (k >= hi_) return 1.0;
  if (k < lo_) return 0.0;
  return clamp_probability(lower_cum_[static_cast<std::size_t>(k - lo_)]);
}

double nchg_log_pmf(std::int64_t k, const TableMargins& margins, double psi) {
  return NoncentralHypergeometric(margins.n1, margins.n2, margins.m, psi).log_pmf(k);
}

double fisher_one_sided_p(const TableMargins& margins, OddsRatioNull null) {
  if (!margins.valid()) throw std::invalid_argument("invalid table margins");
  NoncentralHypergeometric dist(margins.n1, margins.n2, margins.m, null.psi);
  return null.tail == Tail::kUpper ? dist.upper_tail(margins.k) : dist.lower_tail(margins.k);
}

namespace {

double combine_strong(double lower_at_weak_low, double upper_at_weak_high, StrongCombination combination) {
  double smaller = std::min(lower_at_weak_low, upper_at_weak_high);
  double p = combination == StrongCombination::kHalfMin ? 0.5 * smaller : std::min(1.0, 2.0 * smaller);
  return std::max(p, kMinPositive);
}

}  // namespace

double p_weak(const TableMargins& margins) {
  return std::max(fisher_one_sided_p(margins, {kWeakUpperOr, Tail::kLower}),
                  fisher_one_sided_p(margins, {kWeakLowerOr, Tail::kUpper}));
}

double p_strong(const TableMargins& margins, StrongCombination combination) {
  return combine_strong(fisher_one_sided_p(margins, {kWeakLowerOr, Tail::kLower}),
                        fisher_one_sided_p(margins, {kWeakUpperOr, Tail::kUpper}), combination);
}

double p_family(const TableMargins& margins, Family family, StrongCombination combination) {
  return family == Family::kWeak ? p_weak(margins) : p_strong(margins, combination);
}

double min_achievable_p(std::int64_t n1, std::int64_t n2, std::int64_t m, Family family,
                        StrongCombination combination) {
  NoncentralHypergeometric low(n1, n2, m, kWeakLowerOr);
  NoncentralHypergeometric high(n1, n2, m, kWeakUpperOr);
  double best = 1.0;
  for (auto k = low.lo(); k <= low.hi(); ++k) {
    double p = family == Family::kWeak
                   ? std::max(high.lower_tail(k), low.upper_tail(k))
                   : combine_strong(low.lower_tail(k), high.upper_tail(k), combination);
    best = std::min(best, p);
  }
  return best;
}

std::vector<std::size_t> bh_reject(std::span<const double> p_values, double alpha) {
  const auto count = p_values.size();
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return p_values[x] < p_values[y]; });
  std::size_t cutoff = 0;  // number of rejections
  for (std::size_t rank = count; rank >= 1; --rank) {
    if (p_values[order[rank - 1]] <= static_cast<double>(rank) * alpha / static_cast<double>(count)) {
      cutoff = rank;
      break;
    }
  }
  std::vector<std::size_t> rejected;
  if (cutoff > 0) {
    // Ties with the cutoff p-value are rejected together.
    double threshold = p_values[order[cutoff - 1]];
    for (std::size_t i = 0; i < count; ++i) {
      if (p_values[i] <= threshold) rejected.push_back(i);
    }
  }
  return rejected;
}

std::vector<double> bh_adjust(std::span<const double> p_values) {
  const auto count = p_values.size();
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return p_values[x] < p_values[y]; });
  std::vector<double> q(count);
  double running = 1.0;
  for (std::size_t rank = count; rank >= 1; --rank) {
    auto idx = order[rank - 1];
    double candidate = p_values[idx] * static_cast<double>(count) / static_cast<double>(rank);
    running = std::min(running, candidate);
    q[idx] = std::max(running, p_values[idx]);
  }
  return q;
}

}  // namespace trialref
