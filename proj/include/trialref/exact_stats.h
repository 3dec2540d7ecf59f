#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trialref/trial_ingest.h"

namespace trialref {

// Weak band for odds ratios: a pooled OR strictly inside (0.8, 1.25) is a weak
// candidate; everything else, including the endpoints, is strong.
inline constexpr double kWeakLowerOr = 0.8;
inline constexpr double kWeakUpperOr = 1.25;

// Margins of a 2x2 table: arm sizes n1 and n2, total events m, and the
// observed drug-A event count k.
struct TableMargins {
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  std::int64_t m = 0;
  std::int64_t k = 0;

  std::int64_t support_min() const { return m > n2 ? m - n2 : 0; }
  std::int64_t support_max() const { return m < n1 ? m : n1; }
  bool valid() const;
};

TableMargins margins_of(const ContingencyTable& table);

enum class Tail { kLower, kUpper };

struct OddsRatioNull {
  double psi = 1.0;
  Tail tail = Tail::kUpper;
};

enum class Family { kWeak, kStrong };

// How the two one-sided tests are combined into the strong-family p-value.
// kHalfMin is the reference construction; kDoubleMin (capped at 1) is the
// conventional Bonferroni-style alternative, kept for sensitivity runs.
enum class StrongCombination { kHalfMin, kDoubleMin };

double odds_ratio(std::int64_t a, std::int64_t n1, std::int64_t b, std::int64_t n2);
double odds_ratio(const ContingencyTable& table);
Family family_of(double pooled_or);

// Fisher's noncentral hypergeometric distribution of the drug-A event count
// given fixed margins. Log weights are built outward from the mode with the
// ratio recurrence, so arm sizes in the tens of thousands are fine.
class NoncentralHypergeometric {
 public:
  NoncentralHypergeometric(std::int64_t n1, std::int64_t n2, std::int64_t m, double psi);

  std::int64_t lo() const { return lo_; }
  std::int64_t hi() const { return hi_; }
  std::int64_t mode() const { return mode_; }

  double log_pmf(std::int64_t k) const;
  double pmf(std::int64_t k) const;
  // P(X >= k) and P(X <= k), clamped to [0, 1].
  double upper_tail(std::int64_t k) const;
  double lower_tail(std::int64_t k) const;

 private:
  std::int64_t lo_ = 0;
  std::int64_t hi_ = 0;
  std::int64_t mode_ = 0;
  double log_norm_ = 0;
  std::vector<double> log_weight_;
  std::vector<double> lower_cum_;
  std::vector<double> upper_cum_;
};

// Throws std::domain_error when k is outside the support.
double nchg_log_pmf(std::int64_t k, const TableMargins& margins, double psi);

double fisher_one_sided_p(const TableMargins& margins, OddsRatioNull null);

// Equivalence-style weak test: max of P_lower(psi=1.25) and P_upper(psi=0.8).
double p_weak(const TableMargins& margins);
double p_strong(const TableMargins& margins, StrongCombination combination = StrongCombination::kHalfMin);
double p_family(const TableMargins& margins, Family family,
                StrongCombination combination = StrongCombination::kHalfMin);

// Smallest p-value the family can produce over every realizable k.
double min_achievable_p(std::int64_t n1, std::int64_t n2, std::int64_t m, Family family,
                        StrongCombination combination = StrongCombination::kHalfMin);

// Benjamini-Hochberg step-up. Returns rejected indices in ascending order.
std::vector<std::size_t> bh_reject(std::span<const double> p_values, double alpha);

// BH-adjusted q-values, q_i >= p_i, capped at 1.
std::vector<double> bh_adjust(std::span<const double> p_values);

}  // namespace trialref
