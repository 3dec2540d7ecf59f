#pragma once

#include <cstddef>
#include <string>

namespace trialref {

enum class EffectScale { kLogHazardRatio, kRmstDifferenceDays };

std::string to_string(EffectScale scale);
EffectScale parse_effect_scale(const std::string& text);

// One estimator's answer for one cohort. Log hazard ratios compare drug A to
// drug B; RMST differences are RMST(A) - RMST(B) in days.
struct EffectEstimate {
  std::string method_id;
  EffectScale scale = EffectScale::kLogHazardRatio;
  double point = 0;
  double std_error = 0;        // robust/sandwich where the method has one
  double std_error_model = 0;  // model-based
  bool converged = false;
  std::size_t n_used = 0;
  std::string note;
};

}  // namespace trialref
