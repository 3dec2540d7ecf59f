#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "trialref/cohort.h"
#include "trialref/effect.h"
#include "trialref/io.h"

namespace trialref {

struct MethodInfo {
  std::string id;
  EffectScale scale;
  // Adjustment class: unadjusted, matching, weighting, regression, doubly_robust.
  std::string adjustment;
  // Only run when the standard-IPW ablation is requested.
  bool ablation = false;
};

const std::vector<MethodInfo>& method_registry();
const MethodInfo& method_info(const std::string& id);

struct MethodConfig {
  double ridge = 1e-6;
  double caliper_sd = 0.2;
  double ipw_cap = 100.0;
  double ipcw_cap = 100.0;
  double tau_quantile = 0.8;
  bool include_ablation = false;
  std::vector<std::string> methods;  // empty: every non-ablation method

  std::vector<std::string> selected() const;
};

// Recognised keys: ridge, caliper_sd, ipw_cap, ipcw_cap, tau_quantile,
// methods (comma list), ablation_standard_ipw (true/false). Unknown keys
// throw InputError; keys owned by the caller can be skipped via `ignore`.
MethodConfig parse_method_config(const KeyValues& values, const std::vector<std::string>& ignore = {});

// Column view of a cohort as the estimators consume it.
struct CohortData {
  Eigen::MatrixXd features;
  std::vector<int> treated;
  std::vector<double> times;
  std::vector<int> events;

  static CohortData from_cohort(const Cohort& cohort);
  std::size_t size() const { return times.size(); }
};

// Runs every selected method; individual failures are reported as
// non-converged estimates with a note and never abort the batch. Matching
// uses the substream "matching" of `seed`.
std::vector<EffectEstimate> run_all_methods(const CohortData& data, const MethodConfig& config, std::uint64_t seed);

}  // namespace trialref
