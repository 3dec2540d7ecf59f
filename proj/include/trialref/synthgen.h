#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trialref/cohort.h"
#include "trialref/trial_ingest.h"

namespace trialref {

// Covariates x = [n_dense standard normals, n_binary Bernoulli indicators].
// Treatment ~ Bernoulli(logistic(treatment_intercept + gamma'x)); event times
// are Weibull with hazard baseline_hazard * shape * t^(shape-1) *
// exp(log_hr * treated + eta'x). Time unit is days.
struct ScenarioConfig {
  std::size_t n_patients = 10000;
  std::size_t n_dense = 2;
  std::size_t n_binary = 2;
  double binary_prevalence = 0.3;
  double treatment_intercept = 0.0;
  std::vector<double> treatment_coef;  // gamma; empty means zeros
  double baseline_hazard = 0.001;
  double shape = 1.0;
  double log_hr = 0.0;
  std::vector<double> covariate_coef;  // eta; empty means zeros
  double censor_rate = 0.0;            // exponential censoring hazard, 0 = off
  double censor_uniform_max = 0.0;     // Uniform(0, max) censoring, 0 = off
  double admin_horizon = 0.0;          // administrative end of follow-up, 0 = none
  std::size_t n_noise_codes = 5;
  double noise_rate = 1.0;  // mean pre-index events per noise code
  std::string drug_a = "DRUG_A";
  std::string drug_b = "DRUG_B";
  std::string outcome = "OUTCOME";
  std::string id_prefix = "p";
  std::size_t oracle_size = 1000000;
  std::uint64_t seed = 0;

  std::size_t n_features() const { return n_dense + n_binary; }
  // Throws InputError for non-positive hazards or mismatched coefficient sizes.
  void validate() const;
};

// Continuous-time simulation with both counterfactual event times.
struct Population {
  Eigen::MatrixXd x;
  std::vector<double> propensity;  // true P(treated | x)
  std::vector<int> treated;
  std::vector<double> event_time_treated;
  std::vector<double> event_time_control;
  std::vector<double> censor_time;  // min(censoring, admin horizon); may be +inf
  std::vector<double> time;         // observed min(T, C)
  std::vector<int> event;

  std::size_t size() const { return time.size(); }
};

// Generated in blocks of 4096 patients with per-block derived seeds, so the
// result does not depend on how many threads run it. Throws InputError when
// every patient lands in the same arm.
Population simulate_population(const ScenarioConfig& config, std::size_t n, std::uint64_t seed);

struct GroundTruth {
  double conditional_log_hr = 0;
  // Cox fit on stacked counterfactual arms (whole population).
  double marginal_log_hr = 0;
  double marginal_log_hr_se = 0;
  // Same, weighted by e(1-e): the overlap population.
  double overlap_marginal_log_hr = 0;
  double overlap_marginal_log_hr_se = 0;
  double tau = 0;
  double rmst_difference = 0;  // E[min(T1, tau)] - E[min(T0, tau)]
  double rmst_difference_se = 0;
  double overlap_rmst_difference = 0;
  std::size_t oracle_size = 0;
};

// Monte-Carlo ground truth from `config.oracle_size` counterfactual pairs.
// Standard errors come from 10 batch means.
GroundTruth compute_ground_truth(const ScenarioConfig& config, double tau, std::uint64_t seed);

struct ClaimsOutput {
  std::vector<PatientStream> patients;
  DenseFeatures dense;  // all covariates, keyed by patient id
  GroundTruth truth;
};

// Patient streams for one scenario. Binary covariates appear as pre-index
// diagnosis codes COND<j>, noise codes NOISE<k> as pre-index procedures, the
// drug claim on the index day and the outcome diagnosis at index + floor(T).
ClaimsOutput gen_claims(const ScenarioConfig& config);

struct PlantedComparison {
  std::string drug_a;
  std::string drug_b;
  std::string outcome_term;
  double p_a = 0;
  double p_b = 0;
  std::int64_t n_a = 1000;
  std::int64_t n_b = 1000;
  int n_trials = 1;
  // Use round(n * p) events per side, split across trials like the arm sizes.
  bool fixed_counts = false;
};

// Binomially sampled arms in the trial-dump schema. Each comparison is spread
// over n_trials trials with arm sizes split as evenly as possible.
std::vector<RawArm> gen_trial_dump(std::span<const PlantedComparison> planted, std::uint64_t seed);

// A whole synthetic study: shared scenario settings plus one claims block and
// one planted trial comparison per line of the form
//   comparison = DRUG_A DRUG_B OUTCOME log_hr p_a p_b n_a n_b n_trials
struct SimulationPlan {
  ScenarioConfig base;
  struct Comparison {
    std::string drug_a, drug_b, outcome;
    double log_hr = 0;
    PlantedComparison trial;
  };
  std::vector<Comparison> comparisons;
};

SimulationPlan parse_scenario(std::string_view text);

struct SimulationFiles {
  std::string patients;            // patient db
  std::string vocabulary;
  std::string dense_features;
  std::string ground_truth;        // JSON
  std::string trials;              // trial dump
  std::string drug_dictionary;
  std::string outcome_dictionary;
};

SimulationFiles simulate(const SimulationPlan& plan, std::uint64_t seed, const std::string& scenario_sha256 = "");

}  // namespace trialref
