#include "trialref/synthgen.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "trialref/common.h"
#include "trialref/io.h"
#include "trialref/random.h"
#include "trialref/survival.h"

namespace trialref {
namespace {

constexpr std::size_t kBlockSize = 4096;
constexpr double kMaxDayOffset = 1e8;

double coef_at(const std::vector<double>& coef, std::size_t j) { return coef.empty() ? 0.0 : coef[j]; }

double sigmoid(double eta) {
  return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

template <typename Fn>
void for_each_block(std::size_t n_blocks, Fn&& fn) {
  auto workers = std::max(1u, std::thread::hardware_concurrency());
  if (workers == 1 || n_blocks < 2) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t b = w; b < n_blocks; b += workers) fn(b);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!(baseline_hazard > 0) || !(shape > 0)) throw InputError("scenario: hazards must be positive");
  if (!treatment_coef.empty() && treatment_coef.size() != n_features()) {
    throw InputError("scenario: treatment_coef needs n_dense + n_binary values");
  }
  if (!covariate_coef.empty() && covariate_coef.size() != n_features()) {
    throw InputError("scenario: covariate_coef needs n_dense + n_binary values");
  }
  if (binary_prevalence < 0 || binary_prevalence > 1) throw InputError("scenario: binary_prevalence out of [0,1]");
  if (censor_rate < 0 || censor_uniform_max < 0 || admin_horizon < 0 || noise_rate < 0) {
    throw InputError("scenario: censoring and noise parameters must be non-negative");
  }
  if (n_patients == 0) throw InputError("scenario: n_patients must be positive");
}

Population simulate_population(const ScenarioConfig& config, std::size_t n, std::uint64_t seed) {
  config.validate();
  const auto p = config.n_features();
  Population pop;
  pop.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  pop.propensity.resize(n);
  pop.treated.resize(n);
  pop.event_time_treated.resize(n);
  pop.event_time_control.resize(n);
  pop.censor_time.resize(n);
  pop.time.resize(n);
  pop.event.resize(n);

  const std::size_t n_blocks = (n + kBlockSize - 1) / kBlockSize;
  for_each_block(n_blocks, [&](std::size_t block) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(block)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const auto begin = block * kBlockSize;
    const auto end = std::min(n, begin + kBlockSize);
    for (auto i = begin; i < end; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      double treat_lp = config.treatment_intercept;
      double outcome_lp = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        double v = j < config.n_dense ? normal(rng) : (uniform(rng) < config.binary_prevalence ? 1.0 : 0.0);
        pop.x(row, static_cast<Eigen::Index>(j)) = v;
        treat_lp += coef_at(config.treatment_coef, j) * v;
        outcome_lp += coef_at(config.covariate_coef, j) * v;
      }
      double e = sigmoid(treat_lp);
      pop.propensity[i] = e;
      pop.treated[i] = uniform(rng) < e ? 1 : 0;
      // Shared uniform couples the two counterfactual times.
      double hazard_draw = -std::log1p(-uniform(rng));
      auto event_time = [&](double lp) {
        return std::pow(hazard_draw / (config.baseline_hazard * std::exp(lp)), 1.0 / config.shape);
      };
      pop.event_time_treated[i] = event_time(outcome_lp + config.log_hr);
      pop.event_time_control[i] = event_time(outcome_lp);
      double c = std::numeric_limits<double>::infinity();
      if (config.censor_rate > 0) c = std::min(c, -std::log1p(-uniform(rng)) / config.censor_rate);
      if (config.censor_uniform_max > 0) c = std::min(c, uniform(rng) * config.censor_uniform_max);
      if (config.admin_horizon > 0) c = std::min(c, config.admin_horizon);
      pop.censor_time[i] = c;
      double t = pop.treated[i] ? pop.event_time_treated[i] : pop.event_time_control[i];
      pop.event[i] = t <= c ? 1 : 0;
      pop.time[i] = std::min(t, c);
    }
  });
  auto n_treated = static_cast<std::size_t>(std::count(pop.treated.begin(), pop.treated.end(), 1));
  if (n > 0 && (n_treated == 0 || n_treated == n)) {
    throw InputError("scenario: degenerate treatment assignment (all patients in one arm)");
  }
  return pop;
}

GroundTruth compute_ground_truth(const ScenarioConfig& config, double tau, std::uint64_t seed) {
  GroundTruth truth;
  truth.conditional_log_hr = config.log_hr;
  truth.tau = tau;
  const auto n = config.oracle_size;
  truth.oracle_size = n;
  if (n == 0) return truth;
  auto pop = simulate_population(config, n, seed);

  constexpr std::size_t kBatches = 10;
  auto stacked_cox = [&](std::size_t begin, std::size_t end, bool overlap) {
    std::vector<double> times;
    std::vector<int> events, treated;
    std::vector<double> w;
    const auto m = end - begin;
    times.reserve(2 * m);
    events.reserve(2 * m);
    treated.reserve(2 * m);
    if (overlap) w.reserve(2 * m);
    for (int arm = 1; arm >= 0; --arm) {
      for (auto i = begin; i < end; ++i) {
        double t = arm ? pop.event_time_treated[i] : pop.event_time_control[i];
        times.push_back(std::min(t, pop.censor_time[i]));
        events.push_back(t <= pop.censor_time[i] ? 1 : 0);
        treated.push_back(arm);
        if (overlap) w.push_back(pop.propensity[i] * (1.0 - pop.propensity[i]));
      }
    }
    return cox_fit(times, events, treated, w).beta;
  };
  auto batch_se = [&](bool overlap) {
    if (n < kBatches * 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> estimates;
    for (std::size_t b = 0; b < kBatches; ++b) {
      estimates.push_back(stacked_cox(b * n / kBatches, (b + 1) * n / kBatches, overlap));
    }
    double mean = 0;
    for (double e : estimates) mean += e / kBatches;
    double ss = 0;
    for (double e : estimates) ss += (e - mean) * (e - mean);
    return std::sqrt(ss / (kBatches - 1) / kBatches);
  };
  truth.marginal_log_hr = stacked_cox(0, n, false);
  truth.marginal_log_hr_se = batch_se(false);
  truth.overlap_marginal_log_hr = stacked_cox(0, n, true);
  truth.overlap_marginal_log_hr_se = batch_se(true);

  if (tau > 0) {
    double sum = 0, ss = 0, wsum = 0, wdiff = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = std::min(pop.event_time_treated[i], tau) - std::min(pop.event_time_control[i], tau);
      sum += d;
      ss += d * d;
      double w = pop.propensity[i] * (1.0 - pop.propensity[i]);
      wsum += w;
      wdiff += w * d;
    }
    const double nd = static_cast<double>(n);
    truth.rmst_difference = sum / nd;
    truth.rmst_difference_se = std::sqrt(std::max(0.0, ss / nd - truth.rmst_difference * truth.rmst_difference) / nd);
    truth.overlap_rmst_difference = wdiff / wsum;
  }
  return truth;
}

ClaimsOutput gen_claims(const ScenarioConfig& config) {
  config.validate();
  auto pop = simulate_population(config, config.n_patients, derive_seed(config.seed, "population"));
  const auto n = pop.size();
  const auto stream_root = derive_seed(config.seed, "streams");
  const std::string prefix = config.id_prefix;
  const int width = static_cast<int>(std::to_string(n).size());

  ClaimsOutput out;
  out.patients.resize(n);
  out.dense.width = config.n_features();
  std::vector<double> observed_times(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(stream_root, static_cast<std::uint64_t>(i)));
    std::uniform_int_distribution<int> index_dist(365, 729);
    std::poisson_distribution<int> noise_count(config.noise_rate);
    auto& patient = out.patients[i];
    std::ostringstream id;
    id << prefix;
    id.width(width);
    id.fill('0');
    id << i;
    patient.patient_id = id.str();
    patient.observation_start = 0;
    const int index_day = index_dist(rng);
    std::uniform_int_distribution<int> pre_day(0, index_day - 1);

    for (std::size_t j = 0; j < config.n_binary; ++j) {
      if (pop.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(config.n_dense + j)) > 0.5) {
        patient.events.push_back({pre_day(rng), CodeKind::kDiagnosis, "COND" + std::to_string(j)});
      }
    }
    for (std::size_t k = 0; k < config.n_noise_codes; ++k) {
      int count = config.noise_rate > 0 ? noise_count(rng) : 0;
      for (int c = 0; c < count; ++c) {
        patient.events.push_back({pre_day(rng), CodeKind::kProcedure, "NOISE" + std::to_string(k)});
      }
    }
    patient.events.push_back({index_day, CodeKind::kDrugClaim, pop.treated[i] ? config.drug_a : config.drug_b});

    const double follow = pop.censor_time[i];
    double end_offset = std::isfinite(follow) ? std::floor(follow) : std::floor(pop.time[i]);
    if (pop.event[i]) {
      double event_offset = std::floor(pop.time[i]);
      end_offset = std::max(end_offset, event_offset);
      if (event_offset > kMaxDayOffset) throw InputError("scenario: follow-up too long for day offsets");
      patient.events.push_back({index_day + static_cast<int>(event_offset), CodeKind::kDiagnosis, config.outcome});
    }
    if (end_offset > kMaxDayOffset) throw InputError("scenario: follow-up too long for day offsets");
    patient.observation_end = index_day + static_cast<int>(end_offset);
    std::stable_sort(patient.events.begin(), patient.events.end(),
                     [](const ClinicalEvent& x, const ClinicalEvent& y) { return x.day < y.day; });
    observed_times[i] = pop.event[i] ? std::floor(pop.time[i]) : end_offset;

    std::vector<double> row(config.n_features());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = pop.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    out.dense.rows.emplace(patient.patient_id, std::move(row));
  }

  auto tau = restriction_horizon(observed_times, pop.event);
  double horizon = tau && *tau > 0 ? *tau : (config.admin_horizon > 0 ? config.admin_horizon : 365.0);
  out.truth = compute_ground_truth(config, horizon, derive_seed(config.seed, "oracle"));
  return out;
}

std::vector<RawArm> gen_trial_dump(std::span<const PlantedComparison> planted, std::uint64_t seed) {
  std::vector<RawArm> arms;
  for (std::size_t c = 0; c < planted.size(); ++c) {
    const auto& pc = planted[c];
    if (pc.p_a < 0 || pc.p_a > 1 || pc.p_b < 0 || pc.p_b > 1) throw InputError("planted probabilities out of [0,1]");
    if (pc.n_trials < 1) throw InputError("planted comparison needs at least one trial");
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    auto share = [&](std::int64_t total, int t) {
      std::int64_t base = total / pc.n_trials;
      return base + (t < total % pc.n_trials ? 1 : 0);
    };
    for (int t = 0; t < pc.n_trials; ++t) {
      std::string trial_id = "SYN" + std::to_string(c) + "-" + std::to_string(t);
      for (int side = 0; side < 2; ++side) {
        const auto& drug = side == 0 ? pc.drug_a : pc.drug_b;
        double prob = side == 0 ? pc.p_a : pc.p_b;
        std::int64_t size = share(side == 0 ? pc.n_a : pc.n_b, t);
        std::int64_t events = 0;
        if (pc.fixed_counts) {
          events = share(static_cast<std::int64_t>(std::llround(static_cast<double>(side == 0 ? pc.n_a : pc.n_b) * prob)), t);
        } else if (size > 0) {
          std::binomial_distribution<std::int64_t> binom(size, prob);
          events = binom(rng);
        }
        RawArm arm;
        arm.trial_id = trial_id;
        arm.arm_id = side == 0 ? "A" : "B";
        arm.arm_name = drug + " arm";
        arm.drug_text = drug + " 10 mg tablet";
        arm.participant_count = size;
        arm.outcome_events.push_back({pc.outcome_term, events});
        arms.push_back(std::move(arm));
      }
    }
  }
  return arms;
}

SimulationPlan parse_scenario(std::string_view text) {
  SimulationPlan plan;
  auto& b = plan.base;
  auto number = [](const std::string& key, const std::string& value) {
    auto list = parse_double_list(value);
    if (list.size() != 1) throw InputError("scenario key " + key + " expects one number");
    return list[0];
  };
  auto count = [&](const std::string& key, const std::string& value) {
    double v = number(key, value);
    if (v < 0 || v != std::floor(v)) throw InputError("scenario key " + key + " expects a non-negative integer");
    return static_cast<std::size_t>(v);
  };
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "n_patients") b.n_patients = count(key, value);
    else if (key == "n_dense") b.n_dense = count(key, value);
    else if (key == "n_binary") b.n_binary = count(key, value);
    else if (key == "binary_prevalence") b.binary_prevalence = number(key, value);
    else if (key == "treatment_intercept") b.treatment_intercept = number(key, value);
    else if (key == "treatment_coef") b.treatment_coef = parse_double_list(value);
    else if (key == "baseline_hazard") b.baseline_hazard = number(key, value);
    else if (key == "shape") b.shape = number(key, value);
    else if (key == "log_hr") b.log_hr = number(key, value);
    else if (key == "covariate_coef") b.covariate_coef = parse_double_list(value);
    else if (key == "censor_rate") b.censor_rate = number(key, value);
    else if (key == "censor_uniform_max") b.censor_uniform_max = number(key, value);
    else if (key == "admin_horizon") b.admin_horizon = number(key, value);
    else if (key == "n_noise_codes") b.n_noise_codes = count(key, value);
    else if (key == "noise_rate") b.noise_rate = number(key, value);
    else if (key == "oracle_size") b.oracle_size = count(key, value);
    else if (key == "drug_a") b.drug_a = value;
    else if (key == "drug_b") b.drug_b = value;
    else if (key == "outcome") b.outcome = value;
    else if (key == "comparison") {
      std::istringstream fields(value);
      SimulationPlan::Comparison c;
      std::string log_hr, p_a, p_b, n_a, n_b, n_trials;
      if (!(fields >> c.drug_a >> c.drug_b >> c.outcome >> log_hr >> p_a >> p_b >> n_a >> n_b >> n_trials)) {
        throw InputError("comparison expects: drug_a drug_b outcome log_hr p_a p_b n_a n_b n_trials");
      }
      c.log_hr = number(key, log_hr);
      c.trial.drug_a = c.drug_a;
      c.trial.drug_b = c.drug_b;
      c.trial.outcome_term = "TERM_" + c.outcome;
      c.trial.p_a = number(key, p_a);
      c.trial.p_b = number(key, p_b);
      c.trial.n_a = static_cast<std::int64_t>(count(key, n_a));
      c.trial.n_b = static_cast<std::int64_t>(count(key, n_b));
      c.trial.n_trials = static_cast<int>(count(key, n_trials));
      plan.comparisons.push_back(std::move(c));
    } else {
      throw InputError("unknown scenario key '" + key + "'");
    }
  }
  b.validate();
  if (plan.comparisons.empty()) {
    SimulationPlan::Comparison c;
    c.drug_a = b.drug_a;
    c.drug_b = b.drug_b;
    c.outcome = b.outcome;
    c.log_hr = b.log_hr;
    c.trial = {b.drug_a, b.drug_b, "TERM_" + b.outcome, 0.1, 0.1, 1000, 1000, 1, false};
    plan.comparisons.push_back(std::move(c));
  }
  return plan;
}

SimulationFiles simulate(const SimulationPlan& plan, std::uint64_t seed, const std::string& scenario_sha256) {
  std::vector<PatientStream> patients;
  std::vector<std::string> dense_lines;
  std::size_t dense_width = plan.base.n_features();
  nlohmann::ordered_json truths = nlohmann::ordered_json::array();
  std::vector<PlantedComparison> planted;
  std::set<std::string> drugs, outcomes;

  for (std::size_t k = 0; k < plan.comparisons.size(); ++k) {
    const auto& c = plan.comparisons[k];
    ScenarioConfig config = plan.base;
    config.drug_a = c.drug_a;
    config.drug_b = c.drug_b;
    config.outcome = c.outcome;
    config.log_hr = c.log_hr;
    config.id_prefix = "c" + std::to_string(k) + "_";
    config.seed = derive_seed(seed, "comparison:" + std::to_string(k));
    auto claims = gen_claims(config);
    for (auto& p : claims.patients) {
      std::string line = p.patient_id;
      for (double v : claims.dense.rows.at(p.patient_id)) line += "\t" + format_double(v);
      dense_lines.push_back(std::move(line));
      patients.push_back(std::move(p));
    }
    const auto& t = claims.truth;
    nlohmann::ordered_json row;
    row["drug_a"] = c.drug_a;
    row["drug_b"] = c.drug_b;
    row["outcome"] = c.outcome;
    row["conditional_log_hr"] = t.conditional_log_hr;
    row["marginal_log_hr"] = t.marginal_log_hr;
    row["marginal_log_hr_se"] = t.marginal_log_hr_se;
    row["overlap_marginal_log_hr"] = t.overlap_marginal_log_hr;
    row["overlap_marginal_log_hr_se"] = t.overlap_marginal_log_hr_se;
    row["tau"] = t.tau;
    row["rmst_difference"] = t.rmst_difference;
    row["rmst_difference_se"] = t.rmst_difference_se;
    row["overlap_rmst_difference"] = t.overlap_rmst_difference;
    row["oracle_size"] = t.oracle_size;
    row["trial_p_a"] = c.trial.p_a;
    row["trial_p_b"] = c.trial.p_b;
    truths.push_back(std::move(row));
    planted.push_back(c.trial);
    drugs.insert(c.drug_a);
    drugs.insert(c.drug_b);
    outcomes.insert(c.outcome);
  }

  SimulationFiles files;
  auto vocabulary = Vocabulary::from_patients(patients);
  files.vocabulary = vocabulary.serialize();
  std::map<std::string, std::string> header = {{"vocabulary_sha256", sha256_hex(files.vocabulary)},
                                                {"generator_seed", std::to_string(seed)},
                                                {"scenario_sha256", scenario_sha256},
                                                {"tool_version", kToolVersion}};
  files.patients = PatientDb(std::move(patients), header).serialize();

  files.dense_features = "patient_id";
  for (std::size_t j = 0; j < dense_width; ++j) files.dense_features += "\tx" + std::to_string(j);
  files.dense_features += "\n";
  for (const auto& line : dense_lines) files.dense_features += line + "\n";

  nlohmann::ordered_json truth_doc;
  truth_doc["tool_version"] = kToolVersion;
  truth_doc["seed"] = seed;
  truth_doc["scenario_sha256"] = scenario_sha256;
  truth_doc["comparisons"] = std::move(truths);
  files.ground_truth = truth_doc.dump(2) + "\n";

  for (const auto& arm : gen_trial_dump(planted, derive_seed(seed, "trials"))) files.trials += serialize_arm(arm) + "\n";
  files.drug_dictionary = "text_pattern\tingredient_id\tmatch_score\n";
  for (const auto& d : drugs) files.drug_dictionary += d + "\t" + d + "\t100\n";
  files.outcome_dictionary = "source_term_code\ttarget_outcome_code\n";
  for (const auto& o : outcomes) files.outcome_dictionary += "TERM_" + o + "\t" + o + "\n";
  return files;
}

}  // namespace trialref
