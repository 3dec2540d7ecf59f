#include <gtest/gtest.h>

#include <cmath>

#include "trialref/common.h"
#include "trialref/estimators.h"
#include "trialref/io.h"
#include "trialref/synthgen.h"

using namespace trialref;

namespace {

CohortData cohort_from(const Population& pop) {
  CohortData d;
  d.features = pop.x;
  d.treated = pop.treated;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    d.times.push_back(std::floor(pop.time[i]));
    d.events.push_back(pop.event[i]);
  }
  return d;
}

ScenarioConfig confounded_scenario(double log_hr) {
  ScenarioConfig c;
  c.n_dense = 2;
  c.n_binary = 1;
  c.treatment_coef = {0.6, -0.4, 0.5};
  c.covariate_coef = {0.5, 0.3, -0.4};
  c.log_hr = log_hr;
  c.baseline_hazard = 0.01;
  c.censor_uniform_max = 200;
  return c;
}

}  // namespace

TEST(Registry, NineMethods) {
  EXPECT_EQ(method_registry().size(), 9u);
  MethodConfig c;
  EXPECT_EQ(c.selected().size(), 8u);
  c.include_ablation = true;
  EXPECT_EQ(c.selected().size(), 9u);
  c.methods = {"ipw_overlap_cox"};
  c.include_ablation = false;
  EXPECT_EQ(c.selected(), std::vector<std::string>{"ipw_overlap_cox"});
  EXPECT_THROW(method_info("nope"), InputError);
}

TEST(Config, Parsing) {
  auto c = parse_method_config(parse_key_values("ridge = 0.01\nmethods = psm_cox, aipw_rmst\nablation_standard_ipw = true\nseed = 4\n"),
                               {"seed"});
  EXPECT_DOUBLE_EQ(c.ridge, 0.01);
  EXPECT_EQ(c.methods, (std::vector<std::string>{"psm_cox", "aipw_rmst"}));
  EXPECT_TRUE(c.include_ablation);
  EXPECT_THROW(parse_method_config(parse_key_values("bogus = 1\n")), InputError);
  EXPECT_THROW(parse_method_config(parse_key_values("methods = nope\n")), InputError);
}

TEST(RunAll, ArmSwapAntisymmetry) {
  auto pop = simulate_population(confounded_scenario(0.4), 3000, 21);
  auto data = cohort_from(pop);
  auto swapped = data;
  for (auto& t : swapped.treated) t = 1 - t;
  MethodConfig config;
  config.include_ablation = true;
  auto a = run_all_methods(data, config, 9);
  auto b = run_all_methods(swapped, config, 9);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_TRUE(a[i].converged) << a[i].method_id << " " << a[i].note;
    ASSERT_TRUE(b[i].converged) << b[i].method_id;
    EXPECT_NEAR(a[i].point, -b[i].point, 1e-8 * std::max(1.0, std::abs(a[i].point))) << a[i].method_id;
  }
}

TEST(RunAll, DeterministicAndFiltered) {
  auto pop = simulate_population(confounded_scenario(0.0), 1500, 3);
  auto data = cohort_from(pop);
  MethodConfig config;
  auto a = run_all_methods(data, config, 5);
  auto b = run_all_methods(data, config, 5);
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].point, b[i].point);
    EXPECT_EQ(a[i].std_error, b[i].std_error);
  }
  config.methods = {"ipw_overlap_cox"};
  auto only = run_all_methods(data, config, 5);
  ASSERT_EQ(only.size(), 1u);
  EXPECT_EQ(only[0].method_id, "ipw_overlap_cox");
  EXPECT_EQ(only[0].point, a[2].point);
}

TEST(RunAll, FailuresAreRecorded) {
  CohortData data;
  data.features = Eigen::MatrixXd::Zero(6, 1);
  data.treated = {1, 1, 1, 0, 0, 0};
  data.times = {1, 2, 3, 4, 5, 6};
  data.events = {0, 0, 0, 1, 1, 1};
  auto out = run_all_methods(data, MethodConfig{}, 1);
  ASSERT_EQ(out.size(), 8u);
  for (const auto& e : out) {
    if (e.method_id == "aft_regression_rmst" || e.method_id == "aipw_rmst") {
      EXPECT_FALSE(e.converged);
    }
    if (!e.converged) EXPECT_FALSE(e.note.empty()) << e.method_id;
  }
  EXPECT_FALSE(out[0].converged);  // no events among treated
}

TEST(RunAll, NullConsistency) {
  MethodConfig config;
  std::map<std::string, std::vector<double>> estimates;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    auto pop = simulate_population(confounded_scenario(0.0), 2000, seed);
    auto data = cohort_from(pop);
    for (const auto& e : run_all_methods(data, config, seed)) {
      if (e.converged) estimates[e.method_id].push_back(e.point);
    }
  }
  for (const auto& [id, values] : estimates) {
    if (id.rfind("unadjusted", 0) == 0) continue;
    double mean = 0;
    for (double v : values) mean += v / static_cast<double>(values.size());
    double ss = 0;
    for (double v : values) ss += (v - mean) * (v - mean);
    double se = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
    EXPECT_LT(std::abs(mean), 3 * se + 1e-12) << id;
  }
}
