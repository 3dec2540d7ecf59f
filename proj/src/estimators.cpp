#include "trialref/estimators.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "trialref/aft.h"
#include "trialref/common.h"
#include "trialref/propensity.h"
#include "trialref/random.h"
#include "trialref/survival.h"

namespace trialref {

std::string to_string(EffectScale scale) {
  return scale == EffectScale::kLogHazardRatio ? "log_hazard_ratio" : "rmst_difference_days";
}

EffectScale parse_effect_scale(const std::string& text) {
  if (text == "log_hazard_ratio") return EffectScale::kLogHazardRatio;
  if (text == "rmst_difference_days") return EffectScale::kRmstDifferenceDays;
  throw InputError("unknown effect scale '" + text + "'");
}

const std::vector<MethodInfo>& method_registry() {
  static const std::vector<MethodInfo> registry = {
      {"unadjusted_cox", EffectScale::kLogHazardRatio, "unadjusted", false},
      {"psm_cox", EffectScale::kLogHazardRatio, "matching", false},
      {"ipw_overlap_cox", EffectScale::kLogHazardRatio, "weighting", false},
      {"ipw_standard_cox", EffectScale::kLogHazardRatio, "weighting", true},
      {"unadjusted_km_rmst", EffectScale::kRmstDifferenceDays, "unadjusted", false},
      {"psm_km_rmst", EffectScale::kRmstDifferenceDays, "matching", false},
      {"aft_regression_rmst", EffectScale::kRmstDifferenceDays, "regression", false},
      {"aipw_rmst", EffectScale::kRmstDifferenceDays, "doubly_robust", false},
      {"ipw_overlap_km_rmst", EffectScale::kRmstDifferenceDays, "weighting", false},
  };
  return registry;
}

const MethodInfo& method_info(const std::string& id) {
  for (const auto& m : method_registry()) {
    if (m.id == id) return m;
  }
  throw InputError("unknown method '" + id + "'");
}

std::vector<std::string> MethodConfig::selected() const {
  std::vector<std::string> out;
  for (const auto& m : method_registry()) {
    bool wanted = methods.empty() ? (!m.ablation || include_ablation)
                                  : std::find(methods.begin(), methods.end(), m.id) != methods.end() ||
                                        (m.ablation && include_ablation);
    if (wanted) out.push_back(m.id);
  }
  return out;
}

MethodConfig parse_method_config(const KeyValues& values, const std::vector<std::string>& ignore) {
  MethodConfig config;
  auto number = [](const std::string& key, const std::string& text) {
    auto list = parse_double_list(text);
    if (list.size() != 1) throw InputError("config key " + key + " expects one number");
    return list[0];
  };
  for (const auto& [key, value] : values) {
    if (std::find(ignore.begin(), ignore.end(), key) != ignore.end()) continue;
    if (key == "ridge") {
      config.ridge = number(key, value);
    } else if (key == "caliper_sd") {
      config.caliper_sd = number(key, value);
    } else if (key == "ipw_cap") {
      config.ipw_cap = number(key, value);
    } else if (key == "ipcw_cap") {
      config.ipcw_cap = number(key, value);
    } else if (key == "tau_quantile") {
      config.tau_quantile = number(key, value);
    } else if (key == "ablation_standard_ipw") {
      if (value != "true" && value != "false") throw InputError("ablation_standard_ipw must be true or false");
      config.include_ablation = value == "true";
    } else if (key == "methods") {
      config.methods.clear();
      for (const auto& part : split(value, ',')) {
        auto id = trim(part);
        if (id.empty()) continue;
        method_info(id);
        config.methods.push_back(id);
      }
    } else {
      throw InputError("unknown config key '" + key + "'");
    }
  }
  if (!(config.tau_quantile > 0 && config.tau_quantile <= 1)) throw InputError("tau_quantile must be in (0, 1]");
  return config;
}

CohortData CohortData::from_cohort(const Cohort& cohort) {
  CohortData data;
  const auto n = cohort.rows.size();
  const auto width = n ? cohort.rows.front().features.size() : 0;
  data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  data.treated.reserve(n);
  data.times.reserve(n);
  data.events.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = cohort.rows[i];
    if (row.features.size() != width) throw InputError("cohort rows have differing feature widths");
    for (std::size_t j = 0; j < width; ++j) {
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row.features[j];
    }
    data.treated.push_back(row.treated);
    data.times.push_back(row.time);
    data.events.push_back(row.event ? 1 : 0);
  }
  return data;
}

namespace {

EffectEstimate failed(const std::string& id, const std::string& note, std::size_t n) {
  EffectEstimate e;
  e.method_id = id;
  e.scale = method_info(id).scale;
  e.point = std::numeric_limits<double>::quiet_NaN();
  e.std_error = e.std_error_model = std::numeric_limits<double>::quiet_NaN();
  e.converged = false;
  e.n_used = n;
  e.note = note;
  return e;
}

EffectEstimate from_cox(const std::string& id, const CoxFit& fit, bool weighted, std::size_t n) {
  EffectEstimate e;
  e.method_id = id;
  e.scale = EffectScale::kLogHazardRatio;
  e.point = fit.beta;
  e.std_error_model = fit.se_model;
  e.std_error = weighted ? fit.se_robust : fit.se_model;
  e.converged = fit.converged && std::isfinite(fit.beta);
  e.n_used = n;
  if (!std::isfinite(fit.beta)) {
    e.note = "no_events_in_arm";
  } else if (!fit.converged) {
    e.note = "cox_not_converged";
  }
  return e;
}

struct Subset {
  std::vector<int> treated;
  std::vector<double> times;
  std::vector<int> events;
};

Subset take(const CohortData& data, const std::vector<std::size_t>& rows) {
  Subset s;
  for (auto i : rows) {
    s.treated.push_back(data.treated[i]);
    s.times.push_back(data.times[i]);
    s.events.push_back(data.events[i]);
  }
  return s;
}

EffectEstimate km_difference(const std::string& id, std::span<const int> treated, std::span<const double> times,
                             std::span<const int> events, std::span<const double> weights, double tau) {
  std::vector<double> ta, tb, wa, wb;
  std::vector<int> ea, eb;
  for (std::size_t i = 0; i < times.size(); ++i) {
    double w = weights.empty() ? 1.0 : weights[i];
    if (treated[i]) {
      ta.push_back(times[i]);
      ea.push_back(events[i]);
      wa.push_back(w);
    } else {
      tb.push_back(times[i]);
      eb.push_back(events[i]);
      wb.push_back(w);
    }
  }
  if (ta.empty() || tb.empty()) return failed(id, "empty_arm", times.size());
  auto ca = km_curve(ta, ea, wa);
  auto cb = km_curve(tb, eb, wb);
  EffectEstimate e;
  e.method_id = id;
  e.scale = EffectScale::kRmstDifferenceDays;
  e.point = rmst(ca, tau) - rmst(cb, tau);
  e.std_error = e.std_error_model = std::sqrt(rmst_variance(ca, tau) + rmst_variance(cb, tau));
  e.converged = std::isfinite(e.point);
  e.n_used = times.size();
  return e;
}

}  // namespace

std::vector<EffectEstimate> run_all_methods(const CohortData& data, const MethodConfig& config, std::uint64_t seed) {
  const auto n = data.size();
  const auto selected = config.selected();

  std::optional<double> tau = restriction_horizon(data.times, data.events, config.tau_quantile);
  if (tau && !(*tau > 0)) tau.reset();
  const double horizon = tau.value_or(0.0);

  std::optional<PropensityFit> propensity;
  std::string propensity_error;
  auto need_propensity = [&] {
    if (propensity || !propensity_error.empty()) return;
    try {
      propensity = fit_logistic(data.features, data.treated, config.ridge);
    } catch (const std::exception& e) {
      propensity_error = std::string("propensity_failed: ") + e.what();
    }
  };

  std::optional<std::vector<std::size_t>> matched;
  std::string matching_error;
  auto need_matching = [&] {
    if (matched || !matching_error.empty()) return;
    need_propensity();
    if (!propensity) {
      matching_error = propensity_error;
      return;
    }
    // Focal side: the smaller arm, or the arm of row 0 on ties.
    std::size_t n_treated = 0;
    for (int t : data.treated) n_treated += t != 0;
    std::size_t n_control = n - n_treated;
    int focal = n_treated < n_control ? 1 : n_control < n_treated ? 0 : (n ? data.treated[0] : 1);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = (data.treated[i] != 0) == (focal == 1) ? 1 : 0;
    try {
      auto pairs = match_pairs(propensity->scores, labels, config.caliper_sd, derive_seed(seed, "matching"));
      std::vector<std::size_t> rows;
      for (auto [a, b] : pairs) {
        rows.push_back(a);
        rows.push_back(b);
      }
      std::sort(rows.begin(), rows.end());
      matched = std::move(rows);
    } catch (const std::exception& e) {
      matching_error = std::string("matching_failed: ") + e.what();
    }
  };

  std::optional<WeibullAft> aft;
  auto need_aft = [&] {
    if (!aft) aft = aft_fit(data.features, data.treated, data.times, data.events);
  };

  std::vector<EffectEstimate> out;
  for (const auto& id : selected) {
    try {
      if (id == "unadjusted_cox") {
        out.push_back(from_cox(id, cox_fit(data.times, data.events, data.treated), false, n));
      } else if (id == "psm_cox") {
        need_matching();
        if (!matched) {
          out.push_back(failed(id, matching_error, n));
          continue;
        }
        auto s = take(data, *matched);
        out.push_back(from_cox(id, cox_fit(s.times, s.events, s.treated), false, matched->size()));
      } else if (id == "ipw_overlap_cox" || id == "ipw_standard_cox") {
        need_propensity();
        if (!propensity) {
          out.push_back(failed(id, propensity_error, n));
          continue;
        }
        auto mode = id == "ipw_overlap_cox" ? WeightMode::kOverlap : WeightMode::kStandardIpw;
        auto w = weights(propensity->scores, data.treated, mode, config.ipw_cap);
        auto est = from_cox(id, cox_fit(data.times, data.events, data.treated, w.values), true, n);
        if (!propensity->converged && est.note.empty()) est.note = "propensity_not_converged";
        out.push_back(std::move(est));
      } else if (!tau) {
        out.push_back(failed(id, "no_events_for_horizon", n));
      } else if (id == "unadjusted_km_rmst") {
        out.push_back(km_difference(id, data.treated, data.times, data.events, {}, horizon));
      } else if (id == "psm_km_rmst") {
        need_matching();
        if (!matched) {
          out.push_back(failed(id, matching_error, n));
          continue;
        }
        auto s = take(data, *matched);
        out.push_back(km_difference(id, s.treated, s.times, s.events, {}, horizon));
      } else if (id == "ipw_overlap_km_rmst") {
        need_propensity();
        if (!propensity) {
          out.push_back(failed(id, propensity_error, n));
          continue;
        }
        auto w = weights(propensity->scores, data.treated, WeightMode::kOverlap);
        out.push_back(km_difference(id, data.treated, data.times, data.events, w.values, horizon));
      } else if (id == "aft_regression_rmst") {
        need_aft();
        auto est = rmst_regression(*aft, data.features, horizon);
        est.method_id = id;
        out.push_back(std::move(est));
      } else if (id == "aipw_rmst") {
        need_aft();
        need_propensity();
        if (!propensity) {
          out.push_back(failed(id, propensity_error, n));
          continue;
        }
        auto est = rmst_aipw(*aft, data.features, data.treated, data.times, data.events, propensity->scores, horizon,
                             config.ipcw_cap);
        est.method_id = id;
        out.push_back(std::move(est));
      }
    } catch (const std::exception& e) {
      out.push_back(failed(id, std::string("error: ") + e.what(), n));
    }
  }
  return out;
}

}  // namespace trialref
