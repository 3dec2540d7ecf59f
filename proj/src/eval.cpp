#include "trialref/eval.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <unordered_map>

#include "trialref/io.h"

namespace trialref {

std::string to_string(PredictedLabel label) {
  switch (label) {
    case PredictedLabel::kStrong: return "strong";
    case PredictedLabel::kWeak: return "weak";
    case PredictedLabel::kUnavailable: return "unavailable";
  }
  return "unavailable";
}

double magnitude_cutoff(EffectScale scale, double threshold) {
  if (scale == EffectScale::kLogHazardRatio) {
    if (!(threshold > 1)) throw InputError("hazard-ratio threshold must exceed 1");
    return std::log(threshold);
  }
  if (!(threshold > 0)) throw InputError("RMST threshold must be positive");
  return threshold;
}

Prediction predict(const EffectEstimate& estimate, const std::string& entry_key, double threshold,
                   bool cohort_skipped) {
  Prediction p;
  p.entry_key = entry_key;
  p.method_id = estimate.method_id;
  p.scale = estimate.scale;
  p.cohort_skipped = cohort_skipped;
  if (cohort_skipped || !estimate.converged || !std::isfinite(estimate.point)) {
    p.label = PredictedLabel::kUnavailable;
    return p;
  }
  p.magnitude = std::abs(estimate.point);
  double a_sign = estimate.scale == EffectScale::kLogHazardRatio ? estimate.point : -estimate.point;
  p.label = PredictedLabel::kWeak;
  p.direction = a_sign > 0 ? Direction::kAHigher : (a_sign < 0 ? Direction::kBHigher : Direction::kNone);
  return relabel(std::move(p), magnitude_cutoff(estimate.scale, threshold));
}

Prediction relabel(Prediction prediction, double cutoff) {
  if (prediction.label == PredictedLabel::kUnavailable) return prediction;
  prediction.label = prediction.magnitude >= cutoff ? PredictedLabel::kStrong : PredictedLabel::kWeak;
  return prediction;
}

MetricsRow score(std::span<const Prediction> predictions, const ReferenceSet& reference, double threshold) {
  if (reference.entries.empty()) throw InputError("reference set is empty");
  std::unordered_map<std::string, const ReferenceEntry*> by_key;
  for (const auto& e : reference.entries) by_key.emplace(e.key(), &e);

  MetricsRow row;
  row.threshold = threshold;
  if (!predictions.empty()) row.method_id = predictions.front().method_id;

  std::set<std::string> seen;
  std::vector<std::pair<const Prediction*, const ReferenceEntry*>> evaluable;
  for (const auto& p : predictions) {
    auto it = by_key.find(p.entry_key);
    if (it == by_key.end()) throw InputError("prediction for entry not in reference set: " + p.entry_key);
    if (!seen.insert(p.entry_key).second) throw InputError("duplicate prediction for entry " + p.entry_key);
    if (p.cohort_skipped) continue;
    evaluable.emplace_back(&p, it->second);
    if (it->second->label == Label::kStrong) ++row.n_strong_evaluable;
    else ++row.n_weak_evaluable;
  }
  row.n_evaluable = evaluable.size();
  row.strong_weight = row.n_strong_evaluable > 0 && row.n_weak_evaluable > 0
                          ? static_cast<double>(row.n_weak_evaluable) / static_cast<double>(row.n_strong_evaluable)
                          : 1.0;

  for (const auto& [p, entry] : evaluable) {
    const bool strong_entry = entry->label == Label::kStrong;
    const double w = strong_entry ? row.strong_weight : 1.0;
    if (p->label == PredictedLabel::kUnavailable) ++row.n_unavailable;
    const bool predicted_strong = p->label == PredictedLabel::kStrong;
    const bool direction_ok = entry->direction == Direction::kNone || entry->direction == p->direction;
    if (predicted_strong && strong_entry && direction_ok) {
      ++row.tp;
      row.tp_weighted += w;
    } else if (predicted_strong) {
      ++row.fp;
      row.fp_weighted += w;
    }
    if (strong_entry && !(predicted_strong && direction_ok)) {
      ++row.fn;
      row.fn_weighted += w;
    }
  }
  double predicted = row.tp_weighted + row.fp_weighted;
  if (row.tp + row.fp > 0) row.precision = row.tp_weighted / predicted;
  if (row.n_strong_evaluable > 0) {
    row.recall = static_cast<double>(row.tp) / static_cast<double>(row.n_strong_evaluable);
  }
  auto n_strong = reference.count(Label::kStrong);
  if (n_strong > 0) row.recall_all = static_cast<double>(row.tp) / static_cast<double>(n_strong);
  return row;
}

std::vector<MetricsRow> pr_curve(std::span<const Prediction> predictions, const ReferenceSet& reference,
                                 std::span<const double> fixed_thresholds) {
  std::vector<MetricsRow> rows;
  if (predictions.empty()) return rows;
  const auto scale = predictions.front().scale;
  std::vector<double> magnitudes;
  for (const auto& p : predictions) {
    if (p.scale != scale) throw InputError("predictions mix effect scales");
    if (p.label != PredictedLabel::kUnavailable) magnitudes.push_back(p.magnitude);
  }
  std::sort(magnitudes.begin(), magnitudes.end(), std::greater<>());
  magnitudes.erase(std::unique(magnitudes.begin(), magnitudes.end()), magnitudes.end());

  auto at_cutoff = [&](double cutoff, double threshold, const char* kind) {
    std::vector<Prediction> relabeled;
    relabeled.reserve(predictions.size());
    for (const auto& p : predictions) relabeled.push_back(relabel(p, cutoff));
    auto row = score(relabeled, reference, threshold);
    row.kind = kind;
    return row;
  };
  for (double m : magnitudes) {
    double threshold = scale == EffectScale::kLogHazardRatio ? std::exp(m) : m;
    rows.push_back(at_cutoff(m, threshold, "curve"));
  }
  for (double t : fixed_thresholds) rows.push_back(at_cutoff(magnitude_cutoff(scale, t), t, "fixed"));
  return rows;
}

namespace {

nlohmann::ordered_json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double number_from(const nlohmann::json& v) {
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) throw InputError("expected a number in estimates file");
  return v.get<double>();
}

}  // namespace

std::string serialize_estimate(const EstimateRecord& record) {
  nlohmann::ordered_json j;
  j["drug_a"] = record.drug_a;
  j["drug_b"] = record.drug_b;
  j["outcome"] = record.outcome;
  j["method_id"] = record.estimate.method_id;
  j["scale"] = to_string(record.estimate.scale);
  j["point"] = number_or_null(record.estimate.point);
  j["std_error"] = number_or_null(record.estimate.std_error);
  j["std_error_model"] = number_or_null(record.estimate.std_error_model);
  j["converged"] = record.estimate.converged;
  j["n_used"] = record.estimate.n_used;
  j["note"] = record.estimate.note;
  j["cohort_skipped"] = record.cohort_skipped;
  j["skip_reason"] = record.skip_reason;
  return j.dump();
}

std::string serialize_estimates_header(const std::map<std::string, std::string>& header) {
  nlohmann::ordered_json j;
  j["type"] = "estimates_header";
  for (const auto& [k, v] : header) j[k] = v;
  return j.dump();
}

EstimatesFile parse_estimates(std::istream& in) {
  EstimatesFile file;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("estimates line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (j.contains("type")) {
        if (j["type"] != "estimates_header" || header_seen || !file.records.empty()) {
          throw InputError("unexpected header object");
        }
        header_seen = true;
        for (const auto& [k, v] : j.items()) {
          if (k != "type") file.header[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
        continue;
      }
      EstimateRecord r;
      r.drug_a = j.at("drug_a").get<std::string>();
      r.drug_b = j.at("drug_b").get<std::string>();
      r.outcome = j.at("outcome").get<std::string>();
      r.estimate.method_id = j.at("method_id").get<std::string>();
      r.estimate.scale = parse_effect_scale(j.at("scale").get<std::string>());
      r.estimate.point = number_from(j.at("point"));
      r.estimate.std_error = number_from(j.value("std_error", nlohmann::json()));
      r.estimate.std_error_model = number_from(j.value("std_error_model", nlohmann::json()));
      r.estimate.converged = j.at("converged").get<bool>();
      r.estimate.n_used = j.value("n_used", std::size_t{0});
      r.estimate.note = j.value("note", std::string());
      r.cohort_skipped = j.value("cohort_skipped", false);
      r.skip_reason = j.value("skip_reason", std::string());
      file.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("estimates line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("estimates line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return file;
}

std::string metrics_tsv_header() {
  return "method_id\tkind\tthreshold\tprecision\trecall\trecall_all\ttp\tfp\tfn\ttp_weighted\tfp_weighted\t"
         "fn_weighted\tstrong_weight\tn_evaluable\tn_strong_evaluable\tn_weak_evaluable\tn_unavailable";
}

std::string metrics_tsv_row(const MetricsRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  std::string s = r.method_id + "\t" + r.kind + "\t" + format_double(r.threshold) + "\t" + opt(r.precision) + "\t" +
                  opt(r.recall) + "\t" + opt(r.recall_all) + "\t" + std::to_string(r.tp) + "\t" +
                  std::to_string(r.fp) + "\t" + std::to_string(r.fn) + "\t" + format_double(r.tp_weighted) + "\t" +
                  format_double(r.fp_weighted) + "\t" + format_double(r.fn_weighted) + "\t" +
                  format_double(r.strong_weight) + "\t" + std::to_string(r.n_evaluable) + "\t" +
                  std::to_string(r.n_strong_evaluable) + "\t" + std::to_string(r.n_weak_evaluable) + "\t" +
                  std::to_string(r.n_unavailable);
  return s;
}

}  // namespace trialref
