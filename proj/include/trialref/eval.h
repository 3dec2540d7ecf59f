#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trialref/common.h"
#include "trialref/effect.h"
#include "trialref/refset.h"

namespace trialref {

enum class PredictedLabel { kStrong, kWeak, kUnavailable };

std::string to_string(PredictedLabel label);

struct Prediction {
  std::string entry_key;
  std::string method_id;
  EffectScale scale = EffectScale::kLogHazardRatio;
  PredictedLabel label = PredictedLabel::kUnavailable;
  Direction direction = Direction::kNone;
  // |log HR| or |RMST difference| in days.
  double magnitude = 0;
  bool cohort_skipped = false;
};

// Threshold on the reported scale (hazard ratio > 1, or days > 0) mapped to a
// cutoff on the magnitude scale.
double magnitude_cutoff(EffectScale scale, double threshold);

// Strong iff the estimate converged and its magnitude reaches the threshold.
// A positive log HR or a negative RMST difference means drug A has more
// events.
Prediction predict(const EffectEstimate& estimate, const std::string& entry_key, double threshold,
                   bool cohort_skipped = false);

// Same prediction with the label recomputed at a magnitude cutoff.
Prediction relabel(Prediction prediction, double cutoff);

struct MetricsRow {
  std::string method_id;
  std::string kind = "fixed";  // fixed or curve
  double threshold = 0;
  std::optional<double> precision;  // absent when nothing is predicted strong
  std::optional<double> recall;     // over evaluable strong entries
  std::optional<double> recall_all; // over every strong entry in the set
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double tp_weighted = 0;
  double fp_weighted = 0;
  double fn_weighted = 0;
  double strong_weight = 1;
  std::size_t n_evaluable = 0;
  std::size_t n_strong_evaluable = 0;
  std::size_t n_weak_evaluable = 0;
  std::size_t n_unavailable = 0;
};

// Strong entries carry weight N_weak/N_strong over evaluable entries, weak
// entries weight 1. A true positive needs a strong entry and a matching
// direction; strong entries without a recorded direction accept either.
// Entries without a prediction or with a skipped cohort are not evaluable.
MetricsRow score(std::span<const Prediction> predictions, const ReferenceSet& reference, double threshold);

// One curve row per distinct converged magnitude (descending), followed by
// one fixed row per entry of `fixed_thresholds`.
std::vector<MetricsRow> pr_curve(std::span<const Prediction> predictions, const ReferenceSet& reference,
                                 std::span<const double> fixed_thresholds = {});

// One line of an estimates file.
struct EstimateRecord {
  std::string drug_a;
  std::string drug_b;
  std::string outcome;
  EffectEstimate estimate;
  bool cohort_skipped = false;
  std::string skip_reason;

  std::string entry_key() const { return drug_a + "|" + drug_b + "|" + outcome; }
};

std::string serialize_estimate(const EstimateRecord& record);

struct EstimatesFile {
  std::map<std::string, std::string> header;
  std::vector<EstimateRecord> records;
};

std::string serialize_estimates_header(const std::map<std::string, std::string>& header);
EstimatesFile parse_estimates(std::istream& in);

std::string metrics_tsv_header();
std::string metrics_tsv_row(const MetricsRow& row);

}  // namespace trialref
