#include "trialref/cohort.h"

#include <algorithm>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "trialref/common.h"
#include "trialref/io.h"
#include "trialref/random.h"

namespace trialref {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(CodeKind kind) {
  switch (kind) {
    case CodeKind::kDrugClaim:
      return "drug_claim";
    case CodeKind::kDiagnosis:
      return "diagnosis";
    case CodeKind::kProcedure:
      break;
  }
  return "procedure";
}

CodeKind parse_code_kind(const std::string& text) {
  if (text == "drug_claim") return CodeKind::kDrugClaim;
  if (text == "diagnosis") return CodeKind::kDiagnosis;
  if (text == "procedure") return CodeKind::kProcedure;
  throw InputError("unknown code kind '" + text + "'");
}

Vocabulary::Vocabulary(std::vector<std::pair<CodeKind, std::string>> codes) : codes_(std::move(codes)) {
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    if (!index_.emplace(codes_[i], i).second) {
      throw InputError("vocabulary: duplicate code " + to_string(codes_[i].first) + " " + codes_[i].second);
    }
  }
}

Vocabulary Vocabulary::parse(std::istream& in) {
  std::vector<std::pair<CodeKind, std::string>> codes;
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2) throw InputError("vocabulary line " + std::to_string(line_no) + ": expected kind<TAB>code");
    if (header) {
      header = false;
      continue;
    }
    codes.emplace_back(parse_code_kind(fields[0]), fields[1]);
  }
  if (header) throw InputError("vocabulary: missing header row");
  return Vocabulary(std::move(codes));
}

std::string Vocabulary::serialize() const {
  std::string out = "kind\tcode\n";
  for (const auto& [kind, code] : codes_) out += to_string(kind) + "\t" + code + "\n";
  return out;
}

Vocabulary Vocabulary::from_patients(std::span<const PatientStream> patients) {
  std::set<std::pair<CodeKind, std::string>> seen;
  for (const auto& p : patients) {
    for (const auto& e : p.events) seen.emplace(e.kind, e.code);
  }
  return Vocabulary({seen.begin(), seen.end()});
}

std::optional<std::size_t> Vocabulary::index_of(CodeKind kind, const std::string& code) const {
  auto it = index_.find({kind, code});
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void validate_patient(const PatientStream& p) {
  if (p.patient_id.empty()) throw InputError("patient with empty id");
  if (p.observation_end < p.observation_start) {
    throw InputError("patient " + p.patient_id + ": observation_end before observation_start");
  }
  int previous = std::numeric_limits<int>::min();
  for (const auto& e : p.events) {
    if (e.day < previous) throw InputError("patient " + p.patient_id + ": events not sorted by day");
    if (e.day < p.observation_start || e.day > p.observation_end) {
      throw InputError("patient " + p.patient_id + ": event outside observation window");
    }
    previous = e.day;
  }
}

PatientDb::PatientDb(std::vector<PatientStream> patients, std::map<std::string, std::string> header)
    : patients_(std::move(patients)), header_(std::move(header)) {
  for (const auto& p : patients_) validate_patient(p);
  build_index();
}

void PatientDb::build_index() {
  first_claims_.clear();
  diagnosis_codes_.clear();
  for (std::size_t i = 0; i < patients_.size(); ++i) {
    std::unordered_map<std::string, int> first;
    for (const auto& e : patients_[i].events) {
      if (e.kind == CodeKind::kDrugClaim) {
        first.try_emplace(e.code, e.day);
      } else if (e.kind == CodeKind::kDiagnosis) {
        diagnosis_codes_[e.code] = true;
      }
    }
    for (const auto& [code, day] : first) first_claims_[code].emplace_back(i, day);
  }
  // unordered iteration above; restore patient order for determinism
  for (auto& [code, list] : first_claims_) std::sort(list.begin(), list.end());
}

const std::vector<std::pair<std::size_t, int>>* PatientDb::first_claims(const std::string& drug) const {
  auto it = first_claims_.find(drug);
  return it == first_claims_.end() ? nullptr : &it->second;
}

PatientDb PatientDb::parse(std::istream& in) {
  std::vector<PatientStream> patients;
  std::map<std::string, std::string> header;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto where = "patient db line " + std::to_string(line_no) + ": ";
    try {
      auto row = json::parse(line);
      if (row.value("type", "") == "patient_db_header") {
        for (const auto& [k, v] : row.items()) {
          if (k != "type") header[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
        continue;
      }
      PatientStream p;
      p.patient_id = row.at("patient_id").get<std::string>();
      p.observation_start = row.at("observation_start").get<int>();
      p.observation_end = row.at("observation_end").get<int>();
      for (const auto& e : row.at("events")) {
        p.events.push_back({e.at("day").get<int>(), parse_code_kind(e.at("kind").get<std::string>()),
                            e.at("code").get<std::string>()});
      }
      validate_patient(p);
      if (!ids.insert(p.patient_id).second) throw InputError("duplicate patient " + p.patient_id);
      patients.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw InputError(where + e.what());
    } catch (const InputError& e) {
      throw InputError(where + e.what());
    }
  }
  PatientDb db;
  db.patients_ = std::move(patients);
  db.header_ = std::move(header);
  db.build_index();
  return db;
}

PatientDb PatientDb::load(const std::string& path) {
  std::istringstream in(read_file(path));
  return parse(in);
}

std::string PatientDb::serialize() const {
  std::string out;
  ordered_json head;
  head["type"] = "patient_db_header";
  for (const auto& [k, v] : header_) head[k] = v;
  out += head.dump() + "\n";
  for (const auto& p : patients_) {
    ordered_json row;
    row["patient_id"] = p.patient_id;
    row["observation_start"] = p.observation_start;
    row["observation_end"] = p.observation_end;
    auto events = ordered_json::array();
    for (const auto& e : p.events) {
      ordered_json ev;
      ev["day"] = e.day;
      ev["kind"] = to_string(e.kind);
      ev["code"] = e.code;
      events.push_back(std::move(ev));
    }
    row["events"] = std::move(events);
    out += row.dump() + "\n";
  }
  return out;
}

DenseFeatures DenseFeatures::parse(std::istream& in) {
  DenseFeatures dense;
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (header) {
      if (fields.size() < 2) throw InputError("dense features: header needs patient_id and at least one column");
      dense.width = fields.size() - 1;
      header = false;
      continue;
    }
    if (fields.size() != dense.width + 1) {
      throw InputError("dense features line " + std::to_string(line_no) + ": wrong column count");
    }
    std::vector<double> values;
    values.reserve(dense.width);
    for (std::size_t i = 1; i < fields.size(); ++i) values.push_back(parse_double_list(fields[i]).at(0));
    if (!dense.rows.emplace(fields[0], std::move(values)).second) {
      throw InputError("dense features: duplicate patient " + fields[0]);
    }
  }
  if (header) throw InputError("dense features: missing header row");
  return dense;
}

DenseFeatures DenseFeatures::load(const std::string& path) {
  std::istringstream in(read_file(path));
  return parse(in);
}

std::vector<double> count_features(const PatientStream& patient, const Vocabulary& vocabulary, int index_day) {
  std::vector<double> counts(vocabulary.size(), 0.0);
  for (const auto& e : patient.events) {
    if (e.day >= index_day) break;
    if (auto idx = vocabulary.index_of(e.kind, e.code)) counts[*idx] += 1.0;
  }
  return counts;
}

std::variant<Cohort, CohortSkip> build_cohort(const PatientDb& db, const Vocabulary& vocabulary,
                                              const CohortTarget& target, std::uint64_t sampling_seed,
                                              const CohortOptions& options, const DenseFeatures* dense) {
  if (target.drug_a == target.drug_b) return CohortSkip{"drug_a equals drug_b"};
  const auto* claims_a = db.first_claims(target.drug_a);
  const auto* claims_b = db.first_claims(target.drug_b);
  if (!claims_a) return CohortSkip{"unknown drug code " + target.drug_a};
  if (!claims_b) return CohortSkip{"unknown drug code " + target.drug_b};
  if (!db.has_diagnosis(target.outcome)) return CohortSkip{"unknown outcome code " + target.outcome};

  // patient index -> first claim day of each drug
  constexpr int kNever = std::numeric_limits<int>::max();
  std::map<std::size_t, std::pair<int, int>> starts;
  for (const auto& [idx, day] : *claims_a) starts[idx].first = day;
  for (auto& [idx, pair] : starts) pair.second = kNever;
  for (const auto& [idx, day] : *claims_b) {
    auto [it, inserted] = starts.try_emplace(idx, kNever, day);
    if (!inserted) it->second.second = day;
  }

  struct Candidate {
    std::size_t patient;
    int index_day;
    int treated;
    double time;
    bool event;
  };
  std::vector<Candidate> arm_a, arm_b;
  for (const auto& [idx, days] : starts) {
    auto [day_a, day_b] = days;
    if (day_a == day_b) continue;  // same-day dual initiation
    const auto& patient = db.patients()[idx];
    int index_day = std::min(day_a, day_b);
    int treated = day_a < day_b ? 1 : 0;
    bool prior_outcome = false;
    std::optional<int> outcome_day;
    for (const auto& e : patient.events) {
      if (e.kind != CodeKind::kDiagnosis || e.code != target.outcome) continue;
      if (e.day < index_day) {
        prior_outcome = true;
        continue;
      }
      outcome_day = e.day;
      break;
    }
    if (prior_outcome && options.exclude_prior_outcome) continue;
    Candidate c{idx, index_day, treated, 0.0, outcome_day.has_value()};
    c.time = static_cast<double>((outcome_day ? *outcome_day : patient.observation_end) - index_day);
    (treated ? arm_a : arm_b).push_back(c);
  }

  auto downsample = [&](std::vector<Candidate>& arm, const std::string& drug) {
    if (arm.size() <= options.max_per_arm) return;
    std::vector<std::size_t> order(arm.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(sampling_seed, "sample:" + drug);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(options.max_per_arm);
    std::sort(order.begin(), order.end());
    std::vector<Candidate> kept;
    kept.reserve(order.size());
    for (auto i : order) kept.push_back(arm[i]);
    arm = std::move(kept);
  };
  downsample(arm_a, target.drug_a);
  downsample(arm_b, target.drug_b);

  if (arm_a.size() < options.min_per_arm || arm_b.size() < options.min_per_arm) {
    return CohortSkip{"too few patients: " + target.drug_a + "=" + std::to_string(arm_a.size()) + ", " +
                      target.drug_b + "=" + std::to_string(arm_b.size()) + " (minimum " +
                      std::to_string(options.min_per_arm) + ")"};
  }

  std::vector<Candidate> merged;
  merged.reserve(arm_a.size() + arm_b.size());
  std::merge(arm_a.begin(), arm_a.end(), arm_b.begin(), arm_b.end(), std::back_inserter(merged),
             [](const Candidate& x, const Candidate& y) { return x.patient < y.patient; });

  Cohort cohort;
  cohort.target = target;
  cohort.n_a = arm_a.size();
  cohort.n_b = arm_b.size();
  cohort.rows.reserve(merged.size());
  for (const auto& c : merged) {
    const auto& patient = db.patients()[c.patient];
    CohortRow row;
    row.patient_id = patient.patient_id;
    row.treated = c.treated;
    row.time = c.time;
    row.event = c.event;
    if (dense) {
      auto it = dense->rows.find(patient.patient_id);
      if (it == dense->rows.end()) throw InputError("dense features missing for patient " + patient.patient_id);
      row.features = it->second;
    } else {
      row.features = count_features(patient, vocabulary, c.index_day);
    }
    cohort.rows.push_back(std::move(row));
  }
  return cohort;
}

}  // namespace trialref
