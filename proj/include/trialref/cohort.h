#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace trialref {

enum class CodeKind { kDrugClaim, kDiagnosis, kProcedure };

std::string to_string(CodeKind kind);
CodeKind parse_code_kind(const std::string& text);

struct ClinicalEvent {
  int day = 0;
  CodeKind kind = CodeKind::kDiagnosis;
  std::string code;
};

struct PatientStream {
  std::string patient_id;
  int observation_start = 0;
  int observation_end = 0;
  std::vector<ClinicalEvent> events;  // sorted by day
};

// Fixed feature ordering for count features: one slot per (kind, code).
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::pair<CodeKind, std::string>> codes);

  // Tab-separated "kind<TAB>code" lines with a header row.
  static Vocabulary parse(std::istream& in);
  std::string serialize() const;

  // Every distinct (kind, code) seen in the patients, sorted.
  static Vocabulary from_patients(std::span<const PatientStream> patients);

  std::size_t size() const { return codes_.size(); }
  std::optional<std::size_t> index_of(CodeKind kind, const std::string& code) const;
  const std::vector<std::pair<CodeKind, std::string>>& codes() const { return codes_; }

 private:
  std::vector<std::pair<CodeKind, std::string>> codes_;
  std::map<std::pair<CodeKind, std::string>, std::size_t> index_;
};

// Read-only patient database with a per-drug index of first claim days.
class PatientDb {
 public:
  PatientDb() = default;
  explicit PatientDb(std::vector<PatientStream> patients, std::map<std::string, std::string> header = {});

  // Line-delimited JSON: an optional header object, then one patient per line.
  // Violated stream invariants throw InputError with the line number.
  static PatientDb parse(std::istream& in);
  static PatientDb load(const std::string& path);
  std::string serialize() const;

  const std::vector<PatientStream>& patients() const { return patients_; }
  const std::map<std::string, std::string>& header() const { return header_; }

  // (patient index, first claim day) for every patient who ever claimed `drug`.
  const std::vector<std::pair<std::size_t, int>>* first_claims(const std::string& drug) const;
  bool has_diagnosis(const std::string& code) const { return diagnosis_codes_.count(code) > 0; }

 private:
  void build_index();

  std::vector<PatientStream> patients_;
  std::map<std::string, std::string> header_;
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, int>>> first_claims_;
  std::unordered_map<std::string, bool> diagnosis_codes_;
};

void validate_patient(const PatientStream& patient);

// Externally supplied dense representation, patient_id -> fixed-width vector.
struct DenseFeatures {
  std::size_t width = 0;
  std::unordered_map<std::string, std::vector<double>> rows;

  // Tab-separated with a header row: patient_id, f0, f1, ...
  static DenseFeatures parse(std::istream& in);
  static DenseFeatures load(const std::string& path);
};

struct CohortTarget {
  std::string drug_a;
  std::string drug_b;
  std::string outcome;
};

struct CohortRow {
  std::string patient_id;
  int treated = 0;  // 1 = drug_a, 0 = drug_b
  std::vector<double> features;
  double time = 0;  // days from index to event or censoring
  bool event = false;
};

struct Cohort {
  CohortTarget target;
  std::vector<CohortRow> rows;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

struct CohortSkip {
  std::string reason;
};

struct CohortOptions {
  std::size_t min_per_arm = 100;
  std::size_t max_per_arm = 100000;
  // Drops patients with the outcome before index. Off by default.
  bool exclude_prior_outcome = false;
};

// Counts of each vocabulary code strictly before index_day.
std::vector<double> count_features(const PatientStream& patient, const Vocabulary& vocabulary, int index_day);

// New-user cohort indexed at the first claim of either drug. Patients starting
// both drugs on the same day are excluded; the outcome is the first matching
// diagnosis on or after index. Oversized arms are downsampled with a seed
// derived from the drug code, so swapping the target's drugs keeps membership.
std::variant<Cohort, CohortSkip> build_cohort(const PatientDb& db, const Vocabulary& vocabulary,
                                              const CohortTarget& target, std::uint64_t sampling_seed,
                                              const CohortOptions& options = {},
                                              const DenseFeatures* dense = nullptr);

}  // namespace trialref
