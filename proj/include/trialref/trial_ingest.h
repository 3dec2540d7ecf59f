#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trialref {

inline constexpr int kMinMatchScore = 51;
inline constexpr std::int64_t kMinArmParticipants = 100;

struct OutcomeCount {
  std::string term;
  std::int64_t count = 0;
};

// One arm as it appears in a trial dump, before any mapping.
struct RawArm {
  std::string trial_id;
  std::string arm_id;
  std::string arm_name;
  std::string drug_text;
  std::int64_t participant_count = 0;
  std::vector<OutcomeCount> outcome_events;
};

struct ParseDiagnostic {
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<RawArm> arms;
  std::vector<ParseDiagnostic> diagnostics;
};

// Line-delimited JSON, one arm per line. Malformed lines become diagnostics;
// a repeated (trial_id, arm_id) throws InputError.
ParseResult parse_dump(std::istream& in);
std::string serialize_arm(const RawArm& arm);

// Lowercase, strip punctuation other than '+', collapse whitespace.
std::string normalize_text(std::string_view text);

class DrugDictionary {
 public:
  // Tab-separated with a header row: text_pattern, ingredient_id, match_score.
  static DrugDictionary parse(std::istream& in);
  static DrugDictionary load(const std::string& path);

  // Rows sharing a pattern form one multi-ingredient entry and must agree on
  // their score.
  void add(std::string_view pattern, std::string ingredient_id, int match_score);

  // Ingredient set of the best-scoring pattern found in `drug_text` (token
  // aligned, after normalization). Empty when no pattern reaches
  // kMinMatchScore. Equal scores prefer the longer pattern, then the
  // lexicographically smaller one.
  std::set<std::string> lookup(std::string_view drug_text) const;

  std::size_t size() const { return patterns_.size(); }

 private:
  struct Pattern {
    int score = 0;
    std::set<std::string> ingredients;
  };
  std::map<std::string, Pattern> patterns_;
};

class OutcomeDictionary {
 public:
  // Tab-separated with a header row: source_term_code, target_outcome_code.
  // Each source term maps to exactly one target; targets are never re-mapped.
  static OutcomeDictionary parse(std::istream& in);
  static OutcomeDictionary load(const std::string& path);

  void add(std::string source, std::string target);
  std::optional<std::string> lookup(const std::string& source) const;

 private:
  std::map<std::string, std::string> rows_;
};

struct ArmRecord {
  std::string trial_id;
  std::string arm_id;
  std::string arm_name;
  std::string drug_text;
  std::set<std::string> ingredients;
  std::int64_t participant_count = 0;
  std::map<std::string, std::int64_t> outcome_events;

  const std::string& ingredient() const { return *ingredients.begin(); }
};

std::set<std::string> map_drug(std::string_view drug_text, const DrugDictionary& dictionary);

// Attaches the mapped ingredient set; outcome terms are copied unchanged with
// repeated terms summed.
ArmRecord map_arm(const RawArm& arm, const DrugDictionary& dictionary);

struct FilterResult {
  std::vector<ArmRecord> kept;
  // Keyed by rule name; an arm is counted under the first rule it fails.
  std::map<std::string, std::size_t> dropped;
};

FilterResult filter_arms(std::span<const ArmRecord> arms);

ArmRecord map_outcomes(const ArmRecord& arm, const OutcomeDictionary& dictionary);

struct ContingencyTable {
  std::string drug_a;
  std::string drug_b;
  std::string outcome;
  std::int64_t a = 0;   // events among drug A participants
  std::int64_t n1 = 0;  // drug A participants
  std::int64_t b = 0;
  std::int64_t n2 = 0;

  friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;
};

// Pools same-ingredient arms within a trial, expands each trial into every
// unordered ingredient pair it contains, and sums pair/outcome counts across
// trials. An outcome reported by any arm of the pair counts as zero events for
// arms that do not list it. Output is sorted by (drug_a, drug_b, outcome).
std::vector<ContingencyTable> aggregate(std::span<const ArmRecord> arms);

}  // namespace trialref
