#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "trialref/common.h"
#include "trialref/exact_stats.h"
#include "trialref/trial_ingest.h"

namespace trialref {

struct ReferenceEntry {
  std::string drug_a;
  std::string drug_b;
  std::string outcome;
  Label label = Label::kWeak;
  Direction direction = Direction::kNone;
  double pooled_or = 1.0;
  double p_value = 1.0;
  double q_value = 1.0;
  // Pooled 2x2 counts; zero for externally supplied sets.
  std::int64_t a = 0;
  std::int64_t n1 = 0;
  std::int64_t b = 0;
  std::int64_t n2 = 0;

  std::string key() const { return drug_a + "|" + drug_b + "|" + outcome; }
};

struct ReferenceSet {
  std::vector<ReferenceEntry> entries;
  std::map<std::string, std::string> provenance;

  std::size_t count(Label label) const;
};

struct BuildOptions {
  double alpha = 0.05;
  bool prefilter = true;
  StrongCombination strong_combination = StrongCombination::kHalfMin;
};

// Counters for every stage that discards input, keyed by rule name.
struct BuildReport {
  std::map<std::string, std::size_t> counts;
  std::vector<ParseDiagnostic> diagnostics;
};

struct Buckets {
  std::vector<ContingencyTable> strong;
  std::vector<ContingencyTable> weak;
};

Buckets bucket(std::span<const ContingencyTable> tables);

// Keeps tables whose smallest achievable family p-value is below alpha.
std::vector<ContingencyTable> prefilter(std::span<const ContingencyTable> candidates, Family family, double alpha,
                                        StrongCombination combination = StrongCombination::kHalfMin);

// Bucket, pre-filter, test and apply BH separately within each family.
// Entries are sorted by (drug_a, drug_b, outcome).
ReferenceSet classify_tables(std::span<const ContingencyTable> tables, const BuildOptions& options,
                             BuildReport* report = nullptr);

// Full pipeline from raw arms: drug mapping, arm filters, outcome mapping,
// aggregation, then classify_tables.
ReferenceSet build(std::span<const RawArm> arms, const DrugDictionary& drugs, const OutcomeDictionary& outcomes,
                   const BuildOptions& options, BuildReport* report = nullptr);

// File-level build; provenance carries input checksums and parameters.
ReferenceSet build_from_files(const std::string& dump_path, const std::string& drug_dictionary_path,
                              const std::string& outcome_dictionary_path, const BuildOptions& options,
                              BuildReport* report = nullptr);

// Line-delimited JSON: a header object carrying provenance, then one entry per
// line.
std::string serialize(const ReferenceSet& set);

// Accepts files written by serialize() and external control sets, where a
// missing header is allowed, "positive"/"negative" labels map to strong/weak,
// and counts, p-values and direction may be absent.
ReferenceSet parse_reference_set(std::istream& in);
ReferenceSet load_reference_set(const std::string& path);

}  // namespace trialref
