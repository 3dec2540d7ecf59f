#include "trialref/refset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <tuple>

#include "trialref/io.h"

namespace trialref {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const char* kRefsetFormat = "trialref.refset.v1";

std::string combination_name(StrongCombination c) {
  return c == StrongCombination::kHalfMin ? "half_min" : "double_min";
}

void bump(BuildReport* report, const std::string& key, std::size_t by = 1) {
  if (report) report->counts[key] += by;
}

json number_or_null(double value) { return std::isfinite(value) ? json(value) : json(nullptr); }

}  // namespace

std::size_t ReferenceSet::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const auto& e) { return e.label == label; }));
}

Buckets bucket(std::span<const ContingencyTable> tables) {
  Buckets buckets;
  for (const auto& table : tables) {
    (family_of(odds_ratio(table)) == Family::kWeak ? buckets.weak : buckets.strong).push_back(table);
  }
  return buckets;
}

std::vector<ContingencyTable> prefilter(std::span<const ContingencyTable> candidates, Family family, double alpha,
                                        StrongCombination combination) {
  std::vector<ContingencyTable> kept;
  for (const auto& table : candidates) {
    if (min_achievable_p(table.n1, table.n2, table.a + table.b, family, combination) < alpha) {
      kept.push_back(table);
    }
  }
  return kept;
}

ReferenceSet classify_tables(std::span<const ContingencyTable> tables, const BuildOptions& options,
                             BuildReport* report) {
  ReferenceSet set;
  auto buckets = bucket(tables);
  bump(report, "tables", tables.size());

  auto run_family = [&](std::vector<ContingencyTable> candidates, Family family, const std::string& name) {
    bump(report, "candidates_" + name, candidates.size());
    if (options.prefilter) {
      auto kept = prefilter(candidates, family, options.alpha, options.strong_combination);
      bump(report, "prefilter_dropped_" + name, candidates.size() - kept.size());
      candidates = std::move(kept);
    }
    bump(report, "tested_" + name, candidates.size());
    std::vector<double> p(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      p[i] = p_family(margins_of(candidates[i]), family, options.strong_combination);
    }
    auto q = bh_adjust(p);
    auto rejected = bh_reject(p, options.alpha);
    bump(report, "significant_" + name, rejected.size());
    for (auto i : rejected) {
      const auto& t = candidates[i];
      ReferenceEntry entry;
      entry.drug_a = t.drug_a;
      entry.drug_b = t.drug_b;
      entry.outcome = t.outcome;
      entry.pooled_or = odds_ratio(t);
      entry.label = family == Family::kStrong ? Label::kStrong : Label::kWeak;
      if (family == Family::kStrong) {
        entry.direction = entry.pooled_or > 1.0 ? Direction::kAHigher : Direction::kBHigher;
      }
      entry.p_value = p[i];
      entry.q_value = q[i];
      entry.a = t.a;
      entry.n1 = t.n1;
      entry.b = t.b;
      entry.n2 = t.n2;
      set.entries.push_back(std::move(entry));
    }
  };
  run_family(std::move(buckets.strong), Family::kStrong, "strong");
  run_family(std::move(buckets.weak), Family::kWeak, "weak");

  std::sort(set.entries.begin(), set.entries.end(), [](const auto& x, const auto& y) {
    return std::tie(x.drug_a, x.drug_b, x.outcome) < std::tie(y.drug_a, y.drug_b, y.outcome);
  });
  set.provenance["alpha"] = format_double(options.alpha);
  set.provenance["weak_band"] = format_double(kWeakLowerOr) + "," + format_double(kWeakUpperOr);
  set.provenance["strong_combination"] = combination_name(options.strong_combination);
  set.provenance["prefilter"] = options.prefilter ? "on" : "off";
  return set;
}

ReferenceSet build(std::span<const RawArm> arms, const DrugDictionary& drugs, const OutcomeDictionary& outcomes,
                   const BuildOptions& options, BuildReport* report) {
  std::vector<ArmRecord> mapped;
  mapped.reserve(arms.size());
  for (const auto& arm : arms) mapped.push_back(map_arm(arm, drugs));
  auto filtered = filter_arms(mapped);
  bump(report, "arms_in", arms.size());
  for (const auto& [rule, count] : filtered.dropped) bump(report, "arm_dropped_" + rule, count);
  bump(report, "arms_kept", filtered.kept.size());
  std::vector<ArmRecord> records;
  records.reserve(filtered.kept.size());
  for (const auto& arm : filtered.kept) records.push_back(map_outcomes(arm, outcomes));
  auto tables = aggregate(records);
  return classify_tables(tables, options, report);
}

ReferenceSet build_from_files(const std::string& dump_path, const std::string& drug_dictionary_path,
                              const std::string& outcome_dictionary_path, const BuildOptions& options,
                              BuildReport* report) {
  auto dump_text = read_file(dump_path);
  auto drug_text = read_file(drug_dictionary_path);
  auto outcome_text = read_file(outcome_dictionary_path);
  std::istringstream drug_in(drug_text), outcome_in(outcome_text), dump_in(dump_text);
  auto drugs = DrugDictionary::parse(drug_in);
  auto outcomes = OutcomeDictionary::parse(outcome_in);
  auto parsed = parse_dump(dump_in);
  if (report) {
    report->diagnostics = parsed.diagnostics;
    report->counts["parse_errors"] += parsed.diagnostics.size();
  }
  auto set = build(parsed.arms, drugs, outcomes, options, report);
  set.provenance["dump_sha256"] = sha256_hex(dump_text);
  set.provenance["drug_dictionary_sha256"] = sha256_hex(drug_text);
  set.provenance["outcome_dictionary_sha256"] = sha256_hex(outcome_text);
  return set;
}

std::string serialize(const ReferenceSet& set) {
  std::ostringstream out;
  ordered_json header;
  header["type"] = "refset_header";
  header["format"] = kRefsetFormat;
  header["tool_version"] = kToolVersion;
  header["provenance"] = set.provenance;
  header["n_strong"] = set.count(Label::kStrong);
  header["n_weak"] = set.count(Label::kWeak);
  out << header.dump() << '\n';
  for (const auto& e : set.entries) {
    ordered_json row;
    row["drug_a"] = e.drug_a;
    row["drug_b"] = e.drug_b;
    row["outcome"] = e.outcome;
    row["label"] = to_string(e.label);
    row["direction"] = to_string(e.direction);
    row["pooled_or"] = number_or_null(e.pooled_or);
    row["p_value"] = e.p_value;
    row["q_value"] = e.q_value;
    row["a"] = e.a;
    row["n1"] = e.n1;
    row["b"] = e.b;
    row["n2"] = e.n2;
    out << row.dump() << '\n';
  }
  return out.str();
}

ReferenceSet parse_reference_set(std::istream& in) {
  ReferenceSet set;
  std::set<std::string> keys;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto where = "reference set line " + std::to_string(line_no) + ": ";
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError(where + e.what());
    }
    if (!row.is_object()) throw InputError(where + "not an object");
    if (row.value("type", "") == "refset_header") {
      if (row.contains("provenance")) {
        for (const auto& [k, v] : row["provenance"].items()) {
          set.provenance[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
      }
      continue;
    }
    try {
      ReferenceEntry e;
      e.drug_a = row.at("drug_a").get<std::string>();
      e.drug_b = row.at("drug_b").get<std::string>();
      e.outcome = row.at("outcome").get<std::string>();
      e.label = parse_label(row.at("label").get<std::string>());
      e.direction = parse_direction(row.value("direction", std::string("none")));
      if (e.label == Label::kWeak) e.direction = Direction::kNone;
      auto number = [&](const char* key, double fallback) {
        return row.contains(key) && row[key].is_number() ? row[key].get<double>() : fallback;
      };
      e.pooled_or = number("pooled_or", std::numeric_limits<double>::quiet_NaN());
      if (!row.contains("pooled_or") || row["pooled_or"].is_null()) {
        e.pooled_or = e.direction == Direction::kBHigher ? 0.0
                      : e.direction == Direction::kAHigher ? std::numeric_limits<double>::infinity()
                                                           : std::numeric_limits<double>::quiet_NaN();
      }
      e.p_value = number("p_value", std::numeric_limits<double>::quiet_NaN());
      e.q_value = number("q_value", std::numeric_limits<double>::quiet_NaN());
      e.a = row.value("a", std::int64_t{0});
      e.n1 = row.value("n1", std::int64_t{0});
      e.b = row.value("b", std::int64_t{0});
      e.n2 = row.value("n2", std::int64_t{0});
      if (!keys.insert(e.key()).second) throw InputError("duplicate entry " + e.key());
      set.entries.push_back(std::move(e));
    } catch (const InputError& e) {
      throw InputError(where + e.what());
    } catch (const json::exception& e) {
      throw InputError(where + e.what());
    }
  }
  return set;
}

ReferenceSet load_reference_set(const std::string& path) {
  std::istringstream in(read_file(path));
  return parse_reference_set(in);
}

}  // namespace trialref
