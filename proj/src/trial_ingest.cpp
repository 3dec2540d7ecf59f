#include "trialref/trial_ingest.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <utility>

#include "trialref/common.h"
#include "trialref/io.h"

namespace trialref {
namespace {

using nlohmann::json;

const std::set<std::string> kDumpFields = {"trial_id",          "arm_id",        "arm_name", "drug_text",
                                           "participant_count", "outcome_events"};

std::string require_string(const json& record, const char* key) {
  const auto& value = record.at(key);
  if (!value.is_string()) throw std::invalid_argument(std::string(key) + " must be a string");
  return value.get<std::string>();
}

std::int64_t require_count(const json& value, const std::string& what) {
  if (!value.is_number_integer()) throw std::invalid_argument(what + " must be an integer");
  auto count = value.get<std::int64_t>();
  if (count < 0) throw std::invalid_argument(what + " must be non-negative");
  return count;
}

RawArm arm_from_json(const json& record) {
  if (!record.is_object()) throw std::invalid_argument("record is not an object");
  for (const auto& field : kDumpFields) {
    if (!record.contains(field)) throw std::invalid_argument("missing field " + field);
  }
  for (const auto& item : record.items()) {
    if (!kDumpFields.count(item.key())) throw std::invalid_argument("unexpected field " + item.key());
  }
  RawArm arm;
  arm.trial_id = require_string(record, "trial_id");
  arm.arm_id = require_string(record, "arm_id");
  arm.arm_name = require_string(record, "arm_name");
  arm.drug_text = require_string(record, "drug_text");
  arm.participant_count = require_count(record.at("participant_count"), "participant_count");
  const auto& events = record.at("outcome_events");
  if (!events.is_array()) throw std::invalid_argument("outcome_events must be a list");
  for (const auto& event : events) {
    if (!event.is_object() || !event.contains("term") || !event.contains("count") || event.size() != 2) {
      throw std::invalid_argument("outcome_events entries must be {term, count}");
    }
    OutcomeCount oc;
    oc.term = require_string(event, "term");
    oc.count = require_count(event.at("count"), "count");
    if (oc.count > arm.participant_count) {
      throw std::invalid_argument("event count " + std::to_string(oc.count) + " for term " + oc.term +
                                  " exceeds participant_count " + std::to_string(arm.participant_count));
    }
    arm.outcome_events.push_back(std::move(oc));
  }
  return arm;
}

bool is_token_aligned_match(const std::string& text, const std::string& pattern) {
  if (pattern.empty()) return false;
  std::size_t pos = 0;
  while ((pos = text.find(pattern, pos)) != std::string::npos) {
    bool left = pos == 0 || text[pos - 1] == ' ';
    auto end = pos + pattern.size();
    bool right = end == text.size() || text[end] == ' ';
    if (left && right) return true;
    ++pos;
  }
  return false;
}

std::vector<std::string> read_tsv_rows(std::istream& in, std::size_t columns, const std::string& what,
                                       std::vector<std::vector<std::string>>& rows) {
  std::string line;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != columns) {
      throw InputError(what + " line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                       " tab-separated columns");
    }
    if (header.empty()) {
      header = fields;
      continue;
    }
    rows.push_back(std::move(fields));
  }
  if (header.empty()) throw InputError(what + ": missing header row");
  return header;
}

}  // namespace

ParseResult parse_dump(std::istream& in) {
  ParseResult result;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      result.diagnostics.push_back({line_no, std::string("invalid JSON: ") + e.what()});
      continue;
    }
    // Duplicates are keyed on the identifiers alone, even for malformed rows.
    if (record.is_object() && record.contains("trial_id") && record.contains("arm_id") &&
        record["trial_id"].is_string() && record["arm_id"].is_string()) {
      auto key = std::make_pair(record["trial_id"].get<std::string>(), record["arm_id"].get<std::string>());
      if (!seen.insert(key).second) {
        throw InputError("line " + std::to_string(line_no) + ": duplicate arm (" + key.first + ", " +
                         key.second + ")");
      }
    }
    try {
      result.arms.push_back(arm_from_json(record));
    } catch (const std::exception& e) {
      result.diagnostics.push_back({line_no, e.what()});
    }
  }
  return result;
}

std::string serialize_arm(const RawArm& arm) {
  nlohmann::ordered_json record;
  record["trial_id"] = arm.trial_id;
  record["arm_id"] = arm.arm_id;
  record["arm_name"] = arm.arm_name;
  record["drug_text"] = arm.drug_text;
  record["participant_count"] = arm.participant_count;
  auto events = nlohmann::ordered_json::array();
  for (const auto& oc : arm.outcome_events) {
    events.push_back({{"term", oc.term}, {"count", oc.count}});
  }
  record["outcome_events"] = std::move(events);
  return record.dump();
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (c < 0x80 && std::ispunct(c) && c != '+') continue;
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

DrugDictionary DrugDictionary::parse(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  read_tsv_rows(in, 3, "drug dictionary", rows);
  DrugDictionary dictionary;
  for (const auto& row : rows) {
    int score = 0;
    try {
      std::size_t used = 0;
      score = std::stoi(row[2], &used);
      if (used != trim(row[2]).size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError("drug dictionary: bad match_score '" + row[2] + "'");
    }
    dictionary.add(row[0], row[1], score);
  }
  return dictionary;
}

DrugDictionary DrugDictionary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open drug dictionary " + path);
  return parse(in);
}

void DrugDictionary::add(std::string_view pattern, std::string ingredient_id, int match_score) {
  if (match_score < 0 || match_score > 100) {
    throw InputError("drug dictionary: match_score out of [0,100] for pattern '" + std::string(pattern) + "'");
  }
  auto key = normalize_text(pattern);
  if (key.empty()) throw InputError("drug dictionary: empty pattern");
  auto [it, inserted] = patterns_.try_emplace(key);
  if (!inserted && it->second.score != match_score) {
    throw InputError("drug dictionary: conflicting scores for pattern '" + key + "'");
  }
  it->second.score = match_score;
  it->second.ingredients.insert(trim(ingredient_id));
}

std::set<std::string> DrugDictionary::lookup(std::string_view drug_text) const {
  auto text = normalize_text(drug_text);
  const std::string* best_key = nullptr;
  const Pattern* best = nullptr;
  for (const auto& [key, pattern] : patterns_) {
    if (pattern.score < kMinMatchScore || !is_token_aligned_match(text, key)) continue;
    bool better = best == nullptr || pattern.score > best->score ||
                  (pattern.score == best->score && key.size() > best_key->size());
    if (better) {
      best = &pattern;
      best_key = &key;
    }
  }
  return best ? best->ingredients : std::set<std::string>{};
}

OutcomeDictionary OutcomeDictionary::parse(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  read_tsv_rows(in, 2, "outcome dictionary", rows);
  OutcomeDictionary dictionary;
  for (auto& row : rows) dictionary.add(trim(row[0]), trim(row[1]));
  return dictionary;
}

OutcomeDictionary OutcomeDictionary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open outcome dictionary " + path);
  return parse(in);
}

void OutcomeDictionary::add(std::string source, std::string target) {
  if (source.empty() || target.empty()) throw InputError("outcome dictionary: empty code");
  auto [it, inserted] = rows_.try_emplace(source, target);
  if (!inserted && it->second != target) {
    throw InputError("outcome dictionary: source term '" + source + "' maps to more than one target");
  }
}

std::optional<std::string> OutcomeDictionary::lookup(const std::string& source) const {
  auto it = rows_.find(source);
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

std::set<std::string> map_drug(std::string_view drug_text, const DrugDictionary& dictionary) {
  return dictionary.lookup(drug_text);
}

ArmRecord map_arm(const RawArm& arm, const DrugDictionary& dictionary) {
  ArmRecord record;
  record.trial_id = arm.trial_id;
  record.arm_id = arm.arm_id;
  record.arm_name = arm.arm_name;
  record.drug_text = arm.drug_text;
  record.ingredients = map_drug(arm.drug_text, dictionary);
  record.participant_count = arm.participant_count;
  for (const auto& oc : arm.outcome_events) record.outcome_events[oc.term] += oc.count;
  return record;
}

FilterResult filter_arms(std::span<const ArmRecord> arms) {
  FilterResult result;
  for (const char* rule : {"below_min_participants", "plus_sign", "no_ingredient", "multi_ingredient"}) {
    result.dropped[rule] = 0;
  }
  for (const auto& arm : arms) {
    const char* rule = nullptr;
    if (arm.participant_count < kMinArmParticipants) {
      rule = "below_min_participants";
    } else if (arm.arm_name.find('+') != std::string::npos || arm.drug_text.find('+') != std::string::npos) {
      rule = "plus_sign";
    } else if (arm.ingredients.empty()) {
      rule = "no_ingredient";
    } else if (arm.ingredients.size() > 1) {
      rule = "multi_ingredient";
    }
    if (rule) {
      ++result.dropped[rule];
    } else {
      result.kept.push_back(arm);
    }
  }
  return result;
}

ArmRecord map_outcomes(const ArmRecord& arm, const OutcomeDictionary& dictionary) {
  ArmRecord out = arm;
  out.outcome_events.clear();
  for (const auto& [term, count] : arm.outcome_events) {
    if (auto target = dictionary.lookup(term)) out.outcome_events[*target] += count;
  }
  return out;
}

std::vector<ContingencyTable> aggregate(std::span<const ArmRecord> arms) {
  struct Pooled {
    std::int64_t participants = 0;
    std::map<std::string, std::int64_t> events;
  };
  // trial -> ingredient -> pooled dosage arms
  std::map<std::string, std::map<std::string, Pooled>> trials;
  for (const auto& arm : arms) {
    if (arm.ingredients.size() != 1) {
      throw std::invalid_argument("aggregate: arm " + arm.trial_id + "/" + arm.arm_id +
                                  " does not map to exactly one ingredient");
    }
    auto& pooled = trials[arm.trial_id][arm.ingredient()];
    pooled.participants += arm.participant_count;
    for (const auto& [code, count] : arm.outcome_events) pooled.events[code] += count;
  }

  std::map<std::tuple<std::string, std::string, std::string>, ContingencyTable> tables;
  for (const auto& [trial_id, drugs] : trials) {
    for (auto x = drugs.begin(); x != drugs.end(); ++x) {
      for (auto y = std::next(x); y != drugs.end(); ++y) {
        // std::map iteration gives x->first < y->first: canonical order.
        std::set<std::string> outcomes;
        for (const auto& [code, count] : x->second.events) outcomes.insert(code);
        for (const auto& [code, count] : y->second.events) outcomes.insert(code);
        for (const auto& code : outcomes) {
          auto& table = tables[{x->first, y->first, code}];
          table.drug_a = x->first;
          table.drug_b = y->first;
          table.outcome = code;
          auto ea = x->second.events.find(code);
          auto eb = y->second.events.find(code);
          table.a += ea == x->second.events.end() ? 0 : ea->second;
          table.b += eb == y->second.events.end() ? 0 : eb->second;
          table.n1 += x->second.participants;
          table.n2 += y->second.participants;
        }
      }
    }
  }
  std::vector<ContingencyTable> out;
  out.reserve(tables.size());
  for (auto& [key, table] : tables) out.push_back(std::move(table));
  return out;
}

}  // namespace trialref
