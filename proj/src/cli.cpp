#include "trialref/cli.h"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "trialref/cohort.h"
#include "trialref/common.h"
#include "trialref/estimators.h"
#include "trialref/eval.h"
#include "trialref/io.h"
#include "trialref/random.h"
#include "trialref/refset.h"
#include "trialref/synthgen.h"

namespace fs = std::filesystem;

namespace trialref {
namespace {

std::string provenance_comments(const std::vector<std::pair<std::string, std::string>>& items) {
  std::string s = "# tool_version=" + std::string(kToolVersion) + "\n";
  for (const auto& [k, v] : items) s += "# " + k + "=" + v + "\n";
  return s;
}

std::uint64_t parse_seed(const std::string& text) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InputError("invalid seed '" + text + "'");
  }
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

struct BuildRefsetArgs {
  std::string dump, drug_dict, outcome_dict, out;
  double alpha = 0.05;
  bool no_prefilter = false;
  std::string strong_combination = "half_min";
};

int cmd_build_refset(const BuildRefsetArgs& args, std::ostream& out) {
  BuildOptions options;
  options.alpha = args.alpha;
  options.prefilter = !args.no_prefilter;
  if (args.strong_combination == "half_min") options.strong_combination = StrongCombination::kHalfMin;
  else if (args.strong_combination == "double_min") options.strong_combination = StrongCombination::kDoubleMin;
  else throw InputError("unknown strong combination '" + args.strong_combination + "'");
  if (!(options.alpha > 0 && options.alpha < 1)) throw InputError("alpha must be in (0, 1)");

  BuildReport report;
  auto set = build_from_files(args.dump, args.drug_dict, args.outcome_dict, options, &report);
  const fs::path out_path(args.out);
  ensure_parent(out_path);
  auto refset_text = serialize(set);
  std::vector<std::pair<std::string, std::string>> inputs = {
      {"dump_sha256", set.provenance["dump_sha256"]},
      {"drug_dictionary_sha256", set.provenance["drug_dictionary_sha256"]},
      {"outcome_dictionary_sha256", set.provenance["outcome_dictionary_sha256"]},
      {"refset_sha256", sha256_hex(refset_text)}};

  std::string drops = provenance_comments(inputs) + "rule\tcount\n";
  for (const auto& [rule, n] : report.counts) drops += rule + "\t" + std::to_string(n) + "\n";
  std::string diagnostics = provenance_comments(inputs) + "line\tmessage\n";
  for (const auto& d : report.diagnostics) diagnostics += std::to_string(d.line) + "\t" + d.message + "\n";

  write_file_atomic(out_path, refset_text);
  write_file_atomic(out_path.string() + ".drops.tsv", drops);
  write_file_atomic(out_path.string() + ".diagnostics.tsv", diagnostics);
  out << "reference set: " << set.count(Label::kStrong) << " strong, " << set.count(Label::kWeak) << " weak -> "
      << args.out << "\n";
  return 0;
}

struct SimulateArgs {
  std::string scenario, seed, out_dir;
};

int cmd_simulate(const SimulateArgs& args, std::ostream& out) {
  auto text = read_file(args.scenario);
  auto plan = parse_scenario(text);
  auto files = simulate(plan, parse_seed(args.seed), sha256_hex(text));
  fs::path dir(args.out_dir);
  fs::create_directories(dir);
  write_file_atomic(dir / "patients.jsonl", files.patients);
  write_file_atomic(dir / "vocabulary.tsv", files.vocabulary);
  write_file_atomic(dir / "dense_features.tsv", files.dense_features);
  write_file_atomic(dir / "ground_truth.json", files.ground_truth);
  write_file_atomic(dir / "trials.jsonl", files.trials);
  write_file_atomic(dir / "drug_dictionary.tsv", files.drug_dictionary);
  write_file_atomic(dir / "outcome_dictionary.tsv", files.outcome_dictionary);
  out << "simulated " << plan.comparisons.size() << " comparison(s) -> " << args.out_dir << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string refset, db, vocabulary, config, out, dense_features, methods;
  bool ablation = false;
  bool resume = false;
  unsigned jobs = 0;
};

const std::vector<std::string> kRunConfigKeys = {"seed", "min_per_arm", "max_per_arm", "exclude_prior_outcome"};

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
  const auto refset_text = read_file(args.refset);
  const auto config_text = read_file(args.config);
  const auto vocabulary_text = read_file(args.vocabulary);
  const auto db_sha = sha256_file(args.db);

  auto values = parse_key_values(config_text);
  auto method_config = parse_method_config(values, kRunConfigKeys);
  CohortOptions cohort_options;
  std::optional<std::uint64_t> seed;
  for (const auto& [key, value] : values) {
    if (key == "seed") seed = parse_seed(value);
    else if (key == "min_per_arm") cohort_options.min_per_arm = parse_seed(value);
    else if (key == "max_per_arm") cohort_options.max_per_arm = parse_seed(value);
    else if (key == "exclude_prior_outcome") {
      if (value != "true" && value != "false") throw InputError("exclude_prior_outcome must be true or false");
      cohort_options.exclude_prior_outcome = value == "true";
    }
  }
  if (!seed) throw InputError("run config " + args.config + " has no seed");
  if (!args.methods.empty()) {
    method_config.methods.clear();
    for (const auto& id : split(args.methods, ',')) {
      auto t = trim(id);
      if (t.empty()) continue;
      method_info(t);
      method_config.methods.push_back(t);
    }
  }
  if (args.ablation) method_config.include_ablation = true;
  const auto selected = method_config.selected();
  if (selected.empty()) throw InputError("no methods selected");

  std::istringstream refset_in(refset_text);
  auto reference = parse_reference_set(refset_in);
  std::istringstream vocabulary_in(vocabulary_text);
  auto vocabulary = Vocabulary::parse(vocabulary_in);
  auto db = PatientDb::load(args.db);
  const auto vocabulary_sha = sha256_hex(vocabulary_text);
  auto recorded = db.header().find("vocabulary_sha256");
  if (recorded != db.header().end() && recorded->second != vocabulary_sha) {
    throw ProvenanceError("vocabulary " + args.vocabulary + " does not match the one recorded in " + args.db);
  }
  std::optional<DenseFeatures> dense;
  std::string dense_sha;
  if (!args.dense_features.empty()) {
    dense = DenseFeatures::load(args.dense_features);
    dense_sha = sha256_file(args.dense_features);
  }

  std::map<std::string, std::string> header = {{"tool_version", kToolVersion},
                                               {"refset_sha256", sha256_hex(refset_text)},
                                               {"db_sha256", db_sha},
                                               {"vocabulary_sha256", vocabulary_sha},
                                               {"config_sha256", sha256_hex(config_text)},
                                               {"seed", std::to_string(*seed)}};
  std::string method_list;
  for (const auto& id : selected) method_list += (method_list.empty() ? "" : ",") + id;
  header["methods"] = method_list;
  if (dense) header["dense_features_sha256"] = dense_sha;
  const auto header_line = serialize_estimates_header(header);

  const fs::path out_path(args.out);
  ensure_parent(out_path);
  const fs::path parts_dir = out_path.string() + ".parts";
  const auto run_id = sha256_hex(header_line).substr(0, 16);
  if (!args.resume && fs::exists(parts_dir)) fs::remove_all(parts_dir);
  fs::create_directories(parts_dir);
  auto part_path = [&](std::size_t i) {
    char name[64];
    std::snprintf(name, sizeof(name), "entry_%06zu_", i);
    return parts_dir / (std::string(name) + run_id + ".jsonl");
  };

  const auto cohort_seed = derive_seed(*seed, "cohort");
  auto evaluate_entry = [&](std::size_t i) {
    const auto& entry = reference.entries[i];
    CohortTarget target{entry.drug_a, entry.drug_b, entry.outcome};
    auto built = build_cohort(db, vocabulary, target, cohort_seed, cohort_options, dense ? &*dense : nullptr);
    std::string lines;
    auto emit = [&](EstimateRecord record) {
      record.drug_a = entry.drug_a;
      record.drug_b = entry.drug_b;
      record.outcome = entry.outcome;
      lines += serialize_estimate(record) + "\n";
    };
    if (auto* skip = std::get_if<CohortSkip>(&built)) {
      for (const auto& id : selected) {
        EstimateRecord r;
        r.estimate.method_id = id;
        r.estimate.scale = method_info(id).scale;
        r.estimate.point = r.estimate.std_error = r.estimate.std_error_model = std::nan("");
        r.cohort_skipped = true;
        r.skip_reason = skip->reason;
        emit(std::move(r));
      }
    } else {
      auto data = CohortData::from_cohort(std::get<Cohort>(built));
      for (auto& e : run_all_methods(data, method_config, derive_seed(*seed, "entry:" + entry.key()))) {
        EstimateRecord r;
        r.estimate = std::move(e);
        emit(std::move(r));
      }
    }
    write_file_atomic(part_path(i), lines);
  };

  const std::size_t n = reference.entries.size();
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(args.resume && fs::exists(part_path(i)))) pending.push_back(i);
  }
  unsigned jobs = args.jobs ? args.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(1, pending.size())));
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      auto k = next.fetch_add(1);
      if (k >= pending.size()) return;
      try {
        evaluate_entry(pending[k]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = pending.size();
        return;
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::string combined = header_line + "\n";
  for (std::size_t i = 0; i < n; ++i) combined += read_file(part_path(i));
  write_file_atomic(out_path, combined);
  fs::remove_all(parts_dir);
  out << "evaluated " << n << " entries x " << selected.size() << " methods -> " << args.out << "\n";
  return 0;
}

struct ReportArgs {
  std::string estimates, refset, out;
  std::string thresholds = "2,1.5,1.25";
  std::string rmst_thresholds;
};

int cmd_report(const ReportArgs& args, std::ostream& out) {
  const auto estimates_text = read_file(args.estimates);
  const auto refset_text = read_file(args.refset);
  std::istringstream estimates_in(estimates_text);
  auto estimates = parse_estimates(estimates_in);
  if (estimates.records.empty()) throw InputError("estimates file " + args.estimates + " has no rows");
  std::istringstream refset_in(refset_text);
  auto reference = parse_reference_set(refset_in);
  const auto refset_sha = sha256_hex(refset_text);
  auto recorded = estimates.header.find("refset_sha256");
  if (recorded != estimates.header.end() && recorded->second != refset_sha) {
    throw ProvenanceError("estimates " + args.estimates + " were produced from a different reference set");
  }
  std::set<std::string> keys;
  for (const auto& e : reference.entries) keys.insert(e.key());
  for (const auto& r : estimates.records) {
    if (!keys.count(r.entry_key())) throw ProvenanceError("estimate for entry not in reference set: " + r.entry_key());
  }

  auto hr_thresholds = parse_double_list(args.thresholds);
  auto rmst_thresholds = parse_double_list(args.rmst_thresholds);
  for (double t : hr_thresholds) magnitude_cutoff(EffectScale::kLogHazardRatio, t);
  for (double t : rmst_thresholds) magnitude_cutoff(EffectScale::kRmstDifferenceDays, t);

  std::vector<std::string> order;
  std::map<std::string, std::vector<Prediction>> by_method;
  for (const auto& r : estimates.records) {
    const auto& id = r.estimate.method_id;
    if (!by_method.count(id)) order.push_back(id);
    // The label is recomputed per threshold below; any valid threshold works here.
    double probe = r.estimate.scale == EffectScale::kLogHazardRatio ? 2.0 : 1.0;
    by_method[id].push_back(predict(r.estimate, r.entry_key(), probe, r.cohort_skipped));
  }
  std::sort(order.begin(), order.end(), [](const std::string& x, const std::string& y) {
    auto rank = [](const std::string& id) {
      const auto& reg = method_registry();
      for (std::size_t i = 0; i < reg.size(); ++i) {
        if (reg[i].id == id) return i;
      }
      return reg.size();
    };
    return std::make_pair(rank(x), x) < std::make_pair(rank(y), y);
  });

  const auto comments = provenance_comments({{"estimates_sha256", sha256_hex(estimates_text)},
                                             {"refset_sha256", refset_sha}});
  std::string combined = comments + metrics_tsv_header() + "\n";
  const fs::path out_path(args.out);
  ensure_parent(out_path);
  std::vector<std::pair<fs::path, std::string>> per_method;
  for (const auto& id : order) {
    const auto& preds = by_method[id];
    const auto& fixed = preds.front().scale == EffectScale::kLogHazardRatio ? hr_thresholds : rmst_thresholds;
    auto rows = pr_curve(preds, reference, fixed);
    std::string body;
    for (auto& row : rows) {
      row.method_id = id;
      body += metrics_tsv_row(row) + "\n";
    }
    combined += body;
    per_method.emplace_back(out_path.string() + "." + id + ".tsv", comments + metrics_tsv_header() + "\n" + body);
  }
  write_file_atomic(out_path, combined);
  for (const auto& [path, text] : per_method) write_file_atomic(path, text);
  out << "report for " << order.size() << " methods -> " << args.out << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reference-set construction and observational method benchmarking"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  BuildRefsetArgs build_args;
  auto* build_cmd = app.add_subcommand("build-refset", "Build a strong/weak reference set from a trial dump");
  build_cmd->add_option("--dump", build_args.dump, "Trial arm dump (JSONL)")->required();
  build_cmd->add_option("--drug-dict", build_args.drug_dict, "Drug dictionary (TSV)")->required();
  build_cmd->add_option("--outcome-dict", build_args.outcome_dict, "Outcome dictionary (TSV)")->required();
  build_cmd->add_option("--alpha", build_args.alpha, "BH false discovery rate");
  build_cmd->add_option("--out", build_args.out, "Reference set output path")->required();
  build_cmd->add_flag("--no-prefilter", build_args.no_prefilter, "Test every candidate table");
  build_cmd->add_option("--strong-combination", build_args.strong_combination, "half_min or double_min");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic patient database, trials and ground truth");
  sim_cmd->add_option("--scenario", sim_args.scenario, "Scenario file")->required();
  sim_cmd->add_option("--seed", sim_args.seed, "Root seed")->required();
  sim_cmd->add_option("--out-dir", sim_args.out_dir, "Output directory")->required();

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Run the estimators for every reference entry");
  eval_cmd->add_option("--refset", eval_args.refset, "Reference set")->required();
  eval_cmd->add_option("--db", eval_args.db, "Patient database (JSONL)")->required();
  eval_cmd->add_option("--vocabulary", eval_args.vocabulary, "Feature vocabulary (TSV)")->required();
  eval_cmd->add_option("--config", eval_args.config, "Run config (key = value, must set seed)")->required();
  eval_cmd->add_option("--out", eval_args.out, "Estimates output path")->required();
  eval_cmd->add_option("--dense-features", eval_args.dense_features, "Dense feature file replacing count features");
  eval_cmd->add_option("--methods", eval_args.methods, "Comma-separated method ids");
  eval_cmd->add_flag("--ablation-standard-ipw", eval_args.ablation, "Also run standard IPW Cox");
  eval_cmd->add_flag("--resume", eval_args.resume, "Reuse finished per-entry outputs");
  eval_cmd->add_option("--jobs", eval_args.jobs, "Worker threads (default: available cores)");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Score estimates against the reference set");
  report_cmd->add_option("--estimates", report_args.estimates, "Estimates file")->required();
  report_cmd->add_option("--refset", report_args.refset, "Reference set")->required();
  report_cmd->add_option("--out", report_args.out, "Metrics output path")->required();
  report_cmd->add_option("--thresholds", report_args.thresholds, "Hazard-ratio thresholds");
  report_cmd->add_option("--rmst-thresholds", report_args.rmst_thresholds, "RMST thresholds in days");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*build_cmd) return cmd_build_refset(build_args, out);
    if (*sim_cmd) return cmd_simulate(sim_args, out);
    if (*eval_cmd) return cmd_evaluate(eval_args, out);
    if (*report_cmd) return cmd_report(report_args, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ProvenanceError& e) {
    err << "provenance mismatch: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 4;
}

}  // namespace trialref
