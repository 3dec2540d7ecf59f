#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "trialref/cli.h"
#include "trialref/common.h"
#include "trialref/estimators.h"
#include "trialref/exact_stats.h"
#include "trialref/propensity.h"
#include "trialref/refset.h"
#include "trialref/survival.h"
#include "trialref/synthgen.h"

namespace py = pybind11;
using namespace trialref;

namespace {

StrongCombination parse_combination(const std::string& name) {
  if (name == "half_min") return StrongCombination::kHalfMin;
  if (name == "double_min") return StrongCombination::kDoubleMin;
  throw InputError("strong_combination must be half_min or double_min");
}

py::dict entry_dict(const ReferenceEntry& e) {
  py::dict d;
  d["drug_a"] = e.drug_a;
  d["drug_b"] = e.drug_b;
  d["outcome"] = e.outcome;
  d["label"] = to_string(e.label);
  d["direction"] = to_string(e.direction);
  d["pooled_or"] = e.pooled_or;
  d["p_value"] = e.p_value;
  d["q_value"] = e.q_value;
  d["a"] = e.a;
  d["n1"] = e.n1;
  d["b"] = e.b;
  d["n2"] = e.n2;
  return d;
}

py::dict estimate_dict(const EffectEstimate& e) {
  py::dict d;
  d["method_id"] = e.method_id;
  d["scale"] = to_string(e.scale);
  d["point"] = e.point;
  d["std_error"] = e.std_error;
  d["std_error_model"] = e.std_error_model;
  d["converged"] = e.converged;
  d["n_used"] = e.n_used;
  d["note"] = e.note;
  return d;
}

std::vector<double> as_weights(const std::optional<std::vector<double>>& w) { return w ? *w : std::vector<double>{}; }

}  // namespace

PYBIND11_MODULE(trialref, m) {
  m.doc() = "Trial-derived reference sets and observational estimator benchmarking";
  m.attr("__version__") = kToolVersion;

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ProvenanceError>(m, "ProvenanceError", PyExc_RuntimeError);

  m.def("odds_ratio", py::overload_cast<std::int64_t, std::int64_t, std::int64_t, std::int64_t>(&odds_ratio),
        py::arg("a"), py::arg("n1"), py::arg("b"), py::arg("n2"));
  m.def(
      "fisher_one_sided_p",
      [](std::int64_t a, std::int64_t n1, std::int64_t b, std::int64_t n2, double psi, bool upper) {
        return fisher_one_sided_p({n1, n2, a + b, a}, {psi, upper ? Tail::kUpper : Tail::kLower});
      },
      py::arg("a"), py::arg("n1"), py::arg("b"), py::arg("n2"), py::arg("psi") = 1.0, py::arg("upper") = true);
  m.def(
      "p_weak",
      [](std::int64_t a, std::int64_t n1, std::int64_t b, std::int64_t n2) { return p_weak({n1, n2, a + b, a}); },
      py::arg("a"), py::arg("n1"), py::arg("b"), py::arg("n2"));
  m.def(
      "p_strong",
      [](std::int64_t a, std::int64_t n1, std::int64_t b, std::int64_t n2, const std::string& combination) {
        return p_strong({n1, n2, a + b, a}, parse_combination(combination));
      },
      py::arg("a"), py::arg("n1"), py::arg("b"), py::arg("n2"), py::arg("strong_combination") = "half_min");
  m.def(
      "min_achievable_p",
      [](std::int64_t n1, std::int64_t n2, std::int64_t m_total, const std::string& family) {
        if (family != "weak" && family != "strong") throw InputError("family must be weak or strong");
        return min_achievable_p(n1, n2, m_total, family == "weak" ? Family::kWeak : Family::kStrong);
      },
      py::arg("n1"), py::arg("n2"), py::arg("m"), py::arg("family"));
  m.def(
      "bh_reject", [](const std::vector<double>& p, double alpha) { return bh_reject(p, alpha); }, py::arg("p_values"),
      py::arg("alpha") = 0.05);
  m.def(
      "bh_adjust", [](const std::vector<double>& p) { return bh_adjust(p); }, py::arg("p_values"));

  m.def(
      "build_refset",
      [](const std::string& dump, const std::string& drug_dict, const std::string& outcome_dict, double alpha,
         bool prefilter, const std::string& combination) {
        BuildOptions options;
        options.alpha = alpha;
        options.prefilter = prefilter;
        options.strong_combination = parse_combination(combination);
        BuildReport report;
        auto set = build_from_files(dump, drug_dict, outcome_dict, options, &report);
        py::list entries;
        for (const auto& e : set.entries) entries.append(entry_dict(e));
        py::dict out;
        out["entries"] = entries;
        out["provenance"] = set.provenance;
        out["counts"] = report.counts;
        out["serialized"] = serialize(set);
        return out;
      },
      py::arg("dump"), py::arg("drug_dict"), py::arg("outcome_dict"), py::arg("alpha") = 0.05,
      py::arg("prefilter") = true, py::arg("strong_combination") = "half_min");

  m.def(
      "simulate",
      [](const std::string& scenario, std::uint64_t seed) {
        auto files = simulate(parse_scenario(scenario), seed);
        py::dict out;
        out["patients"] = files.patients;
        out["vocabulary"] = files.vocabulary;
        out["dense_features"] = files.dense_features;
        out["ground_truth"] = files.ground_truth;
        out["trials"] = files.trials;
        out["drug_dictionary"] = files.drug_dictionary;
        out["outcome_dictionary"] = files.outcome_dictionary;
        return out;
      },
      py::arg("scenario"), py::arg("seed"));

  m.def(
      "fit_logistic",
      [](const Eigen::MatrixXd& x, const std::vector<int>& treated, double ridge) {
        auto fit = fit_logistic(x, treated, ridge);
        py::dict out;
        out["coefficients"] = fit.coefficients;
        out["scores"] = fit.scores;
        out["converged"] = fit.converged;
        out["iterations"] = fit.iterations;
        return out;
      },
      py::arg("features"), py::arg("treated"), py::arg("ridge") = 1e-6);
  m.def(
      "overlap_weights",
      [](const std::vector<double>& scores, const std::vector<int>& treated) {
        return weights(scores, treated, WeightMode::kOverlap).values;
      },
      py::arg("scores"), py::arg("treated"));
  m.def(
      "cox_fit",
      [](const std::vector<double>& times, const std::vector<int>& events, const std::vector<int>& treated,
         const std::optional<std::vector<double>>& w) {
        auto fit = cox_fit(times, events, treated, as_weights(w));
        py::dict out;
        out["beta"] = fit.beta;
        out["se_model"] = fit.se_model;
        out["se_robust"] = fit.se_robust;
        out["converged"] = fit.converged;
        return out;
      },
      py::arg("times"), py::arg("events"), py::arg("treated"), py::arg("weights") = py::none());
  m.def(
      "km_rmst",
      [](const std::vector<double>& times, const std::vector<int>& events, double tau,
         const std::optional<std::vector<double>>& w) { return rmst(km_curve(times, events, as_weights(w)), tau); },
      py::arg("times"), py::arg("events"), py::arg("tau"), py::arg("weights") = py::none());
  m.def(
      "run_all_methods",
      [](const Eigen::MatrixXd& x, const std::vector<int>& treated, const std::vector<double>& times,
         const std::vector<int>& events, std::uint64_t seed, const std::vector<std::string>& methods,
         bool ablation) {
        CohortData data{x, treated, times, events};
        if (data.treated.size() != data.size() || data.events.size() != data.size() ||
            static_cast<std::size_t>(x.rows()) != data.size()) {
          throw InputError("features, treated, times and events must have the same length");
        }
        MethodConfig config;
        for (const auto& id : methods) method_info(id);
        config.methods = methods;
        config.include_ablation = ablation;
        py::list out;
        for (const auto& e : run_all_methods(data, config, seed)) out.append(estimate_dict(e));
        return out;
      },
      py::arg("features"), py::arg("treated"), py::arg("times"), py::arg("events"), py::arg("seed"),
      py::arg("methods") = std::vector<std::string>{}, py::arg("ablation_standard_ipw") = false);
  m.def("method_ids", [] {
    std::vector<std::string> ids;
    for (const auto& info : method_registry()) ids.push_back(info.id);
    return ids;
  });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"trialref"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
