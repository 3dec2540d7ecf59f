#include <gtest/gtest.h>

#include <sstream>

#include "trialref/cohort.h"
#include "trialref/common.h"

using namespace trialref;

namespace {

PatientStream patient(const std::string& id, int end, std::vector<ClinicalEvent> events) {
  return PatientStream{id, 0, end, std::move(events)};
}

// n patients starting `drug` on day 10; every third has the outcome on day 30.
void add_arm(std::vector<PatientStream>& out, const std::string& prefix, const std::string& drug, int n) {
  for (int i = 0; i < n; ++i) {
    std::vector<ClinicalEvent> ev{{2, CodeKind::kProcedure, "P1"}, {10, CodeKind::kDrugClaim, drug}};
    if (i % 3 == 0) ev.push_back({30, CodeKind::kDiagnosis, "OUT"});
    out.push_back(patient(prefix + std::to_string(i), 400, ev));
  }
}

const CohortRow& row_of(const Cohort& c, const std::string& id) {
  for (const auto& r : c.rows) {
    if (r.patient_id == id) return r;
  }
  throw std::runtime_error("missing row " + id);
}

}  // namespace

TEST(Cohort, HandTraces) {
  std::vector<PatientStream> ps;
  add_arm(ps, "a", "DA", 100);
  add_arm(ps, "b", "DB", 100);
  ps.push_back(patient("x1", 400, {{10, CodeKind::kDrugClaim, "DA"}, {25, CodeKind::kDiagnosis, "OUT"}}));
  ps.push_back(patient("x2", 100, {{5, CodeKind::kDrugClaim, "DB"}}));
  ps.push_back(patient("x3", 100, {{5, CodeKind::kDrugClaim, "DB"}, {5, CodeKind::kDiagnosis, "OUT"}}));
  ps.push_back(patient("dual", 100, {{7, CodeKind::kDrugClaim, "DA"}, {7, CodeKind::kDrugClaim, "DB"}}));
  ps.push_back(patient("later", 100, {{7, CodeKind::kDrugClaim, "DB"}, {20, CodeKind::kDrugClaim, "DA"}}));
  PatientDb db(ps);
  auto vocab = Vocabulary::from_patients(ps);
  auto built = build_cohort(db, vocab, {"DA", "DB", "OUT"}, 1);
  ASSERT_TRUE(std::holds_alternative<Cohort>(built));
  const auto& c = std::get<Cohort>(built);
  EXPECT_EQ(c.n_a, 101u);
  EXPECT_EQ(c.n_b, 103u);
  const auto& x1 = row_of(c, "x1");
  EXPECT_EQ(x1.treated, 1);
  EXPECT_EQ(x1.time, 15);
  EXPECT_TRUE(x1.event);
  const auto& x2 = row_of(c, "x2");
  EXPECT_EQ(x2.treated, 0);
  EXPECT_EQ(x2.time, 95);
  EXPECT_FALSE(x2.event);
  const auto& x3 = row_of(c, "x3");
  EXPECT_EQ(x3.time, 0);
  EXPECT_TRUE(x3.event);
  EXPECT_EQ(row_of(c, "later").treated, 0);
  EXPECT_THROW(row_of(c, "dual"), std::runtime_error);
}

TEST(Cohort, SkipsSmallArmsAndUnknownCodes) {
  std::vector<PatientStream> ps;
  add_arm(ps, "a", "DA", 150);
  add_arm(ps, "b", "DB", 40);
  PatientDb db(ps);
  auto vocab = Vocabulary::from_patients(ps);
  EXPECT_TRUE(std::holds_alternative<CohortSkip>(build_cohort(db, vocab, {"DA", "DB", "OUT"}, 1)));
  EXPECT_TRUE(std::holds_alternative<CohortSkip>(build_cohort(db, vocab, {"DA", "NOPE", "OUT"}, 1)));
  EXPECT_TRUE(std::holds_alternative<CohortSkip>(build_cohort(db, vocab, {"DA", "DB", "NOPE"}, 1)));
}

TEST(Cohort, DownsamplingIsSeededAndSymmetric) {
  std::vector<PatientStream> ps;
  add_arm(ps, "a", "DA", 300);
  add_arm(ps, "b", "DB", 250);
  PatientDb db(ps);
  auto vocab = Vocabulary::from_patients(ps);
  CohortOptions opt;
  opt.max_per_arm = 200;
  auto c1 = std::get<Cohort>(build_cohort(db, vocab, {"DA", "DB", "OUT"}, 5, opt));
  auto c2 = std::get<Cohort>(build_cohort(db, vocab, {"DA", "DB", "OUT"}, 5, opt));
  auto swapped = std::get<Cohort>(build_cohort(db, vocab, {"DB", "DA", "OUT"}, 5, opt));
  EXPECT_EQ(c1.n_a, 200u);
  EXPECT_EQ(c1.n_b, 200u);
  ASSERT_EQ(c1.rows.size(), c2.rows.size());
  ASSERT_EQ(c1.rows.size(), swapped.rows.size());
  for (std::size_t i = 0; i < c1.rows.size(); ++i) {
    EXPECT_EQ(c1.rows[i].patient_id, c2.rows[i].patient_id);
    EXPECT_EQ(c1.rows[i].patient_id, swapped.rows[i].patient_id);
    EXPECT_EQ(c1.rows[i].treated, 1 - swapped.rows[i].treated);
  }
}

TEST(CountFeatures, StrictlyBeforeIndex) {
  auto p = patient("p", 100, {{1, CodeKind::kDiagnosis, "X"},
                              {3, CodeKind::kDiagnosis, "X"},
                              {5, CodeKind::kProcedure, "Y"},
                              {5, CodeKind::kDrugClaim, "D"},
                              {9, CodeKind::kDiagnosis, "X"}});
  Vocabulary vocab({{CodeKind::kDiagnosis, "X"}, {CodeKind::kProcedure, "Y"}, {CodeKind::kDrugClaim, "D"}});
  EXPECT_EQ(count_features(p, vocab, 0), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(count_features(p, vocab, 5), (std::vector<double>{2, 0, 0}));
  EXPECT_EQ(count_features(p, vocab, 6), (std::vector<double>{2, 1, 1}));
  auto truncated = p;
  truncated.events.resize(2);
  EXPECT_EQ(count_features(truncated, vocab, 5), count_features(p, vocab, 5));
}

TEST(PatientDb, RoundTripAndValidation) {
  std::vector<PatientStream> ps{patient("p1", 50, {{1, CodeKind::kDiagnosis, "X"}, {4, CodeKind::kDrugClaim, "D"}})};
  PatientDb db(ps, {{"vocabulary_sha256", "abc"}});
  auto text = db.serialize();
  std::istringstream in(text);
  auto back = PatientDb::parse(in);
  EXPECT_EQ(back.serialize(), text);
  EXPECT_EQ(back.header().at("vocabulary_sha256"), "abc");

  auto unsorted = patient("p2", 50, {{4, CodeKind::kDiagnosis, "X"}, {1, CodeKind::kDrugClaim, "D"}});
  EXPECT_THROW(validate_patient(unsorted), InputError);
  auto outside = patient("p3", 3, {{4, CodeKind::kDiagnosis, "X"}});
  EXPECT_THROW(validate_patient(outside), InputError);
  std::istringstream bad(R"({"patient_id":"p","observation_start":0,"observation_end":5,"events":[{"day":9,"kind":"diagnosis","code":"X"}]})"
                         "\n");
  EXPECT_THROW(PatientDb::parse(bad), InputError);
}

TEST(Vocabulary, RoundTrip) {
  std::vector<PatientStream> ps{patient("p1", 50, {{1, CodeKind::kProcedure, "Z"}, {4, CodeKind::kDrugClaim, "D"}}),
                                patient("p2", 50, {{1, CodeKind::kDiagnosis, "A"}})};
  auto v = Vocabulary::from_patients(ps);
  EXPECT_EQ(v.size(), 3u);
  std::istringstream in(v.serialize());
  auto back = Vocabulary::parse(in);
  EXPECT_EQ(back.codes(), v.codes());
  EXPECT_TRUE(back.index_of(CodeKind::kProcedure, "Z").has_value());
  EXPECT_FALSE(back.index_of(CodeKind::kDiagnosis, "Z").has_value());
}

TEST(DenseFeatures, ReplaceCounts) {
  std::vector<PatientStream> ps;
  add_arm(ps, "a", "DA", 100);
  add_arm(ps, "b", "DB", 100);
  std::string text = "patient_id\tf0\tf1\n";
  for (const auto& p : ps) text += p.patient_id + "\t1.5\t-2\n";
  std::istringstream in(text);
  auto dense = DenseFeatures::parse(in);
  PatientDb db(ps);
  auto vocab = Vocabulary::from_patients(ps);
  auto c = std::get<Cohort>(build_cohort(db, vocab, {"DA", "DB", "OUT"}, 1, {}, &dense));
  EXPECT_EQ(c.rows[0].features, (std::vector<double>{1.5, -2}));
}
