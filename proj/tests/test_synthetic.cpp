// Copyright 2026 The rxv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "rxv/corpus.hpp"
#include "rxv/pairgen.hpp"
#include "rxv/synthetic.hpp"

namespace rxv {
namespace {

const CompatibilityTable& table() { return CompatibilityTable::defaults(); }

TEST(Synthetic, EmptyAndNegativeCounts) {
  EXPECT_TRUE(generate_synthetic_records(0, table(), 1).empty());
  EXPECT_THROW(generate_synthetic_records(-1, table(), 1), std::invalid_argument);
}

TEST(Synthetic, DeterministicPerSeed) {
  const auto a = generate_synthetic_records(200, table(), 42);
  const auto b = generate_synthetic_records(200, table(), 42);
  const auto c = generate_synthetic_records(200, table(), 43);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(to_json(a[i]).dump(), to_json(b[i]).dump());
  }
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= to_json(a[i]).dump() != to_json(c[i]).dump();
  EXPECT_TRUE(differs);
}

TEST(Synthetic, EveryMedicationIsCompatible) {
  const auto records = generate_synthetic_records(100, table(), 9);
  ASSERT_EQ(records.size(), 100u);
  std::size_t checked = 0;
  for (const auto& r : records) {
    EXPECT_EQ(r.provenance, Provenance::kSynthetic);
    const auto dx = table().find_diagnosis(normalize_prescription(r.diagnosis));
    ASSERT_TRUE(dx.has_value()) << r.diagnosis;
    ASSERT_GE(r.medications.size(), 1u);
    for (const auto& m : r.medications) {
      const auto med = table().find_medication(normalize_prescription(m));
      ASSERT_TRUE(med.has_value()) << m;
      EXPECT_TRUE(table().compatible_with(*dx).contains(*med)) << r.diagnosis << " / " << m;
      ++checked;
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(Synthetic, EveryDiagnosisHasACompatibleMedication) {
  for (const auto& d : table().diagnoses()) EXPECT_FALSE(table().compatible_with(d.id).empty());
  EXPECT_THROW(CompatibilityTable({{1, "x"}}, {{1, "aspirin", {"81"}, "mg", {"PO"}, {"daily"}}}, {}),
               std::invalid_argument);
}

TEST(Synthetic, DistanceSeparatesIncompatibleDiagnoses) {
  // Two diagnoses sharing a medication are close; otherwise they are far.
  const auto& dx = table().diagnoses();
  for (const auto& a : dx) {
    for (const auto& b : dx) {
      const auto& sa = table().compatible_with(a.id);
      const auto& sb = table().compatible_with(b.id);
      bool share = false;
      for (int m : sa) share |= sb.contains(m);
      const double d = diagnosis_distance(normalize_prescription(a.text), normalize_prescription(b.text));
      if (share) {
        EXPECT_LT(d, 0.5) << a.text << " / " << b.text;
      } else {
        EXPECT_GE(d, 0.5) << a.text << " / " << b.text;
      }
    }
  }
}

TEST(Synthetic, GroundTruthLabel) {
  LabeledPair ok{"p", normalize_prescription("Lisinopril 5 mg PO QD"), "essential hypertension", 1,
                 PairOrigin::kNatural};
  LabeledPair bad{"q", normalize_prescription("Lisinopril 5 mg PO QD"), "bacteremia endocarditis", 0,
                  PairOrigin::kSampledNegative};
  LabeledPair unknown{"r", "mystery drug", "essential hypertension", 1, PairOrigin::kNatural};
  EXPECT_EQ(table().ground_truth_label(ok), 1);
  EXPECT_EQ(table().ground_truth_label(bad), 0);
  EXPECT_FALSE(table().ground_truth_label(unknown).has_value());
}

TEST(Synthetic, RenderMedicationUsesRawShorthand) {
  const auto& m = table().medication(*table().find_medication("lisinopril"));
  EXPECT_EQ(render_medication(m, 2, 0, 0, 0), "2. Lisinopril 5 mg PO QD");
}

}  // namespace
}  // namespace rxv
