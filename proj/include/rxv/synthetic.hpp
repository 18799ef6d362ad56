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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rxv/corpus.hpp"

namespace rxv {

struct DiagnosisTemplate {
  int id = 0;
  std::string text;  // raw form, e.g. "Type 2 diabetes mellitus"
};

// Slots are rendered in raw clinical shorthand ("5", "mg", "PO", "QD") so
// generated records exercise the normalizer.
struct MedicationTemplate {
  int id = 0;
  std::string drug;
  std::vector<std::string> doses;
  std::string unit;
  std::vector<std::string> routes;
  std::vector<std::string> frequencies;
};

/// Synthetic ground truth: which medication templates suit which diagnosis.
class CompatibilityTable {
 public:
  CompatibilityTable(std::vector<DiagnosisTemplate> diagnoses,
                     std::vector<MedicationTemplate> medications,
                     std::map<int, std::set<int>> compatible);

  static const CompatibilityTable& defaults();

  const std::vector<DiagnosisTemplate>& diagnoses() const { return diagnoses_; }
  const std::vector<MedicationTemplate>& medications() const { return medications_; }
  const std::set<int>& compatible_with(int diagnosis_id) const;
  bool compatible(int diagnosis_id, int medication_id) const;

  const DiagnosisTemplate& diagnosis(int id) const;
  const MedicationTemplate& medication(int id) const;

  // Lookups over normalized text; used by oracles to recover template ids.
  std::optional<int> find_diagnosis(std::string_view normalized_context) const;
  std::optional<int> find_medication(std::string_view normalized_prescription) const;

  // Ground-truth label for a normalized pair, if both ids are recoverable.
  std::optional<int> ground_truth_label(const LabeledPair& pair) const;

 private:
  std::vector<DiagnosisTemplate> diagnoses_;
  std::vector<MedicationTemplate> medications_;
  std::map<int, std::set<int>> compatible_;
  std::map<std::string, int, std::less<>> diagnosis_by_text_;
  std::map<std::string, int, std::less<>> medication_by_drug_;
  std::map<int, std::size_t> diagnosis_pos_;
  std::map<int, std::size_t> medication_pos_;
};

// Renders one raw medication line such as "2. Lisinopril 5 mg PO QD".
std::string render_medication(const MedicationTemplate& med, std::size_t item_number,
                              std::size_t dose, std::size_t route, std::size_t frequency);

/// Deterministic per seed. Each record draws 1-4 medications from the
/// compatible set of its diagnosis. Throws std::invalid_argument when n < 0.
std::vector<ClinicalRecord> generate_synthetic_records(std::int64_t n,
                                                       const CompatibilityTable& table,
                                                       std::uint64_t seed);

}  // namespace rxv
