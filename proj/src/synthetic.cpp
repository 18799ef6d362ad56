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

#include "rxv/synthetic.hpp"

#include <algorithm>
#include <stdexcept>

#include "rxv/util.hpp"

namespace rxv {
namespace {

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

struct FamilySpec {
  std::vector<std::string> diagnoses;
  std::vector<MedicationTemplate> medications;
};

MedicationTemplate med(std::string drug, std::vector<std::string> doses, std::string unit,
                       std::vector<std::string> routes, std::vector<std::string> freqs) {
  MedicationTemplate m;
  m.drug = std::move(drug);
  m.doses = std::move(doses);
  m.unit = std::move(unit);
  m.routes = std::move(routes);
  m.frequencies = std::move(freqs);
  return m;
}

// Families are token-disjoint enough that diagnoses from different families sit
// at distance >= 0.5, while variants inside a family sit below 0.5. Medication
// sets never cross families.
std::vector<FamilySpec> default_families() {
  return {
      {{"Essential hypertension", "Benign essential hypertension"},
       {med("lisinopril", {"5", "10", "20", "40"}, "mg", {"PO"}, {"QD", "daily", "QAM"}),
        med("amlodipine", {"5", "10", "2.5"}, "mg", {"PO"}, {"QD", "daily", "QPM"}),
        med("hydrochlorothiazide", {"12.5", "25", "50"}, "mg", {"PO"}, {"QD", "daily", "QAM"}),
        med("losartan", {"25", "50", "100"}, "mg", {"PO"}, {"QD", "BID", "daily"})}},
      {{"Peripheral vascular disease", "Peripheral vascular disease with claudication"},
       {med("lopressor", {"25", "50", "75", "100"}, "mg", {"PO"}, {"BID", "Q12H"}),
        med("cilostazol", {"50", "100"}, "mg", {"PO"}, {"BID", "Q12H"}),
        med("clopidogrel", {"75"}, "mg", {"PO"}, {"QD", "daily", "QAM"}),
        med("atorvastatin", {"10", "20", "40", "80"}, "mg", {"PO"}, {"QHS", "QPM", "daily"})}},
      {{"Cholecystitis"},
       {med("aspirin", {"81", "325"}, "mg", {"PO"}, {"daily", "QD", "QAM"}),
        med("piperacillin", {"3.375", "4.5"}, "g", {"IV"}, {"Q6H", "Q8H", "Q12H"}),
        med("metronidazole", {"500", "250"}, "mg", {"IV", "PO"}, {"Q8H", "TID", "Q12H"}),
        med("ondansetron", {"4", "8"}, "mg", {"IV", "PO"}, {"Q8H", "PRN", "Q6H"})}},
      {{"Bacteremia endocarditis"},
       {med("vancomycin", {"1000", "1250", "1500", "750"}, "mg", {"IV"}, {"Q12H", "Q8H", "Q24H"}),
        med("gentamicin", {"60", "80", "120"}, "mg", {"IV"}, {"Q8H", "Q24H", "Q12H"}),
        med("nafcillin", {"2", "1"}, "g", {"IV"}, {"Q4H", "Q6H"}),
        med("rifampin", {"300", "600"}, "mg", {"PO"}, {"Q8H", "BID", "daily"})}},
      {{"Type 2 diabetes mellitus", "Type 2 diabetes mellitus uncontrolled",
        "Type 2 diabetes mellitus with hyperglycemia", "Type 2 diabetes mellitus with neuropathy",
        "Type 2 diabetes mellitus with nephropathy"},
       {med("metformin", {"500", "850", "1000"}, "mg", {"PO"}, {"BID", "QD", "daily"}),
        med("glipizide", {"5", "10", "2.5"}, "mg", {"PO"}, {"QD", "BID", "QAM"}),
        med("insulin", {"10", "20", "30"}, "units", {"SC"}, {"QHS", "QAM", "QPM"}),
        med("sitagliptin", {"50", "100", "25"}, "mg", {"PO"}, {"daily", "QD"})}},
      {{"Congestive heart failure", "Chronic congestive heart failure",
        "Congestive heart failure exacerbation", "Systolic congestive heart failure",
        "Diastolic congestive heart failure"},
       {med("furosemide", {"20", "40", "80"}, "mg", {"PO", "IV"}, {"QD", "BID", "QAM"}),
        med("carvedilol", {"3.125", "6.25", "12.5", "25"}, "mg", {"PO"}, {"BID", "Q12H"}),
        med("spironolactone", {"25", "50", "12.5"}, "mg", {"PO"}, {"daily", "QD", "QAM"}),
        med("digoxin", {"0.125", "0.25"}, "mg", {"PO"}, {"QD", "daily", "QAM"})}},
      {{"Atrial fibrillation", "Paroxysmal atrial fibrillation"},
       {med("warfarin", {"2", "5", "7.5", "1"}, "mg", {"PO"}, {"QHS", "QPM", "daily"}),
        med("diltiazem", {"30", "60", "120"}, "mg", {"PO"}, {"QID", "daily", "Q6H"}),
        med("apixaban", {"2.5", "5"}, "mg", {"PO"}, {"BID", "Q12H"}),
        med("amiodarone", {"200", "400", "100"}, "mg", {"PO"}, {"daily", "BID", "QD"})}},
      {{"Community acquired pneumonia", "Community acquired pneumonia unspecified",
        "Severe community acquired pneumonia", "Community acquired pneumonia bilateral"},
       {med("levofloxacin", {"500", "750"}, "mg", {"PO", "IV"}, {"daily", "Q24H", "QD"}),
        med("azithromycin", {"250", "500"}, "mg", {"PO"}, {"QD", "daily", "QAM"}),
        med("ceftriaxone", {"1", "2"}, "g", {"IV"}, {"QD", "Q24H", "daily"}),
        med("doxycycline", {"100", "50"}, "mg", {"PO"}, {"BID", "Q12H"})}},
      {{"Chronic obstructive pulmonary disease",
        "Chronic obstructive pulmonary disease with exacerbation",
        "Severe chronic obstructive pulmonary disease",
        "Chronic obstructive pulmonary disease unspecified"},
       {med("albuterol", {"90", "180"}, "mcg", {"INH"}, {"Q4H", "PRN", "Q6H"}),
        med("tiotropium", {"18"}, "mcg", {"INH"}, {"daily", "QD", "QAM"}),
        med("prednisone", {"10", "20", "40", "60"}, "mg", {"PO"}, {"daily", "QAM"}),
        med("ipratropium", {"17", "34"}, "mcg", {"INH"}, {"QID", "Q6H", "Q4H"})}},
      {{"Major depressive disorder", "Major depressive disorder recurrent",
        "Severe major depressive disorder", "Major depressive disorder moderate"},
       {med("sertraline", {"50", "100", "25"}, "mg", {"PO"}, {"daily", "QD", "QAM"}),
        med("fluoxetine", {"20", "40", "10"}, "mg", {"PO"}, {"QAM", "daily"}),
        med("citalopram", {"10", "20"}, "mg", {"PO"}, {"QD", "daily", "QAM"}),
        med("bupropion", {"150", "300", "100"}, "mg", {"PO"}, {"QAM", "BID"})}},
      {{"Hypothyroidism"},
       {med("levothyroxine", {"25", "50", "75", "88", "100"}, "mcg", {"PO"}, {"QAM", "daily"}),
        med("liothyronine", {"5", "25"}, "mcg", {"PO"}, {"daily", "QAM", "QD"}),
        med("synthroid", {"50", "112"}, "mcg", {"PO"}, {"QD", "QAM", "daily"}),
        med("cytomel", {"5", "25"}, "mcg", {"PO"}, {"QD", "daily", "QAM"})}},
      {{"Urinary tract infection", "Complicated urinary tract infection",
        "Urinary tract infection recurrent", "Urinary tract infection acute"},
       {med("nitrofurantoin", {"100", "50"}, "mg", {"PO"}, {"BID", "QID", "Q6H"}),
        med("ciprofloxacin", {"250", "500"}, "mg", {"PO"}, {"BID", "Q12H"}),
        med("cephalexin", {"500", "250"}, "mg", {"PO"}, {"QID", "Q6H", "TID"}),
        med("phenazopyridine", {"100", "200"}, "mg", {"PO"}, {"TID", "PRN", "Q8H"})}},
      {{"Gastroesophageal reflux disease", "Gastroesophageal reflux disease with esophagitis"},
       {med("omeprazole", {"20", "40"}, "mg", {"PO"}, {"QD", "BID", "QAM"}),
        med("pantoprazole", {"40", "20"}, "mg", {"PO", "IV"}, {"daily", "QD"}),
        med("famotidine", {"20", "40"}, "mg", {"PO"}, {"BID", "QHS", "QPM"}),
        med("sucralfate", {"1"}, "g", {"PO"}, {"QID", "TID", "Q6H"})}},
      {{"Seizure disorder"},
       {med("levetiracetam", {"500", "750", "1000"}, "mg", {"PO"}, {"BID", "Q12H"}),
        med("phenytoin", {"100"}, "mg", {"PO"}, {"TID", "QHS", "daily"}),
        med("lamotrigine", {"25", "100", "200"}, "mg", {"PO"}, {"BID", "daily"}),
        med("valproate", {"250", "500"}, "mg", {"PO"}, {"TID", "BID", "Q8H"})}},
  };
}

}  // namespace

CompatibilityTable::CompatibilityTable(std::vector<DiagnosisTemplate> diagnoses,
                                       std::vector<MedicationTemplate> medications,
                                       std::map<int, std::set<int>> compatible)
    : diagnoses_(std::move(diagnoses)),
      medications_(std::move(medications)),
      compatible_(std::move(compatible)) {
  for (std::size_t i = 0; i < diagnoses_.size(); ++i) {
    const auto& d = diagnoses_[i];
    if (!diagnosis_pos_.emplace(d.id, i).second) {
      throw std::invalid_argument("duplicate diagnosis id " + std::to_string(d.id));
    }
    diagnosis_by_text_[normalize_prescription(d.text)] = d.id;
  }
  for (std::size_t i = 0; i < medications_.size(); ++i) {
    const auto& m = medications_[i];
    if (!medication_pos_.emplace(m.id, i).second) {
      throw std::invalid_argument("duplicate medication id " + std::to_string(m.id));
    }
    if (m.doses.empty() || m.routes.empty() || m.frequencies.empty()) {
      throw std::invalid_argument("medication template " + m.drug + " has an empty slot");
    }
    medication_by_drug_[normalize_prescription(m.drug)] = m.id;
  }
  for (const auto& d : diagnoses_) {
    auto it = compatible_.find(d.id);
    if (it == compatible_.end() || it->second.empty()) {
      throw std::invalid_argument("diagnosis " + std::to_string(d.id) +
                                  " has no compatible medication");
    }
    for (int m : it->second) {
      if (!medication_pos_.count(m)) {
        throw std::invalid_argument("unknown medication id " + std::to_string(m));
      }
    }
  }
}

const CompatibilityTable& CompatibilityTable::defaults() {
  static const CompatibilityTable table = [] {
    std::vector<DiagnosisTemplate> diagnoses;
    std::vector<MedicationTemplate> medications;
    std::map<int, std::set<int>> compatible;
    int next_dx = 0;
    int next_med = 0;
    for (auto& family : default_families()) {
      std::set<int> ids;
      for (auto& m : family.medications) {
        m.id = next_med++;
        ids.insert(m.id);
        medications.push_back(std::move(m));
      }
      for (auto& text : family.diagnoses) {
        diagnoses.push_back({next_dx, text});
        compatible[next_dx] = ids;
        ++next_dx;
      }
    }
    return CompatibilityTable(std::move(diagnoses), std::move(medications),
                              std::move(compatible));
  }();
  return table;
}

const std::set<int>& CompatibilityTable::compatible_with(int diagnosis_id) const {
  auto it = compatible_.find(diagnosis_id);
  if (it == compatible_.end()) {
    throw std::out_of_range("unknown diagnosis id " + std::to_string(diagnosis_id));
  }
  return it->second;
}

bool CompatibilityTable::compatible(int diagnosis_id, int medication_id) const {
  return compatible_with(diagnosis_id).count(medication_id) > 0;
}

const DiagnosisTemplate& CompatibilityTable::diagnosis(int id) const {
  return diagnoses_.at(diagnosis_pos_.at(id));
}

const MedicationTemplate& CompatibilityTable::medication(int id) const {
  return medications_.at(medication_pos_.at(id));
}

std::optional<int> CompatibilityTable::find_diagnosis(std::string_view normalized_context) const {
  auto it = diagnosis_by_text_.find(normalized_context);
  if (it == diagnosis_by_text_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> CompatibilityTable::find_medication(
    std::string_view normalized_prescription) const {
  for (const auto& word : split_words(normalized_prescription)) {
    auto it = medication_by_drug_.find(word);
    if (it != medication_by_drug_.end()) return it->second;
  }
  return std::nullopt;
}

std::optional<int> CompatibilityTable::ground_truth_label(const LabeledPair& pair) const {
  const auto dx = find_diagnosis(pair.context);
  const auto med = find_medication(pair.prescription);
  if (!dx || !med) return std::nullopt;
  return compatible(*dx, *med) ? 1 : 0;
}

std::string render_medication(const MedicationTemplate& med, std::size_t item_number,
                              std::size_t dose, std::size_t route, std::size_t frequency) {
  return std::to_string(item_number) + ". " + capitalize(med.drug) + " " + med.doses.at(dose) +
         " " + med.unit + " " + med.routes.at(route) + " " + med.frequencies.at(frequency);
}

std::vector<ClinicalRecord> generate_synthetic_records(std::int64_t n,
                                                       const CompatibilityTable& table,
                                                       std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("generate_synthetic_records: n must be >= 0");
  Rng rng(seed);
  std::vector<ClinicalRecord> records;
  records.reserve(static_cast<std::size_t>(n));
  const auto& diagnoses = table.diagnoses();
  for (std::int64_t r = 0; r < n; ++r) {
    const auto& dx = diagnoses[uniform_index(rng, diagnoses.size())];
    std::vector<int> pool(table.compatible_with(dx.id).begin(),
                          table.compatible_with(dx.id).end());
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t count = 1 + uniform_index(rng, std::min<std::size_t>(4, pool.size()));

    ClinicalRecord record;
    char id[32];
    std::snprintf(id, sizeof(id), "syn-%06lld", static_cast<long long>(r));
    record.record_id = id;
    record.diagnosis = dx.text;
    record.provenance = Provenance::kSynthetic;
    for (std::size_t k = 0; k < count; ++k) {
      const auto& m = table.medication(pool[k]);
      const std::size_t dose = uniform_index(rng, m.doses.size());
      const std::size_t route = uniform_index(rng, m.routes.size());
      const std::size_t freq = uniform_index(rng, m.frequencies.size());
      record.medications.push_back(render_medication(m, k + 1, dose, route, freq));
    }
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace rxv
