// Copyright 2026 The mddetect Authors
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

#ifndef MDDETECT_METRICS_HPP_
#define MDDETECT_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "mddetect/dsp.hpp"
#include "mddetect/error.hpp"

namespace mdd::metrics {

using dsp::Label;

// Positive class is HUMAN throughout: tp counts human clips predicted human,
// fp counts deepfakes predicted human. Recall therefore measures how reliably
// human work is recognized as human.
struct ConfusionMatrix {
  std::int64_t tp = 0;  // human predicted human
  std::int64_t fn = 0;  // human predicted deepfake
  std::int64_t fp = 0;  // deepfake predicted human
  std::int64_t tn = 0;  // deepfake predicted deepfake

  std::int64_t total() const { return tp + fn + fp + tn; }
};

inline ConfusionMatrix confusion(const std::vector<Label>& predictions,
                                 const std::vector<Label>& truths) {
  if (predictions.size() != truths.size() || predictions.empty()) {
    throw Error(ErrorKind::kLengthMismatch,
                "predictions (" + std::to_string(predictions.size()) +
                    ") and truths (" + std::to_string(truths.size()) +
                    ") must be equal-length and non-empty");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred_human = predictions[i] == Label::kHuman;
    const bool is_human = truths[i] == Label::kHuman;
    if (is_human) {
      (pred_human ? cm.tp : cm.fn) += 1;
    } else {
      (pred_human ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

struct MetricsReport {
  std::string source;
  double f1 = 0.0;
  double accuracy = 0.0;
  double recall = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  double precision = 0.0;
  double specificity = 0.0;
  // Zero-denominator conventions: precision (and then f1) are reported as 0
  // when no prediction was positive; these flags record that it happened.
  bool precision_undefined = false;
  bool f1_undefined = false;
};

inline MetricsReport compute_metrics(const ConfusionMatrix& cm,
                                     const std::string& source = "") {
  if (cm.tp + cm.fn == 0 || cm.fp + cm.tn == 0) {
    throw Error(ErrorKind::kClassAbsent,
                "both classes must be present in the truth labels");
  }
  MetricsReport r;
  r.source = source;
  const auto pos = static_cast<double>(cm.tp + cm.fn);
  const auto neg = static_cast<double>(cm.fp + cm.tn);
  r.recall = static_cast<double>(cm.tp) / pos;
  r.fnr = 1.0 - r.recall;  // == fn/(tp+fn) in exact arithmetic
  r.fpr = static_cast<double>(cm.fp) / neg;
  r.specificity = 1.0 - r.fpr;  // == tn/(fp+tn) in exact arithmetic
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp == 0) {
    r.precision = 0.0;
    r.precision_undefined = true;
  } else {
    r.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  }
  if (r.precision + r.recall == 0.0) {
    r.f1 = 0.0;
    r.f1_undefined = true;
  } else {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

// CSV with three decimal places per value.
inline std::string to_csv(const std::vector<MetricsReport>& reports) {
  std::string out = "data_source,f1,accuracy,recall,fpr,fnr,precision,specificity\n";
  char buf[160];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f",
                  r.f1, r.accuracy, r.recall, r.fpr, r.fnr, r.precision,
                  r.specificity);
    out += r.source;
    out += ',';
    out += buf;
    out += '\n';
  }
  return out;
}

// Aligned table for terminals.
inline std::string render_table(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  std::size_t name_w = 12;
  for (const auto& r : reports) name_w = std::max(name_w, r.source.size() + 1);
  os << std::left << std::setw(static_cast<int>(name_w)) << "data_source"
     << std::right;
  for (const char* col :
       {"f1", "accuracy", "recall", "fpr", "fnr", "precision", "specificity"}) {
    os << std::setw(12) << col;
  }
  os << '\n';
  os << std::fixed << std::setprecision(3);
  for (const auto& r : reports) {
    os << std::left << std::setw(static_cast<int>(name_w)) << r.source
       << std::right << std::setw(12) << r.f1 << std::setw(12) << r.accuracy
       << std::setw(12) << r.recall << std::setw(12) << r.fpr << std::setw(12)
       << r.fnr << std::setw(12) << r.precision << std::setw(12)
       << r.specificity << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Published-results audit
//
// The reference results table this project reproduces the shape of, embedded
// as fixtures. The audit re-derives each row's internal identities
// (f1 from precision/recall, recall+fnr, fpr+specificity) and checks them at
// print precision, which catches transcription or convention errors without
// needing any corpus.
// ---------------------------------------------------------------------------

struct ReferenceRow {
  const char* source;
  double f1, accuracy, recall, fpr, fnr, precision, specificity;
};

inline const std::vector<ReferenceRow>& reference_rows() {
  static const std::vector<ReferenceRow> rows = {
      {"Baseline", 0.878, 0.885, 0.847, 0.078, 0.153, 0.911, 0.922},
      {"Tempo Stretch", 0.843, 0.854, 0.810, 0.105, 0.190, 0.879, 0.895},
      {"Pitch Shift", 0.856, 0.868, 0.810, 0.078, 0.190, 0.907, 0.922},
      {"Pitch Shift + Tempo Stretch", 0.837, 0.844, 0.799, 0.105, 0.201, 0.878,
       0.895},
      {"Continuous Learning", 0.842, 0.835, 0.889, 0.217, 0.111, 0.800, 0.783},
  };
  return rows;
}

struct AuditRow {
  std::string source;
  double f1_error = 0.0;        // |f1 - 2PR/(P+R)|
  double recall_fnr_error = 0.0;  // |recall + fnr - 1|
  double fpr_spec_error = 0.0;    // |fpr + specificity - 1|
  bool pass = false;
};

inline constexpr double kF1Tolerance = 0.002;
inline constexpr double kComplementTolerance = 0.001;

inline std::vector<AuditRow> audit_reference_table() {
  std::vector<AuditRow> out;
  for (const auto& row : reference_rows()) {
    AuditRow a;
    a.source = row.source;
    const double f1 =
        2.0 * row.precision * row.recall / (row.precision + row.recall);
    a.f1_error = std::abs(row.f1 - f1);
    a.recall_fnr_error = std::abs(row.recall + row.fnr - 1.0);
    a.fpr_spec_error = std::abs(row.fpr + row.specificity - 1.0);
    a.pass = a.f1_error <= kF1Tolerance &&
             a.recall_fnr_error <= kComplementTolerance &&
             a.fpr_spec_error <= kComplementTolerance;
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace mdd::metrics

#endif  // MDDETECT_METRICS_HPP_
