#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sfc/augment.hpp"  // Label

namespace sfc {

// Binary confusion counts; positive class = Cough.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }

  // Count-wise addition; accumulation is associative so it parallelizes.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    tn += other.tn;
    return *this;
  }
};

struct MetricsReport {
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  bool recall_degenerate = false;     // tp + fn == 0
  bool precision_degenerate = false;  // tp + fp == 0
  bool f1_degenerate = false;         // precision + recall == 0
};

// Tallies (predicted, truth) pairs.
ConfusionMatrix accumulate(const std::vector<std::pair<Label, Label>>& pairs);

// Accuracy/recall/precision/F1 from the counts. 0/0 cases report 0 with the
// matching degenerate flag set. Throws on an empty matrix.
MetricsReport compute(const ConfusionMatrix& cm);

// Row-normalized 2x2 matrix; rows are true classes (Cough first), columns
// predicted. A row with zero total is returned as zeros and flagged.
struct NormalizedConfusion {
  std::array<std::array<double, 2>, 2> rows{};
  std::array<bool, 2> degenerate_row{};
};
NormalizedConfusion normalize(const ConfusionMatrix& cm);

// JSON report {tp, fp, fn, tn, accuracy, recall, precision, f1}.
std::string metrics_report_json(const ConfusionMatrix& cm, const MetricsReport& report);

}  // namespace sfc
