#include "sfc/metrics.hpp"

#include <cmath>

#include "json.hpp"
#include "sfc/errors.hpp"

namespace sfc {

namespace {
// One decimal place, matching how the tables render percentages.
double percent(double fraction) { return std::round(fraction * 1000.0) / 10.0; }
}  // namespace

ConfusionMatrix accumulate(const std::vector<std::pair<Label, Label>>& pairs) {
  ConfusionMatrix cm;
  for (const auto& [predicted, truth] : pairs) {
    if (truth == Label::kCough)
      predicted == Label::kCough ? ++cm.tp : ++cm.fn;
    else
      predicted == Label::kCough ? ++cm.fp : ++cm.tn;
  }
  return cm;
}

MetricsReport compute(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ConfigError("metrics on an empty confusion matrix");

  MetricsReport report;
  report.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());

  if (cm.tp + cm.fn == 0) {
    report.recall_degenerate = true;
  } else {
    report.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  }
  if (cm.tp + cm.fp == 0) {
    report.precision_degenerate = true;
  } else {
    report.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  }
  const double pr = report.precision + report.recall;
  if (pr <= 0.0) {
    report.f1_degenerate = true;
  } else {
    report.f1 = 2.0 * report.precision * report.recall / pr;
  }
  return report;
}

NormalizedConfusion normalize(const ConfusionMatrix& cm) {
  NormalizedConfusion out;
  const std::uint64_t pos = cm.tp + cm.fn;
  const std::uint64_t neg = cm.fp + cm.tn;
  if (pos == 0) {
    out.degenerate_row[0] = true;
  } else {
    out.rows[0][0] = static_cast<double>(cm.tp) / static_cast<double>(pos);
    out.rows[0][1] = static_cast<double>(cm.fn) / static_cast<double>(pos);
  }
  if (neg == 0) {
    out.degenerate_row[1] = true;
  } else {
    out.rows[1][0] = static_cast<double>(cm.fp) / static_cast<double>(neg);
    out.rows[1][1] = static_cast<double>(cm.tn) / static_cast<double>(neg);
  }
  return out;
}

std::string metrics_report_json(const ConfusionMatrix& cm, const MetricsReport& report) {
  nlohmann::json j;
  j["tp"] = cm.tp;
  j["fp"] = cm.fp;
  j["fn"] = cm.fn;
  j["tn"] = cm.tn;
  j["accuracy"] = report.accuracy;
  j["recall"] = report.recall;
  j["precision"] = report.precision;
  j["f1"] = report.f1;
  j["percent"] = {{"accuracy", percent(report.accuracy)},
                  {"recall", percent(report.recall)},
                  {"precision", percent(report.precision)},
                  {"f1", percent(report.f1)}};
  if (report.recall_degenerate || report.precision_degenerate || report.f1_degenerate) {
    j["degenerate"] = nlohmann::json::array();
    if (report.recall_degenerate) j["degenerate"].push_back("recall");
    if (report.precision_degenerate) j["degenerate"].push_back("precision");
    if (report.f1_degenerate) j["degenerate"].push_back("f1");
  }
  return j.dump(2);
}

}  // namespace sfc
