#pragma once

#include <span>
#include <string>
#include <vector>

#include "clonesearch/corpus.hpp"
#include "clonesearch/model.hpp"
#include "clonesearch/splits.hpp"
#include "json.hpp"

namespace clonesearch {

inline constexpr int kReportSchemaVersion = 1;

struct ConfusionCounts {
  size_t tp = 0, fp = 0, tn = 0, fn = 0;
  size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

// score >= tau predicts a clone.
ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double tau);
// Zero denominators give 0.
ClassMetrics prf1(const ConfusionCounts& counts);
// Trapezoidal ROC area over distinct thresholds; tied scores form one step.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct MetricsReport {
  std::string split;
  double tau = 0.5;
  ConfusionCounts counts;
  ClassMetrics metrics;
  double auc = 0.0;
  size_t n_pairs = 0;
  nlohmann::json config;  // echo of the run configuration

  nlohmann::json to_json() const;
};

// Fields every report must echo.
const std::vector<std::string>& required_echo_fields();
// Throws Error("manifest") if the report JSON lacks a required field.
void validate_report_json(const nlohmann::json& report);

MetricsReport metrics_from_scores(const std::string& split, std::span<const double> scores,
                                  std::span<const int> labels, const TrainConfig& cfg);

// sscore of every pair through the inference path, in manifest order.
std::vector<double> score_pairs(const Model& model, const SplitManifest& split, const CorpusStore& corpus);

// Throws Error("manifest") when a referenced record's tags are outside the
// model's condition vocabularies.
MetricsReport evaluate(const Model& model, const SplitManifest& split, const CorpusStore& corpus);

// Column order auc, accu, prc, rcl, f1.
std::string csv_header();
std::string csv_row(const MetricsReport& report);

}  // namespace clonesearch
