#include "clonesearch/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "clonesearch/search.hpp"
#include "clonesearch/util.hpp"

namespace clonesearch {

using nlohmann::json;

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double tau) {
  if (scores.size() != labels.size()) throw domain_error("confusion: scores and labels differ in length");
  if (scores.empty()) throw domain_error("confusion: no pairs");
  ConfusionCounts c;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= tau;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ClassMetrics prf1(const ConfusionCounts& c) {
  auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
  ClassMetrics m;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  m.accuracy = ratio(c.tp + c.tn, c.total());
  return m;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw domain_error("roc_auc: scores and labels differ in length");
  const size_t n_pos = static_cast<size_t>(std::count(labels.begin(), labels.end(), 1));
  const size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw domain_error("roc_auc: needs both positive and negative labels");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  double area = 0.0;
  double tp = 0.0, fp = 0.0;
  for (size_t i = 0; i < order.size();) {
    double step_tp = 0.0, step_fp = 0.0;
    size_t j = i;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) {
      (labels[order[j]] == 1 ? step_tp : step_fp) += 1.0;
    }
    // trapezoid between (fp, tp) and (fp + step_fp, tp + step_tp)
    area += step_fp * (tp + 0.5 * step_tp);
    tp += step_tp;
    fp += step_fp;
    i = j;
  }
  return area / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

json MetricsReport::to_json() const {
  return {{"schema_version", kReportSchemaVersion},
          {"split", split},
          {"tau", tau},
          {"n_pairs", n_pairs},
          {"counts", {{"tp", counts.tp}, {"fp", counts.fp}, {"tn", counts.tn}, {"fn", counts.fn}}},
          {"accuracy", metrics.accuracy},
          {"precision", metrics.precision},
          {"recall", metrics.recall},
          {"f1", metrics.f1},
          {"auc", auc},
          {"config", config}};
}

const std::vector<std::string>& required_echo_fields() {
  static const std::vector<std::string> fields{"beta1",         "beta2",      "eps_guard", "tau",
                                               "seed",          "backend",    "optimizer", "learning_rate",
                                               "batch_size",    "epochs",     "k",         "max_length",
                                               "latent_dim",    "enable_removal", "enable_cvib"};
  return fields;
}

void validate_report_json(const json& report) {
  for (const char* key : {"schema_version", "split", "tau", "n_pairs", "counts", "auc", "config"}) {
    if (!report.contains(key)) throw manifest_error(std::string("report lacks '") + key + "'");
  }
  if (report.at("schema_version") != kReportSchemaVersion) throw manifest_error("unsupported report schema");
  for (const auto& key : required_echo_fields()) {
    if (!report.at("config").contains(key)) throw manifest_error("report config echo lacks '" + key + "'");
  }
}

MetricsReport metrics_from_scores(const std::string& split, std::span<const double> scores,
                                  std::span<const int> labels, const TrainConfig& cfg) {
  MetricsReport r;
  r.split = split;
  r.tau = cfg.tau;
  r.counts = confusion(scores, labels, cfg.tau);
  r.metrics = prf1(r.counts);
  r.auc = roc_auc(scores, labels);
  r.n_pairs = scores.size();
  r.config = cfg.to_json();
  return r;
}

std::vector<double> score_pairs(const Model& model, const SplitManifest& split, const CorpusStore& corpus) {
  std::unordered_map<std::string, Eigen::VectorXd> cache;
  auto encoding = [&](const std::string& id) -> const Eigen::VectorXd& {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, infer_encoding(model, corpus.get(id))).first;
    return it->second;
  };
  std::vector<double> scores;
  scores.reserve(split.pairs.size());
  for (const auto& p : split.pairs) scores.push_back(sscore(encoding(p.left_id), encoding(p.right_id)));
  return scores;
}

MetricsReport evaluate(const Model& model, const SplitManifest& split, const CorpusStore& corpus) {
  auto known = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  for (const auto& p : split.pairs) {
    for (const auto* id : {&p.left_id, &p.right_id}) {
      const FunctionRecord& r = corpus.get(*id);
      if (!known(model.arch_vocab, r.architecture) || !known(model.opt_vocab, r.optimization)) {
        throw manifest_error("checkpoint vocabularies do not cover record " + r.id + " (" + r.architecture +
                             "/" + r.optimization + ")");
      }
    }
  }
  std::vector<double> scores = score_pairs(model, split, corpus);
  std::vector<int> labels;
  labels.reserve(split.pairs.size());
  for (const auto& p : split.pairs) labels.push_back(p.label);
  return metrics_from_scores(split.name, scores, labels, model.config);
}

std::string csv_header() { return "split,auc,accu,prc,rcl,f1"; }

std::string csv_row(const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f", r.split.c_str(), r.auc, r.metrics.accuracy,
                r.metrics.precision, r.metrics.recall, r.metrics.f1);
  return buf;
}

}  // namespace clonesearch
