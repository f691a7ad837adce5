#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xppm/encoding.hpp"
#include "xppm/event_log.hpp"
#include "xppm/local_regions.hpp"
#include "xppm/metrics.hpp"
#include "xppm/neural_net.hpp"
#include "xppm/surrogate.hpp"

namespace xppm {

struct IngestionConfig {
  std::string format = "xes";  // "xes" | "csv"
  std::string file;            // relative paths resolve against the config file
  XesOptions xes;
  CsvColumnMap csv;
};

struct RegionsConfig {
  int k_min = 2;
  int k_max = 40;
  int restarts = 10;
  AccuracyWeighting weighting = AccuracyWeighting::kUnweighted;
  bool baseline = true;  // also cluster the original feature space
};

struct ReportConfig {
  R2Denominator r2_denominator = R2Denominator::kBlackBox;
  bool dot_files = true;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  IngestionConfig ingestion;
  EncodingConfig encoding;
  double split_ratio = 0.8;
  NetworkConfig network;
  TrainingConfig training;
  RegionsConfig regions;
  TreeConfig surrogate;
  ReportConfig report;
  std::filesystem::path base_dir;  // not serialized

  void validate() const;
};

// Parses a JSON configuration. `seed` is mandatory; XPPM_SEED, when set,
// replaces it. The network seed defaults to the pipeline seed.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const PipelineConfig& config);

// Reads the configured log.
EventLog load_log(const PipelineConfig& config);

struct SplitSummary {
  std::size_t train_cases = 0;
  std::size_t validation_cases = 0;
  std::size_t train_instances = 0;
  std::size_t validation_instances = 0;
  std::size_t dropped_traces = 0;

  bool operator==(const SplitSummary&) const = default;
};

struct RegionFit {
  RegionModel model;
  KSelectionTrace trace;
  std::vector<ClusterSurrogate> surrogates;
};

struct ModelBundle {
  static constexpr int kVersion = 1;

  PipelineConfig config;
  std::shared_ptr<const FeatureSchema> schema;
  TrainedNetwork network;
  double tau = 0.5;
  SplitSummary split;
  Dataset validation;
  RegionFit latent;
  std::optional<RegionFit> baseline;
  std::string digest;  // hex SHA-256 of the payload; set by save/serialize
};

ModelBundle run_train(const PipelineConfig& config);

// Bundle document: {"format", "version", "digest", "payload"}.
std::string serialize_bundle(ModelBundle& bundle);
ModelBundle deserialize_bundle(const std::string& text);
void save_bundle(ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

struct ExplanationRecord {
  int cluster = 0;
  std::string case_id;
  std::size_t prefix_length = 0;
  std::optional<double> r2;
  std::string fidelity_warning;
  double deep_learning_prediction = 0.0;
  double surrogate_tree_prediction = 0.0;
  std::string predicted_label;
  std::string ground_truth_label;
  std::string decision_path;  // "Left-Left-Right"
  std::vector<std::string> path_conditions;
  Rule rule;
  std::string rule_text;
  double tau = 0.0;
  std::map<std::string, double> raw_features;  // features used by the rule

  bool operator==(const ExplanationRecord& other) const;
};

// Caches validation scores and latent codes so that many instances can be
// explained cheaply.
class Explainer {
 public:
  explicit Explainer(const ModelBundle& bundle);

  ExplanationRecord explain(std::string_view case_id, std::size_t prefix_length) const;
  const std::vector<double>& scores() const { return scores_; }
  const Eigen::MatrixXd& codes() const { return codes_; }

 private:
  const ModelBundle& bundle_;
  Eigen::MatrixXd features_;
  std::vector<double> scores_;
  Eigen::MatrixXd codes_;
  std::vector<FeatureInfo> info_;
};

ExplanationRecord run_explain(const ModelBundle& bundle, std::string_view case_id,
                              std::size_t prefix_length);
std::string record_to_json(const ExplanationRecord& record);

struct ClusterReport {
  int cluster = 0;
  std::size_t size = 0;
  double local_accuracy = 0.0;
  std::optional<double> r2;
  std::string flag;
  std::size_t leaves = 0;
};

struct RegionReport {
  std::string space;
  int k = 0;
  ClusterSS ss;
  double mean_accuracy = 0.0;
  std::optional<double> mean_r2;
  std::optional<double> max_r2;
  std::size_t flagged = 0;
  std::vector<ClusterReport> clusters;
  KSelectionTrace trace;
};

struct EvaluationReport {
  double auroc = 0.0;
  double tau = 0.0;
  ConfusionMatrix confusion;
  ClassificationMeasures measures;
  RocCurve roc;
  SplitSummary split;
  RegionReport latent;
  std::optional<RegionReport> baseline;
  int epochs_run = 0;
  int epoch_selected = 0;
  std::string r2_denominator;
};

EvaluationReport run_evaluate(const ModelBundle& bundle);

// summary.json, metrics.csv, roc.csv, clusters.csv, k_selection.csv and
// cluster_<id>.dot files. Byte-identical for identical bundles.
void write_report(const ModelBundle& bundle, const EvaluationReport& report,
                  const std::filesystem::path& dir);
std::string report_summary_json(const EvaluationReport& report);

void export_tree_dot(const ModelBundle& bundle, int cluster, const std::filesystem::path& path);
std::string tree_dot(const ModelBundle& bundle, int cluster);

// Encodes the configured log (schema fit on the training split) to CSV.
void export_encoded(const PipelineConfig& config, const std::filesystem::path& path);

}  // namespace xppm
