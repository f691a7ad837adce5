#include "xppm/pipeline.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json_io.hpp"
#include "xppm/error.hpp"

namespace xppm {
namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::filesystem::path resolve(const PipelineConfig& config) {
  std::filesystem::path file(config.ingestion.file);
  if (file.is_relative() && !config.base_dir.empty()) file = config.base_dir / file;
  return file;
}

std::vector<std::string> case_ids(const EventLog& log) {
  std::vector<std::string> ids;
  ids.reserve(log.traces.size());
  for (const auto& t : log.traces) ids.push_back(t.case_id);
  return ids;
}

std::vector<ClusterSurrogate> surrogates_for(const RegionModel& model, const Eigen::MatrixXd& x,
                                             const std::vector<double>& scores,
                                             const std::vector<int>& labels, double tau,
                                             const PipelineConfig& config,
                                             const FeatureSchema& schema) {
  const auto kinds = split_kinds(schema);
  return fit_cluster_surrogates(model, x, scores, labels, tau, config.surrogate, kinds);
}

std::string class_name(const FeatureSchema& schema, int cls) {
  return cls == 1 ? schema.positive_class_name : schema.negative_class_name;
}

}  // namespace

EventLog load_log(const PipelineConfig& config) {
  const auto path = resolve(config);
  if (!std::filesystem::exists(path)) {
    throw ConfigError(fmt::format("log file '{}' does not exist", path.string()));
  }
  if (config.ingestion.format == "xes") {
    auto options = config.ingestion.xes;
    options.file_name = path.filename().string();
    return parse_xes_file(path.string(), options);
  }
  auto columns = config.ingestion.csv;
  columns.file_name = path.filename().string();
  return parse_csv_file(path.string(), columns);
}

ModelBundle run_train(const PipelineConfig& config) {
  config.validate();
  ModelBundle bundle;
  bundle.config = config;

  const EventLog log = stage("parse", [&] { return load_log(config); });
  spdlog::info("parse: {} traces, {} events, {} traces dropped", log.traces.size(),
               log.event_count(), log.source.dropped_traces);

  const CaseSplit split =
      stage("split", [&] { return split_cases(case_ids(log), config.split_ratio, config.seed); });
  spdlog::info("split: {} training cases, {} validation cases", split.train.size(),
               split.validation.size());

  auto sets = stage("encode", [&] {
    const EventLog train_log = select_cases(log, split.train);
    const EventLog validation_log = select_cases(log, split.validation);
    auto schema =
        std::make_shared<const FeatureSchema>(build_feature_schema(train_log, config.encoding));
    Dataset tr = encode_log(train_log, schema, SplitTag::kTrain);
    Dataset va = encode_log(validation_log, schema, SplitTag::kValidation);
    if (tr.size() == 0 || va.size() == 0) {
      throw DataError("no prefixes survive the prefix policy in one of the splits");
    }
    return std::pair{std::move(tr), std::move(va)};
  });
  Dataset train_set = std::move(sets.first);
  Dataset validation = std::move(sets.second);
  bundle.schema = train_set.schema;
  spdlog::info("encode: dimension {}, {} training / {} validation instances",
               bundle.schema->dimension(), train_set.size(), validation.size());

  bundle.network = stage("train", [&] {
    return train(train_set, validation, config.network, config.training);
  });
  spdlog::info("train: {} epochs run, epoch {} selected", bundle.network.history.size(),
               bundle.network.epoch_selected);

  const Eigen::MatrixXd x = validation.matrix();
  const std::vector<int> labels = validation.labels();
  const std::vector<double> scores = predict_scores(bundle.network.network, x);
  bundle.tau = stage("threshold", [&] { return select_equal_error_threshold(scores, labels).tau; });
  spdlog::info("threshold: tau {:.6f}, validation AUROC {:.4f}", bundle.tau, auroc(scores, labels));

  const Eigen::MatrixXd codes = latent_codes(bundle.network.network, x);
  const auto region_seed = derive_seed(config.seed, 1);
  const auto ks = k_range(config.regions.k_min, config.regions.k_max);
  bundle.latent = stage("regions", [&] {
    KSelection sel = select_k(codes, scores, labels, bundle.tau, ks, region_seed,
                              config.regions.restarts, config.regions.weighting,
                              RegionSpace::kLatent);
    return RegionFit{std::move(sel.model), std::move(sel.trace), {}};
  });
  spdlog::info("regions: k = {}, explained variance {:.4f}", bundle.latent.model.k,
               bundle.latent.model.fit_summary.explained_variance);

  bundle.latent.surrogates = stage("surrogate", [&] {
    return surrogates_for(bundle.latent.model, x, scores, labels, bundle.tau, config,
                          *bundle.schema);
  });

  if (config.regions.baseline) {
    try {
      RegionFit base;
      base.model = baseline_regions(x, bundle.latent.model.k, region_seed, config.regions.restarts);
      base.trace.weighting = config.regions.weighting;
      base.surrogates =
          surrogates_for(base.model, x, scores, labels, bundle.tau, config, *bundle.schema);
      bundle.baseline = std::move(base);
      spdlog::info("baseline: explained variance {:.4f} on the feature space",
                   bundle.baseline->model.fit_summary.explained_variance);
    } catch (const DataError& e) {
      spdlog::warn("baseline clustering skipped: {}", e.what());
    }
  }

  bundle.split = {split.train.size(), split.validation.size(), train_set.size(), validation.size(),
                  log.source.dropped_traces};
  bundle.validation = std::move(validation);
  return bundle;
}

Explainer::Explainer(const ModelBundle& bundle)
    : bundle_(bundle),
      features_(bundle.validation.matrix()),
      scores_(predict_scores(bundle.network.network, features_)),
      codes_(latent_codes(bundle.network.network, features_)),
      info_(describe_features(*bundle.schema)) {}

ExplanationRecord Explainer::explain(std::string_view case_id, std::size_t prefix_length) const {
  const auto found = bundle_.validation.find(case_id, prefix_length);
  if (found < 0) {
    throw DataError(
        fmt::format("instance ({}, {}) not in validation set", case_id, prefix_length));
  }
  const auto row = static_cast<Eigen::Index>(found);
  const auto idx = static_cast<std::size_t>(found);
  const Eigen::RowVectorXd code = codes_.row(row);
  const auto cluster =
      assign(bundle_.latent.model, {code.data(), static_cast<std::size_t>(code.size())});
  const auto& local = bundle_.latent.surrogates.at(cluster);
  const auto& x = bundle_.validation.instances[idx].features;

  ExplanationRecord rec;
  rec.cluster = static_cast<int>(cluster);
  rec.case_id = std::string(case_id);
  rec.prefix_length = prefix_length;
  rec.r2 = local.r2;
  if (!local.flag.empty()) {
    rec.fidelity_warning = fmt::format("local surrogate fidelity unavailable ({})", local.flag);
  }
  rec.tau = bundle_.tau;
  rec.deep_learning_prediction = scores_[idx];

  const DecisionPath path = decision_path(local.tree, x);
  rec.surrogate_tree_prediction = local.tree.nodes[path.leaf].value;
  rec.decision_path = path.directions();
  for (const auto& step : path.steps) {
    const auto& node = local.tree.nodes[step.node];
    Condition c{node.feature, Comparator::kLessEqual, node.threshold, 0.0};
    if (node.kind == SplitKind::kCategorical) {
      c.comparator = step.went_left ? Comparator::kIs : Comparator::kIsNot;
    } else if (!step.went_left) {
      c.comparator = Comparator::kGreater;
    }
    c.raw_threshold = info_[c.feature].to_raw(c.threshold);
    rec.path_conditions.push_back(render_condition_compact(c, info_));
  }
  rec.rule = extract_rule(local.tree, path);
  for (auto& c : rec.rule.conditions) {
    c.raw_threshold = info_[c.feature].to_raw(c.threshold);
    rec.raw_features[info_[c.feature].name] = info_[c.feature].to_raw(x[c.feature]);
  }
  rec.rule_text = render_rule(rec.rule, info_);

  const auto& schema = *bundle_.schema;
  rec.predicted_label = class_name(schema, rec.deep_learning_prediction >= rec.tau ? 1 : 0);
  rec.ground_truth_label = class_name(schema, bundle_.validation.instances[idx].label);
  return rec;
}

ExplanationRecord run_explain(const ModelBundle& bundle, std::string_view case_id,
                              std::size_t prefix_length) {
  return Explainer(bundle).explain(case_id, prefix_length);
}

std::string record_to_json(const ExplanationRecord& r) {
  using ojson = nlohmann::ordered_json;
  ojson conditions = ojson::array();
  for (const auto& c : r.rule.conditions) {
    const char* op = "<=";
    if (c.comparator == Comparator::kGreater) op = ">";
    if (c.comparator == Comparator::kIs) op = "is";
    if (c.comparator == Comparator::kIsNot) op = "is not";
    conditions.push_back(
        {{"feature", c.feature}, {"comparator", op}, {"threshold", c.threshold},
         {"raw_threshold", c.raw_threshold}});
  }
  ojson doc = {
      {"cluster_number", r.cluster},
      {"instance", {{"case_id", r.case_id}, {"prefix_length", r.prefix_length}}},
      {"r2_of_local_surrogate", r.r2 ? ojson(*r.r2) : ojson(nullptr)},
      {"deep_learning_prediction", r.deep_learning_prediction},
      {"surrogate_tree_prediction", r.surrogate_tree_prediction},
      {"prediction", r.predicted_label},
      {"ground_truth_label", r.ground_truth_label},
      {"tau", r.tau},
      {"decision_path", r.decision_path},
      {"path_conditions", r.path_conditions},
      {"rule",
       {{"text", r.rule_text},
        {"conditions", conditions},
        {"confidence", r.rule.confidence},
        {"ground_truth_confidence", r.rule.truth_confidence},
        {"support", r.rule.support},
        {"leaf", r.rule.leaf}}},
      {"raw_features", r.raw_features}};
  if (!r.fidelity_warning.empty()) doc["fidelity_warning"] = r.fidelity_warning;
  return doc.dump(2) + "\n";
}

bool ExplanationRecord::operator==(const ExplanationRecord& other) const {
  // The JSON form carries every field at round-trip precision.
  return record_to_json(*this) == record_to_json(other);
}

std::string tree_dot(const ModelBundle& bundle, int cluster) {
  if (cluster < 0 || static_cast<std::size_t>(cluster) >= bundle.latent.surrogates.size()) {
    throw DataError(fmt::format("unknown cluster {} (the bundle has {} clusters)", cluster,
                                bundle.latent.surrogates.size()));
  }
  std::ostringstream out;
  export_tree_dot(bundle.latent.surrogates[static_cast<std::size_t>(cluster)].tree,
                  describe_features(*bundle.schema), out);
  return out.str();
}

void export_tree_dot(const ModelBundle& bundle, int cluster, const std::filesystem::path& path) {
  const std::string text = tree_dot(bundle, cluster);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw Error(fmt::format("cannot write '{}'", path.string()));
}

void export_encoded(const PipelineConfig& config, const std::filesystem::path& path) {
  config.validate();
  const EventLog log = stage("parse", [&] { return load_log(config); });
  const Dataset data = stage("encode", [&] {
    const CaseSplit split = split_cases(case_ids(log), config.split_ratio, config.seed);
    auto schema = std::make_shared<const FeatureSchema>(
        build_feature_schema(select_cases(log, split.train), config.encoding));
    return encode_log(log, schema, SplitTag::kAll);
  });
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  export_dataset_csv(data, out);
  spdlog::info("encode: {} instances of dimension {} written", data.size(),
               data.schema->dimension());
}

}  // namespace xppm
