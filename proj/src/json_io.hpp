#pragma once

// JSON conversions shared by the config loader, the bundle and the report.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "xppm/pipeline.hpp"

namespace xppm::io {

using json = nlohmann::json;

json config_json(const PipelineConfig& config);
// XPPM_SEED is honoured only when apply_env is set (not for stored snapshots).
PipelineConfig config_from_json(const json& doc, const std::filesystem::path& base_dir,
                                bool apply_env = true);

json label_rule_json(const LabelRule& rule);
LabelRule label_rule_from_json(const json& doc, const std::string& section);

json schema_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const json& doc);

json network_json(const TrainedNetwork& net);
TrainedNetwork network_from_json(const json& doc);

json region_json(const RegionFit& fit);
RegionFit region_from_json(const json& doc);

json dataset_json(const Dataset& data);
Dataset dataset_from_json(const json& doc, std::shared_ptr<const FeatureSchema> schema);

json cluster_ss_json(const ClusterSS& ss);
json measures_json(const ClassificationMeasures& m);
json confusion_json(const ConfusionMatrix& cm);

std::string sha256_hex(const std::string& data);

}  // namespace xppm::io
