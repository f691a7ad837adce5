#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "json_io.hpp"
#include "xppm/error.hpp"

namespace xppm {
namespace io {
namespace {

constexpr const char* kFormatTag = "xppm-bundle";

json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) throw DataError("cannot serialize a non-finite value");
      data.push_back(m(r, c));
    }
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& doc) {
  const auto rows = doc.at("rows").get<Eigen::Index>();
  const auto cols = doc.at("cols").get<Eigen::Index>();
  const auto data = doc.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw DataError("matrix shape does not match its data");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++];
  }
  return m;
}

json tree_json(const SurrogateTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({{"leaf", n.leaf},
                     {"feature", n.feature},
                     {"categorical", n.kind == SplitKind::kCategorical},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"depth", n.depth},
                     {"value", n.value},
                     {"samples", n.samples},
                     {"leaf_class", n.leaf_class},
                     {"confidence", n.confidence},
                     {"truth_confidence", n.truth_confidence}});
  }
  return {{"cluster_id", tree.cluster_id}, {"tau", tree.tau}, {"nodes", nodes}};
}

SurrogateTree tree_from_json(const json& doc) {
  SurrogateTree tree;
  tree.cluster_id = doc.at("cluster_id").get<int>();
  tree.tau = doc.at("tau").get<double>();
  for (const auto& j : doc.at("nodes")) {
    TreeNode n;
    n.leaf = j.at("leaf").get<bool>();
    n.feature = j.at("feature").get<std::size_t>();
    n.kind = j.at("categorical").get<bool>() ? SplitKind::kCategorical : SplitKind::kNumeric;
    n.threshold = j.at("threshold").get<double>();
    n.left = j.at("left").get<int>();
    n.right = j.at("right").get<int>();
    n.depth = j.at("depth").get<int>();
    n.value = j.at("value").get<double>();
    n.samples = j.at("samples").get<std::size_t>();
    n.leaf_class = j.at("leaf_class").get<int>();
    n.confidence = j.at("confidence").get<double>();
    n.truth_confidence = j.at("truth_confidence").get<double>();
    tree.nodes.push_back(n);
  }
  const auto count = static_cast<int>(tree.nodes.size());
  if (count == 0) throw DataError("tree without nodes");
  for (const auto& n : tree.nodes) {
    if (!n.leaf && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count)) {
      throw DataError("tree node links out of range");
    }
  }
  return tree;
}

ClusterSS cluster_ss_from_json(const json& doc) {
  ClusterSS ss;
  ss.sswc = doc.at("sswc").get<double>();
  ss.ssbc = doc.at("ssbc").get<double>();
  ss.total = doc.at("total").get<double>();
  ss.explained_variance = doc.at("explained_variance").get<double>();
  ss.between_within_ratio = doc.at("between_within_ratio").get<double>();
  ss.ratio_undefined = doc.at("ratio_undefined").get<bool>();
  ss.cluster_sizes = doc.at("cluster_sizes").get<std::vector<std::size_t>>();
  ss.empty_clusters = doc.at("empty_clusters").get<std::vector<std::size_t>>();
  return ss;
}

}  // namespace

json cluster_ss_json(const ClusterSS& ss) {
  return {{"sswc", ss.sswc},
          {"ssbc", ss.ssbc},
          {"total", ss.total},
          {"explained_variance", ss.explained_variance},
          {"between_within_ratio", ss.between_within_ratio},
          {"ratio_undefined", ss.ratio_undefined},
          {"cluster_sizes", ss.cluster_sizes},
          {"empty_clusters", ss.empty_clusters}};
}

json confusion_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
}

json measures_json(const ClassificationMeasures& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
          {"specificity", m.specificity}, {"mcc", m.mcc}, {"f1", m.f1},
          {"fnr", m.fnr}, {"fpr", m.fpr}, {"undefined", m.undefined}};
}

json schema_json(const FeatureSchema& s) {
  json categorical = json::array();
  for (const auto& c : s.categorical_features) {
    categorical.push_back({{"attribute", c.attribute}, {"levels", c.levels}});
  }
  json scaler = json::array();
  for (const auto& e : s.scaler) {
    scaler.push_back({{"mean", e.mean}, {"stddev", e.stddev}, {"constant", e.constant}});
  }
  return {{"ngram_order", s.ngram_order},
          {"ngram_vocabulary", s.ngram_vocabulary},
          {"numeric_features", s.numeric_features},
          {"categorical_features", categorical},
          {"scaler", scaler},
          {"label_rule", label_rule_json(s.label_rule)},
          {"prefix_policy",
           {{"min_length", s.prefix_policy.min_length},
            {"full_trace_only", s.prefix_policy.full_trace_only}}},
          {"positive_class_name", s.positive_class_name},
          {"negative_class_name", s.negative_class_name}};
}

FeatureSchema schema_from_json(const json& doc) {
  FeatureSchema s;
  s.ngram_order = doc.at("ngram_order").get<int>();
  s.ngram_vocabulary = doc.at("ngram_vocabulary").get<std::vector<std::string>>();
  s.numeric_features = doc.at("numeric_features").get<std::vector<std::string>>();
  for (const auto& c : doc.at("categorical_features")) {
    s.categorical_features.push_back(
        {c.at("attribute").get<std::string>(), c.at("levels").get<std::vector<std::string>>()});
  }
  for (const auto& e : doc.at("scaler")) {
    s.scaler.push_back(
        {e.at("mean").get<double>(), e.at("stddev").get<double>(), e.at("constant").get<bool>()});
  }
  if (s.scaler.size() != s.numeric_features.size()) throw DataError("scaler size mismatch");
  s.label_rule = label_rule_from_json(doc.at("label_rule"), "schema.label_rule");
  s.prefix_policy.min_length = doc.at("prefix_policy").at("min_length").get<std::size_t>();
  s.prefix_policy.full_trace_only = doc.at("prefix_policy").at("full_trace_only").get<bool>();
  s.positive_class_name = doc.at("positive_class_name").get<std::string>();
  s.negative_class_name = doc.at("negative_class_name").get<std::string>();
  return s;
}

json network_json(const TrainedNetwork& t) {
  const auto& cfg = t.network.config();
  json layers = json::array();
  for (const auto& l : t.network.layers()) {
    layers.push_back({{"weights", matrix_json(l.weights)}, {"bias", matrix_json(l.bias)}});
  }
  const auto& tc = t.training;
  return {{"config",
           {{"hidden_layer_sizes", cfg.hidden_layer_sizes},
            {"input_dropout_ratio", cfg.input_dropout_ratio},
            {"hidden_dropout_ratio", cfg.hidden_dropout_ratio},
            {"seed", cfg.seed}}},
          {"training",
           {{"rho", tc.rho},
            {"epsilon", tc.epsilon},
            {"minibatch_size", tc.minibatch_size},
            {"max_epochs", tc.max_epochs},
            {"stopping_tolerance", tc.stopping_tolerance},
            {"stopping_rounds", tc.stopping_rounds},
            {"lock_free_parallel", tc.lock_free_parallel},
            {"threads", tc.threads}}},
          {"layers", layers},
          {"history", t.history},
          {"epoch_selected", t.epoch_selected}};
}

TrainedNetwork network_from_json(const json& doc) {
  NetworkConfig cfg;
  const auto& c = doc.at("config");
  cfg.hidden_layer_sizes = c.at("hidden_layer_sizes").get<std::vector<int>>();
  cfg.input_dropout_ratio = c.at("input_dropout_ratio").get<double>();
  cfg.hidden_dropout_ratio = c.at("hidden_dropout_ratio").get<double>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  std::vector<DenseLayer> layers;
  for (const auto& l : doc.at("layers")) {
    DenseLayer layer;
    layer.weights = matrix_from_json(l.at("weights"));
    const Eigen::MatrixXd bias = matrix_from_json(l.at("bias"));
    if (bias.cols() != 1) throw DataError("bias must be a column");
    layer.bias = bias.col(0);
    layers.push_back(std::move(layer));
  }
  TrainedNetwork t;
  t.network = Network(std::move(layers), cfg);
  const auto& tc = doc.at("training");
  t.training.rho = tc.at("rho").get<double>();
  t.training.epsilon = tc.at("epsilon").get<double>();
  t.training.minibatch_size = tc.at("minibatch_size").get<int>();
  t.training.max_epochs = tc.at("max_epochs").get<int>();
  t.training.stopping_tolerance = tc.at("stopping_tolerance").get<double>();
  t.training.stopping_rounds = tc.at("stopping_rounds").get<int>();
  t.training.lock_free_parallel = tc.at("lock_free_parallel").get<bool>();
  t.training.threads = tc.at("threads").get<int>();
  t.history = doc.at("history").get<std::vector<double>>();
  t.epoch_selected = doc.at("epoch_selected").get<int>();
  return t;
}

json region_json(const RegionFit& fit) {
  const auto& m = fit.model;
  json candidates = json::array();
  for (const auto& c : fit.trace.candidates) {
    candidates.push_back({{"k", c.k},
                          {"feasible", c.feasible},
                          {"mean_accuracy", c.mean_accuracy},
                          {"explained_variance", c.explained_variance},
                          {"chosen", c.chosen}});
  }
  json surrogates = json::array();
  for (const auto& s : fit.surrogates) {
    surrogates.push_back({{"tree", tree_json(s.tree)},
                          {"r2", s.r2 ? json(*s.r2) : json(nullptr)},
                          {"flag", s.flag},
                          {"size", s.size},
                          {"local_accuracy", s.local_accuracy}});
  }
  return {{"model",
           {{"space", to_string(m.space)},
            {"centroids", matrix_json(m.centroids)},
            {"assignments", m.assignments},
            {"k", m.k},
            {"seed", m.seed},
            {"restarts", m.restarts},
            {"inertia", m.inertia},
            {"fit_summary", cluster_ss_json(m.fit_summary)},
            {"inertia_trace", m.inertia_trace}}},
          {"trace",
           {{"weighting", fit.trace.weighting == AccuracyWeighting::kUnweighted ? "unweighted"
                                                                               : "instance"},
            {"candidates", candidates}}},
          {"surrogates", surrogates}};
}

RegionFit region_from_json(const json& doc) {
  RegionFit fit;
  const auto& m = doc.at("model");
  fit.model.space =
      m.at("space").get<std::string>() == "latent" ? RegionSpace::kLatent : RegionSpace::kOriginal;
  fit.model.centroids = matrix_from_json(m.at("centroids"));
  fit.model.assignments = m.at("assignments").get<std::vector<std::size_t>>();
  fit.model.k = m.at("k").get<int>();
  fit.model.seed = m.at("seed").get<std::uint64_t>();
  fit.model.restarts = m.at("restarts").get<int>();
  fit.model.inertia = m.at("inertia").get<double>();
  fit.model.fit_summary = cluster_ss_from_json(m.at("fit_summary"));
  fit.model.inertia_trace = m.at("inertia_trace").get<std::vector<double>>();
  if (fit.model.centroids.rows() != fit.model.k) throw DataError("centroid count differs from k");
  const auto& t = doc.at("trace");
  fit.trace.weighting = t.at("weighting").get<std::string>() == "unweighted"
                            ? AccuracyWeighting::kUnweighted
                            : AccuracyWeighting::kInstanceWeighted;
  for (const auto& c : t.at("candidates")) {
    fit.trace.candidates.push_back({c.at("k").get<int>(), c.at("feasible").get<bool>(),
                                    c.at("mean_accuracy").get<double>(),
                                    c.at("explained_variance").get<double>(),
                                    c.at("chosen").get<bool>()});
  }
  for (const auto& s : doc.at("surrogates")) {
    ClusterSurrogate cs;
    cs.tree = tree_from_json(s.at("tree"));
    if (!s.at("r2").is_null()) cs.r2 = s.at("r2").get<double>();
    cs.flag = s.at("flag").get<std::string>();
    cs.size = s.at("size").get<std::size_t>();
    cs.local_accuracy = s.at("local_accuracy").get<double>();
    fit.surrogates.push_back(std::move(cs));
  }
  return fit;
}

json dataset_json(const Dataset& data) {
  json instances = json::array();
  for (const auto& inst : data.instances) {
    instances.push_back({{"case_id", inst.case_id},
                         {"prefix_length", inst.prefix_length},
                         {"features", inst.features},
                         {"label", inst.label},
                         {"raw_numeric", inst.raw_numeric}});
  }
  return {{"instances", instances}};
}

Dataset dataset_from_json(const json& doc, std::shared_ptr<const FeatureSchema> schema) {
  Dataset data;
  data.schema = std::move(schema);
  data.split_tag = SplitTag::kValidation;
  const auto dim = data.schema->dimension();
  for (const auto& j : doc.at("instances")) {
    EncodedInstance inst;
    inst.case_id = j.at("case_id").get<std::string>();
    inst.prefix_length = j.at("prefix_length").get<std::size_t>();
    inst.features = j.at("features").get<std::vector<double>>();
    inst.label = j.at("label").get<int>();
    inst.raw_numeric = j.at("raw_numeric").get<std::vector<double>>();
    if (inst.features.size() != dim) throw DataError("instance dimension differs from schema");
    data.instances.push_back(std::move(inst));
  }
  return data;
}

std::string sha256_hex(const std::string& data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace io

namespace {

io::json bundle_payload(const ModelBundle& b) {
  const auto& s = b.split;
  io::json payload = {
      {"config", io::config_json(b.config)},
      {"schema", io::schema_json(*b.schema)},
      {"network", io::network_json(b.network)},
      {"tau", b.tau},
      {"split",
       {{"train_cases", s.train_cases},
        {"validation_cases", s.validation_cases},
        {"train_instances", s.train_instances},
        {"validation_instances", s.validation_instances},
        {"dropped_traces", s.dropped_traces}}},
      {"validation", io::dataset_json(b.validation)},
      {"latent", io::region_json(b.latent)},
      {"baseline", b.baseline ? io::region_json(*b.baseline) : io::json(nullptr)}};
  return payload;
}

[[noreturn]] void corrupt(const std::string& detail) {
  throw DataError(fmt::format("corrupt bundle: {}", detail));
}

}  // namespace

std::string serialize_bundle(ModelBundle& bundle) {
  const std::string payload = bundle_payload(bundle).dump();
  bundle.digest = io::sha256_hex(payload);
  // The payload text is spliced in verbatim so the digest covers the exact
  // bytes on disk.
  return fmt::format("{{\"format\":\"{}\",\"version\":{},\"digest\":\"{}\",\"payload\":{}}}\n",
                     io::kFormatTag, ModelBundle::kVersion, bundle.digest, payload);
}

ModelBundle deserialize_bundle(const std::string& text) {
  io::json doc;
  try {
    doc = io::json::parse(text);
  } catch (const io::json::parse_error&) {
    corrupt("not a complete document");
  }
  if (!doc.is_object() || doc.value("format", "") != io::kFormatTag) corrupt("missing format tag");
  if (!doc.contains("version") || !doc.at("version").is_number_integer()) corrupt("missing version");
  const int version = doc.at("version").get<int>();
  if (version != ModelBundle::kVersion) {
    throw DataError(fmt::format("unsupported bundle version {} (expected {})", version,
                                ModelBundle::kVersion));
  }
  if (!doc.contains("payload") || !doc.contains("digest")) corrupt("missing payload or digest");
  const auto& payload = doc.at("payload");
  const std::string digest = io::sha256_hex(payload.dump());
  if (digest != doc.at("digest").get<std::string>()) corrupt("digest mismatch");

  ModelBundle b;
  try {
    b.config = io::config_from_json(payload.at("config"), {}, false);
    b.schema = std::make_shared<const FeatureSchema>(io::schema_from_json(payload.at("schema")));
    b.network = io::network_from_json(payload.at("network"));
    b.tau = payload.at("tau").get<double>();
    const auto& s = payload.at("split");
    b.split.train_cases = s.at("train_cases").get<std::size_t>();
    b.split.validation_cases = s.at("validation_cases").get<std::size_t>();
    b.split.train_instances = s.at("train_instances").get<std::size_t>();
    b.split.validation_instances = s.at("validation_instances").get<std::size_t>();
    b.split.dropped_traces = s.at("dropped_traces").get<std::size_t>();
    b.validation = io::dataset_from_json(payload.at("validation"), b.schema);
    b.latent = io::region_from_json(payload.at("latent"));
    if (!payload.at("baseline").is_null()) b.baseline = io::region_from_json(payload.at("baseline"));
  } catch (const io::json::exception& e) {
    corrupt(e.what());
  }
  if (b.network.network.input_dim() != static_cast<int>(b.schema->dimension())) {
    corrupt("network input width differs from the schema");
  }
  if (b.latent.model.assignments.size() != b.validation.size()) {
    corrupt("region assignments do not cover the validation set");
  }
  b.digest = digest;
  return b;
}

void save_bundle(ModelBundle& bundle, const std::filesystem::path& path) {
  const std::string text = serialize_bundle(bundle);
  // Write to a sibling temp file first so a failed run never leaves a
  // partial bundle behind.
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write '{}'", tmp.string()));
    out << text;
    if (!out.flush()) throw Error(fmt::format("cannot write '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read bundle '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize_bundle(buffer.str());
}

}  // namespace xppm
