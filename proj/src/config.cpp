#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json_io.hpp"
#include "xppm/error.hpp"

namespace xppm {
namespace io {
namespace {

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(fmt::format("'{}' must be an object", section));
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!names.count(key)) throw ConfigError(fmt::format("unknown key '{}' in '{}'", key, section));
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("'{}.{}' has the wrong type", section, key));
  }
}

const char* op_name(LabelRule::Op op) { return op == LabelRule::Op::kIn ? "in" : "contains_any"; }

const char* scope_name(LabelRule::Scope s) {
  switch (s) {
    case LabelRule::Scope::kEvents: return "events";
    case LabelRule::Scope::kCase: return "case";
    case LabelRule::Scope::kEventsOrCase: return "events_or_case";
  }
  return "events_or_case";
}

}  // namespace

json label_rule_json(const LabelRule& r) {
  return {{"attribute", r.attribute}, {"op", op_name(r.op)}, {"scope", scope_name(r.scope)},
          {"values", r.values}};
}

LabelRule label_rule_from_json(const json& doc, const std::string& section) {
  check_keys(doc, section, {"attribute", "op", "scope", "values"});
  LabelRule r;
  read(doc, "attribute", r.attribute, section);
  read(doc, "values", r.values, section);
  std::string op = op_name(r.op), scope = scope_name(r.scope);
  read(doc, "op", op, section);
  read(doc, "scope", scope, section);
  if (op == "in") {
    r.op = LabelRule::Op::kIn;
  } else if (op == "contains_any") {
    r.op = LabelRule::Op::kContainsAny;
  } else {
    throw ConfigError(fmt::format("unknown label rule op '{}'", op));
  }
  if (scope == "events") {
    r.scope = LabelRule::Scope::kEvents;
  } else if (scope == "case") {
    r.scope = LabelRule::Scope::kCase;
  } else if (scope == "events_or_case") {
    r.scope = LabelRule::Scope::kEventsOrCase;
  } else {
    throw ConfigError(fmt::format("unknown label rule scope '{}'", scope));
  }
  return r;
}

json config_json(const PipelineConfig& c) {
  const auto& in = c.ingestion;
  json ingestion = {{"format", in.format},
                    {"file", in.file},
                    {"activity_keys", in.xes.label.keys},
                    {"separator", in.xes.label.separator},
                    {"whitespace_replacement", in.xes.label.whitespace_replacement},
                    {"timestamp_key", in.xes.timestamp_key},
                    {"case_id_key", in.xes.case_id_key},
                    {"case_column", in.csv.case_column},
                    {"activity_columns", in.csv.activity_columns},
                    {"timestamp_column", in.csv.timestamp_column},
                    {"infer_types", in.csv.infer_types},
                    {"label_rule", label_rule_json(c.encoding.label_rule)}};
  const auto& e = c.encoding;
  json encoding = {{"ngram_order", e.ngram_order},
                   {"categorical_attributes", e.categorical_attributes},
                   {"numeric_attributes", e.numeric_attributes},
                   {"prefix_policy",
                    {{"min_length", e.prefix_policy.min_length},
                     {"full_trace_only", e.prefix_policy.full_trace_only}}},
                   {"split_ratio", c.split_ratio},
                   {"positive_class_name", e.positive_class_name},
                   {"negative_class_name", e.negative_class_name}};
  const auto& t = c.training;
  json network = {{"hidden_layer_sizes", c.network.hidden_layer_sizes},
                  {"input_dropout_ratio", c.network.input_dropout_ratio},
                  {"hidden_dropout_ratio", c.network.hidden_dropout_ratio},
                  {"seed", c.network.seed},
                  {"training",
                   {{"rho", t.rho},
                    {"epsilon", t.epsilon},
                    {"minibatch_size", t.minibatch_size},
                    {"max_epochs", t.max_epochs},
                    {"stopping_tolerance", t.stopping_tolerance},
                    {"stopping_rounds", t.stopping_rounds},
                    {"lock_free_parallel", t.lock_free_parallel},
                    {"threads", t.threads}}}};
  const auto& r = c.regions;
  json regions = {{"k_min", r.k_min},
                  {"k_max", r.k_max},
                  {"restarts", r.restarts},
                  {"weighting", r.weighting == AccuracyWeighting::kUnweighted ? "unweighted"
                                                                              : "instance"},
                  {"baseline", r.baseline}};
  json surrogate = {{"max_depth", c.surrogate.max_depth},
                    {"min_samples_leaf", c.surrogate.min_samples_leaf},
                    {"min_variance_reduction", c.surrogate.min_variance_reduction}};
  json report = {{"r2_denominator",
                  c.report.r2_denominator == R2Denominator::kBlackBox ? "black_box" : "literal"},
                 {"dot_files", c.report.dot_files}};
  return {{"seed", c.seed},         {"ingestion", ingestion}, {"encoding", encoding},
          {"network", network},     {"regions", regions},     {"surrogate", surrogate},
          {"report", report}};
}

PipelineConfig config_from_json(const json& doc, const std::filesystem::path& base_dir,
                                bool apply_env) {
  check_keys(doc, "config",
             {"seed", "ingestion", "encoding", "network", "regions", "surrogate", "report"});
  PipelineConfig c;
  c.base_dir = base_dir;
  if (!doc.contains("seed")) throw ConfigError("'seed' is required");
  read(doc, "seed", c.seed, "config");

  if (doc.contains("ingestion")) {
    const auto& s = doc.at("ingestion");
    check_keys(s, "ingestion",
               {"format", "file", "activity_keys", "separator", "whitespace_replacement",
                "timestamp_key", "case_id_key", "case_column", "activity_columns",
                "timestamp_column", "infer_types", "label_rule"});
    auto& in = c.ingestion;
    read(s, "format", in.format, "ingestion");
    read(s, "file", in.file, "ingestion");
    read(s, "activity_keys", in.xes.label.keys, "ingestion");
    read(s, "separator", in.xes.label.separator, "ingestion");
    read(s, "whitespace_replacement", in.xes.label.whitespace_replacement, "ingestion");
    read(s, "timestamp_key", in.xes.timestamp_key, "ingestion");
    read(s, "case_id_key", in.xes.case_id_key, "ingestion");
    read(s, "case_column", in.csv.case_column, "ingestion");
    read(s, "activity_columns", in.csv.activity_columns, "ingestion");
    read(s, "timestamp_column", in.csv.timestamp_column, "ingestion");
    read(s, "infer_types", in.csv.infer_types, "ingestion");
    in.csv.separator = in.xes.label.separator;
    in.csv.whitespace_replacement = in.xes.label.whitespace_replacement;
    if (s.contains("label_rule")) {
      c.encoding.label_rule = label_rule_from_json(s.at("label_rule"), "ingestion.label_rule");
    }
  }

  if (doc.contains("encoding")) {
    const auto& s = doc.at("encoding");
    check_keys(s, "encoding",
               {"ngram_order", "categorical_attributes", "numeric_attributes", "prefix_policy",
                "split_ratio", "positive_class_name", "negative_class_name"});
    auto& e = c.encoding;
    read(s, "ngram_order", e.ngram_order, "encoding");
    read(s, "categorical_attributes", e.categorical_attributes, "encoding");
    read(s, "numeric_attributes", e.numeric_attributes, "encoding");
    read(s, "split_ratio", c.split_ratio, "encoding");
    read(s, "positive_class_name", e.positive_class_name, "encoding");
    read(s, "negative_class_name", e.negative_class_name, "encoding");
    if (s.contains("prefix_policy")) {
      const auto& p = s.at("prefix_policy");
      check_keys(p, "encoding.prefix_policy", {"min_length", "full_trace_only"});
      read(p, "min_length", e.prefix_policy.min_length, "encoding.prefix_policy");
      read(p, "full_trace_only", e.prefix_policy.full_trace_only, "encoding.prefix_policy");
    }
  }

  c.network.seed = c.seed;
  bool explicit_network_seed = false;
  if (doc.contains("network")) {
    const auto& s = doc.at("network");
    check_keys(s, "network",
               {"hidden_layer_sizes", "input_dropout_ratio", "hidden_dropout_ratio", "seed",
                "training"});
    read(s, "hidden_layer_sizes", c.network.hidden_layer_sizes, "network");
    read(s, "input_dropout_ratio", c.network.input_dropout_ratio, "network");
    read(s, "hidden_dropout_ratio", c.network.hidden_dropout_ratio, "network");
    explicit_network_seed = s.contains("seed");
    read(s, "seed", c.network.seed, "network");
    if (s.contains("training")) {
      const auto& t = s.at("training");
      check_keys(t, "network.training",
                 {"rho", "epsilon", "minibatch_size", "max_epochs", "stopping_tolerance",
                  "stopping_rounds", "lock_free_parallel", "threads"});
      auto& tc = c.training;
      const std::string sec = "network.training";
      read(t, "rho", tc.rho, sec);
      read(t, "epsilon", tc.epsilon, sec);
      read(t, "minibatch_size", tc.minibatch_size, sec);
      read(t, "max_epochs", tc.max_epochs, sec);
      read(t, "stopping_tolerance", tc.stopping_tolerance, sec);
      read(t, "stopping_rounds", tc.stopping_rounds, sec);
      read(t, "lock_free_parallel", tc.lock_free_parallel, sec);
      read(t, "threads", tc.threads, sec);
    }
  }

  if (doc.contains("regions")) {
    const auto& s = doc.at("regions");
    check_keys(s, "regions",
               {"k_min", "k_max", "restarts", "weighting", "baseline"});
    auto& r = c.regions;
    read(s, "k_min", r.k_min, "regions");
    read(s, "k_max", r.k_max, "regions");
    read(s, "restarts", r.restarts, "regions");
    read(s, "baseline", r.baseline, "regions");
    std::string weighting = "unweighted";
    read(s, "weighting", weighting, "regions");
    if (weighting == "unweighted") {
      r.weighting = AccuracyWeighting::kUnweighted;
    } else if (weighting == "instance") {
      r.weighting = AccuracyWeighting::kInstanceWeighted;
    } else {
      throw ConfigError(fmt::format("unknown weighting '{}'", weighting));
    }
  }

  if (doc.contains("surrogate")) {
    const auto& s = doc.at("surrogate");
    check_keys(s, "surrogate", {"max_depth", "min_samples_leaf", "min_variance_reduction"});
    read(s, "max_depth", c.surrogate.max_depth, "surrogate");
    read(s, "min_samples_leaf", c.surrogate.min_samples_leaf, "surrogate");
    read(s, "min_variance_reduction", c.surrogate.min_variance_reduction, "surrogate");
  }

  if (doc.contains("report")) {
    const auto& s = doc.at("report");
    check_keys(s, "report", {"r2_denominator", "dot_files"});
    std::string denom = "black_box";
    read(s, "r2_denominator", denom, "report");
    read(s, "dot_files", c.report.dot_files, "report");
    if (denom == "black_box") {
      c.report.r2_denominator = R2Denominator::kBlackBox;
    } else if (denom == "literal") {
      c.report.r2_denominator = R2Denominator::kLiteral;
    } else {
      throw ConfigError(fmt::format("unknown r2_denominator '{}'", denom));
    }
  }

  if (const char* env = std::getenv("XPPM_SEED"); apply_env && env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const auto value = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      c.seed = value;
      if (!explicit_network_seed) c.network.seed = value;
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("XPPM_SEED is not an unsigned integer: '{}'", env));
    }
  }
  c.validate();
  return c;
}

}  // namespace io

void PipelineConfig::validate() const {
  if (ingestion.format != "xes" && ingestion.format != "csv") {
    throw ConfigError(fmt::format("unknown log format '{}'", ingestion.format));
  }
  if (ingestion.file.empty()) throw ConfigError("'ingestion.file' is required");
  if (ingestion.format == "csv" &&
      (ingestion.csv.case_column.empty() || ingestion.csv.activity_columns.empty() ||
       ingestion.csv.timestamp_column.empty())) {
    throw ConfigError("csv ingestion needs case_column, activity_columns and timestamp_column");
  }
  if (encoding.ngram_order < 2) throw ConfigError("ngram_order must be >= 2");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must be in (0, 1)");
  network.validate();
  training.validate();
  if (regions.k_min < 1 || regions.k_max < regions.k_min) {
    throw ConfigError("regions need 1 <= k_min <= k_max");
  }
  if (regions.restarts < 1) throw ConfigError("regions.restarts must be >= 1");
  surrogate.validate();
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  io::json doc;
  try {
    doc = io::json::parse(text);
  } catch (const io::json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  return io::config_from_json(doc, base_dir);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

std::string config_to_json(const PipelineConfig& config) {
  return io::config_json(config).dump(2);
}

}  // namespace xppm
