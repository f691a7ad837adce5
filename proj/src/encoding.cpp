#include "xppm/encoding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <unordered_set>

#include <fmt/format.h>

#include "csv.hpp"
#include "xppm/error.hpp"
#include "xppm/rng.hpp"

namespace xppm {
namespace {

std::string transition_key(std::span<const Event> window) {
  std::string key;
  for (std::size_t i = 0; i < window.size(); ++i) {
    if (i > 0) key += kTransitionJoiner;
    key += window[i].activity;
  }
  return key;
}

double seconds_between(Timestamp from, Timestamp to) {
  return static_cast<double>((to - from).count()) / 1000.0;
}

// Latest value of `attribute` within the prefix, falling back to the case
// attributes.
const AttributeValue* latest_value(const Prefix& prefix, const std::string& attribute) {
  const auto events = prefix.events();
  for (auto it = events.rbegin(); it != events.rend(); ++it) {
    auto found = it->attributes.find(attribute);
    if (found != it->attributes.end()) return &found->second;
  }
  auto found = prefix.trace->case_attributes.find(attribute);
  if (found != prefix.trace->case_attributes.end()) return &found->second;
  return nullptr;
}

std::string categorical_level(const Prefix& prefix, const std::string& attribute) {
  const auto* value = latest_value(prefix, attribute);
  if (value == nullptr) return kMissingLevel;
  auto level = attribute_to_string(*value);
  return level.empty() ? std::string(kMissingLevel) : level;
}

bool attribute_present(const Trace& trace, const std::string& attribute) {
  if (trace.case_attributes.count(attribute)) return true;
  return std::any_of(trace.events.begin(), trace.events.end(),
                     [&](const Event& e) { return e.attributes.count(attribute) > 0; });
}

bool value_matches(const AttributeValue& value, const LabelRule& rule) {
  const auto text = attribute_to_string(value);
  for (const auto& v : rule.values) {
    if (rule.op == LabelRule::Op::kIn ? text == v
                                      : text.find(v) != std::string::npos) {
      return true;
    }
  }
  return false;
}

bool rule_attribute_present(const Trace& trace, const LabelRule& rule) {
  const bool events = rule.scope != LabelRule::Scope::kCase;
  const bool cases = rule.scope != LabelRule::Scope::kEvents;
  if (cases && trace.case_attributes.count(rule.attribute)) return true;
  if (events) {
    for (const auto& e : trace.events) {
      if (e.attributes.count(rule.attribute)) return true;
    }
  }
  return false;
}

bool evaluate_rule(const Trace& trace, const LabelRule& rule) {
  if (rule.values.empty()) return false;
  if (rule.scope != LabelRule::Scope::kEvents) {
    auto it = trace.case_attributes.find(rule.attribute);
    if (it != trace.case_attributes.end() && value_matches(it->second, rule)) {
      return true;
    }
  }
  if (rule.scope != LabelRule::Scope::kCase) {
    for (const auto& e : trace.events) {
      auto it = e.attributes.find(rule.attribute);
      if (it != e.attributes.end() && value_matches(it->second, rule)) return true;
    }
  }
  return false;
}

}  // namespace

std::size_t FeatureSchema::dimension() const {
  std::size_t n = ngram_vocabulary.size() + numeric_features.size();
  for (const auto& c : categorical_features) n += c.levels.size();
  return n;
}

FeatureKind FeatureSchema::kind(std::size_t index) const {
  if (index < numeric_offset()) return FeatureKind::kTransition;
  if (index < categorical_offset()) return FeatureKind::kNumeric;
  return FeatureKind::kOneHot;
}

std::vector<std::string> FeatureSchema::feature_names() const {
  std::vector<std::string> names = ngram_vocabulary;
  names.insert(names.end(), numeric_features.begin(), numeric_features.end());
  for (const auto& c : categorical_features) {
    for (const auto& level : c.levels) names.push_back(c.attribute + "_" + level);
  }
  return names;
}

std::pair<std::string, std::string> FeatureSchema::one_hot_level(std::size_t index) const {
  std::size_t offset = categorical_offset();
  for (const auto& c : categorical_features) {
    if (index < offset + c.levels.size()) return {c.attribute, c.levels[index - offset]};
    offset += c.levels.size();
  }
  throw DataError(fmt::format("feature {} is not a one-hot column", index));
}

double FeatureSchema::unscale(std::size_t index, double scaled) const {
  if (kind(index) != FeatureKind::kNumeric) return scaled;
  const auto& s = scaler[index - numeric_offset()];
  if (s.constant) return s.mean;
  return scaled * s.stddev + s.mean;
}

double EncodedInstance::raw_value(const FeatureSchema& schema, std::size_t index) const {
  if (schema.kind(index) == FeatureKind::kNumeric) {
    return raw_numeric.at(index - schema.numeric_offset());
  }
  return features.at(index);
}

std::map<std::string, double> EncodedInstance::raw_feature_view(
    const FeatureSchema& schema) const {
  std::map<std::string, double> view;
  const auto names = schema.feature_names();
  for (std::size_t i = 0; i < names.size(); ++i) view[names[i]] = raw_value(schema, i);
  return view;
}

Eigen::MatrixXd Dataset::matrix() const {
  const auto cols = static_cast<Eigen::Index>(schema ? schema->dimension() : 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(instances.size()), cols);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& f = instances[i].features;
    if (static_cast<Eigen::Index>(f.size()) != cols) {
      throw DataError(fmt::format("instance {} has {} features, schema has {}", i,
                                  f.size(), cols));
    }
    m.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(f.data(), cols);
  }
  return m;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(inst.label);
  return out;
}

std::ptrdiff_t Dataset::find(std::string_view case_id, std::size_t prefix_length) const {
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i].case_id == case_id && instances[i].prefix_length == prefix_length) {
      return static_cast<std::ptrdiff_t>(i);
    }
  }
  return -1;
}

std::vector<Prefix> generate_prefixes(const Trace& trace, const PrefixPolicy& policy) {
  std::vector<Prefix> prefixes;
  const std::size_t n = trace.events.size();
  const std::size_t min_length = std::max<std::size_t>(policy.min_length, 1);
  if (n < min_length) return prefixes;
  if (policy.full_trace_only) {
    prefixes.push_back({&trace, n});
    return prefixes;
  }
  for (std::size_t len = min_length; len <= n; ++len) prefixes.push_back({&trace, len});
  return prefixes;
}

FeatureSchema build_feature_schema(const EventLog& log, const EncodingConfig& config) {
  if (config.ngram_order < 2) {
    throw ConfigError(fmt::format("n-gram order must be >= 2, got {}", config.ngram_order));
  }
  FeatureSchema schema;
  schema.ngram_order = config.ngram_order;
  schema.label_rule = config.label_rule;
  schema.prefix_policy = config.prefix_policy;
  schema.positive_class_name = config.positive_class_name;
  schema.negative_class_name = config.negative_class_name;
  schema.numeric_features = {kDurationSinceStart, kDurationSincePrevious};
  for (const auto& a : config.numeric_attributes) schema.numeric_features.push_back(a);

  std::vector<Prefix> prefixes;
  for (const auto& trace : log.traces) {
    auto p = generate_prefixes(trace, config.prefix_policy);
    prefixes.insert(prefixes.end(), p.begin(), p.end());
  }
  if (prefixes.empty()) throw DataError("training portion has no prefixes to encode");

  for (const auto& attribute : config.categorical_attributes) {
    const bool present = std::any_of(
        log.traces.begin(), log.traces.end(),
        [&](const Trace& t) { return attribute_present(t, attribute); });
    if (!present) {
      throw DataError(fmt::format(
          "categorical attribute '{}' is absent from every trace", attribute));
    }
  }

  // Transitions are collected from whole prefixes (a prefix's windows are a
  // subset of the longest prefix's windows).
  const auto order = static_cast<std::size_t>(config.ngram_order);
  std::set<std::string> vocabulary;
  for (const auto& trace : log.traces) {
    const auto prefixes_of_trace = generate_prefixes(trace, config.prefix_policy);
    if (prefixes_of_trace.empty()) continue;
    const auto events = prefixes_of_trace.back().events();
    for (std::size_t i = 0; i + order <= events.size(); ++i) {
      vocabulary.insert(transition_key(events.subspan(i, order)));
    }
  }
  schema.ngram_vocabulary.assign(vocabulary.begin(), vocabulary.end());

  for (const auto& attribute : config.categorical_attributes) {
    std::set<std::string> levels;
    for (const auto& p : prefixes) levels.insert(categorical_level(p, attribute));
    schema.categorical_features.push_back({attribute, {levels.begin(), levels.end()}});
  }

  // Population mean / stddev over all training prefixes.
  schema.scaler.assign(schema.numeric_features.size(), ScalerEntry{});
  Encoder raw_encoder(schema);
  std::vector<double> sum(schema.numeric_features.size(), 0.0);
  std::vector<std::vector<double>> values(schema.numeric_features.size());
  for (const auto& p : prefixes) {
    const auto raw = raw_encoder.raw_numeric(p);
    for (std::size_t j = 0; j < raw.size(); ++j) values[j].push_back(raw[j]);
  }
  for (std::size_t j = 0; j < values.size(); ++j) {
    const auto n = static_cast<double>(values[j].size());
    double mean = 0.0;
    for (double v : values[j]) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values[j]) ss += (v - mean) * (v - mean);
    const double stddev = std::sqrt(ss / n);
    auto& entry = schema.scaler[j];
    entry.mean = mean;
    entry.constant = !(stddev > 1e-12 * std::max(1.0, std::abs(mean)));
    entry.stddev = entry.constant ? 0.0 : stddev;
  }
  return schema;
}

Encoder::Encoder(const FeatureSchema& schema) : schema_(schema) {
  for (std::size_t i = 0; i < schema.ngram_vocabulary.size(); ++i) {
    transition_index_.emplace(schema.ngram_vocabulary[i], i);
  }
  for (const auto& c : schema.categorical_features) {
    auto& idx = level_index_.emplace_back();
    for (std::size_t i = 0; i < c.levels.size(); ++i) idx.emplace(c.levels[i], i);
  }
}

std::vector<double> Encoder::raw_numeric(const Prefix& prefix) const {
  const auto events = prefix.events();
  std::vector<double> raw(schema_.numeric_features.size(), 0.0);
  raw[0] = seconds_between(events.front().timestamp, events.back().timestamp);
  raw[1] = events.size() > 1
               ? seconds_between(events[events.size() - 2].timestamp,
                                 events.back().timestamp)
               : 0.0;
  for (std::size_t j = 2; j < raw.size(); ++j) {
    const auto* value = latest_value(prefix, schema_.numeric_features[j]);
    if (value == nullptr) continue;
    if (const auto* d = std::get_if<double>(value)) {
      raw[j] = *d;
    } else if (const auto* b = std::get_if<bool>(value)) {
      raw[j] = *b ? 1.0 : 0.0;
    } else if (const auto* s = std::get_if<std::string>(value)) {
      double v = 0.0;
      auto [end, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
      if (ec == std::errc{} && end == s->data() + s->size()) raw[j] = v;
    }
  }
  return raw;
}

EncodedInstance Encoder::encode(const Prefix& prefix) const {
  EncodedInstance inst;
  inst.case_id = prefix.trace->case_id;
  inst.prefix_length = prefix.length;
  inst.features.assign(schema_.dimension(), 0.0);

  const auto events = prefix.events();
  const auto order = static_cast<std::size_t>(schema_.ngram_order);
  for (std::size_t i = 0; i + order <= events.size(); ++i) {
    auto it = transition_index_.find(transition_key(events.subspan(i, order)));
    if (it != transition_index_.end()) inst.features[it->second] += 1.0;
  }

  inst.raw_numeric = raw_numeric(prefix);
  const std::size_t numeric_offset = schema_.numeric_offset();
  for (std::size_t j = 0; j < inst.raw_numeric.size(); ++j) {
    const auto& s = schema_.scaler[j];
    inst.features[numeric_offset + j] =
        s.constant ? 0.0 : (inst.raw_numeric[j] - s.mean) / s.stddev;
  }

  std::size_t offset = schema_.categorical_offset();
  for (std::size_t c = 0; c < schema_.categorical_features.size(); ++c) {
    const auto& feature = schema_.categorical_features[c];
    const auto level = categorical_level(prefix, feature.attribute);
    auto it = level_index_[c].find(level);
    if (it != level_index_[c].end()) inst.features[offset + it->second] = 1.0;
    offset += feature.levels.size();
  }
  return inst;
}

EncodedInstance encode_prefix(const Prefix& prefix, const FeatureSchema& schema) {
  if (prefix.trace == nullptr || prefix.length == 0 ||
      prefix.length > prefix.trace->events.size()) {
    throw DataError("prefix must hold between 1 and trace-length events");
  }
  return Encoder(schema).encode(prefix);
}

bool label_case(const Trace& trace, const LabelRule& rule) {
  if (rule.values.empty()) return false;
  if (!rule_attribute_present(trace, rule)) {
    throw DataError(fmt::format("label rule attribute '{}' is absent from case '{}'",
                                rule.attribute, trace.case_id));
  }
  return evaluate_rule(trace, rule);
}

std::vector<bool> label_cases(const EventLog& log, const LabelRule& rule) {
  std::vector<bool> flags(log.traces.size(), false);
  if (rule.values.empty()) return flags;
  const bool present =
      std::any_of(log.traces.begin(), log.traces.end(),
                  [&](const Trace& t) { return rule_attribute_present(t, rule); });
  if (!present && !log.traces.empty()) {
    throw DataError(fmt::format("label rule attribute '{}' is absent from the log",
                                rule.attribute));
  }
  for (std::size_t i = 0; i < log.traces.size(); ++i) {
    flags[i] = evaluate_rule(log.traces[i], rule);
  }
  return flags;
}

Dataset encode_log(const EventLog& log, std::shared_ptr<const FeatureSchema> schema,
                   SplitTag tag) {
  Dataset data;
  data.schema = schema;
  data.split_tag = tag;
  const auto ptf = label_cases(log, schema->label_rule);
  const Encoder encoder(*schema);
  for (std::size_t t = 0; t < log.traces.size(); ++t) {
    for (const auto& p : generate_prefixes(log.traces[t], schema->prefix_policy)) {
      auto inst = encoder.encode(p);
      inst.label = class_label(ptf[t]);
      data.instances.push_back(std::move(inst));
    }
  }
  return data;
}

CaseSplit split_cases(std::vector<std::string> case_ids, double ratio,
                      std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError(fmt::format("split ratio must be in (0,1), got {}", ratio));
  }
  std::sort(case_ids.begin(), case_ids.end());
  case_ids.erase(std::unique(case_ids.begin(), case_ids.end()), case_ids.end());
  if (case_ids.size() < 2) throw DataError("splitting needs at least 2 cases");

  Rng rng(seed);
  rng.shuffle(std::span<std::string>(case_ids));
  const auto n = case_ids.size();
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  CaseSplit split;
  split.train.assign(case_ids.begin(), case_ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(case_ids.begin() + static_cast<std::ptrdiff_t>(n_train), case_ids.end());
  return split;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double ratio,
                                          std::uint64_t seed) {
  if (data.instances.empty()) throw DataError("cannot split an empty dataset");
  std::vector<std::string> ids;
  for (const auto& inst : data.instances) ids.push_back(inst.case_id);
  const auto split = split_cases(std::move(ids), ratio, seed);
  const std::unordered_set<std::string> train_ids(split.train.begin(), split.train.end());

  Dataset train{data.schema, {}, SplitTag::kTrain};
  Dataset validation{data.schema, {}, SplitTag::kValidation};
  for (const auto& inst : data.instances) {
    (train_ids.count(inst.case_id) ? train : validation).instances.push_back(inst);
  }
  return {std::move(train), std::move(validation)};
}

EventLog select_cases(const EventLog& log, const std::vector<std::string>& case_ids) {
  const std::unordered_set<std::string> keep(case_ids.begin(), case_ids.end());
  EventLog subset;
  subset.source = log.source;
  for (const auto& t : log.traces) {
    if (keep.count(t.case_id)) subset.traces.push_back(t);
  }
  return subset;
}

void export_dataset_csv(const Dataset& data, std::ostream& out) {
  auto header = data.schema->feature_names();
  header.emplace_back("label");
  csv::write_row(out, header);
  std::vector<std::string> row;
  char buf[64];
  for (const auto& inst : data.instances) {
    row.clear();
    for (double v : inst.features) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
      row.emplace_back(buf, end);
    }
    row.push_back(std::to_string(inst.label));
    csv::write_row(out, row);
  }
}

}  // namespace xppm
