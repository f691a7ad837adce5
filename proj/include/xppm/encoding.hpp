#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "xppm/event_log.hpp"

namespace xppm {

inline constexpr const char* kTransitionJoiner = "---";
inline constexpr const char* kDurationSinceStart = "duration_since_start_seconds";
inline constexpr const char* kDurationSincePrevious =
    "duration_since_previous_event_seconds";
inline constexpr const char* kMissingLevel = "missing";

// Case-level predicate deciding push-to-front. A case matches when any event
// (or the case attributes, depending on scope) carries `attribute` with a
// value that is in `values` (kIn) or contains one of them (kContainsAny).
struct LabelRule {
  enum class Scope { kEvents, kCase, kEventsOrCase };
  enum class Op { kIn, kContainsAny };

  std::string attribute = "support_line";
  Op op = Op::kIn;
  Scope scope = Scope::kEventsOrCase;
  std::vector<std::string> values{"2nd", "3rd"};

  bool operator==(const LabelRule&) const = default;
};

struct PrefixPolicy {
  std::size_t min_length = 2;
  bool full_trace_only = false;

  bool operator==(const PrefixPolicy&) const = default;
};

struct EncodingConfig {
  int ngram_order = 2;
  std::vector<std::string> categorical_attributes;
  // Extra numeric attributes (last value seen in the prefix, 0 when absent).
  std::vector<std::string> numeric_attributes;
  LabelRule label_rule;
  PrefixPolicy prefix_policy;
  std::string positive_class_name = "Regular";
  std::string negative_class_name = "Push-to-Front";
};

enum class FeatureKind { kTransition, kNumeric, kOneHot };

struct ScalerEntry {
  double mean = 0.0;
  double stddev = 0.0;
  bool constant = false;

  bool operator==(const ScalerEntry&) const = default;
};

struct CategoricalFeature {
  std::string attribute;
  std::vector<std::string> levels;  // lexicographic

  bool operator==(const CategoricalFeature&) const = default;
};

// Layout of an encoded vector: [transition counts | numeric (z-scaled) |
// one-hot blocks], in that order.
struct FeatureSchema {
  int ngram_order = 2;
  std::vector<std::string> ngram_vocabulary;
  std::vector<std::string> numeric_features;
  std::vector<CategoricalFeature> categorical_features;
  std::vector<ScalerEntry> scaler;  // aligned with numeric_features
  LabelRule label_rule;
  PrefixPolicy prefix_policy;
  std::string positive_class_name = "Regular";
  std::string negative_class_name = "Push-to-Front";

  std::size_t dimension() const;
  std::size_t numeric_offset() const { return ngram_vocabulary.size(); }
  std::size_t categorical_offset() const {
    return ngram_vocabulary.size() + numeric_features.size();
  }
  FeatureKind kind(std::size_t index) const;
  // "A---B", "duration_since_start_seconds", "impact_Medium", ...
  std::vector<std::string> feature_names() const;
  // For a one-hot index: (attribute, level).
  std::pair<std::string, std::string> one_hot_level(std::size_t index) const;
  // Raw-unit value of a scaled numeric feature value (identity otherwise).
  double unscale(std::size_t index, double scaled) const;

  bool operator==(const FeatureSchema&) const = default;
};

// The first `length` events of a trace.
struct Prefix {
  const Trace* trace = nullptr;
  std::size_t length = 0;

  std::span<const Event> events() const {
    return {trace->events.data(), length};
  }
};

struct EncodedInstance {
  std::string case_id;
  std::size_t prefix_length = 0;
  std::vector<double> features;
  int label = 0;  // 1 = positive class (no push-to-front)
  std::vector<double> raw_numeric;  // pre-scaling numeric values

  double raw_value(const FeatureSchema& schema, std::size_t index) const;
  std::map<std::string, double> raw_feature_view(const FeatureSchema& schema) const;
};

enum class SplitTag { kTrain, kValidation, kAll };

struct Dataset {
  std::shared_ptr<const FeatureSchema> schema;
  std::vector<EncodedInstance> instances;
  SplitTag split_tag = SplitTag::kAll;

  std::size_t size() const { return instances.size(); }
  // Row-per-instance feature matrix.
  Eigen::MatrixXd matrix() const;
  std::vector<int> labels() const;
  // Index of the (case id, prefix length) instance, or -1.
  std::ptrdiff_t find(std::string_view case_id, std::size_t prefix_length) const;
};

std::vector<Prefix> generate_prefixes(const Trace& trace, const PrefixPolicy& policy);

// Fits vocabulary, categorical levels and scaler on every prefix (under the
// config's prefix policy) of the given log, which must be the training part.
FeatureSchema build_feature_schema(const EventLog& log, const EncodingConfig& config);

// Bulk encoder with precomputed lookup tables; cheap to reuse.
class Encoder {
 public:
  explicit Encoder(const FeatureSchema& schema);

  EncodedInstance encode(const Prefix& prefix) const;
  // Raw numeric values (durations first) of a prefix.
  std::vector<double> raw_numeric(const Prefix& prefix) const;

 private:
  const FeatureSchema& schema_;
  std::unordered_map<std::string, std::size_t> transition_index_;
  std::vector<std::unordered_map<std::string, std::size_t>> level_index_;
};

// Unlabeled encoding of one prefix.
EncodedInstance encode_prefix(const Prefix& prefix, const FeatureSchema& schema);

// True iff the case is push-to-front under the rule. Throws DataError when the
// rule's attribute is absent from every event and the case attributes.
bool label_case(const Trace& trace, const LabelRule& rule);

// Push-to-front flags for every trace of a log. Throws only when the rule's
// attribute is absent from the whole log.
std::vector<bool> label_cases(const EventLog& log, const LabelRule& rule);

// Positive-class label (1 = no push-to-front).
inline int class_label(bool push_to_front) { return push_to_front ? 0 : 1; }

// Encodes and labels every prefix of every trace.
Dataset encode_log(const EventLog& log, std::shared_ptr<const FeatureSchema> schema,
                   SplitTag tag);

struct CaseSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

// Deterministic shuffled split of distinct case ids; train gets
// round(ratio * n) cases clamped to [1, n - 1].
CaseSplit split_cases(std::vector<std::string> case_ids, double ratio,
                      std::uint64_t seed);

// Case-level split of an encoded dataset (all prefixes of a case stay
// together). Uses the same case partition as split_cases.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double ratio,
                                          std::uint64_t seed);

// Subset of a log holding only the listed cases (in log order).
EventLog select_cases(const EventLog& log, const std::vector<std::string>& case_ids);

// One row per instance; header = feature names + "label".
void export_dataset_csv(const Dataset& data, std::ostream& out);

}  // namespace xppm
