#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "xppm/encoding.hpp"
#include "xppm/error.hpp"
#include "xppm/rng.hpp"
#include "xppm/synthetic.hpp"

using namespace xppm;

namespace {

Timestamp at(long seconds) { return Timestamp{std::chrono::milliseconds(seconds * 1000)}; }

Trace make_trace(const std::string& id, const std::vector<std::string>& activities,
                 std::vector<long> seconds = {}) {
  Trace t;
  t.case_id = id;
  for (std::size_t i = 0; i < activities.size(); ++i) {
    const long s = seconds.empty() ? static_cast<long>(i * 10) : seconds[i];
    t.events.push_back({activities[i], at(s), {}});
  }
  return t;
}

EncodingConfig plain_config() {
  EncodingConfig c;
  c.label_rule.values.clear();
  return c;
}

std::shared_ptr<const FeatureSchema> share(FeatureSchema s) {
  return std::make_shared<const FeatureSchema>(std::move(s));
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("case-" + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("bigram vocabulary is the sorted set of observed transitions") {
  EventLog log;
  log.traces = {make_trace("1", {"A", "B", "A", "B"}), make_trace("2", {"A", "B"})};
  const auto schema = build_feature_schema(log, plain_config());
  CHECK(schema.ngram_vocabulary == std::vector<std::string>{"A---B", "B---A"});
  CHECK(schema.numeric_features ==
        std::vector<std::string>{kDurationSinceStart, kDurationSincePrevious});
  CHECK(schema.dimension() == 4);
}

TEST_CASE("single-event traces give an empty vocabulary") {
  EventLog log;
  log.traces = {make_trace("1", {"A"}), make_trace("2", {"B"})};
  auto config = plain_config();
  config.prefix_policy.min_length = 1;
  config.categorical_attributes = {"impact"};
  log.traces[0].case_attributes["impact"] = std::string("Low");
  const auto schema = build_feature_schema(log, config);
  CHECK(schema.ngram_vocabulary.empty());
  CHECK(schema.numeric_features.size() == 2);
  REQUIRE(schema.categorical_features.size() == 1);
  CHECK(schema.categorical_features[0].levels == std::vector<std::string>{"Low", "missing"});
  CHECK(schema.dimension() == 4);
}

TEST_CASE("categorical levels are lexicographic") {
  EventLog log;
  log.traces = {make_trace("1", {"A", "B"}), make_trace("2", {"A", "B"})};
  log.traces[0].events[1].attributes["impact"] = std::string("Medium");
  log.traces[1].events[1].attributes["impact"] = std::string("High");
  log.traces[0].events[0].attributes["impact"] = std::string("Medium");
  log.traces[1].events[0].attributes["impact"] = std::string("High");
  auto config = plain_config();
  config.categorical_attributes = {"impact"};
  const auto schema = build_feature_schema(log, config);
  REQUIRE(schema.categorical_features.size() == 1);
  CHECK(schema.categorical_features[0].levels == std::vector<std::string>{"High", "Medium"});
  CHECK(schema.feature_names().back() == "impact_Medium");
}

TEST_CASE("schema building rejects bad inputs") {
  EventLog log;
  log.traces = {make_trace("1", {"A", "B"})};
  auto config = plain_config();
  config.categorical_attributes = {"priority"};
  try {
    build_feature_schema(log, config);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("priority") != std::string::npos);
  }
  CHECK_THROWS_AS(build_feature_schema(EventLog{}, plain_config()), DataError);
  config = plain_config();
  config.ngram_order = 1;
  CHECK_THROWS_AS(build_feature_schema(log, config), ConfigError);
}

TEST_CASE("prefix generation follows the policy") {
  const auto three = make_trace("t", {"A", "B", "C"});
  auto lengths = [](const std::vector<Prefix>& ps) {
    std::vector<std::size_t> out;
    for (const auto& p : ps) out.push_back(p.length);
    return out;
  };
  CHECK(lengths(generate_prefixes(three, {})) == std::vector<std::size_t>{2, 3});
  CHECK(generate_prefixes(make_trace("t", {"A"}), {}).empty());
  PrefixPolicy full;
  full.full_trace_only = true;
  CHECK(lengths(generate_prefixes(make_trace("t", {"A", "B", "C", "D", "E"}), full)) ==
        std::vector<std::size_t>{5});
}

TEST_CASE("encode_prefix counts transitions and durations") {
  EventLog log;
  log.traces = {make_trace("1", {"A", "B", "A", "B"}, {0, 5, 30, 169}), make_trace("2", {"A", "B"})};
  auto config = plain_config();
  config.prefix_policy.min_length = 1;
  const auto schema = build_feature_schema(log, config);
  const auto full = encode_prefix({&log.traces[0], 4}, schema);
  CHECK(full.features[0] == 2.0);
  CHECK(full.features[1] == 1.0);
  CHECK(full.raw_numeric[0] == 169.0);
  CHECK(full.raw_numeric[1] == 139.0);
  CHECK(full.raw_value(schema, 2) == doctest::Approx(169.0).epsilon(1e-12));
  CHECK(full.raw_feature_view(schema).at(kDurationSinceStart) == doctest::Approx(169.0));

  const auto one = encode_prefix({&log.traces[0], 1}, schema);
  CHECK(one.features[0] == 0.0);
  CHECK(one.features[1] == 0.0);
  CHECK(one.raw_numeric[0] == 0.0);
  CHECK(one.raw_numeric[1] == 0.0);
  CHECK(one.features.size() == schema.dimension());
}

TEST_CASE("unseen categorical level encodes as an all-zero block") {
  EventLog train;
  train.traces = {make_trace("1", {"A", "B"}), make_trace("2", {"A", "B"})};
  train.traces[0].case_attributes["impact"] = std::string("Low");
  train.traces[1].case_attributes["impact"] = std::string("High");
  auto config = plain_config();
  config.categorical_attributes = {"impact"};
  const auto schema = build_feature_schema(train, config);
  auto other = make_trace("3", {"A", "B"});
  other.case_attributes["impact"] = std::string("Major");
  const auto e = encode_prefix({&other, 2}, schema);
  for (std::size_t i = schema.categorical_offset(); i < schema.dimension(); ++i) {
    CHECK(e.features[i] == 0.0);
  }
  const auto seen = encode_prefix({&train.traces[1], 2}, schema);
  CHECK(seen.features[schema.categorical_offset()] == 1.0);  // "High" sorts first
}

TEST_CASE("push-to-front labeling") {
  LabelRule rule;  // support_line in {2nd, 3rd}
  auto pushed = make_trace("p", {"A", "B", "C"});
  pushed.events[0].attributes["support_line"] = std::string("1st");
  pushed.events[1].attributes["support_line"] = std::string("2nd");
  CHECK(label_case(pushed, rule));
  CHECK(class_label(label_case(pushed, rule)) == 0);

  auto regular = make_trace("r", {"A", "B"});
  for (auto& e : regular.events) e.attributes["support_line"] = std::string("1st");
  CHECK_FALSE(label_case(regular, rule));

  LabelRule empty = rule;
  empty.values.clear();
  CHECK_FALSE(label_case(pushed, empty));
  CHECK_FALSE(label_case(make_trace("x", {"A"}), empty));

  CHECK_THROWS_AS(label_case(make_trace("x", {"A"}), rule), DataError);

  LabelRule contains = rule;
  contains.op = LabelRule::Op::kContainsAny;
  contains.values = {"nd"};
  CHECK(label_case(pushed, contains));

  EventLog log;
  log.traces = {pushed, regular, make_trace("bare", {"A", "B"})};
  const auto flags = label_cases(log, rule);
  CHECK(flags == std::vector<bool>{true, false, false});
  EventLog none;
  none.traces = {make_trace("bare", {"A", "B"})};
  CHECK_THROWS_AS(label_cases(none, rule), DataError);
}

TEST_CASE("case split sizes and determinism") {
  auto s = split_cases(ids(10), 0.8, 42);
  CHECK(s.train.size() == 8);
  CHECK(s.validation.size() == 2);
  auto again = split_cases(ids(10), 0.8, 42);
  CHECK(s.train == again.train);
  CHECK(s.validation == again.validation);
  auto half = split_cases(ids(4), 0.5, 1);
  CHECK(half.train.size() == 2);
  CHECK(half.validation.size() == 2);
  CHECK_THROWS_AS(split_cases(ids(1), 0.8, 1), DataError);
  CHECK_THROWS_AS(split_cases(ids(5), 1.0, 1), ConfigError);
  CHECK_THROWS_AS(split_cases(ids(5), 0.0, 1), ConfigError);
}

TEST_CASE("dataset export header") {
  EventLog log;
  log.traces = {make_trace("1", {"A", "B"}), make_trace("2", {"A", "B", "A"})};
  const auto schema = share(build_feature_schema(log, plain_config()));
  const auto data = encode_log(log, schema, SplitTag::kAll);
  CHECK(data.size() == 3);
  std::ostringstream out;
  export_dataset_csv(data, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "A---B,B---A,duration_since_start_seconds,"
                  "duration_since_previous_event_seconds,label");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("property: encoding is total, counts add up, scaling is standard") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto log = synthetic_incident_log(40, seed);
    EncodingConfig config;
    config.categorical_attributes = {"impact"};
    config.ngram_order = seed % 2 == 0 ? 2 : 3;
    const auto split = split_cases([&] {
      std::vector<std::string> v;
      for (const auto& t : log.traces) v.push_back(t.case_id);
      return v;
    }(), 0.8, seed);
    const auto train_log = select_cases(log, split.train);
    const auto schema = share(build_feature_schema(train_log, config));
    const auto train = encode_log(train_log, schema, SplitTag::kTrain);
    const auto all = encode_log(log, schema, SplitTag::kAll);

    for (const auto& inst : all.instances) CHECK(inst.features.size() == schema->dimension());

    const auto order = static_cast<std::size_t>(config.ngram_order);
    for (const auto& inst : train.instances) {
      double sum = 0.0;
      for (std::size_t i = 0; i < schema->numeric_offset(); ++i) sum += inst.features[i];
      const double expected = inst.prefix_length >= order
                                  ? static_cast<double>(inst.prefix_length - order + 1)
                                  : 0.0;
      CHECK(sum == expected);
    }

    const auto n = static_cast<double>(train.size());
    for (std::size_t f = schema->numeric_offset(); f < schema->categorical_offset(); ++f) {
      const auto& entry = schema->scaler[f - schema->numeric_offset()];
      double mean = 0.0, sq = 0.0;
      for (const auto& inst : train.instances) mean += inst.features[f];
      mean /= n;
      for (const auto& inst : train.instances) sq += (inst.features[f] - mean) * (inst.features[f] - mean);
      CHECK(std::abs(mean) <= 1e-9);
      if (!entry.constant) CHECK(std::abs(std::sqrt(sq / n) - 1.0) <= 1e-9);
    }

    std::set<std::string> train_ids(split.train.begin(), split.train.end());
    for (const auto& v : split.validation) CHECK(train_ids.count(v) == 0);
    CHECK(split.train.size() + split.validation.size() == log.traces.size());
  }
}

TEST_CASE("property: split_dataset keeps prefixes of a case together") {
  const auto log = synthetic_incident_log(30, 3);
  EncodingConfig config;
  const auto schema = share(build_feature_schema(log, config));
  const auto data = encode_log(log, schema, SplitTag::kAll);
  const auto parts = split_dataset(data, 0.8, 9);
  std::set<std::string> a, b;
  for (const auto& i : parts.first.instances) a.insert(i.case_id);
  for (const auto& i : parts.second.instances) b.insert(i.case_id);
  for (const auto& id : b) CHECK(a.count(id) == 0);
  CHECK(parts.first.size() + parts.second.size() == data.size());
  CHECK(parts.first.split_tag == SplitTag::kTrain);
  CHECK(parts.second.split_tag == SplitTag::kValidation);
}
