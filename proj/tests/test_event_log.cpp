#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "xppm/error.hpp"
#include "xppm/event_log.hpp"
#include "xppm/rng.hpp"
#include "xppm/synthetic.hpp"

using namespace xppm;

namespace {

const char* kMinimalXes = R"(<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <trace>
    <string key="concept:name" value="case-1"/>
    <event>
      <string key="concept:name" value="Accepted"/>
      <date key="time:timestamp" value="2012-03-31T16:59:42.000+02:00"/>
    </event>
  </trace>
</log>
)";

const char* kTwoCaseCsv =
    "case,activity,time,impact\n"
    "c1,Accepted,2012-01-01T10:00:00Z,Low\n"
    "c2,Queued,2012-01-02T10:00:00Z,High\n"
    "c1,Completed,2012-01-01T11:00:00Z,Low\n"
    "c2,Completed,2012-01-02T12:30:00Z,High\n";

CsvColumnMap two_case_columns() {
  CsvColumnMap m;
  m.case_column = "case";
  m.activity_columns = {"activity"};
  m.timestamp_column = "time";
  return m;
}

EventLog parse_csv_text(const std::string& text, const CsvColumnMap& m) {
  std::istringstream in(text);
  return parse_csv(in, m);
}

EventLog parse_xes_text(const std::string& text, const XesOptions& o = {}) {
  std::istringstream in(text);
  return parse_xes(in, o);
}

}  // namespace

TEST_CASE("timestamps normalize to UTC") {
  auto a = parse_timestamp("2012-03-31T16:59:42.000+02:00");
  auto b = parse_timestamp("2012-03-31T14:59:42Z");
  auto c = parse_timestamp("2012-03-31 14:59:42");
  REQUIRE(a);
  REQUIRE(b);
  REQUIRE(c);
  CHECK(*a == *b);
  CHECK(*b == *c);
  CHECK(format_timestamp(*a) == "2012-03-31T14:59:42.000Z");
  CHECK(parse_timestamp("2012-03-31T14:59:42.250-0130"));
  CHECK(format_timestamp(*parse_timestamp("2012-03-31T14:59:42.250-01:30")) ==
        "2012-03-31T16:29:42.250Z");
  CHECK_FALSE(parse_timestamp("yesterday"));
  CHECK_FALSE(parse_timestamp("2012-13-01T00:00:00Z"));
}

TEST_CASE("minimal XES: one trace, one event") {
  const auto log = parse_xes_text(kMinimalXes);
  REQUIRE(log.traces.size() == 1);
  REQUIRE(log.traces[0].events.size() == 1);
  CHECK(log.traces[0].case_id == "case-1");
  CHECK(log.traces[0].events[0].activity == "Accepted");
  CHECK(format_timestamp(log.traces[0].events[0].timestamp) == "2012-03-31T14:59:42.000Z");
  CHECK(log.source.format == "xes");
}

TEST_CASE("XES log without traces") {
  const auto log = parse_xes_text("<log xes.version=\"1.0\"></log>");
  CHECK(log.traces.empty());
}

TEST_CASE("truncated XES reports the failure position") {
  std::string text = kMinimalXes;
  text.resize(text.size() / 2);
  try {
    parse_xes_text(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() >= 1);
    CHECK(e.offset() > 0);
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
}

TEST_CASE("XES keeps typed attributes and composes labels") {
  const char* text = R"(<log>
  <trace>
    <string key="concept:name" value="c"/>
    <string key="region" value="EU"/>
    <event>
      <string key="concept:name" value="Accepted"/>
      <string key="lifecycle:transition" value="In Progress"/>
      <date key="time:timestamp" value="2012-01-01T00:00:05Z"/>
      <int key="count" value="3"/>
      <float key="cost" value="2.5"/>
      <boolean key="urgent" value="true"/>
    </event>
    <event>
      <string key="concept:name" value="Queued"/>
      <string key="lifecycle:transition" value="Awaiting Assignment"/>
      <date key="time:timestamp" value="2012-01-01T00:00:01Z"/>
    </event>
  </trace>
</log>)";
  XesOptions o;
  o.label.keys = {"concept:name", "lifecycle:transition"};
  o.label.whitespace_replacement = ".";
  const auto log = parse_xes_text(text, o);
  REQUIRE(log.traces.size() == 1);
  const auto& t = log.traces[0];
  // Sorted by time: the Queued event comes first, one repair recorded.
  REQUIRE(t.events.size() == 2);
  CHECK(t.events[0].activity == "Queued-Awaiting.Assignment");
  CHECK(t.events[1].activity == "Accepted-In.Progress");
  CHECK(log.source.monotonicity_repairs == 1);
  CHECK(std::get<double>(t.events[1].attributes.at("count")) == 3.0);
  CHECK(std::get<double>(t.events[1].attributes.at("cost")) == 2.5);
  CHECK(std::get<bool>(t.events[1].attributes.at("urgent")));
  CHECK(std::get<std::string>(t.case_attributes.at("region")) == "EU");
}

TEST_CASE("XES events without timestamp are skipped and reported") {
  const char* text = R"(<log>
  <trace>
    <string key="concept:name" value="a"/>
    <event><string key="concept:name" value="X"/></event>
    <event><string key="concept:name" value="Y"/><date key="time:timestamp" value="2012-01-01T00:00:00Z"/></event>
  </trace>
  <trace>
    <string key="concept:name" value="b"/>
    <event><string key="concept:name" value="X"/></event>
  </trace>
</log>)";
  const auto log = parse_xes_text(text);
  REQUIRE(log.traces.size() == 1);
  CHECK(log.traces[0].events.size() == 1);
  CHECK(log.source.dropped_traces == 1);
  CHECK(log.source.issues.size() >= 2);
  const auto report = validate_log(log);
  CHECK(report.dropped_traces == 1);
  CHECK_FALSE(report.warnings.empty());
}

TEST_CASE("CSV: 4 rows across 2 cases") {
  const auto log = parse_csv_text(kTwoCaseCsv, two_case_columns());
  REQUIRE(log.traces.size() == 2);
  CHECK(log.traces[0].events.size() == 2);
  CHECK(log.traces[1].events.size() == 2);
  CHECK(log.traces[0].case_id == "c1");
  CHECK(log.traces[0].events[1].activity == "Completed");
  CHECK(std::get<std::string>(log.traces[1].events[0].attributes.at("impact")) == "High");

  const auto report = validate_log(log);
  CHECK(report.traces == 2);
  CHECK(report.events == 4);
  CHECK(report.attribute_coverage.at("impact") == 1.0);
}

TEST_CASE("CSV header only gives an empty log") {
  const auto log = parse_csv_text("case,activity,time\n", two_case_columns());
  CHECK(log.traces.empty());
}

TEST_CASE("CSV without a timestamp binding is a configuration error") {
  auto m = two_case_columns();
  m.timestamp_column.clear();
  CHECK_THROWS_AS(parse_csv_text(kTwoCaseCsv, m), ConfigError);
  m = two_case_columns();
  m.timestamp_column = "when";
  CHECK_THROWS_AS(parse_csv_text(kTwoCaseCsv, m), ConfigError);
}

TEST_CASE("CSV rows with bad timestamps are skipped and counted") {
  const std::string text = std::string(kTwoCaseCsv) + "c1,Closed,not-a-time,Low\n";
  const auto log = parse_csv_text(text, two_case_columns());
  CHECK(log.source.skipped_rows == 1);
  CHECK(log.event_count() == 4);
}

TEST_CASE("CSV quoting follows RFC 4180") {
  const std::string text =
      "case,activity,time,note\n"
      "c1,\"Wait, User\",2012-01-01T00:00:00Z,\"said \"\"hi\"\"\nthen left\"\n";
  const auto log = parse_csv_text(text, two_case_columns());
  REQUIRE(log.traces.size() == 1);
  CHECK(log.traces[0].events[0].activity == "Wait, User");
  CHECK(std::get<std::string>(log.traces[0].events[0].attributes.at("note")) ==
        "said \"hi\"\nthen left");
  CHECK_THROWS_AS(parse_csv_text("case,activity,time\nc1,\"open,2012-01-01T00:00:00Z\n",
                                 two_case_columns()),
                  ParseError);
}

TEST_CASE("validate_log: empty log and out-of-order events") {
  const auto empty = validate_log(EventLog{});
  CHECK(empty.traces == 0);
  CHECK(empty.events == 0);
  CHECK(std::find(empty.warnings.begin(), empty.warnings.end(), "empty log") !=
        empty.warnings.end());

  const std::string swapped =
      "case,activity,time\n"
      "c1,B,2012-01-01T02:00:00Z\n"
      "c1,A,2012-01-01T01:00:00Z\n";
  const auto log = parse_csv_text(swapped, two_case_columns());
  CHECK(log.traces[0].events[0].activity == "A");
  CHECK(validate_log(log).monotonicity_repairs == 1);
}

TEST_CASE("equal timestamps keep their original order") {
  const std::string text =
      "case,activity,time\n"
      "c1,First,2012-01-01T01:00:00Z\n"
      "c1,Second,2012-01-01T01:00:00Z\n"
      "c1,Third,2012-01-01T01:00:00Z\n";
  const auto log = parse_csv_text(text, two_case_columns());
  CHECK(log.traces[0].events[0].activity == "First");
  CHECK(log.traces[0].events[2].activity == "Third");
  CHECK(log.source.monotonicity_repairs == 0);
}

TEST_CASE("property: CSV round trip and XES/CSV equivalence on generated logs") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto log = synthetic_incident_log(15, seed);

    std::ostringstream csv;
    write_csv(log, csv);
    CsvColumnMap m;
    m.case_column = "case_id";
    m.activity_columns = {"activity"};
    m.timestamp_column = "timestamp";
    const auto from_csv = parse_csv_text(csv.str(), m);
    CHECK(same_content(log, from_csv));

    std::ostringstream xes;
    write_xes(log, xes);
    const auto from_xes = parse_xes_text(xes.str());
    CHECK(same_content(log, from_xes));
    CHECK(same_content(from_xes, from_csv));

    for (const auto& t : from_xes.traces) {
      for (std::size_t i = 1; i < t.events.size(); ++i) {
        CHECK(t.events[i - 1].timestamp <= t.events[i].timestamp);
      }
    }
  }
}

TEST_CASE("property: shuffled CSV rows parse to non-decreasing traces") {
  Rng rng(99);
  const auto log = synthetic_incident_log(20, 5);
  std::ostringstream csv;
  write_csv(log, csv);
  std::vector<std::string> lines;
  std::istringstream in(csv.str());
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  std::vector<std::string> body(lines.begin() + 1, lines.end());
  rng.shuffle(std::span<std::string>(body));
  std::string text = lines.front() + "\n";
  for (const auto& l : body) text += l + "\n";
  CsvColumnMap m;
  m.case_column = "case_id";
  m.activity_columns = {"activity"};
  m.timestamp_column = "timestamp";
  const auto parsed = parse_csv_text(text, m);
  CHECK(parsed.traces.size() == log.traces.size());
  for (const auto& t : parsed.traces) {
    for (std::size_t i = 1; i < t.events.size(); ++i) {
      CHECK(t.events[i - 1].timestamp <= t.events[i].timestamp);
    }
    const Trace* original = log.find(t.case_id);
    REQUIRE(original != nullptr);
    CHECK(original->events.size() == t.events.size());
  }
}

TEST_CASE("file parsers read fixtures from disk") {
  const auto log = parse_xes_file(std::string(XPPM_TEST_DATA) + "/smoke.xes", {});
  CHECK(log.traces.size() == 20);
  CHECK(log.source.file_name == "smoke.xes");
  CHECK_THROWS(parse_xes_file(std::string(XPPM_TEST_DATA) + "/does-not-exist.xes", {}));
}
