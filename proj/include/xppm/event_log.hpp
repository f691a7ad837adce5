#pragma once

#include <chrono>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace xppm {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

// Typed attribute payload: text | number | time | boolean.
using AttributeValue = std::variant<std::string, double, Timestamp, bool>;
using AttributeMap = std::map<std::string, AttributeValue>;

// Parses ISO-8601 date-times ("2012-03-31T16:59:42.000+02:00", "...Z", a
// space instead of 'T', or no offset meaning UTC) and normalizes to UTC.
std::optional<Timestamp> parse_timestamp(std::string_view text);

// Renders a UTC timestamp as "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string format_timestamp(Timestamp ts);

// Text form of any attribute value; numbers use shortest round-trip digits.
std::string attribute_to_string(const AttributeValue& value);

struct Event {
  std::string activity;
  Timestamp timestamp;
  AttributeMap attributes;

  bool operator==(const Event&) const = default;
};

struct Trace {
  std::string case_id;
  std::vector<Event> events;
  AttributeMap case_attributes;

  bool operator==(const Trace&) const = default;
};

struct ParseIssue {
  std::string case_id;
  std::string message;
};

struct SourceMeta {
  std::string file_name;
  std::string format;   // "xes" | "csv"
  std::string options;  // human-readable summary of the parse options
  std::vector<ParseIssue> issues;
  std::size_t skipped_rows = 0;       // csv rows dropped for bad timestamps
  std::size_t dropped_traces = 0;
  std::size_t monotonicity_repairs = 0;  // adjacent inversions fixed by sorting
};

struct EventLog {
  std::vector<Trace> traces;
  SourceMeta source;

  std::size_t event_count() const;
  const Trace* find(std::string_view case_id) const;
};

// Equality over content (case ids, labels, timestamps, attributes); ignores
// source metadata.
bool same_content(const EventLog& a, const EventLog& b);

// How an event's activity label is composed from its attributes. One key uses
// the attribute verbatim; several keys are joined with `separator`. When
// `whitespace_replacement` is non-empty every space inside a part is replaced
// by it ("In Progress" -> "In.Progress").
struct ActivityLabelScheme {
  std::vector<std::string> keys{"concept:name"};
  std::string separator = "-";
  std::string whitespace_replacement;
};

struct XesOptions {
  ActivityLabelScheme label;
  std::string timestamp_key = "time:timestamp";
  std::string case_id_key = "concept:name";
  std::string file_name;
};

// Role bindings for CSV columns. The activity role may name several columns,
// composed with the label scheme's separator.
struct CsvColumnMap {
  std::string case_column;
  std::vector<std::string> activity_columns;
  std::string timestamp_column;
  std::string separator = "-";
  std::string whitespace_replacement;
  // Infer number / boolean / time types for attribute cells; otherwise text.
  bool infer_types = true;
  std::string file_name;
};

EventLog parse_xes(std::istream& input, const XesOptions& options);
EventLog parse_xes_file(const std::string& path, const XesOptions& options);

// Columns prefixed "case:" become case attributes (taken from the first row of
// each case); every other unmapped column becomes an event attribute.
EventLog parse_csv(std::istream& input, const CsvColumnMap& columns);
EventLog parse_csv_file(const std::string& path, const CsvColumnMap& columns);

// Serializes with columns case_id, activity, timestamp, then event attribute
// columns, then "case:"-prefixed case attribute columns (both sorted).
void write_csv(const EventLog& log, std::ostream& out);

// Serializes to XES with the activity label stored under "concept:name".
void write_xes(const EventLog& log, std::ostream& out);

struct ValidationReport {
  std::size_t traces = 0;
  std::size_t events = 0;
  // Fraction of events carrying each declared event attribute.
  std::map<std::string, double> attribute_coverage;
  std::size_t monotonicity_repairs = 0;
  std::size_t dropped_traces = 0;
  std::size_t skipped_rows = 0;
  std::vector<std::string> warnings;
};

ValidationReport validate_log(const EventLog& log);

}  // namespace xppm
