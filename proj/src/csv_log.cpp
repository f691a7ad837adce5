#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "csv.hpp"
#include "log_internal.hpp"
#include "xppm/error.hpp"
#include "xppm/event_log.hpp"

namespace xppm {
namespace {

constexpr std::string_view kCasePrefix = "case:";

AttributeValue infer_value(const std::string& cell, bool infer) {
  if (!infer) return cell;
  if (cell == "true") return true;
  if (cell == "false") return false;
  const bool numeric_shape =
      !cell.empty() &&
      cell.find_first_not_of("0123456789+-.eE") == std::string::npos &&
      cell.find_first_of("0123456789") != std::string::npos;
  if (numeric_shape) {
    double v = 0;
    auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec == std::errc{} && end == cell.data() + cell.size()) return v;
  }
  if (cell.size() >= 10 && cell[4] == '-' && cell[7] == '-') {
    if (auto ts = parse_timestamp(cell)) return *ts;
  }
  return cell;
}

}  // namespace

EventLog parse_csv(std::istream& input, const CsvColumnMap& columns) {
  if (columns.case_column.empty() || columns.activity_columns.empty() ||
      columns.timestamp_column.empty()) {
    throw ConfigError(
        "CSV column map must bind the case, activity and timestamp roles");
  }

  csv::Reader reader(input);
  auto header = reader.next();
  if (!header) throw ParseError("CSV input has no header row", 1, 1, 0);
  if (!header->empty() && header->front().rfind("\xEF\xBB\xBF", 0) == 0) {
    header->front().erase(0, 3);
  }

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header->size(); ++i) index[(*header)[i]] = i;
  auto column_of = [&](const std::string& name, const char* role) {
    auto it = index.find(name);
    if (it == index.end()) {
      throw ConfigError(
          fmt::format("CSV column '{}' bound to role '{}' is missing", name, role));
    }
    return it->second;
  };
  const std::size_t case_col = column_of(columns.case_column, "case");
  const std::size_t ts_col = column_of(columns.timestamp_column, "timestamp");
  std::vector<std::size_t> activity_cols;
  for (const auto& name : columns.activity_columns) {
    activity_cols.push_back(column_of(name, "activity"));
  }
  std::set<std::size_t> consumed{case_col, ts_col};
  consumed.insert(activity_cols.begin(), activity_cols.end());

  EventLog log;
  log.source.file_name = columns.file_name;
  log.source.format = "csv";
  log.source.options = fmt::format(
      "case '{}', activity [{}] joined by '{}', timestamp '{}'",
      columns.case_column, fmt::join(columns.activity_columns, ", "),
      columns.separator, columns.timestamp_column);

  std::unordered_map<std::string, std::size_t> trace_of;
  while (auto row = reader.next()) {
    if (row->size() == 1 && row->front().empty()) continue;
    const std::size_t line = reader.line();
    if (row->size() != header->size()) {
      ++log.source.skipped_rows;
      log.source.issues.push_back(
          {"", fmt::format("line {}: expected {} fields, got {}", line,
                           header->size(), row->size())});
      continue;
    }
    const std::string& case_id = (*row)[case_col];
    auto ts = parse_timestamp((*row)[ts_col]);
    if (!ts) {
      ++log.source.skipped_rows;
      log.source.issues.push_back(
          {case_id, fmt::format("line {}: unparseable timestamp '{}'", line,
                                (*row)[ts_col])});
      continue;
    }
    std::vector<std::string> parts;
    for (auto c : activity_cols) parts.push_back((*row)[c]);
    Event event;
    event.activity = detail::compose_label(parts, columns.separator,
                                           columns.whitespace_replacement);
    event.timestamp = *ts;
    if (case_id.empty() || (*row)[activity_cols.front()].empty()) {
      ++log.source.skipped_rows;
      log.source.issues.push_back(
          {case_id, fmt::format("line {}: empty case id or activity", line)});
      continue;
    }

    auto [it, inserted] = trace_of.try_emplace(case_id, log.traces.size());
    if (inserted) {
      log.traces.push_back(Trace{case_id, {}, {}});
    }
    Trace& trace = log.traces[it->second];
    for (std::size_t c = 0; c < row->size(); ++c) {
      if (consumed.count(c) || (*row)[c].empty()) continue;
      const std::string& name = (*header)[c];
      if (name.rfind(kCasePrefix, 0) == 0) {
        const auto key = name.substr(kCasePrefix.size());
        trace.case_attributes.try_emplace(
            key, infer_value((*row)[c], columns.infer_types));
      } else {
        event.attributes[name] = infer_value((*row)[c], columns.infer_types);
      }
    }
    trace.events.push_back(std::move(event));
  }

  for (auto& trace : log.traces) {
    log.source.monotonicity_repairs += detail::sort_events(trace.events);
  }
  return log;
}

EventLog parse_csv_file(const std::string& path, const CsvColumnMap& columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", path));
  CsvColumnMap cols = columns;
  if (cols.file_name.empty()) cols.file_name = std::filesystem::path(path).filename().string();
  return parse_csv(in, cols);
}

void write_csv(const EventLog& log, std::ostream& out) {
  std::set<std::string> event_keys;
  std::set<std::string> case_keys;
  for (const auto& t : log.traces) {
    for (const auto& [k, v] : t.case_attributes) case_keys.insert(k);
    for (const auto& e : t.events) {
      for (const auto& [k, v] : e.attributes) event_keys.insert(k);
    }
  }
  std::vector<std::string> header{"case_id", "activity", "timestamp"};
  header.insert(header.end(), event_keys.begin(), event_keys.end());
  for (const auto& k : case_keys) header.push_back(std::string(kCasePrefix) + k);
  csv::write_row(out, header);

  for (const auto& t : log.traces) {
    for (const auto& e : t.events) {
      std::vector<std::string> row{t.case_id, e.activity,
                                   format_timestamp(e.timestamp)};
      for (const auto& k : event_keys) {
        auto it = e.attributes.find(k);
        row.push_back(it == e.attributes.end() ? "" : attribute_to_string(it->second));
      }
      for (const auto& k : case_keys) {
        auto it = t.case_attributes.find(k);
        row.push_back(it == t.case_attributes.end() ? ""
                                                    : attribute_to_string(it->second));
      }
      csv::write_row(out, row);
    }
  }
}

}  // namespace xppm
