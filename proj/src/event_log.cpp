#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "log_internal.hpp"
#include "xppm/event_log.hpp"

namespace xppm {

namespace detail {

std::size_t sort_events(std::vector<Event>& events) {
  std::size_t inversions = 0;
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].timestamp < events[i - 1].timestamp) ++inversions;
  }
  if (inversions > 0) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) {
                       return a.timestamp < b.timestamp;
                     });
  }
  return inversions;
}

std::string compose_label(const std::vector<std::string>& parts,
                          const std::string& separator,
                          const std::string& whitespace_replacement) {
  std::string label;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) label += separator;
    if (whitespace_replacement.empty()) {
      label += parts[i];
      continue;
    }
    for (char c : parts[i]) {
      if (c == ' ') {
        label += whitespace_replacement;
      } else {
        label += c;
      }
    }
  }
  return label;
}

}  // namespace detail

std::size_t EventLog::event_count() const {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.events.size();
  return n;
}

const Trace* EventLog::find(std::string_view case_id) const {
  for (const auto& t : traces) {
    if (t.case_id == case_id) return &t;
  }
  return nullptr;
}

bool same_content(const EventLog& a, const EventLog& b) {
  return a.traces == b.traces;
}

ValidationReport validate_log(const EventLog& log) {
  ValidationReport report;
  report.traces = log.traces.size();
  report.events = log.event_count();
  report.monotonicity_repairs = log.source.monotonicity_repairs;
  report.dropped_traces = log.source.dropped_traces;
  report.skipped_rows = log.source.skipped_rows;

  std::map<std::string, std::size_t> seen;
  std::set<std::string> case_ids;
  for (const auto& trace : log.traces) {
    if (!case_ids.insert(trace.case_id).second) {
      report.warnings.push_back(
          fmt::format("duplicate case id '{}'", trace.case_id));
    }
    if (trace.events.empty()) {
      report.warnings.push_back(
          fmt::format("case '{}' has no events", trace.case_id));
    }
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
      const auto& e = trace.events[i];
      if (i > 0 && e.timestamp < trace.events[i - 1].timestamp) {
        report.warnings.push_back(fmt::format(
            "case '{}' has unsorted events at position {}", trace.case_id, i));
      }
      for (const auto& [key, value] : e.attributes) ++seen[key];
    }
  }
  for (const auto& [key, count] : seen) {
    report.attribute_coverage[key] =
        static_cast<double>(count) / static_cast<double>(report.events);
  }

  if (report.traces == 0) report.warnings.emplace_back("empty log");
  if (report.monotonicity_repairs > 0) {
    report.warnings.push_back(fmt::format(
        "{} out-of-order event(s) repaired by sorting",
        report.monotonicity_repairs));
  }
  for (const auto& issue : log.source.issues) {
    report.warnings.push_back(
        fmt::format("case '{}': {}", issue.case_id, issue.message));
  }
  if (report.skipped_rows > 0) {
    report.warnings.push_back(
        fmt::format("{} row(s) skipped", report.skipped_rows));
  }
  return report;
}

}  // namespace xppm
