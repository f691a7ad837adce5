#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <expat.h>
#include <fmt/format.h>

#include "log_internal.hpp"
#include "xppm/error.hpp"
#include "xppm/event_log.hpp"

namespace xppm {
namespace {

enum class Scope { kDocument, kLog, kTrace, kEvent, kSkip };

struct RawEvent {
  AttributeMap attributes;
};

class XesBuilder {
 public:
  explicit XesBuilder(const XesOptions& options) : options_(options) {
    log_.source.file_name = options.file_name;
    log_.source.format = "xes";
    log_.source.options = fmt::format(
        "label keys [{}] joined by '{}', timestamp key '{}', case id key '{}'",
        fmt::join(options.label.keys, ", "), options.label.separator,
        options.timestamp_key, options.case_id_key);
  }

  void start(const char* name, const char** atts) {
    if (!error_.empty()) return;
    const std::string_view tag = name;
    const Scope scope = scopes_.empty() ? Scope::kDocument : scopes_.back();

    if (scope == Scope::kSkip) {
      scopes_.push_back(Scope::kSkip);
      return;
    }
    if (scope == Scope::kDocument) {
      if (tag != "log") {
        error_ = fmt::format("root element is <{}>, expected <log>", tag);
        return;
      }
      scopes_.push_back(Scope::kLog);
      return;
    }
    if (tag == "trace" && scope == Scope::kLog) {
      trace_ = Trace{};
      trace_attrs_.clear();
      trace_events_.clear();
      scopes_.push_back(Scope::kTrace);
      return;
    }
    if (tag == "event" && (scope == Scope::kTrace || scope == Scope::kLog)) {
      event_ = RawEvent{};
      in_log_level_event_ = scope == Scope::kLog;
      scopes_.push_back(Scope::kEvent);
      return;
    }
    if (is_attribute_tag(tag) && (scope == Scope::kTrace || scope == Scope::kEvent)) {
      std::string key, value;
      for (const char** a = atts; a && *a; a += 2) {
        if (std::strcmp(a[0], "key") == 0) key = a[1];
        if (std::strcmp(a[0], "value") == 0) value = a[1];
      }
      if (!key.empty()) {
        auto typed = convert(tag, value);
        if (scope == Scope::kTrace) {
          trace_attrs_[key] = std::move(typed);
        } else {
          event_.attributes[key] = std::move(typed);
        }
      }
      // Nested children (list/container payloads) are not modelled.
      scopes_.push_back(Scope::kSkip);
      return;
    }
    scopes_.push_back(Scope::kSkip);
  }

  void end() {
    if (!error_.empty() || scopes_.empty()) return;
    const Scope scope = scopes_.back();
    scopes_.pop_back();
    if (scope == Scope::kEvent) {
      if (!in_log_level_event_) trace_events_.push_back(std::move(event_));
    } else if (scope == Scope::kTrace) {
      finish_trace();
    }
  }

  const std::string& error() const { return error_; }
  EventLog take() { return std::move(log_); }

 private:
  static bool is_attribute_tag(std::string_view tag) {
    return tag == "string" || tag == "date" || tag == "int" ||
           tag == "float" || tag == "boolean" || tag == "id" ||
           tag == "list" || tag == "container";
  }

  AttributeValue convert(std::string_view tag, const std::string& value) {
    if (tag == "date") {
      if (auto ts = parse_timestamp(value)) return *ts;
      return value;
    }
    if (tag == "int" || tag == "float") {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used == value.size()) return v;
      } catch (const std::exception&) {
      }
      return value;
    }
    if (tag == "boolean") return value == "true" || value == "1";
    return value;
  }

  void issue(const std::string& case_id, std::string message) {
    log_.source.issues.push_back({case_id, std::move(message)});
  }

  void finish_trace() {
    std::string case_id;
    auto id_it = trace_attrs_.find(options_.case_id_key);
    if (id_it != trace_attrs_.end()) case_id = attribute_to_string(id_it->second);
    if (case_id.empty()) {
      issue(fmt::format("#{}", trace_index_),
            fmt::format("trace without '{}' dropped", options_.case_id_key));
      ++log_.source.dropped_traces;
      ++trace_index_;
      return;
    }
    ++trace_index_;
    if (!case_ids_.insert(case_id).second) {
      issue(case_id, "duplicate case id, later trace dropped");
      ++log_.source.dropped_traces;
      return;
    }
    trace_.case_id = case_id;
    trace_attrs_.erase(options_.case_id_key);
    trace_.case_attributes = std::move(trace_attrs_);

    for (std::size_t i = 0; i < trace_events_.size(); ++i) {
      auto& raw = trace_events_[i].attributes;
      auto ts_it = raw.find(options_.timestamp_key);
      if (ts_it == raw.end() || !std::holds_alternative<Timestamp>(ts_it->second)) {
        issue(case_id, fmt::format("event {} has no valid '{}', skipped", i,
                                   options_.timestamp_key));
        continue;
      }
      std::vector<std::string> parts;
      bool complete = true;
      for (const auto& key : options_.label.keys) {
        auto it = raw.find(key);
        if (it == raw.end()) {
          complete = false;
          break;
        }
        parts.push_back(attribute_to_string(it->second));
      }
      if (!complete || parts.empty()) {
        issue(case_id, fmt::format("event {} lacks an activity key, skipped", i));
        continue;
      }
      Event event;
      event.activity = detail::compose_label(parts, options_.label.separator,
                                             options_.label.whitespace_replacement);
      if (event.activity.empty()) {
        issue(case_id, fmt::format("event {} has an empty activity, skipped", i));
        continue;
      }
      event.timestamp = std::get<Timestamp>(ts_it->second);
      raw.erase(ts_it);
      for (const auto& key : options_.label.keys) raw.erase(key);
      event.attributes = std::move(raw);
      trace_.events.push_back(std::move(event));
    }
    if (trace_.events.empty()) {
      issue(case_id, "trace has no usable events, dropped");
      ++log_.source.dropped_traces;
      return;
    }
    log_.source.monotonicity_repairs += detail::sort_events(trace_.events);
    log_.traces.push_back(std::move(trace_));
  }

  const XesOptions& options_;
  EventLog log_;
  std::vector<Scope> scopes_;
  Trace trace_;
  AttributeMap trace_attrs_;
  std::vector<RawEvent> trace_events_;
  RawEvent event_;
  bool in_log_level_event_ = false;
  std::set<std::string> case_ids_;
  std::size_t trace_index_ = 0;
  std::string error_;
};

struct ParserHandle {
  XML_Parser parser = XML_ParserCreate("UTF-8");
  ~ParserHandle() { XML_ParserFree(parser); }
};

}  // namespace

EventLog parse_xes(std::istream& input, const XesOptions& options) {
  const std::string text{std::istreambuf_iterator<char>(input),
                         std::istreambuf_iterator<char>()};
  XesBuilder builder(options);
  ParserHandle handle;
  XML_SetUserData(handle.parser, &builder);
  XML_SetElementHandler(
      handle.parser,
      [](void* data, const XML_Char* name, const XML_Char** atts) {
        auto* b = static_cast<XesBuilder*>(data);
        b->start(name, atts);
      },
      [](void* data, const XML_Char*) { static_cast<XesBuilder*>(data)->end(); });

  const auto status = XML_Parse(handle.parser, text.data(),
                                static_cast<int>(text.size()), XML_TRUE);
  const auto line = XML_GetCurrentLineNumber(handle.parser);
  const auto column = XML_GetCurrentColumnNumber(handle.parser) + 1;
  const auto offset = XML_GetCurrentByteIndex(handle.parser);
  if (status != XML_STATUS_OK) {
    throw ParseError(
        fmt::format("malformed XES: {}",
                    XML_ErrorString(XML_GetErrorCode(handle.parser))),
        line, column, offset < 0 ? text.size() : static_cast<std::size_t>(offset));
  }
  if (!builder.error().empty()) {
    throw ParseError("malformed XES: " + builder.error(), line, column,
                     offset < 0 ? 0 : static_cast<std::size_t>(offset));
  }
  return builder.take();
}

EventLog parse_xes_file(const std::string& path, const XesOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", path));
  XesOptions opts = options;
  if (opts.file_name.empty()) opts.file_name = std::filesystem::path(path).filename().string();
  return parse_xes(in, opts);
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_attribute(std::ostream& out, const std::string& indent,
                     const std::string& key, const AttributeValue& value) {
  const char* tag = "string";
  if (std::holds_alternative<double>(value)) tag = "float";
  if (std::holds_alternative<Timestamp>(value)) tag = "date";
  if (std::holds_alternative<bool>(value)) tag = "boolean";
  out << indent << '<' << tag << " key=\"" << xml_escape(key) << "\" value=\""
      << xml_escape(attribute_to_string(value)) << "\"/>\n";
}

}  // namespace

void write_xes(const EventLog& log, std::ostream& out) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<log xes.version=\"1.0\" xmlns=\"http://www.xes-standard.org/\">\n";
  for (const auto& trace : log.traces) {
    out << "  <trace>\n";
    write_attribute(out, "    ", "concept:name", trace.case_id);
    for (const auto& [k, v] : trace.case_attributes) write_attribute(out, "    ", k, v);
    for (const auto& e : trace.events) {
      out << "    <event>\n";
      write_attribute(out, "      ", "concept:name", e.activity);
      write_attribute(out, "      ", "time:timestamp", e.timestamp);
      for (const auto& [k, v] : e.attributes) write_attribute(out, "      ", k, v);
      out << "    </event>\n";
    }
    out << "  </trace>\n";
  }
  out << "</log>\n";
}

}  // namespace xppm
