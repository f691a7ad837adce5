#include "csv.hpp"

#include "xppm/error.hpp"

namespace xppm::csv {

std::optional<std::vector<std::string>> Reader::next() {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  const std::size_t start_line = line_ + 1;
  const std::size_t start_offset = offset_;
  std::size_t column = 0;

  int c;
  while ((c = in_.get()) != std::char_traits<char>::eof()) {
    any = true;
    ++offset_;
    ++column;
    if (in_quotes) {
      if (c == '"') {
        if (in_.peek() == '"') {
          in_.get();
          ++offset_;
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line_;
        field += static_cast<char>(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      if (in_.peek() == '\n') {
        in_.get();
        ++offset_;
      }
      ++line_;
      fields.push_back(std::move(field));
      return fields;
    } else if (c == '\n') {
      ++line_;
      fields.push_back(std::move(field));
      return fields;
    } else {
      field += static_cast<char>(c);
    }
  }
  if (in_quotes) {
    throw ParseError("unterminated quoted CSV field", start_line, column,
                     start_offset);
  }
  if (!any) return std::nullopt;
  ++line_;
  fields.push_back(std::move(field));
  return fields;
}

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out << ',';
    out << quote(fields[i]);
  }
  out << '\n';
}

}  // namespace xppm::csv
