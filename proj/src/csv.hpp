#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace xppm::csv {

// RFC-4180 record reader: comma separator, double-quote quoting, doubled
// quotes as escapes, quoted fields may span lines. Accepts CRLF or LF.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Next record, or nullopt at end of input. Throws ParseError on an
  // unterminated quoted field.
  std::optional<std::vector<std::string>> next();

  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t offset_ = 0;
};

std::string quote(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace xppm::csv
