#include "xppm/error.hpp"

#include <fmt/format.h>

namespace xppm {

ParseError::ParseError(const std::string& message, std::size_t line,
                       std::size_t column, std::size_t offset)
    : Error(fmt::format("{} (line {}, column {}, offset {})", message, line,
                        column, offset)),
      line_(line),
      column_(column),
      offset_(offset) {}

StageError::StageError(std::string stage, const std::string& cause)
    : Error(fmt::format("stage '{}' failed: {}", stage, cause)),
      stage_(std::move(stage)) {}

}  // namespace xppm
