#pragma once

#include <string>
#include <vector>

#include "xppm/event_log.hpp"

namespace xppm::detail {

// Stable sort by timestamp; returns the number of adjacent inversions that
// the original order contained.
std::size_t sort_events(std::vector<Event>& events);

std::string compose_label(const std::vector<std::string>& parts,
                          const std::string& separator,
                          const std::string& whitespace_replacement);

}  // namespace xppm::detail
