#pragma once

#include <cstddef>
#include <cstdint>

#include "xppm/event_log.hpp"

namespace xppm {

// Incident-management log in the shape of the VINST export: every event has
// concept:name (Accepted, Queued, Completed), lifecycle:transition, org:group,
// support_line (1st, 2nd, 3rd) and impact. Cases escalated beyond the first
// line are more frequent for high impact and run longer. Deterministic in
// `seed`. Activity labels hold concept:name only; compose them with the
// lifecycle transition when reading the log back.
EventLog synthetic_incident_log(std::size_t cases, std::uint64_t seed);

}  // namespace xppm
