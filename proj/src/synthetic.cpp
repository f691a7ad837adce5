#include "xppm/synthetic.hpp"

#include <array>
#include <cmath>

#include <fmt/format.h>

#include "xppm/rng.hpp"

namespace xppm {
namespace {

using std::chrono::milliseconds;

// Exponential waiting time with the given mean, in milliseconds.
milliseconds wait(Rng& rng, double mean_seconds) {
  const double s = -std::log(1.0 - rng.uniform()) * mean_seconds;
  return milliseconds(static_cast<long long>(std::llround(s * 1000.0)));
}

}  // namespace

EventLog synthetic_incident_log(std::size_t cases, std::uint64_t seed) {
  static constexpr std::array<const char*, 4> kImpact{"Low", "Medium", "High", "Major"};
  static constexpr std::array<double, 4> kImpactCdf{0.40, 0.80, 0.95, 1.0};
  static constexpr std::array<double, 4> kPushRate{0.15, 0.35, 0.65, 0.80};

  Rng rng(seed);
  EventLog log;
  log.source.file_name = fmt::format("synthetic-{}", seed);
  log.source.format = "xes";
  // 2012-01-01T00:00:00Z
  const Timestamp origin{milliseconds(1325376000000LL)};

  for (std::size_t c = 0; c < cases; ++c) {
    Trace trace;
    trace.case_id = fmt::format("1-{:09d}", 364285768 + c * 7);
    const double u = rng.uniform();
    std::size_t impact = 0;
    while (u >= kImpactCdf[impact]) ++impact;
    const bool push = rng.uniform() < kPushRate[impact];
    Timestamp t = origin + milliseconds(static_cast<long long>(rng.below(180ULL * 86400ULL)) * 1000);
    std::string line = "1st";
    int group = static_cast<int>(rng.below(4));

    auto add = [&](const char* name, const char* lifecycle) {
      Event e;
      e.activity = name;
      e.timestamp = t;
      e.attributes["lifecycle:transition"] = std::string(lifecycle);
      e.attributes["support_line"] = line;
      e.attributes["org:group"] = fmt::format("G{}{}", line.front(), group);
      e.attributes["impact"] = std::string(kImpact[impact]);
      trace.events.push_back(std::move(e));
    };

    add("Accepted", "In Progress");
    t += wait(rng, push ? 900.0 : 240.0);
    if (rng.uniform() < 0.3) {
      add("Accepted", "Wait");
      t += wait(rng, 1800.0);
      add("Accepted", "In Progress");
      t += wait(rng, 300.0);
    }
    if (push) {
      add("Queued", "Awaiting Assignment");
      t += wait(rng, 3600.0);
      line = rng.uniform() < 0.75 ? "2nd" : "3rd";
      group = static_cast<int>(rng.below(4));
      add("Accepted", "In Progress");
      t += wait(rng, 2400.0);
      if (rng.uniform() < 0.4) {
        add("Accepted", "Wait - User");
        t += wait(rng, 7200.0);
        add("Accepted", "In Progress");
        t += wait(rng, 600.0);
      }
    } else if (rng.uniform() < 0.15) {
      // Re-queued within the first line.
      add("Queued", "Awaiting Assignment");
      t += wait(rng, 1200.0);
      add("Accepted", "In Progress");
      t += wait(rng, 600.0);
    }
    add("Completed", "Resolved");
    t += wait(rng, 600.0);
    add("Completed", "Closed");
    log.traces.push_back(std::move(trace));
  }
  return log;
}

}  // namespace xppm
