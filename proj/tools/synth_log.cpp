// Writes a synthetic incident log (XES or CSV) for demos and smoke tests.
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "xppm/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic incident-management event log"};
  std::size_t cases = 200;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "xes";
  app.add_option("--cases", cases, "Number of cases")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--format", format, "xes or csv")->check(CLI::IsMember({"xes", "csv"}));
  app.add_option("--out", out, "Output file")->required();
  CLI11_PARSE(app, argc, argv);

  const auto log = xppm::synthetic_incident_log(cases, seed);
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) {
    std::cerr << "cannot write " << out << "\n";
    return 2;
  }
  if (format == "xes") {
    xppm::write_xes(log, file);
  } else {
    xppm::write_csv(log, file);
  }
  return file ? 0 : 2;
}
