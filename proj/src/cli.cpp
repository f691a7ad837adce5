#include "xppm/cli.hpp"

#include <fstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "xppm/error.hpp"
#include "xppm/pipeline.hpp"

namespace xppm {
namespace {

struct Options {
  std::string config;
  std::string out;
  std::string bundle;
  std::string report;
  std::string case_id;
  std::size_t prefix = 0;
  int cluster = 0;
  std::string log_level = "info";
};

void run(const CLI::App& app, const Options& o, std::ostream& out) {
  if (app.got_subcommand("train")) {
    auto bundle = run_train(load_config(o.config));
    save_bundle(bundle, o.out);
    out << fmt::format("bundle written to {} (digest {})\n", o.out, bundle.digest);
    if (!o.report.empty()) {
      write_report(bundle, run_evaluate(bundle), o.report);
      out << fmt::format("report written to {}\n", o.report);
    }
  } else if (app.got_subcommand("evaluate")) {
    const auto bundle = load_bundle(o.bundle);
    const auto report = run_evaluate(bundle);
    write_report(bundle, report, o.report);
    out << fmt::format("AUROC {:.4f} at tau {:.4f}; k = {}; report written to {}\n", report.auroc,
                       report.tau, report.latent.k, o.report);
  } else if (app.got_subcommand("explain")) {
    const auto bundle = load_bundle(o.bundle);
    const auto record = run_explain(bundle, o.case_id, o.prefix);
    const auto text = record_to_json(record);
    if (!record.fidelity_warning.empty()) spdlog::warn("{}", record.fidelity_warning);
    if (o.out.empty()) {
      out << text;
    } else {
      std::ofstream file(o.out, std::ios::binary | std::ios::trunc);
      if (!file || !(file << text)) throw Error(fmt::format("cannot write '{}'", o.out));
    }
  } else if (app.got_subcommand("export-tree")) {
    export_tree_dot(load_bundle(o.bundle), o.cluster, o.out);
  } else if (app.got_subcommand("encode")) {
    export_encoded(load_config(o.config), o.out);
  }
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Local post-hoc explanations for predictive process monitoring"};
  app.name("xppm");
  app.require_subcommand(1);
  Options o;
  app.add_option("--log-level", o.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  auto* train = app.add_subcommand("train", "Train the pipeline and write a model bundle");
  train->add_option("--config", o.config, "Pipeline configuration (JSON)")->required();
  train->add_option("--out", o.out, "Bundle path")->required();
  train->add_option("--report", o.report, "Also write the evaluation report to this directory");

  auto* evaluate = app.add_subcommand("evaluate", "Write the evaluation report of a bundle");
  evaluate->add_option("--bundle", o.bundle, "Model bundle")->required();
  evaluate->add_option("--report", o.report, "Report directory")->required();

  auto* explain = app.add_subcommand("explain", "Explain one validation instance");
  explain->add_option("--bundle", o.bundle, "Model bundle")->required();
  explain->add_option("--case", o.case_id, "Case id")->required();
  explain->add_option("--prefix", o.prefix, "Prefix length")->required();
  explain->add_option("--out", o.out, "Write the record here instead of stdout");

  auto* tree = app.add_subcommand("export-tree", "Write a cluster's surrogate tree as DOT");
  tree->add_option("--bundle", o.bundle, "Model bundle")->required();
  tree->add_option("--cluster", o.cluster, "Cluster id")->required();
  tree->add_option("--out", o.out, "DOT file")->required();

  auto* encode = app.add_subcommand("encode", "Encode the configured log to CSV");
  encode->add_option("--config", o.config, "Pipeline configuration (JSON)")->required();
  encode->add_option("--out", o.out, "CSV file")->required();

  if (argc <= 1) {
    err << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  spdlog::set_level(spdlog::level::from_str(o.log_level));
  try {
    run(app, o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace xppm
