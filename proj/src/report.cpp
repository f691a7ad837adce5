#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json_io.hpp"
#include "xppm/error.hpp"
#include "xppm/pipeline.hpp"

namespace xppm {
namespace {

using ojson = nlohmann::ordered_json;

RegionReport region_report(const RegionFit& fit, const Eigen::MatrixXd& points,
                           const Eigen::MatrixXd& x, const std::vector<double>& scores,
                           const std::vector<int>& labels, double tau, AccuracyWeighting weighting,
                           R2Denominator denominator) {
  const auto& model = fit.model;
  RegionReport rep;
  rep.space = to_string(model.space);
  rep.k = model.k;
  rep.trace = fit.trace;
  rep.ss = clustering_ss(points, model.assignments, model.centroids);
  rep.mean_accuracy =
      mean_cluster_accuracy(model.assignments, model.k, scores, labels, tau, weighting);
  const auto accuracies = cluster_accuracies(model.assignments, model.k, scores, labels, tau);

  double r2_sum = 0.0;
  std::size_t r2_count = 0;
  for (int c = 0; c < model.k; ++c) {
    const auto& local = fit.surrogates.at(static_cast<std::size_t>(c));
    ClusterReport cr;
    cr.cluster = c;
    cr.local_accuracy = accuracies[static_cast<std::size_t>(c)];
    cr.flag = local.flag;
    cr.leaves = local.tree.leaf_count();
    std::vector<Eigen::Index> members;
    for (std::size_t i = 0; i < model.assignments.size(); ++i) {
      if (model.assignments[i] == static_cast<std::size_t>(c)) {
        members.push_back(static_cast<Eigen::Index>(i));
      }
    }
    cr.size = members.size();
    if (local.flag.empty() && !members.empty()) {
      Eigen::MatrixXd xc(static_cast<Eigen::Index>(members.size()), x.cols());
      std::vector<double> yc(members.size());
      for (std::size_t i = 0; i < members.size(); ++i) {
        xc.row(static_cast<Eigen::Index>(i)) = x.row(members[i]);
        yc[i] = scores[static_cast<std::size_t>(members[i])];
      }
      try {
        cr.r2 = fidelity_r2(local.tree.predict(xc), yc, denominator);
      } catch (const DataError&) {
        cr.flag = "degenerate";
      }
    }
    if (cr.r2) {
      r2_sum += *cr.r2;
      ++r2_count;
      rep.max_r2 = rep.max_r2 ? std::max(*rep.max_r2, *cr.r2) : *cr.r2;
    } else {
      ++rep.flagged;
    }
    rep.clusters.push_back(cr);
  }
  if (r2_count > 0) rep.mean_r2 = r2_sum / static_cast<double>(r2_count);
  return rep;
}

ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

ojson region_json(const RegionReport& r) {
  ojson clusters = ojson::array();
  for (const auto& c : r.clusters) {
    clusters.push_back({{"cluster", c.cluster},
                        {"size", c.size},
                        {"local_accuracy", c.local_accuracy},
                        {"r2", optional_number(c.r2)},
                        {"flag", c.flag},
                        {"leaves", c.leaves}});
  }
  ojson candidates = ojson::array();
  for (const auto& k : r.trace.candidates) {
    candidates.push_back({{"k", k.k},
                          {"feasible", k.feasible},
                          {"mean_accuracy", k.mean_accuracy},
                          {"explained_variance", k.explained_variance},
                          {"chosen", k.chosen}});
  }
  return {{"space", r.space},
          {"k", r.k},
          {"sswc", r.ss.sswc},
          {"ssbc", r.ss.ssbc},
          {"total_ss", r.ss.total},
          {"explained_variance", r.ss.explained_variance},
          {"ssbc_over_sswc", r.ss.ratio_undefined ? ojson(nullptr) : ojson(r.ss.between_within_ratio)},
          {"mean_local_accuracy", r.mean_accuracy},
          {"mean_r2", optional_number(r.mean_r2)},
          {"max_r2", optional_number(r.max_r2)},
          {"flagged_clusters", r.flagged},
          {"clusters", clusters},
          {"k_selection", candidates}};
}

std::string num(double v) { return fmt::format("{}", v); }

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw Error(fmt::format("cannot write '{}'", path.string()));
}

}  // namespace

EvaluationReport run_evaluate(const ModelBundle& bundle) {
  const Eigen::MatrixXd x = bundle.validation.matrix();
  const std::vector<int> labels = bundle.validation.labels();
  const std::vector<double> scores = predict_scores(bundle.network.network, x);
  const Eigen::MatrixXd codes = latent_codes(bundle.network.network, x);
  const auto& config = bundle.config;

  EvaluationReport rep;
  rep.roc = roc_and_auroc(scores, labels);
  rep.auroc = rep.roc.auroc;
  rep.tau = bundle.tau;
  rep.confusion = confusion_at_threshold(scores, labels, bundle.tau);
  rep.measures = classification_measures(rep.confusion);
  rep.split = bundle.split;
  rep.epochs_run = static_cast<int>(bundle.network.history.size());
  rep.epoch_selected = bundle.network.epoch_selected;
  rep.r2_denominator =
      config.report.r2_denominator == R2Denominator::kBlackBox ? "black_box" : "literal";
  rep.latent = region_report(bundle.latent, codes, x, scores, labels, bundle.tau,
                             config.regions.weighting, config.report.r2_denominator);
  if (bundle.baseline) {
    rep.baseline = region_report(*bundle.baseline, x, x, scores, labels, bundle.tau,
                                 config.regions.weighting, config.report.r2_denominator);
  }
  return rep;
}

std::string report_summary_json(const EvaluationReport& r) {
  ojson doc;
  doc["explanation_manifest"] = {{"subject", "domain expert"},
                                 {"objective", "justification"},
                                 {"scope", "local post-hoc"}};
  doc["split"] = {{"train_cases", r.split.train_cases},
                  {"validation_cases", r.split.validation_cases},
                  {"train_instances", r.split.train_instances},
                  {"validation_instances", r.split.validation_instances},
                  {"dropped_traces", r.split.dropped_traces}};
  doc["training"] = {{"epochs_run", r.epochs_run}, {"epoch_selected", r.epoch_selected}};
  const auto& m = r.measures;
  doc["classification"] = {
      {"auroc", r.auroc},
      {"tau", r.tau},
      {"confusion",
       {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn},
        {"tn", r.confusion.tn}}},
      {"measures",
       {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
        {"specificity", m.specificity}, {"f1", m.f1}, {"mcc", m.mcc}, {"fnr", m.fnr},
        {"fpr", m.fpr}, {"undefined", m.undefined}}}};
  doc["r2_denominator"] = r.r2_denominator;
  doc["regions"] = region_json(r.latent);
  if (r.baseline) {
    doc["baseline_regions"] = region_json(*r.baseline);
    doc["latent_vs_baseline"] = {
        {"explained_variance",
         {{"latent", r.latent.ss.explained_variance}, {"baseline", r.baseline->ss.explained_variance}}},
        {"mean_local_accuracy",
         {{"latent", r.latent.mean_accuracy}, {"baseline", r.baseline->mean_accuracy}}},
        {"mean_r2",
         {{"latent", optional_number(r.latent.mean_r2)},
          {"baseline", optional_number(r.baseline->mean_r2)}}}};
  } else {
    doc["baseline_regions"] = nullptr;
  }
  return doc.dump(2) + "\n";
}

void write_report(const ModelBundle& bundle, const EvaluationReport& r,
                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  // Trees from an earlier run with a different k must not linger.
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("cluster_", 0) == 0 && entry.path().extension() == ".dot") {
      std::filesystem::remove(entry.path());
    }
  }
  write_file(dir / "summary.json", report_summary_json(r));

  const auto& m = r.measures;
  std::string metrics = "measure,value\n";
  const std::pair<const char*, std::string> rows[] = {
      {"auroc", num(r.auroc)},          {"tau", num(r.tau)},
      {"tp", std::to_string(r.confusion.tp)}, {"fp", std::to_string(r.confusion.fp)},
      {"fn", std::to_string(r.confusion.fn)}, {"tn", std::to_string(r.confusion.tn)},
      {"accuracy", num(m.accuracy)},    {"precision", num(m.precision)},
      {"recall", num(m.recall)},        {"specificity", num(m.specificity)},
      {"f1", num(m.f1)},                {"mcc", num(m.mcc)},
      {"fnr", num(m.fnr)},              {"fpr", num(m.fpr)},
      {"explained_variance", num(r.latent.ss.explained_variance)},
      {"ssbc_over_sswc", r.latent.ss.ratio_undefined ? "" : num(r.latent.ss.between_within_ratio)},
      {"k", std::to_string(r.latent.k)},
      {"mean_r2", opt_num(r.latent.mean_r2)}};
  for (const auto& [name, value] : rows) metrics += fmt::format("{},{}\n", name, value);
  write_file(dir / "metrics.csv", metrics);

  std::string roc = "fpr,tpr,threshold\n";
  for (const auto& p : r.roc.points) {
    roc += fmt::format("{},{},{}\n", num(p.fpr), num(p.tpr), num(p.threshold));
  }
  write_file(dir / "roc.csv", roc);

  std::string clusters = "space,cluster,size,local_accuracy,r2,flag,leaves\n";
  auto add_clusters = [&](const RegionReport& rr) {
    for (const auto& c : rr.clusters) {
      clusters += fmt::format("{},{},{},{},{},{},{}\n", rr.space, c.cluster, c.size,
                              num(c.local_accuracy), opt_num(c.r2), c.flag, c.leaves);
    }
  };
  add_clusters(r.latent);
  if (r.baseline) add_clusters(*r.baseline);
  write_file(dir / "clusters.csv", clusters);

  std::string ks = "k,feasible,mean_accuracy,explained_variance,chosen\n";
  for (const auto& k : r.latent.trace.candidates) {
    ks += fmt::format("{},{},{},{},{}\n", k.k, k.feasible ? 1 : 0, num(k.mean_accuracy),
                      num(k.explained_variance), k.chosen ? 1 : 0);
  }
  write_file(dir / "k_selection.csv", ks);

  if (bundle.config.report.dot_files) {
    for (int c = 0; c < r.latent.k; ++c) {
      write_file(dir / fmt::format("cluster_{}.dot", c), tree_dot(bundle, c));
    }
  }
}

}  // namespace xppm
