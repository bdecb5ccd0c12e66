#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradbal/errors.hpp"
#include "gradbal/gradcheck.hpp"
#include "gradbal/harness.hpp"
#include "gradbal/metrics.hpp"
#include "gradbal/synthdata.hpp"

namespace {

using namespace gradbal;

constexpr double kGradTolerance = 1e-4;

std::array<std::size_t, 3> parse_counts(const std::string& text) {
  std::array<std::size_t, 3> counts{};
  std::istringstream in(text);
  std::string field;
  std::size_t k = 0;
  while (std::getline(in, field, ',')) {
    if (k >= 3) throw ConfigError("--counts expects exactly three values");
    std::size_t used = 0;
    counts[k++] = std::stoull(field, &used);
    if (used != field.size()) throw ConfigError("--counts: not an integer: " + field);
  }
  if (k != 3) throw ConfigError("--counts expects exactly three values");
  return counts;
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-norm class reweighting and rotating batching on synthetic scans"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset directory");
  std::string artifact = "noise", counts_text, gen_out;
  std::size_t size = 32;
  std::uint64_t gen_seed = 0;
  double grain = kDefaultGrain;
  gen->add_option("--artifact", artifact, "Artifact type")->capture_default_str();
  gen->add_option("--counts", counts_text, "Severity counts n0,n1,n2 (default: per-artifact)");
  gen->add_option("--size", size, "Image side length")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--grain", grain, "Max per-scan grain sigma of clean images")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train one configuration");
  std::string train_data, train_config, train_out, train_pred;
  tr->add_option("--data", train_data, "Dataset directory (overrides the config)");
  tr->add_option("--config", train_config, "Experiment config JSON")->required();
  tr->add_option("--out", train_out, "Run result JSON")->required();
  tr->add_option("--pred", train_pred, "Validation prediction CSV");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Train every configuration of a grid");
  std::string sweep_data, sweep_grid, sweep_csv, sweep_json;
  std::size_t parallel = 1;
  sw->add_option("--data", sweep_data, "Dataset directory")->required();
  sw->add_option("--grid", sweep_grid, "JSON array of experiment configs")->required();
  sw->add_option("--out", sweep_csv, "Results CSV")->required();
  sw->add_option("--json", sweep_json, "Full results JSON");
  sw->add_option("--parallel", parallel, "Concurrent runs")->capture_default_str();

  // metrics
  auto* me = app.add_subcommand("metrics", "Score a prediction CSV (index,true,pred)");
  std::string pred_path, report_out;
  me->add_option("--pred", pred_path, "Prediction CSV")->required();
  me->add_option("--out", report_out, "Report JSON")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  std::uint64_t gc_seed = 0;
  std::string gc_loss;
  double gc_eps = 1e-3;
  gc->add_option("--seed", gc_seed, "Model and batch seed")->capture_default_str();
  gc->add_option("--loss", gc_loss, "ce | weighted_ce | focal | ordinal (default: all)")
      ->check(CLI::IsMember({"ce", "weighted_ce", "focal", "ordinal"}));
  gc->add_option("--eps", gc_eps, "Central-difference step")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      DatasetSpec spec = DatasetSpec::defaults(parse_artifact(artifact));
      if (!counts_text.empty()) spec.counts = parse_counts(counts_text);
      spec.size = size;
      spec.seed = gen_seed;
      spec.grain = grain;
      const Dataset data = generate_dataset(spec);
      save_dataset(data, gen_out);
      std::printf("wrote %zu scans from %zu subjects to %s\n", data.samples.size(),
                  data.num_subjects(), gen_out.c_str());
    } else if (tr->parsed()) {
      ExperimentConfig config = load_config(train_config);
      if (!train_data.empty()) config.data = train_data;
      const RunResult r = train(config);
      write_json(result_to_json(r), train_out);
      if (!train_pred.empty()) write_predictions_csv(r.predictions, train_pred);
      std::printf("%s: macro F1 %.3f, mean %.3f (%zu epochs, %.1f s)\n", config.method().c_str(),
                  r.final_metrics.macro.f1, r.final_metrics.mean_of_15, r.epochs.size(),
                  r.wall_seconds);
    } else if (sw->parsed()) {
      auto grid = load_grid(sweep_grid);
      for (auto& c : grid) c.data = sweep_data;
      const Dataset data = load_dataset(sweep_data);
      const auto rows = sweep(grid, data, parallel);
      emit_results(rows, sweep_csv, ResultFormat::csv);
      if (!sweep_json.empty()) emit_results(rows, sweep_json, ResultFormat::json);
      std::size_t failed = 0;
      for (const auto& row : rows)
        if (!row.result) {
          ++failed;
          std::fprintf(stderr, "run %s failed: %s\n", row.config.method().c_str(), row.error.c_str());
        }
      std::printf("%zu runs, %zu failed\n", rows.size(), failed);
      return failed == 0 ? 0 : 1;
    } else if (me->parsed()) {
      const auto preds = read_predictions_csv(pred_path);
      std::vector<int> truth, guess;
      for (const auto& p : preds) {
        truth.push_back(p.truth);
        guess.push_back(p.pred);
      }
      const MetricsReport r = report(truth, guess);
      write_json(metrics_to_json(r), report_out);
      std::printf("macro F1 %.3f, mean %.3f\n", r.macro.f1, r.mean_of_15);
    } else if (gc->parsed()) {
      std::vector<std::string> losses{"ce", "weighted_ce", "focal", "ordinal"};
      if (!gc_loss.empty()) losses = {gc_loss};
      double worst = 0.0;
      for (const auto& tag : losses) {
        const auto r = finite_diff_check(tiny_model_config(), LossVariant::parse(tag), gc_seed, gc_eps);
        std::printf("%-12s max relative error %.3e (%zu checked, %zu skipped; worst %s[%zu] "
                    "analytic %.6e numeric %.6e)\n",
                    tag.c_str(), r.max_rel_error, r.checked, r.skipped, r.worst_param.c_str(),
                    r.worst_index, r.worst_analytic, r.worst_numeric);
        worst = std::max(worst, r.max_rel_error);
      }
      return worst < kGradTolerance ? 0 : 1;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
