#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gradbal/losses.hpp"
#include "gradbal/metrics.hpp"
#include "gradbal/nn.hpp"
#include "gradbal/synthdata.hpp"
#include "json.hpp"

namespace gradbal {

enum class BatchingMode { standard, rotating };

struct ExperimentConfig {
  /// Free-form label for the `method` column; derived from the loss when empty.
  std::string name;
  LossVariant loss;
  BatchingMode batching = BatchingMode::standard;
  std::size_t batch_size = 4;
  bool reweight = false;
  bool rotation = false;
  bool dft_fusion = false;
  std::size_t epochs = 30;
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  double split_ratio = 0.8;
  std::string data;
  std::size_t crop = 28;
  ClassReduction class_reduction = ClassReduction::mean;
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::size_t trunk_width = 64;

  /// 150 epochs, cosine schedule from 1e-5 down to 0.
  static ExperimentConfig paper_preset();
  /// Throws ConfigError.
  void validate() const;
  std::string method() const;
  std::size_t effective_batch_size() const;
  ModelConfig model_config() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Flat JSON object; unknown keys are rejected with ConfigError. A "preset"
/// key ("desk" or "paper") selects the defaults the other keys override.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

std::string_view to_string(BatchingMode mode);

struct Prediction {
  std::size_t index = 0;
  int truth = 0;
  int pred = 0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  /// Mean over batches of mean |alpha_c - 1| across present classes.
  double alpha_deviation = 0.0;
  MetricsReport validation;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct RunResult {
  ExperimentConfig config;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  std::size_t steps = 0;
  MetricsReport initial;
  std::vector<EpochRecord> epochs;
  MetricsReport final_metrics;
  std::vector<Prediction> predictions;
  /// Mean |alpha - 1| over every training batch (0 without reweighting).
  double alpha_deviation = 0.0;
  double wall_seconds = 0.0;
};

/// Full training run on an in-memory dataset.
RunResult train(const ExperimentConfig& config, const Dataset& data);
/// Loads the dataset from `config.data`.
RunResult train(const ExperimentConfig& config);

/// Predictions of the severity head on the given samples (no rotation).
std::vector<Prediction> predict(const ParamStore& params, const Dataset& data,
                                const std::vector<std::size_t>& indices, std::size_t crop);

struct SweepRow {
  ExperimentConfig config;
  std::optional<RunResult> result;
  std::string error;
};

/// Runs every config; failures are recorded per row. Rows keep grid order
/// regardless of `parallel`.
std::vector<SweepRow> sweep(const std::vector<ExperimentConfig>& grid, const Dataset& data,
                            std::size_t parallel = 1);

std::vector<ExperimentConfig> load_grid(const std::filesystem::path& path);

nlohmann::json metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);
nlohmann::json result_to_json(const RunResult& result);
RunResult result_from_json(const nlohmann::json& j);

enum class ResultFormat { csv, json };

/// One-row-per-run CSV (3 decimals) or lossless JSON. Throws IoError with the
/// path on failure.
void emit_results(const std::vector<SweepRow>& rows, const std::filesystem::path& path,
                  ResultFormat format);
std::string results_csv(const std::vector<SweepRow>& rows);
nlohmann::json results_json(const std::vector<SweepRow>& rows);

/// `index,true,pred` prediction files.
std::vector<Prediction> read_predictions_csv(const std::filesystem::path& path);
void write_predictions_csv(const std::vector<Prediction>& predictions,
                           const std::filesystem::path& path);

}  // namespace gradbal
