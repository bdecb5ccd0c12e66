#include "gradbal/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "gradbal/batching.hpp"
#include "gradbal/errors.hpp"
#include "gradbal/reweight.hpp"
#include "gradbal/rng.hpp"

namespace gradbal {
namespace {

using nlohmann::json;

constexpr std::size_t kEvalChunk = 64;

struct PreparedSplit {
  SplitManifest manifest;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

void copy_into(Tensor& batch, std::size_t slot, const Image& image) {
  const std::size_t plane = image.pixels.size();
  std::copy(image.pixels.begin(), image.pixels.end(),
            batch.values.begin() + static_cast<std::ptrdiff_t>(slot * plane));
}

MetricsReport evaluate(const ParamStore& params, const Dataset& data,
                       const std::vector<std::size_t>& indices, std::size_t crop,
                       std::vector<Prediction>* out) {
  auto preds = predict(params, data, indices, crop);
  std::vector<int> truth, guess;
  for (const auto& p : preds) {
    truth.push_back(p.truth);
    guess.push_back(p.pred);
  }
  MetricsReport r = report(truth, guess);
  if (out) *out = std::move(preds);
  return r;
}

double alpha_deviation(const AlphaWeights& a) {
  double s = 0.0;
  int n = 0;
  for (std::size_t c = 0; c < 3; ++c)
    if (a.present[c]) {
      s += std::abs(a.alpha[c] - 1.0);
      ++n;
    }
  return n == 0 ? 0.0 : s / n;
}

template <typename T>
T take(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

std::string_view to_string(BatchingMode mode) {
  return mode == BatchingMode::rotating ? "rotating" : "standard";
}

ExperimentConfig ExperimentConfig::paper_preset() {
  ExperimentConfig c;
  c.epochs = 150;
  c.lr_max = 1e-5;
  c.lr_min = 0.0;
  return c;
}

void ExperimentConfig::validate() const {
  loss.validate();
  if (batching == BatchingMode::standard && batch_size == 0)
    throw ConfigError("batch_size must be positive");
  if (!(lr_max > 0.0) || !(lr_min >= 0.0) || lr_min > lr_max)
    throw ConfigError("learning rates must satisfy 0 <= lr_min <= lr_max, lr_max > 0");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must be in (0, 1)");
  model_config().validate();
}

std::string ExperimentConfig::method() const {
  if (!name.empty()) return name;
  return loss.tag() + (dft_fusion ? "+dft" : "");
}

std::size_t ExperimentConfig::effective_batch_size() const {
  return batching == BatchingMode::rotating ? kRotatingBatchSize : batch_size;
}

ModelConfig ExperimentConfig::model_config() const {
  ModelConfig m;
  m.height = crop;
  m.width = crop;
  m.conv1_channels = conv1_channels;
  m.conv2_channels = conv2_channels;
  m.trunk_width = trunk_width;
  m.dft_fusion = dft_fusion;
  m.ordinal = loss.kind == LossKind::ordinal;
  m.seed = derive_key(seed, "init");
  return m;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  if (j.contains("preset")) {
    const auto preset = take<std::string>(j, "preset");
    if (preset == "paper")
      c = ExperimentConfig::paper_preset();
    else if (preset != "desk")
      throw ConfigError("unknown preset: " + preset);
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") continue;
    else if (key == "name") c.name = take<std::string>(j, "name");
    else if (key == "loss") {
      const double gamma = c.loss.gamma;
      c.loss = LossVariant::parse(take<std::string>(j, "loss"));
      c.loss.gamma = gamma;
    }
    else if (key == "focal_gamma") c.loss.gamma = take<double>(j, "focal_gamma");
    else if (key == "batching") {
      const auto mode = take<std::string>(j, "batching");
      if (mode == "standard") c.batching = BatchingMode::standard;
      else if (mode == "rotating") c.batching = BatchingMode::rotating;
      else throw ConfigError("unknown batching mode: " + mode);
    }
    else if (key == "batch_size") c.batch_size = take<std::size_t>(j, "batch_size");
    else if (key == "reweight") c.reweight = take<bool>(j, "reweight");
    else if (key == "rotation") c.rotation = take<bool>(j, "rotation");
    else if (key == "dft_fusion") c.dft_fusion = take<bool>(j, "dft_fusion");
    else if (key == "epochs") c.epochs = take<std::size_t>(j, "epochs");
    else if (key == "lr_max") c.lr_max = take<double>(j, "lr_max");
    else if (key == "lr_min") c.lr_min = take<double>(j, "lr_min");
    else if (key == "seed") c.seed = take<std::uint64_t>(j, "seed");
    else if (key == "split_seed") c.split_seed = take<std::uint64_t>(j, "split_seed");
    else if (key == "split_ratio") c.split_ratio = take<double>(j, "split_ratio");
    else if (key == "data") c.data = take<std::string>(j, "data");
    else if (key == "crop") c.crop = take<std::size_t>(j, "crop");
    else if (key == "class_reduction") {
      const auto r = take<std::string>(j, "class_reduction");
      if (r == "mean") c.class_reduction = ClassReduction::mean;
      else if (r == "sum") c.class_reduction = ClassReduction::sum;
      else throw ConfigError("unknown class_reduction: " + r);
    }
    else if (key == "conv1_channels") c.conv1_channels = take<std::size_t>(j, "conv1_channels");
    else if (key == "conv2_channels") c.conv2_channels = take<std::size_t>(j, "conv2_channels");
    else if (key == "trunk_width") c.trunk_width = take<std::size_t>(j, "trunk_width");
    else throw ConfigError("unknown config key: " + key);
  }
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  return {{"name", c.name},
          {"loss", c.loss.tag()},
          {"focal_gamma", c.loss.gamma},
          {"batching", to_string(c.batching)},
          {"batch_size", c.effective_batch_size()},
          {"reweight", c.reweight},
          {"rotation", c.rotation},
          {"dft_fusion", c.dft_fusion},
          {"epochs", c.epochs},
          {"lr_max", c.lr_max},
          {"lr_min", c.lr_min},
          {"seed", c.seed},
          {"split_seed", c.split_seed},
          {"split_ratio", c.split_ratio},
          {"data", c.data},
          {"crop", c.crop},
          {"class_reduction", c.class_reduction == ClassReduction::mean ? "mean" : "sum"},
          {"conv1_channels", c.conv1_channels},
          {"conv2_channels", c.conv2_channels},
          {"trunk_width", c.trunk_width}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<Prediction> predict(const ParamStore& params, const Dataset& data,
                                const std::vector<std::size_t>& indices, std::size_t crop) {
  std::vector<Prediction> out;
  out.reserve(indices.size());
  const bool ordinal = params.config().ordinal;
  for (std::size_t start = 0; start < indices.size(); start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, indices.size() - start);
    Tensor batch({n, 1, crop, crop});
    for (std::size_t k = 0; k < n; ++k)
      copy_into(batch, k, augment_with_angle(data.samples[indices[start + k]].image, std::nullopt, crop));
    const ForwardTape tape = forward(params, batch);
    const auto ranks =
        ordinal ? ordinal_predict(tape.severity_logits()) : argmax_predict(tape.severity_logits());
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t idx = indices[start + k];
      out.push_back({idx, data.samples[idx].severity, ranks[k]});
    }
  }
  return out;
}

RunResult train(const ExperimentConfig& config, const Dataset& data) {
  const auto clock_start = std::chrono::steady_clock::now();
  config.validate();
  if (data.samples.empty()) throw ConfigError("dataset is empty");
  if (data.spec.size < config.crop)
    throw ConfigError("dataset images are smaller than the crop size");

  RunResult result;
  result.config = config;
  result.config.batch_size = config.effective_batch_size();

  const SplitManifest split = split_by_subject(data, config.split_ratio, config.split_seed);
  const auto train_idx = split.train_indices(data);
  const auto val_idx = split.val_indices(data);
  result.train_size = train_idx.size();
  result.val_size = val_idx.size();

  const std::vector<int> severities = data.severities();
  const std::vector<int> axes = data.axes();
  const ClassIndexSets sets = ClassIndexSets::from_labels(severities, train_idx);

  StepOptions options;
  options.variant = config.loss;
  options.reweight = config.reweight;
  options.reduction = config.class_reduction;
  if (config.loss.kind == LossKind::weighted_ce) {
    const std::array<std::size_t, 3> counts{sets.size(0), sets.size(1), sets.size(2)};
    options.variant.class_weights = weighted_ce_weights(counts);
    // Classes missing from training never contribute; any positive weight works.
    for (double& w : options.variant.class_weights)
      if (w == 0.0) w = 1.0;
  }
  if (config.batching == BatchingMode::rotating)
    for (std::size_t c = 0; c < 3; ++c)
      if (sets.size(c) == 0)
        throw ConfigError("rotating batching needs every severity class in the training split");

  ParamStore params = init_model(config.model_config());
  AdamState adam = AdamState::zeros_like(params);
  const std::size_t crop = config.crop;

  // Without rotation the augmented images are identical every epoch.
  std::map<std::size_t, Image> fixed_views;
  if (!config.rotation)
    for (std::size_t i : train_idx) fixed_views.emplace(i, augment_with_angle(data.samples[i].image, std::nullopt, crop));

  const std::uint64_t sampler_seed = derive_key(config.seed, "sampler");
  const std::uint64_t augment_seed = derive_key(config.seed, "augment");
  const std::size_t batches_per_epoch =
      config.batching == BatchingMode::rotating
          ? sets.size(1)
          : (train_idx.size() + config.batch_size - 1) / config.batch_size;
  const auto total_steps =
      static_cast<std::int64_t>(std::max<std::size_t>(1, batches_per_epoch * config.epochs));

  result.initial = evaluate(params, data, val_idx, crop, &result.predictions);
  result.final_metrics = result.initial;

  std::int64_t step = 0;
  double alpha_sum = 0.0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    BatchPlan plan;
    if (config.batching == BatchingMode::rotating) {
      plan = rotating_epoch(sets, sampler_seed, epoch);
    } else {
      plan = standard_epoch(train_idx.size(), config.batch_size, sampler_seed, epoch);
      for (auto& b : plan.batches)
        for (auto& i : b) i = train_idx[i];
    }

    EpochRecord record;
    record.epoch = epoch + 1;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      const auto& members = plan.batches[b];
      Tensor batch({members.size(), 1, crop, crop});
      std::vector<int> sev(members.size()), ax(members.size());
      for (std::size_t k = 0; k < members.size(); ++k) {
        const std::size_t idx = members[k];
        if (config.rotation) {
          const std::uint64_t key = derive_key(augment_seed, "sample", epoch * data.samples.size() + idx);
          copy_into(batch, k, augment(data.samples[idx].image, true, key, crop));
        } else {
          copy_into(batch, k, fixed_views.at(idx));
        }
        sev[k] = severities[idx];
        ax[k] = axes[idx];
      }
      try {
        const ForwardTape tape = forward(params, batch);
        const StepLoss loss = step_objective(tape, params, sev, ax, options);
        params.zero_grad();
        backward_total(tape, loss.total, 1.0, params);
        adam_step(params, adam, cosine_lr(step, total_steps, config.lr_max, config.lr_min));
        record.train_loss += loss.bundle.total_loss;
        if (config.reweight) record.alpha_deviation += alpha_deviation(loss.alphas);
      } catch (const NumericFault& e) {
        throw NumericFault(e.layer(), "epoch " + std::to_string(epoch + 1) + " batch " +
                                          std::to_string(b) + ": " + e.what());
      }
      ++step;
    }
    const auto nb = static_cast<double>(std::max<std::size_t>(1, plan.batches.size()));
    alpha_sum += record.alpha_deviation;
    record.train_loss /= nb;
    record.alpha_deviation /= nb;
    record.validation = evaluate(params, data, val_idx, crop, &result.predictions);
    result.final_metrics = record.validation;
    result.epochs.push_back(std::move(record));
  }
  result.steps = static_cast<std::size_t>(step);
  result.alpha_deviation = step == 0 ? 0.0 : alpha_sum / static_cast<double>(step);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return result;
}

RunResult train(const ExperimentConfig& config) {
  if (config.data.empty()) throw ConfigError("config has no dataset path");
  return train(config, load_dataset(config.data));
}

std::vector<SweepRow> sweep(const std::vector<ExperimentConfig>& grid, const Dataset& data,
                            std::size_t parallel) {
  std::vector<SweepRow> rows(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) rows[i].config = grid[i];
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      try {
        rows[i].result = train(grid[i], data);
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(parallel, 1, std::max<std::size_t>(1, grid.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return rows;
}

std::vector<ExperimentConfig> load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw ConfigError(path.string() + ": grid must be a JSON array of configs");
  std::vector<ExperimentConfig> grid;
  for (const auto& item : j) grid.push_back(config_from_json(item));
  return grid;
}

json metrics_to_json(const MetricsReport& r) {
  auto block = [](const AveragedScores& s) {
    return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
                {"f2", s.f2},               {"accuracy", s.accuracy}};
  };
  return {{"weighted", block(r.weighted)},
          {"macro", block(r.macro)},
          {"micro", block(r.micro)},
          {"mean", r.mean_of_15}};
}

MetricsReport metrics_from_json(const json& j) {
  auto block = [](const json& b) {
    return AveragedScores{b.at("precision").get<double>(), b.at("recall").get<double>(),
                          b.at("f1").get<double>(), b.at("f2").get<double>(),
                          b.at("accuracy").get<double>()};
  };
  MetricsReport r;
  r.weighted = block(j.at("weighted"));
  r.macro = block(j.at("macro"));
  r.micro = block(j.at("micro"));
  r.mean_of_15 = j.at("mean").get<double>();
  return r;
}

json result_to_json(const RunResult& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"alpha_deviation", e.alpha_deviation},
                      {"validation", metrics_to_json(e.validation)}});
  json preds = json::array();
  for (const auto& p : r.predictions) preds.push_back({p.index, p.truth, p.pred});
  return {{"config", config_to_json(r.config)},
          {"train_size", r.train_size},
          {"val_size", r.val_size},
          {"steps", r.steps},
          {"initial", metrics_to_json(r.initial)},
          {"epochs", epochs},
          {"final", metrics_to_json(r.final_metrics)},
          {"predictions", preds},
          {"alpha_deviation", r.alpha_deviation},
          {"wall_seconds", r.wall_seconds}};
}

RunResult result_from_json(const json& j) {
  RunResult r;
  r.config = config_from_json(j.at("config"));
  r.train_size = j.at("train_size").get<std::size_t>();
  r.val_size = j.at("val_size").get<std::size_t>();
  r.steps = j.at("steps").get<std::size_t>();
  r.initial = metrics_from_json(j.at("initial"));
  for (const auto& e : j.at("epochs"))
    r.epochs.push_back({e.at("epoch").get<std::size_t>(), e.at("train_loss").get<double>(),
                        e.at("alpha_deviation").get<double>(), metrics_from_json(e.at("validation"))});
  r.final_metrics = metrics_from_json(j.at("final"));
  for (const auto& p : j.at("predictions"))
    r.predictions.push_back({p.at(0).get<std::size_t>(), p.at(1).get<int>(), p.at(2).get<int>()});
  r.alpha_deviation = j.at("alpha_deviation").get<double>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

std::string results_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "method,batching,reweight,rotation,w_prec,w_rec,w_f1,w_f2,w_acc,m_prec,m_rec,m_f1,m_f2,"
         "m_acc,u_prec,u_rec,u_f1,u_f2,u_acc,mean\n";
  char buf[32];
  for (const auto& row : rows) {
    out << row.config.method() << ',' << to_string(row.config.batching) << ','
        << (row.config.reweight ? 1 : 0) << ',' << (row.config.rotation ? 1 : 0);
    if (row.result) {
      for (double v : row.result->final_metrics.values()) {
        std::snprintf(buf, sizeof buf, "%.3f", v);
        out << ',' << buf;
      }
      std::snprintf(buf, sizeof buf, "%.3f", row.result->final_metrics.mean_of_15);
      out << ',' << buf;
    } else {
      for (int k = 0; k < 16; ++k) out << ',';
    }
    out << '\n';
  }
  return out.str();
}

json results_json(const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const auto& row : rows) {
    if (row.result)
      out.push_back({{"method", row.config.method()}, {"result", result_to_json(*row.result)}});
    else
      out.push_back({{"method", row.config.method()},
                     {"config", config_to_json(row.config)},
                     {"error", row.error}});
  }
  return out;
}

void emit_results(const std::vector<SweepRow>& rows, const std::filesystem::path& path,
                  ResultFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  if (format == ResultFormat::csv)
    out << results_csv(rows);
  else
    out << results_json(rows).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Prediction> read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "index,true,pred") throw IoError(path.string() + ": header must be index,true,pred");
  std::vector<Prediction> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string a, b, c;
    Prediction p;
    try {
      if (!std::getline(fields, a, ',') || !std::getline(fields, b, ',') || !std::getline(fields, c))
        throw std::invalid_argument("expected 3 fields");
      std::size_t used = 0;
      p.index = std::stoull(a, &used);
      if (used != a.size()) throw std::invalid_argument("index");
      p.truth = std::stoi(b, &used);
      if (used != b.size()) throw std::invalid_argument("true");
      p.pred = std::stoi(c, &used);
      if (used != c.size()) throw std::invalid_argument("pred");
    } catch (const std::exception&) {
      throw IoError(path.string() + ": malformed line " + std::to_string(lineno));
    }
    out.push_back(p);
  }
  return out;
}

void write_predictions_csv(const std::vector<Prediction>& predictions,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "index,true,pred\n";
  for (const auto& p : predictions) out << p.index << ',' << p.truth << ',' << p.pred << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace gradbal
