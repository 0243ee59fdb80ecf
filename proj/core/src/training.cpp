#include "projscan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "projscan/adam.hpp"
#include "projscan/checkpoint.hpp"
#include "projscan/errors.hpp"
#include "projscan/loss.hpp"

namespace projscan {

namespace {

using nlohmann::json;

double val_mse_of(Model& model, const Dataset& ds, const ChannelSelection& sel,
                  const NormalizationParams& norm, int batch_size) {
  double sse = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < ds.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(ds.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<std::uint32_t> idx(stop - start);
    for (std::size_t i = 0; i < idx.size(); ++i)
      idx[i] = static_cast<std::uint32_t>(start + i);
    Batch batch = assemble_batch(ds, idx, sel, norm);
    const Tensor pred = model.forward(batch.planes, Mode::eval, nullptr);
    sse += mse_loss(pred, batch.targets) * static_cast<double>(idx.size());
    count += idx.size();
  }
  return sse / static_cast<double>(count);
}

void center_output_bias(Model& model, const Dataset& train_ds) {
  double mean = 0.0;
  for (const Sample& s : train_ds) mean += s.age;
  mean /= static_cast<double>(train_ds.size());
  for (const ParamPtr& p : model.params())
    if (p->name == "head.dense2.b") {
      p->value.data()[0] = static_cast<float>(mean);
      return;
    }
  throw StateError("model has no output bias to center");
}

} // namespace

void TrainingConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (augment_copies < 0) throw ConfigError("augment copies must be non-negative");
  if (patience < 0) throw ConfigError("patience must be non-negative");
  if (augment) augment_ranges.validate();
}

std::string report_epoch_json(const EpochRecord& rec) {
  return json{{"epoch", rec.epoch},
              {"train_mse", rec.train_mse},
              {"val_mse", rec.val_mse},
              {"checkpoint", rec.checkpointed},
              {"seconds", rec.seconds}}
      .dump();
}

std::string report_summary_json(const TrainReport& report) {
  return json{{"epochs_run", report.epochs.size()},
              {"best_epoch", report.best_epoch},
              {"best_val_mse", report.best_val_mse},
              {"checkpoint_epochs", report.checkpoint_epochs}}
      .dump(2);
}

TrainReport train(Model& model, const Dataset& train_ds, const Dataset& val_ds,
                  const ChannelSelection& sel, const NormalizationParams& norm,
                  const TrainingConfig& cfg, const std::string& out_dir,
                  const ValLossFn& val_loss) {
  cfg.validate();
  if (train_ds.empty() || val_ds.empty())
    throw ParameterError("training and validation sets must be non-empty");
  {
    std::set<std::string> train_ids;
    for (const Sample& s : train_ds) train_ids.insert(s.subject_id);
    for (const Sample& s : val_ds)
      if (train_ids.count(s.subject_id))
        throw ValidationError("subject " + s.subject_id +
                              " appears in both training and validation sets");
  }

  center_output_bias(model, train_ds);

  const bool augmenting = cfg.augment && cfg.augment_copies > 0;
  Dataset precomputed;
  if (augmenting && !cfg.augment_on_the_fly)
    precomputed = build_augmented_dataset(train_ds, cfg.augment_copies,
                                          cfg.augment_ranges, cfg.seed, 0);

  Adam opt(model.params(), AdamConfig{cfg.lr});
  Rng dropout_rng = make_stream(cfg.seed, rng_stream::dropout);

  std::ofstream jsonl;
  std::string checkpoint_path;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    jsonl.open((std::filesystem::path(out_dir) / "report.jsonl").string(), std::ios::trunc);
    if (!jsonl) throw FormatError("cannot write report in " + out_dir);
    checkpoint_path = (std::filesystem::path(out_dir) / "checkpoint.psck").string();
  }

  TrainReport report;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    Dataset fresh;
    const Dataset* epoch_ds = &train_ds;
    if (augmenting) {
      if (cfg.augment_on_the_fly) {
        fresh = build_augmented_dataset(train_ds, cfg.augment_copies,
                                        cfg.augment_ranges, cfg.seed,
                                        static_cast<std::uint64_t>(epoch));
        epoch_ds = &fresh;
      } else {
        epoch_ds = &precomputed;
      }
    }

    const std::vector<std::uint32_t> order =
        epoch_order(epoch_ds->size(), cfg.seed, static_cast<std::uint64_t>(epoch));
    double sse = 0.0;
    std::size_t seen = 0;
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      ++batch_no;
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<std::uint32_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
      Batch batch = assemble_batch(*epoch_ds, idx, sel, norm);
      try {
        const Tensor pred = model.forward(batch.planes, Mode::train, &dropout_rng);
        Tensor dpred;
        const double loss = mse_loss_with_grad(pred, batch.targets, dpred);
        if (!std::isfinite(loss))
          throw DivergenceError("non-finite training loss");
        model.backward(dpred);
        opt.step();
        sse += loss * static_cast<double>(idx.size());
        seen += idx.size();
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " (epoch " +
                              std::to_string(epoch) + ", batch " +
                              std::to_string(batch_no) + ", lr " +
                              std::to_string(cfg.lr) + ")");
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = sse / static_cast<double>(seen);
    rec.val_mse = val_loss ? val_loss(model, epoch)
                           : val_mse_of(model, val_ds, sel, norm, cfg.batch_size);
    if (!std::isfinite(rec.val_mse))
      throw DivergenceError("non-finite validation loss (epoch " +
                            std::to_string(epoch) + ", lr " +
                            std::to_string(cfg.lr) + ")");

    rec.checkpointed = rec.val_mse < report.best_val_mse;
    if (rec.checkpointed) {
      report.best_val_mse = rec.val_mse;
      report.best_epoch = epoch;
      report.checkpoint_epochs.push_back(epoch);
      if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, model, norm);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(rec);
    if (jsonl.is_open()) jsonl << report_epoch_json(rec) << '\n' << std::flush;

    if (cfg.patience > 0 && epoch - report.best_epoch >= cfg.patience) break;
  }

  if (!out_dir.empty()) {
    std::ofstream summary((std::filesystem::path(out_dir) / "summary.json").string(),
                          std::ios::trunc);
    summary << report_summary_json(report) << '\n';
    if (!summary) throw FormatError("cannot write summary in " + out_dir);
  }
  return report;
}

Metrics compute_metrics(const std::vector<double>& pred,
                        const std::vector<double>& target) {
  if (pred.size() != target.size())
    throw ShapeError("metric inputs differ in length: " + std::to_string(pred.size()) +
                     " vs " + std::to_string(target.size()));
  if (pred.empty()) throw ParameterError("metrics need at least one prediction");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(pred.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

std::vector<double> predict(Model& model, const Dataset& ds,
                            const ChannelSelection& sel,
                            const NormalizationParams& norm, int batch_size) {
  if (ds.empty()) throw ParameterError("cannot predict on an empty dataset");
  if (batch_size < 1) throw ParameterError("batch size must be at least 1");
  std::vector<double> out;
  out.reserve(ds.size());
  for (std::size_t start = 0; start < ds.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(ds.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<std::uint32_t> idx(stop - start);
    for (std::size_t i = 0; i < idx.size(); ++i)
      idx[i] = static_cast<std::uint32_t>(start + i);
    Batch batch = assemble_batch(ds, idx, sel, norm);
    const Tensor pred = model.forward(batch.planes, Mode::eval, nullptr);
    for (const float v : pred.data()) out.push_back(v);
  }
  return out;
}

Metrics evaluate(Model& model, const Dataset& ds, const ChannelSelection& sel,
                 const NormalizationParams& norm, int batch_size) {
  const std::vector<double> preds = predict(model, ds, sel, norm, batch_size);
  std::vector<double> ages;
  ages.reserve(ds.size());
  for (const Sample& s : ds) ages.push_back(s.age);
  return compute_metrics(preds, ages);
}

} // namespace projscan
