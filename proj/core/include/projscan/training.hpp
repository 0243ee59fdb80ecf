#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "projscan/dataset.hpp"
#include "projscan/model.hpp"

namespace projscan {

struct TrainingConfig {
  double lr = 0.003;
  int epochs = 400;
  int batch_size = 64;
  bool augment = true;
  int augment_copies = 3;
  /// Precomputed mode reuses one set of warped copies for the whole
  /// run; on-the-fly draws fresh warps every epoch.
  bool augment_on_the_fly = false;
  AugmentRanges augment_ranges;
  /// 0 runs the full epoch budget; otherwise training stops once this
  /// many epochs pass without a new validation minimum.
  int patience = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0; // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  bool checkpointed = false;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::vector<int> checkpoint_epochs; // exactly the new-val-minimum epochs
  int best_epoch = 0;
  double best_val_mse = std::numeric_limits<double>::infinity();
};

std::string report_epoch_json(const EpochRecord& rec);
std::string report_summary_json(const TrainReport& report);

/// Replaces the full-validation-set MSE when supplied, so the
/// checkpoint rule can be exercised against an injected loss sequence.
using ValLossFn = std::function<double(Model& model, int epoch)>;

/// Runs the full epoch budget (see patience): shuffled mini-batches of
/// the (optionally augmented) training set, Adam on MSE, then the
/// validation MSE in eval mode. A checkpoint is written iff that loss
/// falls strictly below the previous minimum, so the checkpoint log is
/// strictly decreasing. The output node's bias starts at the
/// training-label mean, replacing whatever value the model held. When
/// out_dir is nonempty it receives checkpoint.psck, a report.jsonl line
/// per epoch, and summary.json; an empty out_dir trains in memory only.
/// Non-finite losses or gradients abort with a DivergenceError carrying
/// epoch, batch, and learning rate. Fixed seeds make runs bit-identical
/// when augmentation is off.
TrainReport train(Model& model, const Dataset& train_ds, const Dataset& val_ds,
                  const ChannelSelection& sel, const NormalizationParams& norm,
                  const TrainingConfig& cfg, const std::string& out_dir,
                  const ValLossFn& val_loss = {});

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0; // never below mae
};

Metrics compute_metrics(const std::vector<double>& pred,
                        const std::vector<double>& target);

/// Eval-mode predictions in dataset order.
std::vector<double> predict(Model& model, const Dataset& ds,
                            const ChannelSelection& sel,
                            const NormalizationParams& norm, int batch_size = 64);

Metrics evaluate(Model& model, const Dataset& ds, const ChannelSelection& sel,
                 const NormalizationParams& norm, int batch_size = 64);

} // namespace projscan
