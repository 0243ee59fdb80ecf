#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "projscan/dataset.hpp"
#include "projscan/model.hpp"
#include "projscan/training.hpp"

namespace projscan {

/// One sweep cell: the trained channel subset (canonical-six bitmask),
/// its learning rate, and the best validation MSE the run reached.
struct AblationResult {
  unsigned subset = 0;
  double lr = 0.0;
  double val_loss = 0.0;
  std::uint64_t seed = 0;
  int epochs = 0;
};

struct SweepConfig {
  /// Channels the sweep enumerates subsets of; all 2^n subsets
  /// including the empty one are trained.
  ChannelSelection channels = ChannelSelection::six();
  std::vector<double> lrs{0.003, 0.001};
  int epochs = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-cell seed, a pure function of (global seed, subset, lr) so cells
/// can run in any order, or in parallel, without changing results.
std::uint64_t sweep_cell_seed(std::uint64_t global_seed, unsigned subset, double lr);

/// Trains one cell and returns its final (best) validation MSE.
/// Injectable so the sweep mechanics can be tested without training.
using CellRunner =
    std::function<double(unsigned subset, double lr, std::uint64_t cell_seed)>;

/// Builds the standard runner: per cell, a fresh model on the subset's
/// channels (the empty subset yields the bias-only constant predictor)
/// trained with the given knobs, augmentation off.
CellRunner make_training_cell_runner(const Dataset& train_ds, const Dataset& val_ds,
                                     const ModelConfig& model_template,
                                     int batch_size, int epochs);

/// Runs every (subset, lr) cell in canonical order (subset-major,
/// config lr order), appending each finished record to
/// out_dir/results.csv next to a manifest.json carrying a config hash.
/// A restart verifies the manifest (SweepError on mismatch) and skips
/// the recorded cells, so interruption never duplicates a record.
/// Returns all records sorted canonically. An empty out_dir keeps the
/// sweep in memory.
std::vector<AblationResult> ablation_sweep(const SweepConfig& cfg,
                                           const CellRunner& runner,
                                           const std::string& out_dir);

/// Parses a results CSV (header `subset_bitmask,lr,val_loss,seed,epochs`).
std::vector<AblationResult> load_ablation_results(const std::string& csv_path);

struct ChannelMarginal {
  ChannelKey key;
  double mean_decrease = 0.0; // mean of loss(S) - loss(S + channel)
  int pairs = 0;              // 2^(n-1) * n_lrs
};

struct MarginalReport {
  std::vector<ChannelMarginal> channels; // canonical order
};

/// Mean validation-loss decrease from adding each channel, averaged
/// over every (subset without it, lr) pair. The records must cover the
/// full subset lattice of the channels they mention, once per lr;
/// SweepError lists any absent or duplicated cells.
MarginalReport marginal_contribution(const std::vector<AblationResult>& results);

std::string marginal_table(const MarginalReport& report);
std::string marginal_svg(const MarginalReport& report);
std::string marginal_json(const MarginalReport& report);

} // namespace projscan
