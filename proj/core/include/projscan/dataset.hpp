#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "projscan/augment.hpp"
#include "projscan/model.hpp"
#include "projscan/projection.hpp"
#include "projscan/tensor.hpp"

namespace projscan {

/// One subject: raw (unnormalized) projections plus the age label.
struct Sample {
  std::string subject_id;
  float age = 0.0f;
  ProjectionSet projections;
};

using Dataset = std::vector<Sample>;

/// Rows of a `subject_id,age` CSV in file order. A first line equal to
/// the header is skipped. FormatError on malformed rows,
/// ValidationError on non-finite ages or duplicate ids.
std::vector<std::pair<std::string, float>> load_labels_csv(const std::string& path);
void save_labels_csv(const std::string& path,
                     const std::vector<std::pair<std::string, float>>& rows);

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;

  /// ConfigError unless all non-negative and summing to 1 within 1e-6.
  void validate() const;
};

enum class SplitPart { train = 0, val = 1, test = 2 };

/// Deterministic assignment by hashing (seed, subject id) to [0,1) and
/// cutting at the cumulative fractions. A subject's part never depends
/// on which other subjects are present.
SplitPart split_assignment(const std::string& subject_id,
                           const SplitFractions& fractions, std::uint64_t seed);

struct DatasetSplits {
  Dataset train, val, test;
};

DatasetSplits split_dataset(Dataset all, const SplitFractions& fractions,
                            std::uint64_t seed);

/// Fits the per-channel [0,1] rescale on the given samples; intended to
/// see the raw training split only, so evaluation reuses the exact map
/// the model was trained with. Every sample must carry every selected
/// channel (ValidationError naming the subject and channel otherwise).
NormalizationParams compute_normalization(const Dataset& ds,
                                          const ChannelSelection& sel);

/// (1 + copies) * N samples: the originals first, byte-identical, then
/// one block per copy. Warps are drawn per (subject, copy, plane) from
/// streams independent of dataset order; `round` folds into the stream
/// so an on-the-fly rebuild draws fresh warps each epoch.
Dataset build_augmented_dataset(const Dataset& ds, int copies,
                                const AugmentRanges& ranges, std::uint64_t seed,
                                std::uint64_t round = 0);

/// Presentation order for one epoch, a seeded permutation of 0..n-1.
std::vector<std::uint32_t> epoch_order(std::size_t n, std::uint64_t seed,
                                       std::uint64_t epoch);

struct Batch {
  PlaneBatch planes;
  Tensor targets; // (n, 1) ages
};

/// Gathers ds[indices] into per-plane (n, c, h, w) tensors holding the
/// selected channels in canonical order, rescaled by `norm` (a
/// collapsed channel range maps to 0). All samples must agree on
/// per-plane image dims (ShapeError).
Batch assemble_batch(const Dataset& ds, const std::vector<std::uint32_t>& indices,
                     const ChannelSelection& sel, const NormalizationParams& norm);

/// Per-plane image dims implied by the first sample, for build_model.
/// Planes without selected channels report 0x0.
std::array<PlaneImageDims, 3> dataset_plane_dims(const Dataset& ds,
                                                 const ChannelSelection& sel);

/// Loads <dir>/<subject_id>.pjsn for every labels row. Each set must
/// cover the selection.
Dataset load_dataset(const std::string& dir, const std::string& labels_path,
                     const ChannelSelection& sel);

} // namespace projscan
