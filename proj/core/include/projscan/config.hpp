#pragma once

#include <string>

#include <json.hpp>

#include "projscan/dataset.hpp"
#include "projscan/model.hpp"
#include "projscan/training.hpp"

namespace projscan {

/// Minimal TOML subset, enough for flat run configs: one-level
/// [section] headers; key = value lines with string, boolean, number,
/// or single-line array values; # comments. Returns one JSON object
/// per section. FormatError carries the offending line number.
nlohmann::json parse_toml(const std::string& text);

struct DataConfig {
  std::string dir;    // directory of .pjsn projection files
  std::string labels; // subject_id,age CSV
  std::string channels = "six";
  SplitFractions split;
  std::uint64_t split_seed = 17;
};

/// Everything one training run needs, as read from a config file.
/// selection is derived from data.channels, and the model's per-plane
/// channel counts from the selection.
struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainingConfig train;
  ChannelSelection selection;
};

/// Sections [data], [model], [train], [augment]; every field of
/// RunConfig is overridable, unset keys keep their defaults. Unknown
/// sections or keys are ConfigErrors, as are out-of-domain values.
/// When dropout placement is between_dense and no rate is given, the
/// rate defaults to 0.3 instead of the between-conv 0.2.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

} // namespace projscan
