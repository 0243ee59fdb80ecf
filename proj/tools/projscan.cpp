// projscan: phantom generation, volume projection, training, evaluation,
// the channel-ablation sweep, and its marginal-contribution report, all
// behind one binary. Exit 0 on success, 1 on any runtime failure, 2 on
// usage errors.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "projscan/ablation.hpp"
#include "projscan/checkpoint.hpp"
#include "projscan/config.hpp"
#include "projscan/dataset.hpp"
#include "projscan/errors.hpp"
#include "projscan/model.hpp"
#include "projscan/phantom.hpp"
#include "projscan/projection.hpp"
#include "projscan/rng.hpp"
#include "projscan/training.hpp"
#include "projscan/volume.hpp"
#include "projscan/volume_io.hpp"

namespace fs = std::filesystem;

namespace {

using namespace projscan;

/// "mean,std" is shorthand for those statistics on all three planes;
/// tokens with an explicit plane ("axial-std") and the set names
/// ("six", "moments") pass through untouched.
ChannelSelection parse_channel_arg(const std::string& text) {
  std::vector<std::string> expanded;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const auto b = token.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    token = token.substr(b, token.find_last_not_of(" \t") - b + 1);
    if (token == "six" || token == "moments" ||
        token.find('-') != std::string::npos) {
      expanded.push_back(token);
      continue;
    }
    for (Plane plane : kCanonicalPlanes)
      expanded.push_back(std::string(to_string(plane)) + "-" + token);
  }
  std::string joined;
  for (const std::string& t : expanded) {
    if (!joined.empty()) joined += ",";
    joined += t;
  }
  return ChannelSelection::parse(joined);
}

std::string zero_pad(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

nlohmann::json metrics_json(const Metrics& m, std::size_t count) {
  return {{"mae", m.mae}, {"rmse", m.rmse}, {"count", count}};
}

// ---------------------------------------------------------------------------
// phantom

struct PhantomOpts {
  int count = 200;
  std::string out;
  std::uint64_t seed = 0;
  std::vector<int> dims{64, 64, 52};
  std::string signal = "both";
  double noise = 0.3;
  std::string histogram = "skewed";
  bool json = false;
};

void run_phantom(const PhantomOpts& o) {
  PhantomConfig cfg;
  cfg.dims = Dims3{o.dims[0], o.dims[1], o.dims[2]};
  cfg.signal = phantom_signal_from_string(o.signal);
  cfg.noise = static_cast<float>(o.noise);

  AgeHistogram preset;
  if (o.histogram == "uniform") {
    preset = AgeHistogram::uniform;
  } else if (o.histogram == "skewed") {
    preset = AgeHistogram::skewed;
  } else {
    throw ParameterError("unknown age histogram '" + o.histogram +
                         "' (expected uniform or skewed)");
  }

  fs::create_directories(o.out);
  const std::vector<float> ages = sample_ages(o.count, preset, o.seed);
  const int width = std::max<int>(4, (int)std::to_string(o.count).size());

  std::vector<std::pair<std::string, float>> labels;
  labels.reserve(ages.size());
  for (std::size_t i = 0; i < ages.size(); ++i) {
    const std::string id = "phantom" + zero_pad(static_cast<int>(i) + 1, width);
    // Per-subject stream so a volume never depends on the total count.
    const std::uint64_t subject_seed = hash_combine(o.seed, i + 1);
    const Phantom ph = generate_phantom(ages[i], subject_seed, cfg);
    save_volume(ph.volume, (fs::path(o.out) / (id + ".raw")).string());
    labels.emplace_back(id, ph.age);
  }
  const std::string labels_path = (fs::path(o.out) / "labels.csv").string();
  save_labels_csv(labels_path, labels);

  if (o.json) {
    nlohmann::json j{{"count", o.count},
                     {"out", o.out},
                     {"labels", labels_path},
                     {"dims", {cfg.dims.nx, cfg.dims.ny, cfg.dims.nz}},
                     {"signal", o.signal},
                     {"histogram", o.histogram},
                     {"seed", o.seed}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "wrote " << o.count << " volumes and labels.csv to " << o.out
              << "\n";
  }
}

// ---------------------------------------------------------------------------
// project

struct ProjectOpts {
  std::string in;
  std::string out;
  std::string channels = "six";
  std::vector<int> grid;
  bool strict = false;
  bool json = false;
};

void run_project(const ProjectOpts& o) {
  const ChannelSelection sel = parse_channel_arg(o.channels);

  std::map<std::string, fs::path> volumes; // id -> file, sorted by id
  for (const auto& entry : fs::directory_iterator(o.in)) {
    if (!entry.is_regular_file()) continue;
    const fs::path& p = entry.path();
    if (p.extension() != ".raw" && p.extension() != ".nii") continue;
    const std::string id = p.stem().string();
    if (!volumes.emplace(id, p).second)
      throw ValidationError("duplicate subject id " + id + " in " + o.in);
  }
  if (volumes.empty())
    throw ParameterError("no .raw or .nii volumes found in " + o.in);

  fs::create_directories(o.out);
  for (const auto& [id, path] : volumes) {
    Volume3D vol = load_volume(path.string());
    if (!o.grid.empty())
      vol = pad_symmetric(vol, GridSpec{Dims3{o.grid[0], o.grid[1], o.grid[2]}});
    const ValueReport r = scan_values(vol);
    if (!r.unit_range()) {
      if (o.strict)
        throw ValidationError(id + ": values outside [0, 1] (min " +
                              std::to_string(r.min) + ", max " +
                              std::to_string(r.max) + ")");
      std::cerr << "warning: " << id << " values outside [0, 1] (min " << r.min
                << ", max " << r.max << ")\n";
    }
    const ProjectionSet ps = build_projection_set(vol, sel, id);
    save_projection_set(ps, (fs::path(o.out) / (id + ".pjsn")).string());
  }

  // Keep the projection directory self-contained for train/eval.
  const fs::path in_labels = fs::path(o.in) / "labels.csv";
  bool copied_labels = false;
  if (fs::exists(in_labels) &&
      !fs::equivalent(fs::path(o.in), fs::path(o.out))) {
    fs::copy_file(in_labels, fs::path(o.out) / "labels.csv",
                  fs::copy_options::overwrite_existing);
    copied_labels = true;
  }

  if (o.json) {
    nlohmann::json j{{"count", volumes.size()},
                     {"channels", sel.str()},
                     {"out", o.out},
                     {"labels_copied", copied_labels}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "projected " << volumes.size() << " volumes onto " << sel.str()
              << " -> " << o.out << "\n";
  }
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool json = false;
};

void run_train(const TrainOpts& o) {
  RunConfig rc = load_run_config(o.config);
  if (o.seed_given) rc.train.seed = o.seed;
  if (rc.data.dir.empty())
    throw ConfigError("data.dir is required to train");
  if (rc.data.labels.empty())
    rc.data.labels = (fs::path(rc.data.dir) / "labels.csv").string();

  const Dataset all = load_dataset(rc.data.dir, rc.data.labels, rc.selection);
  DatasetSplits splits =
      split_dataset(all, rc.data.split, rc.data.split_seed);
  const NormalizationParams norm =
      compute_normalization(splits.train, rc.selection);

  Model model =
      build_model(rc.model, dataset_plane_dims(splits.train, rc.selection));
  Rng init_rng = make_stream(rc.train.seed, rng_stream::init);
  model.init_params(init_rng);

  if (!o.json) {
    std::cout << "split: " << splits.train.size() << " train / "
              << splits.val.size() << " val / " << splits.test.size()
              << " test; " << model.param_count() << " parameters\n"
              << "epoch log: " << (fs::path(o.out) / "report.jsonl").string()
              << "\n"
              << std::flush;
  }

  fs::create_directories(o.out);
  const TrainReport report = train(model, splits.train, splits.val,
                                   rc.selection, norm, rc.train, o.out);

  nlohmann::json j{
      {"epochs_run", report.epochs.size()},
      {"best_epoch", report.best_epoch},
      {"best_val_mse", report.best_val_mse},
      {"checkpoint", (fs::path(o.out) / "checkpoint.psck").string()}};

  if (!splits.test.empty()) {
    LoadedCheckpoint best =
        load_checkpoint((fs::path(o.out) / "checkpoint.psck").string());
    const Metrics m = evaluate(best.model, splits.test, rc.selection,
                               best.normalization, rc.train.batch_size);
    j["test"] = metrics_json(m, splits.test.size());
  }

  if (o.json) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "trained " << report.epochs.size() << " epochs; best epoch "
              << report.best_epoch << " (val mse " << report.best_val_mse
              << ")\n";
    if (j.contains("test"))
      std::cout << "test: mae " << j["test"]["mae"].get<double>() << ", rmse "
                << j["test"]["rmse"].get<double>() << " ("
                << splits.test.size() << " subjects)\n";
  }
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string checkpoint;
  std::string data;
  std::string labels;
  int batch = 64;
  bool json = false;
};

void run_eval(const EvalOpts& o) {
  LoadedCheckpoint lc = load_checkpoint(o.checkpoint);
  const ChannelSelection sel(lc.normalization.keys);
  const std::string labels =
      o.labels.empty() ? (fs::path(o.data) / "labels.csv").string() : o.labels;
  const Dataset ds = load_dataset(o.data, labels, sel);
  const Metrics m = evaluate(lc.model, ds, sel, lc.normalization, o.batch);

  if (o.json) {
    std::cout << metrics_json(m, ds.size()).dump(2) << "\n";
  } else {
    std::cout << "mae " << m.mae << ", rmse " << m.rmse << " (" << ds.size()
              << " subjects, channels " << sel.str() << ")\n";
  }
}

// ---------------------------------------------------------------------------
// ablate

struct AblateOpts {
  std::string data;
  std::string labels;
  std::string out;
  std::string config;
  std::string channels = "six";
  bool channels_given = false;
  std::vector<double> lrs{0.003, 0.001};
  int epochs = 30;
  int batch = 16;
  std::uint64_t seed = 0;
  bool json = false;
};

void run_ablate(const AblateOpts& o) {
  ModelConfig model_template;
  SplitFractions split;
  std::uint64_t split_seed = 17;
  std::string channels = o.channels;
  if (!o.config.empty()) {
    const RunConfig rc = load_run_config(o.config);
    model_template = rc.model;
    split = rc.data.split;
    split_seed = rc.data.split_seed;
    if (!o.channels_given) channels = rc.data.channels;
  }

  SweepConfig cfg;
  cfg.channels = parse_channel_arg(channels);
  cfg.lrs = o.lrs;
  cfg.epochs = o.epochs;
  cfg.seed = o.seed;
  cfg.validate();

  const std::string labels =
      o.labels.empty() ? (fs::path(o.data) / "labels.csv").string() : o.labels;
  const Dataset all = load_dataset(o.data, labels, cfg.channels);
  DatasetSplits splits = split_dataset(all, split, split_seed);

  const std::size_t cells = (1u << cfg.channels.size()) * cfg.lrs.size();
  if (!o.json) {
    std::cout << "sweep: " << cells << " cells (2^" << cfg.channels.size()
              << " subsets x " << cfg.lrs.size() << " learning rates), "
              << splits.train.size() << " train / " << splits.val.size()
              << " val subjects\nresults: "
              << (fs::path(o.out) / "results.csv").string() << "\n"
              << std::flush;
  }

  fs::create_directories(o.out);
  const CellRunner runner = make_training_cell_runner(
      splits.train, splits.val, model_template, o.batch, cfg.epochs);
  const std::vector<AblationResult> results =
      ablation_sweep(cfg, runner, o.out);

  const auto best = std::min_element(
      results.begin(), results.end(),
      [](const AblationResult& a, const AblationResult& b) {
        return a.val_loss < b.val_loss;
      });

  if (o.json) {
    nlohmann::json j{{"cells", results.size()},
                     {"results", (fs::path(o.out) / "results.csv").string()},
                     {"best",
                      {{"subset_bitmask", best->subset},
                       {"channels", selection_from_bitmask(best->subset).str()},
                       {"lr", best->lr},
                       {"val_loss", best->val_loss}}}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "completed " << results.size() << " cells; best subset "
              << selection_from_bitmask(best->subset).str() << " at lr "
              << best->lr << " (val mse " << best->val_loss << ")\n";
  }
}

// ---------------------------------------------------------------------------
// report

struct ReportOpts {
  std::string results;
  std::string out;
  bool json = false;
};

void run_report(const ReportOpts& o) {
  const std::vector<AblationResult> results = load_ablation_results(o.results);
  const MarginalReport rep = marginal_contribution(results);

  const fs::path out_dir =
      o.out.empty() ? fs::path(o.results).parent_path() : fs::path(o.out);
  if (!out_dir.empty()) fs::create_directories(out_dir);
  const fs::path svg_path = out_dir / "marginals.svg";
  {
    std::ofstream svg(svg_path);
    if (!svg) throw FormatError("cannot write " + svg_path.string());
    svg << marginal_svg(rep);
  }

  if (o.json) {
    nlohmann::json j = nlohmann::json::parse(marginal_json(rep));
    j["svg"] = svg_path.string();
    j["records"] = results.size();
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << marginal_table(rep) << "svg: " << svg_path.string() << "\n";
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D volumes -> 2D statistical projections -> age regression"};
  app.require_subcommand(1);

  PhantomOpts ph;
  CLI::App* phantom = app.add_subcommand(
      "phantom", "Generate synthetic shell volumes with age labels");
  phantom->add_option("--count", ph.count, "Number of subjects")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  phantom->add_option("--out", ph.out, "Output directory")->required();
  phantom->add_option("--seed", ph.seed, "Generator seed")
      ->capture_default_str();
  phantom->add_option("--dims", ph.dims, "Volume dims nx,ny,nz")
      ->delimiter(',')
      ->expected(3);
  phantom->add_option("--signal", ph.signal,
                      "Age signal: geometry, variance, or both")
      ->capture_default_str();
  phantom->add_option("--noise", ph.noise, "Peak interior noise sigma")
      ->capture_default_str();
  phantom->add_option("--histogram", ph.histogram,
                      "Age distribution: uniform or skewed")
      ->capture_default_str();
  phantom->add_flag("--json", ph.json, "Machine-readable output");
  phantom->callback([&] { run_phantom(ph); });

  ProjectOpts pr;
  CLI::App* project = app.add_subcommand(
      "project", "Project volumes onto 2D statistic images (.pjsn)");
  project->add_option("--in", pr.in, "Directory of .raw/.nii volumes")
      ->required();
  project->add_option("--out", pr.out, "Output directory")->required();
  project
      ->add_option("--channels", pr.channels,
                   "Channels: statistics (mean,std), plane-statistic tokens "
                   "(axial-std), or six/moments")
      ->capture_default_str();
  project
      ->add_option("--grid", pr.grid,
                   "Zero-pad each volume to this nx,ny,nz grid first")
      ->delimiter(',')
      ->expected(3);
  project->add_flag("--strict", pr.strict,
                    "Reject values outside [0, 1] instead of warning");
  project->add_flag("--json", pr.json, "Machine-readable output");
  project->callback([&] { run_project(pr); });

  TrainOpts tr;
  CLI::App* train_cmd =
      app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("--config", tr.config, "Run config (TOML)")
      ->required();
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  CLI::Option* tr_seed =
      train_cmd->add_option("--seed", tr.seed, "Override train.seed");
  train_cmd->add_flag("--json", tr.json, "Machine-readable output");
  train_cmd->callback([&] {
    tr.seed_given = tr_seed->count() > 0;
    run_train(tr);
  });

  EvalOpts ev;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint (.psck)")
      ->required();
  eval_cmd->add_option("--data", ev.data, "Directory of .pjsn projections")
      ->required();
  eval_cmd->add_option("--labels", ev.labels,
                       "Labels CSV (default <data>/labels.csv)");
  eval_cmd->add_option("--batch", ev.batch, "Batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  eval_cmd->add_flag("--json", ev.json, "Machine-readable output");
  eval_cmd->callback([&] { run_eval(ev); });

  AblateOpts ab;
  CLI::App* ablate = app.add_subcommand(
      "ablate", "Train every channel subset x learning rate (resumable)");
  ablate->add_option("--data", ab.data, "Directory of .pjsn projections")
      ->required();
  ablate->add_option("--labels", ab.labels,
                     "Labels CSV (default <data>/labels.csv)");
  ablate->add_option("--out", ab.out, "Output directory")->required();
  ablate->add_option("--config", ab.config,
                     "Run config supplying the model template");
  CLI::Option* ab_channels =
      ablate->add_option("--channels", ab.channels, "Channels to sweep")
          ->capture_default_str();
  ablate->add_option("--lrs", ab.lrs, "Learning rates")
      ->delimiter(',')
      ->capture_default_str();
  ablate->add_option("--epochs", ab.epochs, "Epochs per cell")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ablate->add_option("--batch", ab.batch, "Batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ablate->add_option("--seed", ab.seed, "Sweep seed")->capture_default_str();
  ablate->add_flag("--json", ab.json, "Machine-readable output");
  ablate->callback([&] {
    ab.channels_given = ab_channels->count() > 0;
    run_ablate(ab);
  });

  ReportOpts rp;
  CLI::App* report = app.add_subcommand(
      "report", "Marginal channel contributions from sweep results");
  report->add_option("--results", rp.results, "Sweep results CSV")
      ->required();
  report->add_option("--out", rp.out,
                     "SVG output directory (default next to the CSV)");
  report->add_flag("--json", rp.json, "Machine-readable output");
  report->callback([&] { run_report(rp); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "projscan: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
