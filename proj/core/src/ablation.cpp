#include "projscan/ablation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "projscan/errors.hpp"

namespace projscan {

namespace {

using nlohmann::json;

constexpr const char* kCsvHeader = "subset_bitmask,lr,val_loss,seed,epochs";

std::string full_precision(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string config_fingerprint(const SweepConfig& cfg) {
  std::string text = "channels=" + cfg.channels.str() + ";lrs=";
  for (const double lr : cfg.lrs) text += full_precision(lr) + ",";
  text += ";epochs=" + std::to_string(cfg.epochs) + ";seed=" + std::to_string(cfg.seed);
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(text);
  return hex.str();
}

std::string cell_name(unsigned subset, double lr) {
  return "subset " + std::to_string(subset) + " lr " + full_precision(lr);
}

void append_row(std::ofstream& csv, const AblationResult& r) {
  csv << r.subset << ',' << full_precision(r.lr) << ',' << full_precision(r.val_loss)
      << ',' << r.seed << ',' << r.epochs << '\n'
      << std::flush;
}

} // namespace

void SweepConfig::validate() const {
  if (channels.empty()) throw ConfigError("sweep needs at least one channel");
  bitmask_from_selection(channels); // rejects channels outside the canonical six
  if (lrs.empty()) throw ConfigError("sweep needs at least one learning rate");
  std::set<double> unique_lrs;
  for (const double lr : lrs) {
    if (!(lr > 0.0)) throw ConfigError("sweep learning rates must be positive");
    if (!unique_lrs.insert(lr).second)
      throw ConfigError("duplicate sweep learning rate " + full_precision(lr));
  }
  if (epochs < 1) throw ConfigError("sweep epochs must be at least 1");
}

std::uint64_t sweep_cell_seed(std::uint64_t global_seed, unsigned subset, double lr) {
  return hash_combine(hash_combine(global_seed, subset), std::bit_cast<std::uint64_t>(lr));
}

CellRunner make_training_cell_runner(const Dataset& train_ds, const Dataset& val_ds,
                                     const ModelConfig& model_template,
                                     int batch_size, int epochs) {
  return [&train_ds, &val_ds, model_template, batch_size,
          epochs](unsigned subset, double lr, std::uint64_t cell_seed) {
    const ChannelSelection sel = selection_from_bitmask(subset);
    NormalizationParams norm;
    if (!sel.empty()) norm = compute_normalization(train_ds, sel);

    ModelConfig mcfg = model_template;
    mcfg.channels_per_plane = plane_channel_counts(sel);
    Model model = build_model(mcfg, dataset_plane_dims(train_ds, sel));
    Rng init = make_stream(cell_seed, rng_stream::init);
    model.init_params(init);

    TrainingConfig tcfg;
    tcfg.lr = lr;
    tcfg.epochs = epochs;
    tcfg.batch_size = batch_size;
    tcfg.augment = false;
    tcfg.seed = cell_seed;
    return train(model, train_ds, val_ds, sel, norm, tcfg, "").best_val_mse;
  };
}

std::vector<AblationResult> ablation_sweep(const SweepConfig& cfg,
                                           const CellRunner& runner,
                                           const std::string& out_dir) {
  cfg.validate();
  if (!runner) throw ParameterError("sweep needs a cell runner");
  const unsigned full = bitmask_from_selection(cfg.channels);

  std::map<std::pair<unsigned, std::uint64_t>, AblationResult> done;
  std::ofstream csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const std::string manifest_path =
        (std::filesystem::path(out_dir) / "manifest.json").string();
    const std::string csv_path = (std::filesystem::path(out_dir) / "results.csv").string();
    const std::string fingerprint = config_fingerprint(cfg);

    if (std::filesystem::exists(manifest_path)) {
      std::ifstream in(manifest_path);
      json manifest;
      try {
        in >> manifest;
      } catch (const json::exception&) {
        throw SweepError("unreadable sweep manifest " + manifest_path);
      }
      if (manifest.value("config_hash", "") != fingerprint)
        throw SweepError("sweep directory " + out_dir +
                         " belongs to a different configuration");
      if (std::filesystem::exists(csv_path)) {
        for (const AblationResult& r : load_ablation_results(csv_path)) {
          if ((r.subset & full) != r.subset)
            throw SweepError("recorded subset " + std::to_string(r.subset) +
                             " is outside this sweep's channels");
          if (std::find(cfg.lrs.begin(), cfg.lrs.end(), r.lr) == cfg.lrs.end())
            throw SweepError("recorded learning rate " + full_precision(r.lr) +
                             " is not part of this sweep");
          if (r.seed != sweep_cell_seed(cfg.seed, r.subset, r.lr) ||
              r.epochs != cfg.epochs)
            throw SweepError("record for " + cell_name(r.subset, r.lr) +
                             " does not match this sweep's seed/epochs");
          const auto key = std::make_pair(r.subset, std::bit_cast<std::uint64_t>(r.lr));
          if (!done.emplace(key, r).second)
            throw SweepError("duplicate record for " + cell_name(r.subset, r.lr));
        }
      }
    } else {
      json manifest{{"config_hash", fingerprint},
                    {"channels", cfg.channels.str()},
                    {"lrs", cfg.lrs},
                    {"epochs", cfg.epochs},
                    {"seed", cfg.seed}};
      std::ofstream out(manifest_path, std::ios::trunc);
      out << manifest.dump(2) << '\n';
      if (!out) throw FormatError("cannot write sweep manifest " + manifest_path);
    }

    const bool fresh = !std::filesystem::exists(csv_path);
    csv.open(csv_path, std::ios::app);
    if (!csv) throw FormatError("cannot write sweep results " + csv_path);
    if (fresh) csv << kCsvHeader << '\n' << std::flush;
  }

  std::vector<AblationResult> results;
  for (unsigned subset = 0; subset <= full; ++subset) {
    if ((subset & full) != subset) continue;
    for (const double lr : cfg.lrs) {
      const auto key = std::make_pair(subset, std::bit_cast<std::uint64_t>(lr));
      const auto it = done.find(key);
      if (it != done.end()) {
        results.push_back(it->second);
        continue;
      }
      AblationResult rec;
      rec.subset = subset;
      rec.lr = lr;
      rec.seed = sweep_cell_seed(cfg.seed, subset, lr);
      rec.epochs = cfg.epochs;
      rec.val_loss = runner(subset, lr, rec.seed);
      results.push_back(rec);
      if (csv.is_open()) append_row(csv, rec);
    }
  }
  return results;
}

std::vector<AblationResult> load_ablation_results(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw FormatError("cannot open sweep results " + csv_path);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw FormatError("sweep results " + csv_path + " lack the expected header");

  std::vector<AblationResult> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::array<std::string, 5> fields;
    std::size_t start = 0;
    for (int f = 0; f < 5; ++f) {
      const std::size_t comma = line.find(',', start);
      const bool last = f == 4;
      if (last != (comma == std::string::npos))
        throw FormatError("sweep results line " + std::to_string(line_no) +
                          ": expected 5 fields");
      fields[static_cast<std::size_t>(f)] =
          line.substr(start, last ? std::string::npos : comma - start);
      start = comma + 1;
    }
    const auto parse_num = [&](const std::string& text, auto convert) {
      char* end = nullptr;
      const auto v = convert(text.c_str(), &end);
      if (end == text.c_str() || *end != '\0')
        throw FormatError("sweep results line " + std::to_string(line_no) +
                          ": cannot parse '" + text + "'");
      return v;
    };
    AblationResult r;
    r.subset = static_cast<unsigned>(
        parse_num(fields[0], [](const char* s, char** e) { return std::strtoul(s, e, 10); }));
    r.lr = parse_num(fields[1], [](const char* s, char** e) { return std::strtod(s, e); });
    r.val_loss = parse_num(fields[2], [](const char* s, char** e) { return std::strtod(s, e); });
    r.seed = parse_num(fields[3],
                       [](const char* s, char** e) { return std::strtoull(s, e, 10); });
    r.epochs = static_cast<int>(
        parse_num(fields[4], [](const char* s, char** e) { return std::strtol(s, e, 10); }));
    out.push_back(r);
  }
  return out;
}

MarginalReport marginal_contribution(const std::vector<AblationResult>& results) {
  std::map<std::pair<unsigned, std::uint64_t>, double> loss;
  std::set<double> lr_set;
  unsigned union_mask = 0;
  for (const AblationResult& r : results) {
    const auto key = std::make_pair(r.subset, std::bit_cast<std::uint64_t>(r.lr));
    if (!loss.emplace(key, r.val_loss).second)
      throw SweepError("duplicate record for " + cell_name(r.subset, r.lr));
    lr_set.insert(r.lr);
    union_mask |= r.subset;
  }
  if (results.empty()) throw SweepError("no sweep records");

  std::vector<std::string> missing;
  for (unsigned subset = 0; subset <= union_mask; ++subset) {
    if ((subset & union_mask) != subset) continue;
    for (const double lr : lr_set)
      if (!loss.count({subset, std::bit_cast<std::uint64_t>(lr)}))
        missing.push_back(cell_name(subset, lr));
  }
  if (!missing.empty()) {
    std::string what = "incomplete sweep, missing " +
                       std::to_string(missing.size()) + " cells:";
    for (std::size_t i = 0; i < missing.size() && i < 8; ++i)
      what += " [" + missing[i] + "]";
    if (missing.size() > 8) what += " ...";
    throw SweepError(what);
  }

  MarginalReport report;
  for (unsigned c = 0; c < 6; ++c) {
    const unsigned bit = 1u << c;
    if (!(union_mask & bit)) continue;
    ChannelMarginal m;
    m.key = selection_from_bitmask(bit).keys()[0];
    double sum = 0.0;
    for (unsigned subset = 0; subset <= union_mask; ++subset) {
      if ((subset & union_mask) != subset || (subset & bit)) continue;
      for (const double lr : lr_set) {
        sum += loss.at({subset, std::bit_cast<std::uint64_t>(lr)}) -
               loss.at({subset | bit, std::bit_cast<std::uint64_t>(lr)});
        ++m.pairs;
      }
    }
    m.mean_decrease = sum / m.pairs;
    report.channels.push_back(m);
  }
  return report;
}

std::string marginal_table(const MarginalReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "channel" << std::right << std::setw(20)
      << "mean loss decrease" << std::setw(8) << "pairs" << '\n';
  for (const ChannelMarginal& m : report.channels) {
    out << std::left << std::setw(16) << m.key.str() << std::right << std::setw(20)
        << std::showpos << std::fixed << std::setprecision(6) << m.mean_decrease
        << std::noshowpos << std::setw(8) << m.pairs << '\n';
    out.unsetf(std::ios::fixed);
    out.precision(6);
  }
  return out.str();
}

std::string marginal_svg(const MarginalReport& report) {
  const int width = 640, height = 360;
  const int left = 60, right = 20, top = 40, bottom = 70;
  const int plot_w = width - left - right;
  const int plot_h = height - top - bottom;

  double peak = 0.0;
  for (const ChannelMarginal& m : report.channels)
    peak = std::max(peak, std::abs(m.mean_decrease));
  if (peak == 0.0) peak = 1.0;
  const int zero_y = top + plot_h / 2;
  const double scale = (plot_h / 2.0) / peak;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n"
      << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
         "mean validation-loss decrease per added channel</text>\n"
      << "<line x1=\"" << left << "\" y1=\"" << zero_y << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << zero_y << "\" stroke=\"black\"/>\n";

  const std::size_t n = report.channels.size();
  if (n > 0) {
    const double slot = static_cast<double>(plot_w) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const ChannelMarginal& m = report.channels[i];
      const double bar_w = slot * 0.6;
      const double x = left + slot * (static_cast<double>(i) + 0.2);
      const double h = m.mean_decrease * scale;
      const double y = h >= 0 ? zero_y - h : zero_y;
      svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w
          << "\" height=\"" << std::abs(h) << "\" fill=\""
          << (m.mean_decrease >= 0 ? "#4878a8" : "#a85048") << "\"/>\n"
          << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << height - bottom + 16
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
             "transform=\"rotate(30 "
          << x + bar_w / 2 << ' ' << height - bottom + 16 << ")\">" << m.key.str()
          << "</text>\n";
    }
  }
  svg << "<text x=\"14\" y=\"" << zero_y << "\" font-family=\"sans-serif\" "
         "font-size=\"11\">0</text>\n</svg>\n";
  return svg.str();
}

std::string marginal_json(const MarginalReport& report) {
  json channels = json::array();
  for (const ChannelMarginal& m : report.channels)
    channels.push_back({{"channel", m.key.str()},
                        {"mean_decrease", m.mean_decrease},
                        {"pairs", m.pairs}});
  return json{{"channels", channels}}.dump(2);
}

} // namespace projscan
