#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "projscan/ablation.hpp"
#include "projscan/errors.hpp"
#include "support.hpp"

using namespace projscan;
using testsupport::TempDir;

namespace {

int popcount(unsigned v) { return std::popcount(v); }

// loss improves by 1 per active channel; every marginal is exactly 1
CellRunner lattice_runner() {
  return [](unsigned subset, double, std::uint64_t) {
    return 10.0 - popcount(subset);
  };
}

SweepConfig two_channel_config() {
  SweepConfig cfg;
  cfg.channels = ChannelSelection::parse("coronal-mean,axial-std");
  cfg.lrs = {0.01, 0.002};
  cfg.epochs = 3;
  cfg.seed = 42;
  return cfg;
}

Sample noise_sample(const std::string& id, float age, std::uint64_t seed) {
  Sample s;
  s.subject_id = id;
  s.age = age;
  s.projections.subject_id = id;
  Rng rng(seed);
  for (const Statistic stat : {Statistic::mean, Statistic::std}) {
    for (const Plane plane : kCanonicalPlanes) {
      Channel ch;
      ch.key = ChannelKey{plane, stat, 0};
      ch.image = Image2D(8, 8);
      for (auto& v : ch.image.data()) v = rng.uniform_f(0.0f, 1.0f);
      ch.min = 0.0f;
      ch.max = 1.0f;
      s.projections.channels.push_back(ch);
    }
  }
  std::sort(s.projections.channels.begin(), s.projections.channels.end(),
            [](const Channel& a, const Channel& b) { return a.key < b.key; });
  return s;
}

} // namespace

TEST_CASE("cell seeds are pure functions of their coordinates") {
  CHECK(sweep_cell_seed(1, 9, 0.003) == sweep_cell_seed(1, 9, 0.003));
  CHECK(sweep_cell_seed(2, 9, 0.003) != sweep_cell_seed(1, 9, 0.003));
  CHECK(sweep_cell_seed(1, 8, 0.003) != sweep_cell_seed(1, 9, 0.003));
  CHECK(sweep_cell_seed(1, 9, 0.001) != sweep_cell_seed(1, 9, 0.003));
}

TEST_CASE("sweep config validation") {
  CHECK_NOTHROW(SweepConfig{}.validate());
  SweepConfig cfg;

  cfg.channels = ChannelSelection{};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.channels = ChannelSelection::parse("coronal-eigen1");
  CHECK_THROWS_AS(cfg.validate(), ParameterError); // outside the canonical six
  cfg = {};
  cfg.lrs = {};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lrs = {0.003, 0.003};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lrs = {-0.01};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("a sweep enumerates subset-major, then learning rates") {
  const SweepConfig cfg = two_channel_config();
  std::vector<std::pair<unsigned, double>> calls;
  const auto results = ablation_sweep(
      cfg,
      [&](unsigned subset, double lr, std::uint64_t seed) {
        calls.emplace_back(subset, lr);
        CHECK(seed == sweep_cell_seed(cfg.seed, subset, lr));
        return static_cast<double>(subset) + lr;
      },
      "");

  // channels are bits 0 (coronal-mean) and 3 (axial-std)
  const std::vector<std::pair<unsigned, double>> expected = {
      {0, 0.01}, {0, 0.002}, {1, 0.01}, {1, 0.002},
      {8, 0.01}, {8, 0.002}, {9, 0.01}, {9, 0.002}};
  CHECK(calls == expected);
  REQUIRE(results.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(results[i].subset == expected[i].first);
    CHECK(results[i].lr == expected[i].second);
    CHECK(results[i].val_loss == expected[i].first + expected[i].second);
    CHECK(results[i].epochs == 3);
    CHECK(results[i].seed == sweep_cell_seed(cfg.seed, results[i].subset, results[i].lr));
  }
}

TEST_CASE("the full six-channel sweep has 128 cells") {
  SweepConfig cfg; // defaults: six channels, two learning rates
  const auto results = ablation_sweep(cfg, lattice_runner(), "");
  CHECK(results.size() == 128);

  std::set<std::pair<unsigned, double>> distinct;
  for (const AblationResult& r : results) {
    CHECK(r.subset < 64);
    distinct.emplace(r.subset, r.lr);
  }
  CHECK(distinct.size() == 128);
}

TEST_CASE("an interrupted sweep resumes without repeating cells") {
  TempDir dir;
  const SweepConfig cfg = two_channel_config();

  int calls = 0;
  const auto counting = [&](unsigned subset, double lr, std::uint64_t) {
    ++calls;
    if (calls > 5) throw std::runtime_error("power loss");
    return static_cast<double>(subset) * 100.0 + lr;
  };
  CHECK_THROWS_AS(ablation_sweep(cfg, counting, dir.path().string()),
                  std::runtime_error);
  CHECK(calls == 6); // five finished cells plus the one that died

  int resumed = 0;
  const auto finishing = [&](unsigned subset, double lr, std::uint64_t) {
    ++resumed;
    return static_cast<double>(subset) * 100.0 + lr;
  };
  const auto results = ablation_sweep(cfg, finishing, dir.path().string());
  CHECK(resumed == 3);
  REQUIRE(results.size() == 8);

  // a completed sweep re-runs nothing and reproduces every loss bit-exactly
  int extra = 0;
  const auto rerun = ablation_sweep(
      cfg,
      [&](unsigned, double, std::uint64_t) {
        ++extra;
        return -1.0;
      },
      dir.path().string());
  CHECK(extra == 0);
  REQUIRE(rerun.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(rerun[i].subset == results[i].subset);
    CHECK(rerun[i].lr == results[i].lr);
    CHECK(rerun[i].val_loss == results[i].val_loss);
  }
}

TEST_CASE("a sweep directory rejects a different configuration") {
  TempDir dir;
  SweepConfig cfg = two_channel_config();
  ablation_sweep(cfg, lattice_runner(), dir.path().string());

  cfg.epochs += 1;
  CHECK_THROWS_WITH_AS(ablation_sweep(cfg, lattice_runner(), dir.path().string()),
                       doctest::Contains("different configuration"), SweepError);
}

TEST_CASE("tampered result rows fail the resume validation") {
  const SweepConfig cfg = two_channel_config();
  const auto run_with_extra_row = [&](const std::string& row) {
    TempDir dir;
    ablation_sweep(cfg, lattice_runner(), dir.path().string());
    std::ofstream(dir.file("results.csv"), std::ios::app) << row << '\n';
    ablation_sweep(cfg, lattice_runner(), dir.path().string());
  };

  // duplicate of an existing cell
  const std::string dup = std::to_string(9) + ",0.01,5," +
                          std::to_string(sweep_cell_seed(cfg.seed, 9, 0.01)) + ",3";
  CHECK_THROWS_WITH_AS(run_with_extra_row(dup), doctest::Contains("duplicate"),
                       SweepError);
  // learning rate this sweep never uses
  CHECK_THROWS_WITH_AS(run_with_extra_row("1,0.5,5,1,3"),
                       doctest::Contains("not part of this sweep"), SweepError);
  // subset outside the swept channels
  CHECK_THROWS_WITH_AS(run_with_extra_row("2,0.01,5,1,3"),
                       doctest::Contains("outside"), SweepError);
  // right cell, wrong seed
  CHECK_THROWS_WITH_AS(run_with_extra_row("9,0.002,5,123,3"),
                       doctest::Contains("seed/epochs"), SweepError);
}

TEST_CASE("results CSV round trips bit-exactly") {
  TempDir dir;
  const SweepConfig cfg = two_channel_config();
  const auto results = ablation_sweep(
      cfg,
      [](unsigned subset, double lr, std::uint64_t) {
        return (subset + 1) * 0.3333333333333333 + lr; // exercise full precision
      },
      dir.path().string());

  const auto loaded = load_ablation_results(dir.file("results.csv"));
  REQUIRE(loaded.size() == results.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].subset == results[i].subset);
    CHECK(loaded[i].lr == results[i].lr);
    CHECK(loaded[i].val_loss == results[i].val_loss);
    CHECK(loaded[i].seed == results[i].seed);
    CHECK(loaded[i].epochs == results[i].epochs);
  }
}

TEST_CASE("malformed results CSVs are rejected") {
  TempDir dir;
  CHECK_THROWS_AS(load_ablation_results(dir.file("absent.csv")), FormatError);

  const auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir.file(name)) << text;
    return dir.file(name);
  };
  CHECK_THROWS_WITH_AS(
      load_ablation_results(write("h.csv", "subset,lr\n1,0.1\n")),
      doctest::Contains("header"), FormatError);
  CHECK_THROWS_WITH_AS(
      load_ablation_results(
          write("f.csv", "subset_bitmask,lr,val_loss,seed,epochs\n1,0.1,2,3\n")),
      doctest::Contains("5 fields"), FormatError);
  CHECK_THROWS_WITH_AS(
      load_ablation_results(
          write("g.csv", "subset_bitmask,lr,val_loss,seed,epochs\n1,fast,2,3,4\n")),
      doctest::Contains("cannot parse"), FormatError);
}

TEST_CASE("marginal contributions on a constructed lattice") {
  SweepConfig cfg; // six channels, lrs {0.003, 0.001}
  const auto results = ablation_sweep(cfg, lattice_runner(), "");
  const MarginalReport report = marginal_contribution(results);

  REQUIRE(report.channels.size() == 6);
  const ChannelSelection six = ChannelSelection::six();
  for (std::size_t c = 0; c < 6; ++c) {
    CHECK(report.channels[c].key == six.keys()[c]);
    CHECK(report.channels[c].mean_decrease == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report.channels[c].pairs == 64); // 2^5 subsets * 2 lrs
  }

  // identical losses everywhere make every marginal zero
  const auto flat = ablation_sweep(
      cfg, [](unsigned, double, std::uint64_t) { return 7.0; }, "");
  for (const ChannelMarginal& m : marginal_contribution(flat).channels)
    CHECK(m.mean_decrease == 0.0);
}

TEST_CASE("marginals on a two-channel lattice") {
  const SweepConfig cfg = two_channel_config();
  const auto results = ablation_sweep(
      cfg,
      [](unsigned subset, double lr, std::uint64_t) {
        // bit 0 is worth 2, bit 3 is worth 5; lr shifts all cells alike
        return 20.0 - 2.0 * (subset & 1u) - 5.0 * ((subset >> 3) & 1u) + lr;
      },
      "");
  const MarginalReport report = marginal_contribution(results);
  REQUIRE(report.channels.size() == 2);
  CHECK(report.channels[0].key.str() == "coronal-mean");
  CHECK(report.channels[0].mean_decrease == doctest::Approx(2.0));
  CHECK(report.channels[0].pairs == 4); // 2 subsets without it * 2 lrs
  CHECK(report.channels[1].key.str() == "axial-std");
  CHECK(report.channels[1].mean_decrease == doctest::Approx(5.0));
  CHECK(report.channels[1].pairs == 4);
}

TEST_CASE("incomplete or duplicated sweeps cannot report marginals") {
  const SweepConfig cfg = two_channel_config();
  auto results = ablation_sweep(cfg, lattice_runner(), "");

  auto missing = results;
  missing.pop_back();
  CHECK_THROWS_WITH_AS(marginal_contribution(missing),
                       doctest::Contains("missing 1 cells"), SweepError);

  auto duplicated = results;
  duplicated.push_back(results[0]);
  CHECK_THROWS_WITH_AS(marginal_contribution(duplicated),
                       doctest::Contains("duplicate"), SweepError);

  CHECK_THROWS_AS(marginal_contribution({}), SweepError);
}

TEST_CASE("marginal reports render as table, svg, and json") {
  const SweepConfig cfg = two_channel_config();
  const MarginalReport report =
      marginal_contribution(ablation_sweep(cfg, lattice_runner(), ""));

  const std::string table = marginal_table(report);
  CHECK(table.find("channel") != std::string::npos);
  CHECK(table.find("coronal-mean") != std::string::npos);
  CHECK(table.find("axial-std") != std::string::npos);
  CHECK(table.find("+1.000000") != std::string::npos);

  const std::string svg = marginal_svg(report);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 2);
  CHECK(svg.find("coronal-mean") != std::string::npos);
  // two bars plus the zero axis line
  std::size_t rects = 0, pos = 0;
  while ((pos = svg.find("<rect", pos)) != std::string::npos) {
    ++rects;
    pos += 5;
  }
  CHECK(rects >= 2);

  const auto parsed = nlohmann::json::parse(marginal_json(report));
  REQUIRE(parsed.at("channels").size() == 2);
  CHECK(parsed.at("channels")[0].at("channel").get<std::string>() == "coronal-mean");
  CHECK(parsed.at("channels")[0].at("mean_decrease").get<double>() ==
        doctest::Approx(1.0));
  CHECK(parsed.at("channels")[0].at("pairs").get<int>() == 4);
}

TEST_CASE("the standard cell runner trains real models") {
  Dataset train_ds, val_ds;
  for (int i = 0; i < 6; ++i)
    train_ds.push_back(
        noise_sample("t" + std::to_string(i), 44.0f + 7.0f * i, 50 + i));
  for (int i = 0; i < 2; ++i)
    val_ds.push_back(noise_sample("v" + std::to_string(i), 50.0f + 10.0f * i, 90 + i));

  ModelConfig tmpl;
  tmpl.conv_layers = 3;
  tmpl.first_filters = 4;
  tmpl.max_filters = 8;
  tmpl.head_width = 8;
  tmpl.dropout_p = 0.0;

  SweepConfig cfg;
  cfg.channels = ChannelSelection::parse("coronal-mean,axial-mean");
  cfg.lrs = {0.01};
  cfg.epochs = 2;
  cfg.seed = 5;

  const CellRunner runner = make_training_cell_runner(train_ds, val_ds, tmpl, 3, cfg.epochs);
  const auto results = ablation_sweep(cfg, runner, "");
  REQUIRE(results.size() == 4); // subsets {}, {cor-mean}, {ax-mean}, both

  for (const AblationResult& r : results) {
    CHECK(std::isfinite(r.val_loss));
    CHECK(r.val_loss > 0.0);
  }
  // the empty subset is the constant predictor anchored near the train
  // mean age (61.5): val ages 50 and 60 put its MSE near 67.25
  CHECK(results[0].subset == 0);
  CHECK(results[0].val_loss == doctest::Approx(67.25).epsilon(0.02));

  // rerunning a cell reproduces its loss bit-exactly
  CHECK(runner(3, 0.01, sweep_cell_seed(cfg.seed, 3, 0.01)) ==
        runner(3, 0.01, sweep_cell_seed(cfg.seed, 3, 0.01)));
}
