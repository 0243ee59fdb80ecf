#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "projscan/dataset.hpp"
#include "projscan/errors.hpp"
#include "support.hpp"

using namespace projscan;
using testsupport::TempDir;

namespace {

// constant-valued six-channel sample; per-channel value = base + channel index
Sample constant_sample(const std::string& id, float age, float base, int h = 6,
                       int w = 5) {
  Sample s;
  s.subject_id = id;
  s.age = age;
  s.projections.subject_id = id;
  int i = 0;
  const ChannelSelection six = ChannelSelection::six();
  for (const ChannelKey& key : six.keys()) {
    Channel ch;
    ch.key = key;
    ch.image = Image2D(h, w);
    const float v = base + static_cast<float>(i++);
    std::fill(ch.image.data().begin(), ch.image.data().end(), v);
    ch.min = v;
    ch.max = v;
    s.projections.channels.push_back(ch);
  }
  return s;
}

Sample random_sample(const std::string& id, float age, std::uint64_t seed,
                     int h = 6, int w = 5) {
  Sample s = constant_sample(id, age, 0.0f, h, w);
  Rng rng(seed);
  for (Channel& ch : s.projections.channels) {
    for (auto& v : ch.image.data()) v = rng.uniform_f(0.0f, 1.0f);
    ch.min = *std::min_element(ch.image.data().begin(), ch.image.data().end());
    ch.max = *std::max_element(ch.image.data().begin(), ch.image.data().end());
  }
  return s;
}

} // namespace

TEST_CASE("labels CSV round-trips ids and ages") {
  TempDir dir;
  const std::string path = dir.file("labels.csv");
  const std::vector<std::pair<std::string, float>> rows = {
      {"sub-01", 44.5f}, {"sub-02", 81.25f}, {"x", 63.0f}};
  save_labels_csv(path, rows);

  const auto back = load_labels_csv(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].first == rows[i].first);
    CHECK(back[i].second == rows[i].second);
  }
}

TEST_CASE("labels CSV rejects malformed content") {
  TempDir dir;
  const auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir.file(name));
    out << text;
    return dir.file(name);
  };

  CHECK_THROWS_AS(load_labels_csv(dir.file("absent.csv")), FormatError);
  CHECK_THROWS_AS(load_labels_csv(write("a.csv", "s1,61\ns2\n")), FormatError);
  CHECK_THROWS_AS(load_labels_csv(write("b.csv", "s1,61,extra\n")), FormatError);
  CHECK_THROWS_AS(load_labels_csv(write("c.csv", "s1,young\n")), FormatError);
  CHECK_THROWS_AS(load_labels_csv(write("d.csv", "s1,61\ns1,62\n")), ValidationError);
  CHECK_THROWS_AS(load_labels_csv(write("e.csv", ",61\n")), FormatError);

  // header and blank lines are fine
  const auto rows = load_labels_csv(write("f.csv", "subject_id,age\n\ns1, 61.5 \n"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].first == "s1");
  CHECK(rows[0].second == 61.5f);
}

TEST_CASE("split assignment is a pure function of subject id and seed") {
  const SplitFractions fractions;
  for (const char* id : {"sub-01", "sub-02", "another"})
    CHECK(split_assignment(id, fractions, 5) == split_assignment(id, fractions, 5));

  int moved = 0;
  for (int i = 0; i < 200; ++i) {
    const std::string id = "s" + std::to_string(i);
    if (split_assignment(id, fractions, 1) != split_assignment(id, fractions, 2))
      ++moved;
  }
  CHECK(moved > 50); // different seeds shuffle the assignment

  std::array<int, 3> counts{};
  for (int i = 0; i < 2000; ++i)
    ++counts[static_cast<std::size_t>(
        split_assignment("subj" + std::to_string(i), fractions, 11))];
  CHECK(std::abs(counts[0] / 2000.0 - 0.70) < 0.04);
  CHECK(std::abs(counts[1] / 2000.0 - 0.15) < 0.03);
  CHECK(std::abs(counts[2] / 2000.0 - 0.15) < 0.03);
}

TEST_CASE("split fractions validate") {
  CHECK_THROWS_AS((SplitFractions{0.5, 0.5, 0.5}.validate()), ConfigError);
  CHECK_THROWS_AS((SplitFractions{-0.1, 0.6, 0.5}.validate()), ConfigError);
  CHECK_NOTHROW(SplitFractions{}.validate());
  CHECK_NOTHROW((SplitFractions{1.0, 0.0, 0.0}.validate()));
}

TEST_CASE("split_dataset partitions without loss or overlap") {
  Dataset all;
  for (int i = 0; i < 60; ++i)
    all.push_back(constant_sample("p" + std::to_string(i), 50.0f + i * 0.5f, 0.1f));

  const DatasetSplits splits = split_dataset(all, SplitFractions{}, 3);
  CHECK(splits.train.size() + splits.val.size() + splits.test.size() == 60);

  std::set<std::string> seen;
  const auto collect = [&](const Dataset& ds, SplitPart part) {
    for (const Sample& s : ds) {
      CHECK(seen.insert(s.subject_id).second);
      CHECK(split_assignment(s.subject_id, SplitFractions{}, 3) == part);
    }
  };
  collect(splits.train, SplitPart::train);
  collect(splits.val, SplitPart::val);
  collect(splits.test, SplitPart::test);
  CHECK(seen.size() == 60);
}

TEST_CASE("normalization spans the extremes of the fitted samples") {
  Dataset ds;
  ds.push_back(constant_sample("a", 50, 1.0f));  // channel values 1..6
  ds.push_back(constant_sample("b", 60, -2.0f)); // channel values -2..3

  const ChannelSelection sel = ChannelSelection::six();
  const NormalizationParams norm = compute_normalization(ds, sel);
  REQUIRE(norm.keys.size() == 6);
  REQUIRE(norm.lo.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(norm.keys[k] == sel.keys()[k]);
    CHECK(norm.lo[k] == -2.0f + static_cast<float>(k));
    CHECK(norm.hi[k] == 1.0f + static_cast<float>(k));
  }
}

TEST_CASE("normalization requires every selected channel") {
  Dataset ds;
  ds.push_back(constant_sample("a", 50, 0.0f));
  ds.back().projections.channels.erase(ds.back().projections.channels.begin() + 3);

  CHECK_THROWS_WITH_AS(compute_normalization(ds, ChannelSelection::six()),
                       doctest::Contains("axial-std"), ValidationError);
  CHECK_THROWS_AS(compute_normalization({}, ChannelSelection::six()), ParameterError);
  CHECK_THROWS_AS(compute_normalization(ds, ChannelSelection{}), ParameterError);
}

TEST_CASE("augmented dataset grows by copies without touching originals") {
  Dataset ds;
  for (int i = 0; i < 5; ++i)
    ds.push_back(random_sample("s" + std::to_string(i), 44.0f + i, 100 + i));
  const Dataset originals = ds;

  AugmentRanges ranges;
  const Dataset grown = build_augmented_dataset(ds, 3, ranges, 7);
  CHECK(grown.size() == 20); // (1 + 3) * 5

  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(grown[i].subject_id == originals[i].subject_id);
    for (std::size_t c = 0; c < 6; ++c)
      CHECK(grown[i].projections.channels[c].image.data() ==
            originals[i].projections.channels[c].image.data());
  }
  // each copy actually deformed something
  for (std::size_t i = 5; i < 20; ++i) {
    const Sample& orig = originals[i % 5];
    CHECK(grown[i].subject_id == orig.subject_id);
    CHECK(grown[i].age == orig.age);
    CHECK(grown[i].projections.channels[0].image.data() !=
          orig.projections.channels[0].image.data());
  }

  CHECK(build_augmented_dataset(ds, 0, ranges, 7).size() == 5);
  CHECK_THROWS_AS(build_augmented_dataset(ds, -1, ranges, 7), ParameterError);
}

TEST_CASE("augmented copies are deterministic and plane-coherent") {
  Dataset ds;
  ds.push_back(random_sample("subject", 61.0f, 55));
  // force coronal-mean == coronal-std so the shared warp is observable
  ds[0].projections.channels[1].image = ds[0].projections.channels[0].image;

  AugmentRanges ranges;
  const Dataset a = build_augmented_dataset(ds, 2, ranges, 9);
  const Dataset b = build_augmented_dataset(ds, 2, ranges, 9);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 6; ++c)
      CHECK(a[i].projections.channels[c].image.data() ==
            b[i].projections.channels[c].image.data());

  // same plane, same warp; the two copies differ from each other
  CHECK(a[1].projections.channels[0].image.data() ==
        a[1].projections.channels[1].image.data());
  CHECK(a[1].projections.channels[0].image.data() !=
        a[2].projections.channels[0].image.data());

  // a different round draws different warps
  const Dataset c = build_augmented_dataset(ds, 2, ranges, 9, 1);
  CHECK(c[1].projections.channels[0].image.data() !=
        a[1].projections.channels[0].image.data());
}

TEST_CASE("epoch order is a seeded permutation") {
  const auto order = epoch_order(100, 5, 1);
  REQUIRE(order.size() == 100);
  std::vector<std::uint32_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::uint32_t i = 0; i < 100; ++i) CHECK(sorted[i] == i);

  CHECK(epoch_order(100, 5, 1) == order);
  CHECK(epoch_order(100, 5, 2) != order);
  CHECK(epoch_order(0, 5, 1).empty());
}

TEST_CASE("assemble_batch rescales channels into plane tensors") {
  Dataset ds;
  ds.push_back(constant_sample("a", 50, 1.0f, 4, 3)); // channels 1..6
  ds.push_back(constant_sample("b", 60, -2.0f, 4, 3)); // channels -2..3

  const ChannelSelection sel = ChannelSelection::six();
  const NormalizationParams norm = compute_normalization(ds, sel);
  const Batch batch = assemble_batch(ds, {0, 1}, sel, norm);

  CHECK(batch.targets.shape() == std::vector<int>{2, 1});
  CHECK(batch.targets.data()[0] == 50.0f);
  CHECK(batch.targets.data()[1] == 60.0f);

  for (int p = 0; p < 3; ++p) {
    const Tensor& t = batch.planes.planes[static_cast<std::size_t>(p)];
    REQUIRE(t.shape() == std::vector<int>{2, 2, 4, 3});
    // all ranges span [v-3, v]: sample a maps to 1, sample b to 0
    for (std::size_t i = 0; i < 2 * 4 * 3; ++i) {
      CHECK(t.data()[i] == 1.0f);
      CHECK(t.data()[2 * 4 * 3 + i] == 0.0f);
    }
  }
}

TEST_CASE("assemble_batch handles collapsed ranges and subsets") {
  Dataset ds;
  ds.push_back(constant_sample("a", 50, 1.0f));
  const ChannelSelection sel = ChannelSelection::parse("coronal-mean,axial-std");
  NormalizationParams norm = compute_normalization(ds, sel);
  // single constant sample: both channels have hi == lo
  const Batch batch = assemble_batch(ds, {0}, sel, norm);

  CHECK(batch.planes.planes[0].shape() == std::vector<int>{1, 1, 6, 5});
  CHECK(batch.planes.planes[1].shape() == std::vector<int>{1, 1, 6, 5});
  CHECK(batch.planes.planes[2].shape() == std::vector<int>{1, 0, 1, 1});
  for (const float v : batch.planes.planes[0].data()) CHECK(v == 0.0f);

  CHECK_THROWS_AS(assemble_batch(ds, {}, sel, norm), ParameterError);
  CHECK_THROWS_AS(assemble_batch(ds, {4}, sel, norm), ParameterError);

  norm.keys.pop_back();
  norm.lo.pop_back();
  norm.hi.pop_back();
  CHECK_THROWS_WITH_AS(assemble_batch(ds, {0}, sel, norm),
                       doctest::Contains("axial-std"), ValidationError);
}

TEST_CASE("assemble_batch rejects mismatched image dims") {
  Dataset ds;
  ds.push_back(constant_sample("a", 50, 0.0f, 6, 5));
  ds.push_back(constant_sample("b", 60, 0.5f, 6, 4));
  const ChannelSelection sel = ChannelSelection::six();
  NormalizationParams norm;
  norm.keys = sel.keys();
  norm.lo.assign(6, 0.0f);
  norm.hi.assign(6, 1.0f);
  CHECK_THROWS_AS(assemble_batch(ds, {0, 1}, sel, norm), ShapeError);
}

TEST_CASE("dataset plane dims come from the first sample") {
  Dataset ds;
  ds.push_back(constant_sample("a", 50, 0.0f, 7, 9));
  const auto dims = dataset_plane_dims(ds, ChannelSelection::six());
  for (int p = 0; p < 3; ++p) {
    CHECK(dims[static_cast<std::size_t>(p)].h == 7);
    CHECK(dims[static_cast<std::size_t>(p)].w == 9);
  }

  const auto partial =
      dataset_plane_dims(ds, ChannelSelection::parse("axial-mean"));
  CHECK(partial[0].h == 0);
  CHECK(partial[1].h == 7);
  CHECK(partial[2].h == 0);

  CHECK_THROWS_AS(dataset_plane_dims({}, ChannelSelection::six()), ParameterError);
}

TEST_CASE("datasets load from projection files plus labels") {
  TempDir dir;
  Dataset ds;
  ds.push_back(random_sample("s1", 47.5f, 1));
  ds.push_back(random_sample("s2", 79.0f, 2));
  for (const Sample& s : ds)
    save_projection_set(s.projections, dir.file(s.subject_id + ".pjsn"));
  save_labels_csv(dir.file("labels.csv"), {{"s1", 47.5f}, {"s2", 79.0f}});

  const Dataset back =
      load_dataset(dir.path().string(), dir.file("labels.csv"), ChannelSelection::six());
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].subject_id == ds[i].subject_id);
    CHECK(back[i].age == ds[i].age);
    REQUIRE(back[i].projections.channels.size() == 6);
    for (std::size_t c = 0; c < 6; ++c)
      CHECK(back[i].projections.channels[c].image.data() ==
            ds[i].projections.channels[c].image.data());
  }

  CHECK_THROWS_AS(load_dataset(dir.path().string(), dir.file("labels.csv"),
                               ChannelSelection::moments()),
                  ValidationError);
  CHECK_THROWS_AS(
      load_dataset(dir.path().string(), dir.file("absent.csv"), ChannelSelection::six()),
      FormatError);
}
