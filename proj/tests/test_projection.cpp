#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <vector>

#include "projscan/errors.hpp"
#include "projscan/moments.hpp"
#include "projscan/pca.hpp"
#include "projscan/projection.hpp"
#include "support.hpp"

using namespace projscan;
using testsupport::TempDir;

TEST_CASE("channel keys order plane-major, statistic-minor") {
  const ChannelKey cm{Plane::coronal, Statistic::mean, 0};
  const ChannelKey cs{Plane::coronal, Statistic::std, 0};
  const ChannelKey ce1{Plane::coronal, Statistic::eigen, 1};
  const ChannelKey ce2{Plane::coronal, Statistic::eigen, 2};
  const ChannelKey am{Plane::axial, Statistic::mean, 0};
  const ChannelKey sk{Plane::sagittal, Statistic::kurt, 0};

  CHECK(cm < cs);
  CHECK(cs < ce1);
  CHECK(ce1 < ce2);
  CHECK(ce2 < am);
  CHECK(am < sk);

  CHECK(cm.str() == "coronal-mean");
  CHECK(ce2.str() == "coronal-eigen2");
  CHECK(channel_key_from_string("axial-std") ==
        ChannelKey{Plane::axial, Statistic::std, 0});
  CHECK(channel_key_from_string("sagittal-eigen3") ==
        ChannelKey{Plane::sagittal, Statistic::eigen, 3});

  CHECK_THROWS_AS(channel_key_from_string("axial"), ParameterError);
  CHECK_THROWS_AS(channel_key_from_string("axial-median"), ParameterError);
  CHECK_THROWS_AS(channel_key_from_string("axial-eigen"), ParameterError);
  CHECK_THROWS_AS(channel_key_from_string("axial-eigen0"), ParameterError);
  CHECK_THROWS_AS(channel_key_from_string("axial-eigenx"), ParameterError);
}

TEST_CASE("the six-channel selection is in the documented order") {
  const ChannelSelection six = ChannelSelection::six();
  const auto& keys = six.keys();
  REQUIRE(keys.size() == 6);
  const char* want[] = {"coronal-mean", "coronal-std", "axial-mean",
                        "axial-std",    "sagittal-mean", "sagittal-std"};
  for (int i = 0; i < 6; ++i) CHECK(keys[static_cast<std::size_t>(i)].str() == want[i]);

  CHECK(ChannelSelection::moments().size() == 12);
}

TEST_CASE("selection parsing expands shorthands and dedups") {
  CHECK(ChannelSelection::parse("six").keys() == ChannelSelection::six().keys());
  CHECK(ChannelSelection::parse("six, coronal-mean").size() == 6);
  CHECK(ChannelSelection::parse("moments").size() == 12);

  const ChannelSelection one = ChannelSelection::parse("axial-std");
  REQUIRE(one.size() == 1);
  CHECK(one.keys()[0].str() == "axial-std");

  const ChannelSelection mixed =
      ChannelSelection::parse("sagittal-std,coronal-mean, axial-eigen2");
  REQUIRE(mixed.size() == 3);
  CHECK(mixed.keys()[0].str() == "coronal-mean");
  CHECK(mixed.keys()[1].str() == "axial-eigen2");
  CHECK(mixed.keys()[2].str() == "sagittal-std");
  CHECK(mixed.max_eigen_component(Plane::axial) == 2);
  CHECK(mixed.max_eigen_component(Plane::coronal) == 0);

  CHECK(ChannelSelection::parse("").empty());
  CHECK_THROWS_AS(ChannelSelection::parse("six,borked"), ParameterError);
}

TEST_CASE("bitmask round trip hits all 64 subsets of the six") {
  for (unsigned mask = 0; mask < 64; ++mask) {
    const ChannelSelection sel = selection_from_bitmask(mask);
    CHECK(sel.size() == static_cast<std::size_t>(__builtin_popcount(mask)));
    CHECK(bitmask_from_selection(sel) == mask);
  }
  CHECK(selection_from_bitmask(0b000010).keys()[0].str() == "coronal-std");
  CHECK_THROWS_AS(selection_from_bitmask(64), ParameterError);
  CHECK_THROWS_AS(
      bitmask_from_selection(ChannelSelection::parse("axial-kurt")),
      ParameterError);
}

TEST_CASE("build_projection_set matches the per-plane projections") {
  Volume3D vol = testsupport::random_volume({6, 5, 4}, 13);

  const ProjectionSet ps =
      build_projection_set(vol, ChannelSelection::six(), "subj-1");
  REQUIRE(ps.channels.size() == 6);
  CHECK(ps.subject_id == "subj-1");

  int i = 0;
  for (Plane plane : kCanonicalPlanes) {
    const MeanStdImages ms = project_mean_std(vol, plane);
    CHECK(ps.channels[i].key.str() ==
          std::string(to_string(plane)) + "-mean");
    CHECK(ps.channels[i].image.data() == ms.mean.data());
    ++i;
    CHECK(ps.channels[i].image.data() == ms.std.data());
    ++i;
  }

  for (const Channel& c : ps.channels) {
    const auto [lo, hi] =
        std::minmax_element(c.image.data().begin(), c.image.data().end());
    CHECK(c.min == *lo);
    CHECK(c.max == *hi);
  }
}

TEST_CASE("twelve-channel builds reuse one four-moment pass per plane") {
  Volume3D vol = testsupport::random_volume({5, 5, 5}, 14);
  const ProjectionSet ps =
      build_projection_set(vol, ChannelSelection::moments(), "s");
  REQUIRE(ps.channels.size() == 12);
  for (Plane plane : kCanonicalPlanes) {
    const MomentImages m = project_moments(vol, plane);
    CHECK(ps.find({plane, Statistic::mean, 0})->image.data() == m.mean.data());
    CHECK(ps.find({plane, Statistic::std, 0})->image.data() == m.std.data());
    CHECK(ps.find({plane, Statistic::skew, 0})->image.data() == m.skew.data());
    CHECK(ps.find({plane, Statistic::kurt, 0})->image.data() == m.kurt.data());
  }
}

TEST_CASE("eigen channels come from the plane's decomposition") {
  Volume3D vol = testsupport::random_volume({5, 4, 6}, 15);
  const ProjectionSet ps = build_projection_set(
      vol, ChannelSelection::parse("coronal-eigen1,coronal-eigen2,axial-mean"),
      "s");
  REQUIRE(ps.channels.size() == 3);

  const EigenSlices es = eigen_slices(vol, Plane::coronal, 2);
  CHECK(ps.channels[0].key.str() == "coronal-eigen1");
  CHECK(ps.channels[0].image.data() == es.images[0].data());
  CHECK(ps.channels[1].image.data() == es.images[1].data());
  CHECK(ps.channels[2].key.str() == "axial-mean");
}

TEST_CASE("empty selection is rejected") {
  Volume3D vol = testsupport::random_volume({4, 4, 4}, 16);
  CHECK_THROWS_AS(build_projection_set(vol, ChannelSelection(), "s"),
                  ParameterError);
}

TEST_CASE("channel files round-trip bit-exact with their sidecars") {
  TempDir dir;
  Volume3D vol = testsupport::random_volume({6, 7, 5}, 17, -2.0f, 2.0f);
  const ProjectionSet ps = build_projection_set(
      vol, ChannelSelection::parse("six,axial-skew,sagittal-eigen1"), "subj-42");
  const std::string path = dir.file("subj.pjsn");
  save_projection_set(ps, path);

  const ProjectionSet back = load_projection_set(path);
  CHECK(back.subject_id == "subj-42");
  REQUIRE(back.channels.size() == ps.channels.size());
  for (std::size_t i = 0; i < ps.channels.size(); ++i) {
    CHECK(back.channels[i].key == ps.channels[i].key);
    CHECK(back.channels[i].image.data() == ps.channels[i].image.data());
    CHECK(back.channels[i].min == ps.channels[i].min);
    CHECK(back.channels[i].max == ps.channels[i].max);
  }
}

TEST_CASE("channel file corruption is detected") {
  TempDir dir;
  Volume3D vol = testsupport::random_volume({4, 4, 4}, 18);
  const ProjectionSet ps =
      build_projection_set(vol, ChannelSelection::six(), "s");
  const std::string path = dir.file("s.pjsn");
  save_projection_set(ps, path);

  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("JUNK", 4);
    f.close();
    CHECK_THROWS_WITH_AS(load_projection_set(path), doctest::Contains("PJSN"),
                         FormatError);
  }
  SUBCASE("truncated payload") {
    std::filesystem::resize_file(path,
                                 std::filesystem::file_size(path) - 64);
    CHECK_THROWS_WITH_AS(load_projection_set(path),
                         doctest::Contains("truncated"), FormatError);
  }
  SUBCASE("missing sidecar") {
    std::filesystem::remove(dir.file("s.json"));
    CHECK_THROWS_WITH_AS(load_projection_set(path),
                         doctest::Contains("sidecar"), FormatError);
  }
}
