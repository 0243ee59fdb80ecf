#include "projscan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "projscan/errors.hpp"

namespace projscan {

namespace {

float parse_age(const std::string& text, int line_no) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0')
    throw FormatError("labels line " + std::to_string(line_no) +
                      ": cannot parse age '" + text + "'");
  if (!std::isfinite(v))
    throw ValidationError("labels line " + std::to_string(line_no) +
                          ": age is not finite");
  return static_cast<float>(v);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

} // namespace

std::vector<std::pair<std::string, float>> load_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open labels file " + path);

  std::vector<std::pair<std::string, float>> rows;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (line_no == 1 && t == "subject_id,age") continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos)
      throw FormatError("labels line " + std::to_string(line_no) +
                        ": expected 'subject_id,age'");
    const std::string id = trim(t.substr(0, comma));
    if (id.empty())
      throw FormatError("labels line " + std::to_string(line_no) + ": empty subject id");
    if (!seen.insert(id).second)
      throw ValidationError("duplicate subject id '" + id + "' in " + path);
    rows.emplace_back(id, parse_age(trim(t.substr(comma + 1)), line_no));
  }
  return rows;
}

void save_labels_csv(const std::string& path,
                     const std::vector<std::pair<std::string, float>>& rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write labels file " + path);
  out << "subject_id,age\n";
  for (const auto& [id, age] : rows) {
    std::ostringstream v;
    v.precision(9);
    v << age;
    out << id << ',' << v.str() << '\n';
  }
  if (!out) throw FormatError("short write to labels file " + path);
}

void SplitFractions::validate() const {
  if (train < 0 || val < 0 || test < 0)
    throw ConfigError("split fractions must be non-negative");
  if (std::abs(train + val + test - 1.0) > 1e-6)
    throw ConfigError("split fractions must sum to 1");
}

SplitPart split_assignment(const std::string& subject_id,
                           const SplitFractions& fractions, std::uint64_t seed) {
  fractions.validate();
  const std::uint64_t h = hash_combine(seed, fnv1a64(subject_id));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  if (u < fractions.train) return SplitPart::train;
  if (u < fractions.train + fractions.val) return SplitPart::val;
  return SplitPart::test;
}

DatasetSplits split_dataset(Dataset all, const SplitFractions& fractions,
                            std::uint64_t seed) {
  fractions.validate();
  DatasetSplits out;
  for (Sample& s : all) {
    switch (split_assignment(s.subject_id, fractions, seed)) {
      case SplitPart::train: out.train.push_back(std::move(s)); break;
      case SplitPart::val: out.val.push_back(std::move(s)); break;
      case SplitPart::test: out.test.push_back(std::move(s)); break;
    }
  }
  return out;
}

NormalizationParams compute_normalization(const Dataset& ds,
                                          const ChannelSelection& sel) {
  if (ds.empty()) throw ParameterError("cannot fit normalization on an empty dataset");
  if (sel.empty()) throw ParameterError("normalization needs at least one channel");

  NormalizationParams norm;
  norm.keys = sel.keys();
  norm.lo.assign(norm.keys.size(), std::numeric_limits<float>::infinity());
  norm.hi.assign(norm.keys.size(), -std::numeric_limits<float>::infinity());
  for (const Sample& s : ds) {
    for (std::size_t k = 0; k < norm.keys.size(); ++k) {
      const Channel* ch = s.projections.find(norm.keys[k]);
      if (!ch)
        throw ValidationError("subject " + s.subject_id + " lacks channel " +
                              norm.keys[k].str());
      for (const float v : ch->image.data()) {
        norm.lo[k] = std::min(norm.lo[k], v);
        norm.hi[k] = std::max(norm.hi[k], v);
      }
    }
  }
  return norm;
}

Dataset build_augmented_dataset(const Dataset& ds, int copies,
                                const AugmentRanges& ranges, std::uint64_t seed,
                                std::uint64_t round) {
  if (copies < 0) throw ParameterError("augment copies must be non-negative");
  ranges.validate();

  Dataset out;
  out.reserve(ds.size() * (1 + static_cast<std::size_t>(copies)));
  out.insert(out.end(), ds.begin(), ds.end());
  for (int c = 1; c <= copies; ++c) {
    for (const Sample& s : ds) {
      std::array<AugmentParams, 3> per_plane;
      for (const Plane plane : kCanonicalPlanes) {
        Rng rng = make_stream(seed, rng_stream::augment,
                              hash_combine(fnv1a64(s.subject_id),
                                           static_cast<std::uint64_t>(c)),
                              hash_combine(round, static_cast<std::uint64_t>(plane)));
        per_plane[static_cast<std::size_t>(plane)] = sample_augment_params(ranges, rng);
      }
      out.push_back({s.subject_id, s.age, augment_projection_set(s.projections, per_plane)});
    }
  }
  return out;
}

std::vector<std::uint32_t> epoch_order(std::size_t n, std::uint64_t seed,
                                       std::uint64_t epoch) {
  return make_stream(seed, rng_stream::shuffle, epoch)
      .permutation(static_cast<std::uint32_t>(n));
}

Batch assemble_batch(const Dataset& ds, const std::vector<std::uint32_t>& indices,
                     const ChannelSelection& sel, const NormalizationParams& norm) {
  if (indices.empty()) throw ParameterError("batch needs at least one sample");
  for (const std::uint32_t i : indices)
    if (i >= ds.size())
      throw ParameterError("batch index " + std::to_string(i) + " out of range");

  const auto norm_index = [&](const ChannelKey& key) -> std::size_t {
    for (std::size_t k = 0; k < norm.keys.size(); ++k)
      if (norm.keys[k] == key) return k;
    throw ValidationError("normalization lacks channel " + key.str());
  };

  const int n = static_cast<int>(indices.size());
  Batch batch;
  batch.targets = Tensor({n, 1});
  for (int i = 0; i < n; ++i)
    batch.targets.data()[static_cast<std::size_t>(i)] = ds[indices[static_cast<std::size_t>(i)]].age;

  for (const Plane plane : kCanonicalPlanes) {
    const std::size_t p = static_cast<std::size_t>(plane);
    std::vector<ChannelKey> keys;
    for (const ChannelKey& key : sel.keys())
      if (key.plane == plane) keys.push_back(key);
    if (keys.empty()) {
      batch.planes.planes[p] = Tensor({n, 0, 1, 1});
      continue;
    }

    const Channel* first = ds[indices[0]].projections.find(keys[0]);
    if (!first)
      throw ValidationError("subject " + ds[indices[0]].subject_id +
                            " lacks channel " + keys[0].str());
    const int h = first->image.height();
    const int w = first->image.width();
    Tensor plane_t({n, static_cast<int>(keys.size()), h, w});
    float* dst = plane_t.data().data();
    const std::size_t image_count = static_cast<std::size_t>(h) * w;

    for (int i = 0; i < n; ++i) {
      const Sample& s = ds[indices[static_cast<std::size_t>(i)]];
      for (std::size_t j = 0; j < keys.size(); ++j) {
        const Channel* ch = s.projections.find(keys[j]);
        if (!ch)
          throw ValidationError("subject " + s.subject_id + " lacks channel " +
                                keys[j].str());
        if (ch->image.height() != h || ch->image.width() != w)
          throw ShapeError("subject " + s.subject_id + " channel " + keys[j].str() +
                           " is " + std::to_string(ch->image.height()) + "x" +
                           std::to_string(ch->image.width()) + ", batch expects " +
                           std::to_string(h) + "x" + std::to_string(w));
        const std::size_t k = norm_index(keys[j]);
        const float lo = norm.lo[k];
        const float range = norm.hi[k] - lo;
        float* cell = dst + (static_cast<std::size_t>(i) * keys.size() + j) * image_count;
        const float* src = ch->image.data().data();
        if (range == 0.0f) {
          std::fill(cell, cell + image_count, 0.0f);
        } else {
          for (std::size_t v = 0; v < image_count; ++v) cell[v] = (src[v] - lo) / range;
        }
      }
    }
    batch.planes.planes[p] = std::move(plane_t);
  }
  return batch;
}

std::array<PlaneImageDims, 3> dataset_plane_dims(const Dataset& ds,
                                                 const ChannelSelection& sel) {
  if (ds.empty()) throw ParameterError("cannot infer plane dims from an empty dataset");
  std::array<PlaneImageDims, 3> dims{};
  for (const ChannelKey& key : sel.keys()) {
    const std::size_t p = static_cast<std::size_t>(key.plane);
    if (dims[p].h > 0) continue;
    const Channel* ch = ds[0].projections.find(key);
    if (!ch)
      throw ValidationError("subject " + ds[0].subject_id + " lacks channel " +
                            key.str());
    dims[p] = {ch->image.height(), ch->image.width()};
  }
  return dims;
}

Dataset load_dataset(const std::string& dir, const std::string& labels_path,
                     const ChannelSelection& sel) {
  const auto rows = load_labels_csv(labels_path);
  Dataset ds;
  ds.reserve(rows.size());
  for (const auto& [id, age] : rows) {
    const std::string path = (std::filesystem::path(dir) / (id + ".pjsn")).string();
    ProjectionSet ps = load_projection_set(path);
    for (const ChannelKey& key : sel.keys())
      if (!ps.find(key))
        throw ValidationError("subject " + id + " lacks channel " + key.str());
    ds.push_back({id, age, std::move(ps)});
  }
  return ds;
}

} // namespace projscan
