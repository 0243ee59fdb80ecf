#include "projscan/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <tuple>

#include <json.hpp>

#include "projscan/errors.hpp"
#include "projscan/moments.hpp"
#include "projscan/pca.hpp"

namespace projscan {

const char* to_string(Statistic stat) {
  switch (stat) {
    case Statistic::mean: return "mean";
    case Statistic::std: return "std";
    case Statistic::skew: return "skew";
    case Statistic::kurt: return "kurt";
    case Statistic::eigen: return "eigen";
  }
  return "?";
}

Statistic statistic_from_string(const std::string& name) {
  if (name == "mean") return Statistic::mean;
  if (name == "std") return Statistic::std;
  if (name == "skew") return Statistic::skew;
  if (name == "kurt") return Statistic::kurt;
  if (name == "eigen") return Statistic::eigen;
  throw ParameterError("unknown statistic name: " + name);
}

namespace {

int plane_rank(Plane plane) {
  for (std::size_t i = 0; i < kCanonicalPlanes.size(); ++i)
    if (kCanonicalPlanes[i] == plane) return static_cast<int>(i);
  throw ParameterError("unknown plane");
}

std::string trimmed(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

} // namespace

bool ChannelKey::operator<(const ChannelKey& other) const {
  return std::tuple(plane_rank(plane), static_cast<int>(stat), component) <
         std::tuple(plane_rank(other.plane), static_cast<int>(other.stat),
                    other.component);
}

std::string ChannelKey::str() const {
  std::string s = std::string(to_string(plane)) + "-" + to_string(stat);
  if (stat == Statistic::eigen) s += std::to_string(component);
  return s;
}

ChannelKey channel_key_from_string(const std::string& token) {
  const auto dash = token.find('-');
  if (dash == std::string::npos)
    throw ParameterError("channel token \"" + token +
                         "\" is not of the form plane-statistic");
  ChannelKey key;
  key.plane = plane_from_string(token.substr(0, dash));
  std::string stat = token.substr(dash + 1);
  if (stat.rfind("eigen", 0) == 0 && stat.size() > 5) {
    key.stat = Statistic::eigen;
    try {
      std::size_t used = 0;
      key.component = std::stoi(stat.substr(5), &used);
      if (used != stat.size() - 5) throw std::invalid_argument(stat);
    } catch (const std::exception&) {
      throw ParameterError("bad eigen component in channel token \"" + token +
                           "\"");
    }
    if (key.component < 1)
      throw ParameterError("eigen component must be >= 1 in \"" + token + "\"");
  } else {
    key.stat = statistic_from_string(stat);
    if (key.stat == Statistic::eigen)
      throw ParameterError("eigen channel needs a component, e.g. \"" + token +
                           "1\"");
  }
  return key;
}

const Channel* ProjectionSet::find(const ChannelKey& key) const {
  for (const Channel& c : channels)
    if (c.key == key) return &c;
  return nullptr;
}

ChannelSelection::ChannelSelection(std::vector<ChannelKey> keys)
    : keys_(std::move(keys)) {
  std::sort(keys_.begin(), keys_.end());
  keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
}

ChannelSelection ChannelSelection::parse(const std::string& text) {
  std::vector<ChannelKey> keys;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string token =
        trimmed(text.substr(pos, comma == std::string::npos ? std::string::npos
                                                            : comma - pos));
    pos = comma == std::string::npos ? text.size() + 1 : comma + 1;
    if (token.empty()) continue;
    if (token == "six") {
      const ChannelSelection six = ChannelSelection::six();
      keys.insert(keys.end(), six.keys().begin(), six.keys().end());
    } else if (token == "moments") {
      const ChannelSelection all = ChannelSelection::moments();
      keys.insert(keys.end(), all.keys().begin(), all.keys().end());
    } else {
      keys.push_back(channel_key_from_string(token));
    }
  }
  return ChannelSelection(std::move(keys));
}

ChannelSelection ChannelSelection::six() {
  std::vector<ChannelKey> keys;
  for (Plane plane : kCanonicalPlanes)
    for (Statistic stat : {Statistic::mean, Statistic::std})
      keys.push_back({plane, stat, 0});
  return ChannelSelection(std::move(keys));
}

ChannelSelection ChannelSelection::moments() {
  std::vector<ChannelKey> keys;
  for (Plane plane : kCanonicalPlanes)
    for (Statistic stat :
         {Statistic::mean, Statistic::std, Statistic::skew, Statistic::kurt})
      keys.push_back({plane, stat, 0});
  return ChannelSelection(std::move(keys));
}

bool ChannelSelection::contains(const ChannelKey& key) const {
  return std::binary_search(keys_.begin(), keys_.end(), key);
}

int ChannelSelection::max_eigen_component(Plane plane) const {
  int k = 0;
  for (const ChannelKey& key : keys_)
    if (key.plane == plane && key.stat == Statistic::eigen)
      k = std::max(k, key.component);
  return k;
}

std::string ChannelSelection::str() const {
  std::string s;
  for (const ChannelKey& key : keys_) {
    if (!s.empty()) s += ",";
    s += key.str();
  }
  return s;
}

ChannelSelection selection_from_bitmask(unsigned mask) {
  if (mask >= 64u)
    throw ParameterError("channel bitmask " + std::to_string(mask) +
                         " exceeds the six canonical channels");
  const ChannelSelection six = ChannelSelection::six();
  std::vector<ChannelKey> keys;
  for (unsigned bit = 0; bit < 6; ++bit)
    if (mask & (1u << bit)) keys.push_back(six.keys()[bit]);
  return ChannelSelection(std::move(keys));
}

unsigned bitmask_from_selection(const ChannelSelection& sel) {
  const ChannelSelection six = ChannelSelection::six();
  unsigned mask = 0;
  for (const ChannelKey& key : sel.keys()) {
    const auto it = std::find(six.keys().begin(), six.keys().end(), key);
    if (it == six.keys().end())
      throw ParameterError("channel " + key.str() +
                           " is outside the canonical six");
    mask |= 1u << (it - six.keys().begin());
  }
  return mask;
}

namespace {

void record_range(Channel& c) {
  float lo = std::numeric_limits<float>::infinity();
  float hi = -lo;
  for (float v : c.image.data()) {
    if (!std::isfinite(v))
      throw ValidationError("channel " + c.key.str() +
                            " produced a non-finite value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  c.min = c.image.data().empty() ? 0.0f : lo;
  c.max = c.image.data().empty() ? 0.0f : hi;
}

} // namespace

ProjectionSet build_projection_set(const Volume3D& vol,
                                   const ChannelSelection& spec,
                                   const std::string& subject_id) {
  if (spec.empty())
    throw ParameterError("channel selection is empty; nothing to project");

  ProjectionSet ps;
  ps.subject_id = subject_id;

  for (Plane plane : kCanonicalPlanes) {
    bool need_high = false, need_low = false;
    for (const ChannelKey& key : spec.keys()) {
      if (key.plane != plane) continue;
      if (key.stat == Statistic::skew || key.stat == Statistic::kurt)
        need_high = true;
      else if (key.stat == Statistic::mean || key.stat == Statistic::std)
        need_low = true;
    }
    const int k = spec.max_eigen_component(plane);

    MomentImages high;
    MeanStdImages low;
    if (need_high) high = project_moments(vol, plane);
    else if (need_low) low = project_mean_std(vol, plane);
    EigenSlices eig;
    if (k > 0) eig = eigen_slices(vol, plane, k);

    for (const ChannelKey& key : spec.keys()) {
      if (key.plane != plane) continue;
      Channel c;
      c.key = key;
      switch (key.stat) {
        case Statistic::mean: c.image = need_high ? high.mean : low.mean; break;
        case Statistic::std: c.image = need_high ? high.std : low.std; break;
        case Statistic::skew: c.image = high.skew; break;
        case Statistic::kurt: c.image = high.kurt; break;
        case Statistic::eigen:
          c.image = eig.images[static_cast<std::size_t>(key.component - 1)];
          break;
      }
      record_range(c);
      ps.channels.push_back(std::move(c));
    }
  }
  return ps;
}

namespace {

constexpr char kMagic[4] = {'P', 'J', 'S', 'N'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  if (!in) throw FormatError(path + ": truncated channel file");
  return value;
}

std::string json_sidecar_path(const std::string& path) {
  return std::filesystem::path(path).replace_extension(".json").string();
}

} // namespace

void save_projection_set(const ProjectionSet& ps, const std::string& path) {
  if (ps.channels.empty())
    throw ParameterError("refusing to save an empty projection set");
  if (ps.channels.size() > std::numeric_limits<std::uint16_t>::max())
    throw ParameterError("too many channels to save");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot create " + path);
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::uint16_t>(ps.channels.size()));
  put(out, static_cast<std::uint32_t>(ps.channels.front().image.height()));
  put(out, static_cast<std::uint32_t>(ps.channels.front().image.width()));
  for (const Channel& c : ps.channels) {
    put(out, static_cast<std::uint8_t>(c.key.plane));
    put(out, static_cast<std::uint8_t>(c.key.stat));
    put(out, static_cast<std::uint16_t>(c.key.component));
    put(out, static_cast<std::uint32_t>(c.image.height()));
    put(out, static_cast<std::uint32_t>(c.image.width()));
  }
  for (const Channel& c : ps.channels)
    out.write(reinterpret_cast<const char*>(c.image.data().data()),
              static_cast<std::streamsize>(c.image.count() * sizeof(float)));
  if (!out) throw FormatError("write failed for " + path);

  nlohmann::json j;
  j["subject_id"] = ps.subject_id;
  j["channels"] = nlohmann::json::array();
  for (const Channel& c : ps.channels) {
    nlohmann::json jc;
    jc["plane"] = to_string(c.key.plane);
    jc["statistic"] = to_string(c.key.stat);
    jc["component"] = c.key.component;
    jc["min"] = static_cast<double>(c.min);
    jc["max"] = static_cast<double>(c.max);
    j["channels"].push_back(std::move(jc));
  }
  std::ofstream meta(json_sidecar_path(path), std::ios::trunc);
  if (!meta) throw FormatError("cannot create " + json_sidecar_path(path));
  meta << j.dump(2) << "\n";
}

ProjectionSet load_projection_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path + ": not a PJSN channel file");
  const auto version = take<std::uint8_t>(in, path);
  if (version != kVersion)
    throw FormatError(path + ": unsupported PJSN version " +
                      std::to_string(version));
  const auto count = take<std::uint16_t>(in, path);
  if (count == 0) throw FormatError(path + ": channel file has no channels");
  take<std::uint32_t>(in, path); // leading h/w mirror channel 0, skip
  take<std::uint32_t>(in, path);

  ProjectionSet ps;
  ps.channels.resize(count);
  for (Channel& c : ps.channels) {
    const auto plane = take<std::uint8_t>(in, path);
    const auto stat = take<std::uint8_t>(in, path);
    if (plane > 2 || stat > 4)
      throw FormatError(path + ": bad channel descriptor");
    c.key.plane = static_cast<Plane>(plane);
    c.key.stat = static_cast<Statistic>(stat);
    c.key.component = take<std::uint16_t>(in, path);
    const auto h = take<std::uint32_t>(in, path);
    const auto w = take<std::uint32_t>(in, path);
    if (h == 0 || w == 0 || h > (1u << 20) || w > (1u << 20))
      throw FormatError(path + ": unreasonable channel dims");
    c.image = Image2D(static_cast<int>(h), static_cast<int>(w));
  }
  for (Channel& c : ps.channels) {
    in.read(reinterpret_cast<char*>(c.image.data().data()),
            static_cast<std::streamsize>(c.image.count() * sizeof(float)));
    if (!in) throw FormatError(path + ": channel payload truncated");
  }

  const std::string meta_path = json_sidecar_path(path);
  std::ifstream meta(meta_path);
  if (!meta) throw FormatError("missing channel sidecar " + meta_path);
  nlohmann::json j;
  try {
    meta >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(meta_path + ": invalid JSON: " + e.what());
  }
  ps.subject_id = j.value("subject_id", "");
  if (!j.contains("channels") || j["channels"].size() != ps.channels.size())
    throw FormatError(meta_path + ": sidecar channel list does not match " +
                      std::to_string(ps.channels.size()) + " channels");
  for (std::size_t i = 0; i < ps.channels.size(); ++i) {
    const auto& jc = j["channels"][i];
    ChannelKey key;
    key.plane = plane_from_string(jc.value("plane", ""));
    key.stat = statistic_from_string(jc.value("statistic", ""));
    key.component = jc.value("component", 0);
    if (!(key == ps.channels[i].key))
      throw FormatError(meta_path + ": sidecar channel " + std::to_string(i) +
                        " is " + key.str() + ", binary has " +
                        ps.channels[i].key.str());
    ps.channels[i].min = static_cast<float>(jc.value("min", 0.0));
    ps.channels[i].max = static_cast<float>(jc.value("max", 0.0));
  }
  return ps;
}

} // namespace projscan
