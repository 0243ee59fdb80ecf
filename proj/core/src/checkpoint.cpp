#include "projscan/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "projscan/errors.hpp"

namespace projscan {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'P', 'S', 'C', 'K'};
constexpr std::uint8_t kVersion = 1;

json config_to_json(const ModelConfig& cfg) {
  return json{{"channels_per_plane", cfg.channels_per_plane},
              {"conv_layers", cfg.conv_layers},
              {"first_filters", cfg.first_filters},
              {"max_filters", cfg.max_filters},
              {"head_width", cfg.head_width},
              {"placement", to_string(cfg.placement)},
              {"dropout_p", cfg.dropout_p},
              {"iso", cfg.iso}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  j.at("channels_per_plane").get_to(cfg.channels_per_plane);
  cfg.conv_layers = j.at("conv_layers").get<int>();
  cfg.first_filters = j.at("first_filters").get<int>();
  cfg.max_filters = j.at("max_filters").get<int>();
  cfg.head_width = j.at("head_width").get<int>();
  cfg.placement =
      dropout_placement_from_string(j.at("placement").get<std::string>());
  cfg.dropout_p = j.at("dropout_p").get<double>();
  cfg.iso = j.at("iso").get<bool>();
  return cfg;
}

// params first, then persistent state, both already deduplicated and
// deterministically ordered by the model
std::vector<ParamPtr> all_tensors(const Model& model) {
  std::vector<ParamPtr> tensors = model.params();
  for (const auto& s : model.state()) tensors.push_back(s);
  return tensors;
}

} // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     const NormalizationParams& normalization) {
  if (normalization.keys.size() != normalization.lo.size() ||
      normalization.keys.size() != normalization.hi.size())
    throw ParameterError("normalization key/range lengths differ");

  const auto tensors = all_tensors(model);
  json table = json::array();
  std::uint64_t offset = 0;
  for (const auto& p : tensors) {
    table.push_back({{"name", p->name},
                     {"shape", p->value.shape()},
                     {"offset", offset}});
    offset += p->value.numel() * sizeof(float);
  }

  json layers = json::array();
  for (const auto& [name, spec] : model.layer_specs())
    layers.push_back(
        {{"name", name}, {"kind", spec.kind}, {"attrs", spec.attrs}});

  json norm_keys = json::array();
  for (const auto& key : normalization.keys) norm_keys.push_back(key.str());

  const auto& dims = model.input_dims();
  const json header = {
      {"config", config_to_json(model.config())},
      {"input_dims",
       {{dims[0].h, dims[0].w}, {dims[1].h, dims[1].w}, {dims[2].h, dims[2].w}}},
      {"normalization",
       {{"keys", norm_keys},
        {"lo", normalization.lo},
        {"hi", normalization.hi}}},
      {"layers", layers},
      {"tensors", table},
  };
  const std::string header_text = header.dump();

  std::ofstream out(std::filesystem::path(path), std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  const auto header_len = static_cast<std::uint32_t>(header_text.size());
  out.write(reinterpret_cast<const char*>(&header_len), 4);
  out.write(header_text.data(),
            static_cast<std::streamsize>(header_text.size()));
  for (const auto& p : tensors)
    out.write(reinterpret_cast<const char*>(p->value.data().data()),
              static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
  if (!out) throw FormatError("short write to " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(std::filesystem::path(path), std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);

  char magic[4];
  std::uint8_t version = 0;
  std::uint32_t header_len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 1);
  in.read(reinterpret_cast<char*>(&header_len), 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path + ": not a PSCK checkpoint");
  if (version != kVersion)
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version));

  std::string header_text(header_len, '\0');
  in.read(header_text.data(), header_len);
  if (!in) throw FormatError(path + ": truncated checkpoint header");

  try {
    const json header = json::parse(header_text);

    const ModelConfig cfg = config_from_json(header.at("config"));
    std::array<PlaneImageDims, 3> dims{};
    for (std::size_t p = 0; p < 3; ++p) {
      dims[p].h = header.at("input_dims").at(p).at(0).get<int>();
      dims[p].w = header.at("input_dims").at(p).at(1).get<int>();
    }

    LoadedCheckpoint loaded{build_model(cfg, dims), {}};

    const json& norm = header.at("normalization");
    for (const auto& key : norm.at("keys"))
      loaded.normalization.keys.push_back(
          channel_key_from_string(key.get<std::string>()));
    norm.at("lo").get_to(loaded.normalization.lo);
    norm.at("hi").get_to(loaded.normalization.hi);
    if (loaded.normalization.keys.size() != loaded.normalization.lo.size() ||
        loaded.normalization.keys.size() != loaded.normalization.hi.size())
      throw FormatError(path + ": normalization key/range lengths differ");

    const auto specs = loaded.model.layer_specs();
    const json& layers = header.at("layers");
    if (layers.size() != specs.size())
      throw FormatError(path + ": architecture mismatch (layer count)");
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (layers.at(i).at("kind").get<std::string>() != specs[i].second.kind)
        throw FormatError(path + ": architecture mismatch at layer " +
                          specs[i].first);
      std::map<std::string, double> attrs;
      layers.at(i).at("attrs").get_to(attrs);
      if (attrs != specs[i].second.attrs)
        throw FormatError(path + ": architecture mismatch at layer " +
                          specs[i].first);
    }

    const std::uint64_t payload_start = 9ull + header_len;
    const auto file_size =
        static_cast<std::uint64_t>(std::filesystem::file_size(path));

    const json& table = header.at("tensors");
    const auto tensors = all_tensors(loaded.model);
    if (table.size() != tensors.size())
      throw FormatError(path + ": tensor table size mismatch");
    std::uint64_t total_bytes = 0;
    for (const auto& p : tensors) {
      const json* entry = nullptr;
      for (const auto& row : table)
        if (row.at("name").get<std::string>() == p->name) {
          entry = &row;
          break;
        }
      if (!entry) throw FormatError(path + ": missing tensor " + p->name);
      std::vector<int> shape;
      entry->at("shape").get_to(shape);
      if (shape != p->value.shape())
        throw FormatError(path + ": tensor " + p->name + " shape mismatch");
      const auto offset = entry->at("offset").get<std::uint64_t>();
      const std::uint64_t bytes = p->value.numel() * sizeof(float);
      if (payload_start + offset + bytes > file_size)
        throw FormatError(path + ": payload truncated at tensor " + p->name);
      in.seekg(static_cast<std::streamoff>(payload_start + offset));
      in.read(reinterpret_cast<char*>(p->value.data().data()),
              static_cast<std::streamsize>(bytes));
      if (!in) throw FormatError(path + ": payload read failed for " + p->name);
      total_bytes += bytes;
    }
    if (payload_start + total_bytes != file_size)
      throw FormatError(path + ": unexpected checkpoint size");
    return loaded;
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad checkpoint header: " + e.what());
  }
}

} // namespace projscan
