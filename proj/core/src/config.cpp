#include "projscan/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "projscan/errors.hpp"

namespace projscan {

namespace {

using nlohmann::json;

[[noreturn]] void fail(int line, const std::string& msg) {
  throw FormatError("config line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool bare_token(const std::string& s) {
  if (s.empty()) return false;
  for (const char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      return false;
  return true;
}

json parse_scalar(const std::string& tok, int line) {
  if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
    const std::string body = tok.substr(1, tok.size() - 2);
    if (body.find('"') != std::string::npos || body.find('\\') != std::string::npos)
      fail(line, "string escapes are not supported");
    return body;
  }
  if (tok == "true") return true;
  if (tok == "false") return false;

  bool integral = !tok.empty();
  for (std::size_t i = 0; i < tok.size(); ++i) {
    const char c = tok[i];
    if (i == 0 && (c == '+' || c == '-')) continue;
    if (!std::isdigit(static_cast<unsigned char>(c))) integral = false;
  }
  char* end = nullptr;
  if (integral) {
    const long long v = std::strtoll(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0') fail(line, "cannot parse number '" + tok + "'");
    return v;
  }
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') fail(line, "cannot parse value '" + tok + "'");
  return v;
}

json parse_value(const std::string& tok, int line) {
  if (!tok.empty() && tok.front() == '[') {
    if (tok.back() != ']') fail(line, "unterminated array");
    json arr = json::array();
    const std::string body = trim(tok.substr(1, tok.size() - 2));
    if (body.empty()) return arr;
    std::size_t start = 0;
    bool in_string = false;
    for (std::size_t i = 0; i <= body.size(); ++i) {
      if (i < body.size() && body[i] == '"') in_string = !in_string;
      if (i == body.size() || (body[i] == ',' && !in_string)) {
        const std::string item = trim(body.substr(start, i - start));
        if (item.empty()) fail(line, "empty array element");
        arr.push_back(parse_scalar(item, line));
        start = i + 1;
      }
    }
    if (in_string) fail(line, "unterminated string");
    return arr;
  }
  return parse_scalar(tok, line);
}

/// Typed view of one parsed section that remembers which keys were
/// consumed, so leftovers can be reported as unknown.
class SectionReader {
 public:
  SectionReader(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) obj_ = &doc.at(name_);
  }

  bool has(const std::string& key) {
    if (!obj_ || !obj_->contains(key)) return false;
    used_.insert(key);
    return true;
  }

  const json& raw(const std::string& key) const { return obj_->at(key); }

  void get_int(const std::string& key, int& out) {
    if (!has(key)) return;
    if (!raw(key).is_number_integer()) bad(key, "an integer");
    out = raw(key).get<int>();
  }
  void get_u64(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    if (!raw(key).is_number_integer() || raw(key).get<long long>() < 0)
      bad(key, "a non-negative integer");
    out = static_cast<std::uint64_t>(raw(key).get<long long>());
  }
  void get_double(const std::string& key, double& out) {
    if (!has(key)) return;
    if (!raw(key).is_number()) bad(key, "a number");
    out = raw(key).get<double>();
  }
  void get_float(const std::string& key, float& out) {
    double v = out;
    get_double(key, v);
    out = static_cast<float>(v);
  }
  void get_bool(const std::string& key, bool& out) {
    if (!has(key)) return;
    if (!raw(key).is_boolean()) bad(key, "a boolean");
    out = raw(key).get<bool>();
  }
  void get_string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    if (!raw(key).is_string()) bad(key, "a string");
    out = raw(key).get<std::string>();
  }
  std::vector<double> get_number_array(const std::string& key, std::size_t count) {
    if (!raw(key).is_array() || raw(key).size() != count)
      bad(key, "an array of " + std::to_string(count) + " numbers");
    std::vector<double> out;
    for (const json& v : raw(key)) {
      if (!v.is_number()) bad(key, "an array of " + std::to_string(count) + " numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items())
      if (!used_.count(key))
        throw ConfigError("unknown config key " + name_ + "." + key);
  }

 private:
  [[noreturn]] void bad(const std::string& key, const std::string& expected) const {
    throw ConfigError("config key " + name_ + "." + key + " must be " + expected);
  }

  const json* obj_ = nullptr;
  std::string name_;
  std::set<std::string> used_;
};

} // namespace

json parse_toml(const std::string& text) {
  json doc = json::object();
  json* section = nullptr;
  std::string section_name;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      section_name = trim(line.substr(1, line.size() - 2));
      if (!bare_token(section_name)) fail(line_no, "bad section name '" + section_name + "'");
      if (!doc.contains(section_name)) doc[section_name] = json::object();
      section = &doc[section_name];
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!bare_token(key)) fail(line_no, "bad key '" + key + "'");
    if (value.empty()) fail(line_no, "missing value for '" + key + "'");
    if (!section) fail(line_no, "key '" + key + "' outside any [section]");
    if (section->contains(key))
      fail(line_no, "duplicate key '" + section_name + "." + key + "'");
    (*section)[key] = parse_value(value, line_no);
  }
  return doc;
}

RunConfig parse_run_config(const std::string& text) {
  const json doc = parse_toml(text);
  static const std::set<std::string> known_sections = {"data", "model", "train",
                                                       "augment"};
  for (const auto& [name, value] : doc.items())
    if (!known_sections.count(name))
      throw ConfigError("unknown config section [" + name + "]");

  RunConfig cfg;

  SectionReader data(doc, "data");
  data.get_string("dir", cfg.data.dir);
  data.get_string("labels", cfg.data.labels);
  data.get_string("channels", cfg.data.channels);
  if (data.has("split")) {
    const auto f = data.get_number_array("split", 3);
    cfg.data.split = {f[0], f[1], f[2]};
  }
  data.get_u64("split_seed", cfg.data.split_seed);
  data.finish();

  SectionReader model(doc, "model");
  model.get_int("conv_layers", cfg.model.conv_layers);
  model.get_int("first_filters", cfg.model.first_filters);
  model.get_int("max_filters", cfg.model.max_filters);
  model.get_int("head_width", cfg.model.head_width);
  model.get_bool("iso", cfg.model.iso);
  bool placement_set = false, rate_set = false;
  if (model.has("dropout_placement")) {
    std::string placement;
    model.get_string("dropout_placement", placement);
    try {
      cfg.model.placement = dropout_placement_from_string(placement);
    } catch (const Error& e) {
      throw ConfigError(std::string("model.dropout_placement: ") + e.what());
    }
    placement_set = true;
  }
  if (model.has("dropout_p")) {
    model.get_double("dropout_p", cfg.model.dropout_p);
    rate_set = true;
  }
  if (placement_set && cfg.model.placement == DropoutPlacement::between_dense && !rate_set)
    cfg.model.dropout_p = 0.3;
  model.finish();

  SectionReader train(doc, "train");
  train.get_double("lr", cfg.train.lr);
  train.get_int("epochs", cfg.train.epochs);
  train.get_int("batch_size", cfg.train.batch_size);
  train.get_u64("seed", cfg.train.seed);
  train.get_int("patience", cfg.train.patience);
  train.finish();

  SectionReader augment(doc, "augment");
  augment.get_bool("enabled", cfg.train.augment);
  augment.get_int("copies", cfg.train.augment_copies);
  augment.get_bool("on_the_fly", cfg.train.augment_on_the_fly);
  if (augment.has("scale")) {
    const auto s = augment.get_number_array("scale", 2);
    cfg.train.augment_ranges.scale_lo = static_cast<float>(s[0]);
    cfg.train.augment_ranges.scale_hi = static_cast<float>(s[1]);
  }
  augment.get_float("rotation_deg", cfg.train.augment_ranges.rotation_deg);
  augment.get_float("shear_deg", cfg.train.augment_ranges.shear_deg);
  augment.get_int("elastic_grid", cfg.train.augment_ranges.elastic_grid);
  augment.get_float("elastic_sigma", cfg.train.augment_ranges.elastic_sigma);
  augment.finish();

  try {
    cfg.selection = ChannelSelection::parse(cfg.data.channels);
  } catch (const Error& e) {
    throw ConfigError(std::string("data.channels: ") + e.what());
  }
  cfg.model.channels_per_plane = plane_channel_counts(cfg.selection);
  cfg.data.split.validate();
  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

} // namespace projscan
