// SPDX-License-Identifier: Apache-2.0
#include "run_config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "earthmapper/common/error.hpp"

namespace emap::cli {

const std::vector<std::pair<std::string, std::vector<KeySpec>>>& config_schema() {
  static const std::vector<std::pair<std::string, std::vector<KeySpec>>> schema{
      {"tile",
       {{"out", Kind::path},         {"n", Kind::integer},          {"seed", Kind::integer},
        {"size", Kind::integer},     {"train", Kind::real},         {"val", Kind::real},
        {"test", Kind::real},        {"city", Kind::string},        {"zoom", Kind::integer},
        {"x0", Kind::integer},       {"y0", Kind::integer},         {"tile_px", Kind::integer},
        {"sat", Kind::path},         {"map", Kind::path},           {"endpoint_sat", Kind::string},
        {"endpoint_map", Kind::string}, {"lat_min", Kind::real},    {"lat_max", Kind::real},
        {"lon_min", Kind::real},     {"lon_max", Kind::real},       {"cache", Kind::path},
        {"max_in_flight", Kind::integer}, {"attempts", Kind::integer}, {"min_diversity", Kind::real},
        {"cloud_filter", Kind::boolean}, {"snap", Kind::integer},  {"max_roads", Kind::integer},
        {"noise_cell", Kind::integer}}},
      {"tokenizer",
       {{"manifest", Kind::path},   {"out", Kind::path},       {"K", Kind::integer},     {"depth", Kind::integer},
        {"latent_dim", Kind::integer}, {"hidden", Kind::integer}, {"patch", Kind::integer}, {"steps", Kind::integer},
        {"batch", Kind::integer},   {"lr", Kind::real},        {"kmeans_iters", Kind::integer},
        {"refits", Kind::integer},  {"max_samples", Kind::integer}, {"max_images", Kind::integer},
        {"seed", Kind::integer}}},
      {"model",
       {{"manifest", Kind::path},     {"tokenizer", Kind::path},     {"out", Kind::path},
        {"layers", Kind::integer},    {"width", Kind::integer},      {"heads", Kind::integer},
        {"mlp_ratio", Kind::integer}, {"steps", Kind::integer},      {"batch", Kind::integer},
        {"lr", Kind::real},           {"warmup", Kind::integer},     {"weight_decay", Kind::real},
        {"grad_clip", Kind::real},    {"sigma", Kind::real},         {"geo_dims", Kind::integer},
        {"geo_dropout", Kind::real},  {"cond_dropout", Kind::real},  {"teacher_seed", Kind::integer},
        {"teacher_hidden", Kind::integer}, {"d_sem", Kind::integer}, {"seed", Kind::integer},
        {"checkpoint_every", Kind::integer}, {"resume", Kind::boolean}}},
      {"infer",
       {{"checkpoint", Kind::path}, {"mode", Kind::string},   {"cond", Kind::path},         {"image", Kind::path},
        {"mask", Kind::path},       {"target", Kind::string}, {"lat", Kind::real},          {"lon", Kind::real},
        {"seed", Kind::integer},    {"tau", Kind::real},      {"kpf_variant", Kind::string},
        {"guidance_fixed", Kind::reals}, {"gamma", Kind::real}, {"top_k", Kind::integer},   {"top_p", Kind::real},
        {"temperature", Kind::real}, {"out", Kind::path}}},
      {"eval",
       {{"checkpoint", Kind::path}, {"manifest", Kind::path}, {"split", Kind::string}, {"direction", Kind::string},
        {"limit", Kind::integer},   {"seed", Kind::integer},  {"tau", Kind::real},     {"guidance_fixed", Kind::reals},
        {"gamma", Kind::real},      {"top_k", Kind::integer}, {"top_p", Kind::real},   {"out", Kind::path}}},
  };
  return schema;
}

namespace {

// Accepted syntax: comments, [section] headers, and key = value lines where the
// value is a basic "string", an integer, a float, true/false, or a one-line
// array of those. That covers every key of the schema.
class Parser {
 public:
  Parser(std::string_view text, int line) : s_(text), line_(line) {}

  nlohmann::json value() {
    skip_ws();
    if (at_end()) fail("missing value");
    const char c = s_[i_];
    if (c == '"') return string();
    if (c == '[') return array();
    if (s_.substr(i_, 4) == "true") return advance(4), true;
    if (s_.substr(i_, 5) == "false") return advance(5), false;
    return number();
  }

  void finish() {
    skip_ws();
    if (!at_end() && s_[i_] == '#') return;
    if (!at_end()) fail("unexpected text after value");
  }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
  int line_;

  bool at_end() const { return i_ >= s_.size(); }
  void advance(std::size_t n) { i_ += n; }
  void skip_ws() {
    while (!at_end() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  nlohmann::json string() {
    ++i_;
    std::string out;
    while (!at_end() && s_[i_] != '"') {
      char c = s_[i_++];
      if (c == '\\') {
        if (at_end()) break;
        const char e = s_[i_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (at_end()) fail("unterminated string");
    ++i_;
    return out;
  }

  nlohmann::json array() {
    ++i_;
    nlohmann::json out = nlohmann::json::array();
    for (;;) {
      skip_ws();
      if (at_end()) fail("unterminated array");
      if (s_[i_] == ']') {
        ++i_;
        return out;
      }
      out.push_back(value());
      skip_ws();
      if (!at_end() && s_[i_] == ',') ++i_;
      else if (at_end() || s_[i_] != ']') fail("expected ',' or ']' in array");
    }
  }

  nlohmann::json number() {
    const std::size_t start = i_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '-' || s_[i_] == '+' ||
                         s_[i_] == '.' || s_[i_] == '_')) {
      ++i_;
    }
    std::string tok;
    for (char c : s_.substr(start, i_ - start))
      if (c != '_') tok += c;
    if (tok.empty()) fail("unrecognized value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" || tok == "nan";
    if (!is_float) {
      std::int64_t v = 0;
      const char* b = tok.data() + (tok[0] == '+' ? 1 : 0);
      const auto r = std::from_chars(b, tok.data() + tok.size(), v);
      if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) fail("bad integer '" + tok + "'");
      return v;
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) fail("bad number '" + tok + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("bad number '" + tok + "'");
    }
  }
};

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

const KeySpec* find_key(const std::string& section, const std::string& key) {
  for (const auto& [name, keys] : config_schema()) {
    if (name != section) continue;
    for (const auto& k : keys)
      if (key == k.key) return &k;
  }
  return nullptr;
}

bool section_known(const std::string& section) {
  for (const auto& [name, keys] : config_schema())
    if (name == section) return true;
  return false;
}

nlohmann::json check_kind(const KeySpec& spec, nlohmann::json v, const std::filesystem::path& base, int line,
                          const std::string& where) {
  auto fail = [&](const char* want) {
    throw ConfigError("config line " + std::to_string(line) + ": " + where + " must be " + want);
  };
  switch (spec.kind) {
    case Kind::integer:
      if (!v.is_number_integer()) fail("an integer");
      return v;
    case Kind::real:
      if (!v.is_number()) fail("a number");
      return v.get<double>();
    case Kind::boolean:
      if (!v.is_boolean()) fail("true or false");
      return v;
    case Kind::string:
      if (!v.is_string()) fail("a string");
      return v;
    case Kind::path: {
      if (!v.is_string()) fail("a path string");
      const std::filesystem::path p = v.get<std::string>();
      return (p.is_absolute() ? p : base / p).lexically_normal().string();
    }
    case Kind::reals: {
      if (!v.is_array()) fail("an array of numbers");
      nlohmann::json out = nlohmann::json::array();
      for (const auto& x : v) {
        if (!x.is_number()) fail("an array of numbers");
        out.push_back(x.get<double>());
      }
      return out;
    }
  }
  return v;
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw UsageError("cannot read config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto cfg = parse(ss.str(), std::filesystem::absolute(file).parent_path());
  cfg.source_ = std::filesystem::absolute(file);
  return cfg;
}

RunConfig RunConfig::parse(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string l = trim(raw);
    if (l.empty() || l[0] == '#') continue;
    if (l[0] == '[') {
      const auto close = l.find(']');
      if (close == std::string::npos) throw ConfigError("config line " + std::to_string(line) + ": bad section header");
      section = trim(std::string_view(l).substr(1, close - 1));
      const std::string rest = trim(std::string_view(l).substr(close + 1));
      if (!rest.empty() && rest[0] != '#') {
        throw ConfigError("config line " + std::to_string(line) + ": text after section header");
      }
      if (!section_known(section)) {
        throw ConfigError("config line " + std::to_string(line) + ": unknown section [" + section + "]");
      }
      if (cfg.tables_.contains(section)) {
        throw ConfigError("config line " + std::to_string(line) + ": section [" + section + "] repeated");
      }
      cfg.tables_[section] = nlohmann::json::object();
      continue;
    }
    const auto eq = l.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
    if (section.empty()) {
      throw ConfigError("config line " + std::to_string(line) + ": key outside of any section");
    }
    const std::string key = trim(std::string_view(l).substr(0, eq));
    const std::string where = section + "." + key;
    const KeySpec* spec = find_key(section, key);
    if (!spec) throw ConfigError("config line " + std::to_string(line) + ": unknown key " + where);
    if (cfg.tables_[section].contains(key)) {
      throw ConfigError("config line " + std::to_string(line) + ": key " + where + " repeated");
    }
    Parser p(std::string_view(l).substr(eq + 1), line);
    auto v = p.value();
    p.finish();
    cfg.tables_[section][key] = check_kind(*spec, std::move(v), base_dir, line, where);
  }
  return cfg;
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
  return tables_.contains(section) && tables_[section].contains(key);
}

const nlohmann::json& RunConfig::get(const std::string& section, const std::string& key) const {
  return tables_.at(section).at(key);
}

}  // namespace emap::cli
