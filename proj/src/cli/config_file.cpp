#include "diformer/cli/config_file.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "diformer/error.hpp"

namespace diformer {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void type_error(const std::string& key, const char* what, const std::string& value) {
  throw ConfigError("config: key '" + key + "' expects " + what + ", got '" + value + "'");
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value) {
  Int out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) type_error(key, "an integer", value);
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) type_error(key, "a number", value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  type_error(key, "true or false", value);
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(Config&, const std::string&, const std::string&)>;

template <typename Int>
Setter int_field(Int ModelConfig::*f) {
  return [f](Config& c, const std::string& k, const std::string& v) { c.model.*f = parse_int<Int>(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"d_model", int_field(&ModelConfig::d_model)},
      {"n_heads", int_field(&ModelConfig::n_heads)},
      {"d_ffn", int_field(&ModelConfig::d_ffn)},
      {"enc_layers", int_field(&ModelConfig::enc_layers)},
      {"dec_layers", int_field(&ModelConfig::dec_layers)},
      {"max_len", int_field(&ModelConfig::max_len)},
      {"k", int_field(&ModelConfig::max_rel)},
      {"vocab_size", int_field(&ModelConfig::vocab_size)},
      {"lambda_len", [](Config& c, const std::string& k, const std::string& v) { c.model.lambda_len = parse_double(k, v); }},
      {"dropout", [](Config& c, const std::string& k, const std::string& v) { c.model.dropout = parse_double(k, v); }},
      {"lr", [](Config& c, const std::string& k, const std::string& v) { c.training.lr = parse_double(k, v); }},
      {"warmup", [](Config& c, const std::string& k, const std::string& v) { c.training.warmup = parse_int<int>(k, v); }},
      {"steps", [](Config& c, const std::string& k, const std::string& v) { c.training.steps = parse_int<std::int64_t>(k, v); }},
      {"max_tokens", [](Config& c, const std::string& k, const std::string& v) { c.training.max_tokens = parse_int<int>(k, v); }},
      {"seed", [](Config& c, const std::string& k, const std::string& v) { c.training.seed = parse_int<std::uint64_t>(k, v); }},
      {"direction_mode",
       [](Config& c, const std::string& k, const std::string& v) {
         try {
           c.training.direction_mode = parse_direction_mode(v);
         } catch (const ConfigError&) {
           type_error(k, "mixed or fixed-right", v);
         }
       }},
      {"mode",
       [](Config& c, const std::string& k, const std::string& v) {
         try {
           c.decode.mode = parse_decode_mode(v);
         } catch (const ConfigError&) {
           type_error(k, "l2r, r2l, mask-predict or easy-first", v);
         }
       }},
      {"ar_beam", [](Config& c, const std::string& k, const std::string& v) { c.decode.ar_beam = parse_int<int>(k, v); }},
      {"length_beam", [](Config& c, const std::string& k, const std::string& v) { c.decode.length_beam = parse_int<int>(k, v); }},
      {"iterations", [](Config& c, const std::string& k, const std::string& v) { c.decode.iterations = parse_int<int>(k, v); }},
      {"self_rerank", [](Config& c, const std::string& k, const std::string& v) { c.decode.self_rerank = parse_bool(k, v); }},
      {"early_stop", [](Config& c, const std::string& k, const std::string& v) { c.decode.early_stop = parse_bool(k, v); }},
      {"decode_max_len", [](Config& c, const std::string& k, const std::string& v) { c.decode.max_len = parse_int<int>(k, v); }},
  };
  return table;
}

void apply_preset(Config& c, const std::string& value) {
  if (value == "desk") {
    c.model = ModelConfig::desk();
  } else if (value == "paper-base") {
    c.model = ModelConfig::paper_base();
  } else {
    type_error("preset", "desk or paper-base", value);
  }
  c.preset = value;
}

}  // namespace

Config parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + " is not of the form key = value: '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config: line " + std::to_string(lineno) + " has an empty key");
    if (key != "preset" && !setters().contains(key)) throw ConfigError("config: unknown key '" + key + "'");
    entries.emplace_back(std::move(key), std::move(value));
  }
  Config c;
  for (const auto& [k, v] : entries)
    if (k == "preset") apply_preset(c, v);
  for (const auto& [k, v] : entries)
    if (k != "preset") setters().at(k)(c, k, v);
  c.model.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string render_config(const Config& c) {
  std::ostringstream os;
  os << "preset = " << c.preset << '\n'
     << "d_model = " << c.model.d_model << '\n'
     << "n_heads = " << c.model.n_heads << '\n'
     << "d_ffn = " << c.model.d_ffn << '\n'
     << "enc_layers = " << c.model.enc_layers << '\n'
     << "dec_layers = " << c.model.dec_layers << '\n'
     << "max_len = " << c.model.max_len << '\n'
     << "k = " << c.model.max_rel << '\n'
     << "vocab_size = " << c.model.vocab_size << '\n'
     << "lambda_len = " << number(c.model.lambda_len) << '\n'
     << "dropout = " << number(c.model.dropout) << '\n'
     << "lr = " << number(c.training.lr) << '\n'
     << "warmup = " << c.training.warmup << '\n'
     << "steps = " << c.training.steps << '\n'
     << "max_tokens = " << c.training.max_tokens << '\n'
     << "seed = " << c.training.seed << '\n'
     << "direction_mode = " << direction_mode_name(c.training.direction_mode) << '\n'
     << "mode = " << decode_mode_name(c.decode.mode) << '\n'
     << "ar_beam = " << c.decode.ar_beam << '\n'
     << "length_beam = " << c.decode.length_beam << '\n'
     << "iterations = " << c.decode.iterations << '\n'
     << "self_rerank = " << (c.decode.self_rerank ? "true" : "false") << '\n'
     << "early_stop = " << (c.decode.early_stop ? "true" : "false") << '\n'
     << "decode_max_len = " << c.decode.max_len << '\n';
  return os.str();
}

}  // namespace diformer
