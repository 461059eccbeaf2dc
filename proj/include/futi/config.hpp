#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "futi/data.hpp"
#include "futi/lbp.hpp"
#include "futi/models.hpp"
#include "futi/nn.hpp"

namespace futi::config {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct KeyInfo {
  const char* key;
  const char* default_value;
  const char* help;
};

// clang-format off
inline const std::vector<KeyInfo>& known_keys() {
  static const std::vector<KeyInfo> keys = {
    {"root", "", "dataset root; manifest paths are relative to it (default: manifest directory)"},
    {"manifest", "", "manifest CSV: path,speaker,utterance_type,phone"},
    {"input", "", "extract-lbp input: a directory of PNGs or a manifest CSV"},
    {"phone_table", "", "phone,class_id CSV replacing the built-in table"},
    {"permissive", "false", "keep going past bad manifest rows"},
    {"lbp_cache", "false", "extract-lbp writes, loaders read <image>.lbp.csv"},
    {"lbp_maps", "false", "extract-lbp also writes LBP code maps as PNG"},
    {"model", "fusionnet", "dnn | cnn | fusionnet"},
    {"scenario", "speaker_independent", "speaker_dependent | multi_speaker | speaker_independent"},
    {"held_out", "", "comma-separated test speakers (speaker_independent)"},
    {"speaker", "", "speaker for speaker_dependent"},
    {"test_fraction", "0.2", "test share for speaker_dependent and multi_speaker"},
    {"seed", "0", "run seed; every random stream derives from it"},
    {"out", "runs", "output directory"},
    {"run_name", "", "run directory name (default depends on the command)"},
    {"lr", "0.001", "SGD learning rate"},
    {"batch_size", "32", "mini-batch size"},
    {"epochs", "50", "training epochs"},
    {"precision", "double", "double | float training arithmetic"},
    {"image_size", "64", "network input side length"},
    {"lbp_points", "8", "LBP neighbour count P"},
    {"lbp_radius", "1", "LBP radius R"},
    {"lbp_interpolation", "nearest", "nearest | bilinear"},
    {"pooling", "max", "max | avg"},
    {"dropout", "0.5", "dropout rate"},
    {"conv1_filters", "16", "first conv layer filters"},
    {"conv2_filters", "32", "second conv layer filters"},
    {"cnn_hidden", "128", "dense width after the conv trunk"},
    {"dnn_hidden1", "512", "first dnn hidden width"},
    {"dnn_hidden2", "256", "second dnn hidden width"},
    {"texture_hidden1", "128", "first texture-branch width"},
    {"texture_hidden2", "64", "second texture-branch width"},
    {"fusion_hidden", "64", "fusion head width"},
    {"checkpoint", "", "evaluate: checkpoint path (default <out>/<run_name>/checkpoint.futi)"},
    {"eval_split", "test", "evaluate on the test or train side of the split"},
    {"reports", "", "compare: comma-separated report.txt paths"},
    {"synth_n_per_class", "10", "synth: frames per class"},
    {"synth_image_size", "32", "synth: network-size side; frames are written at twice this"},
    {"synth_signal", "both", "synth: image_only | texture_only | both"},
    {"synth_speakers", "9", "synth: number of synthetic speakers"},
  };
  return keys;
}
// clang-format on

/// Flat key = value settings. Unknown keys are rejected.
class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : known_keys()) values_[k.key] = k.default_value;
  }

  static RunConfig from_text(const std::string& text, const std::string& origin = "<config>") {
    RunConfig c;
    c.merge_text(text, origin);
    return c;
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str(), path);
  }

  void merge_text(const std::string& text, const std::string& origin) {
    std::istringstream is(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
      ++n;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }

  /// "key=value" as given to --set.
  void set_assignment(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  std::uint64_t u64(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t pos = 0;
      if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
      const auto r = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return r;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" + v + "'");
    }
  }

  double real(const std::string& key) const {
    const auto& v = str(key);
    try {
      std::size_t pos = 0;
      const double r = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return r;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
    }
  }

  bool flag(const std::string& key) const {
    const auto& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no" || v.empty()) return false;
    throw ConfigError("config key '" + key + "' expects true/false, got '" + v + "'");
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream is(str(key));
    std::string item;
    while (std::getline(is, item, ','))
      if (!trim(item).empty()) out.push_back(trim(item));
    return out;
  }

  /// Every key in sorted order; feeding this back through from_text reproduces the config.
  std::string echo() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
    return os.str();
  }

  bool operator==(const RunConfig&) const = default;

  // Typed views -------------------------------------------------------------

  lbp::LBPConfig lbp() const {
    lbp::LBPConfig c;
    c.points = static_cast<int>(u64("lbp_points"));
    c.radius = real("lbp_radius");
    const auto& interp = str("lbp_interpolation");
    if (interp == "nearest")
      c.interpolation = lbp::Interpolation::nearest;
    else if (interp == "bilinear")
      c.interpolation = lbp::Interpolation::bilinear;
    else
      throw ConfigError("lbp_interpolation must be nearest or bilinear, got '" + interp + "'");
    c.validate();
    return c;
  }

  data::PreprocessOptions preprocess() const {
    const auto size = u64("image_size");
    if (size < 4) throw ConfigError("image_size must be at least 4");
    return {size, lbp()};
  }

  nn::SGDConfig sgd() const {
    nn::SGDConfig s;
    s.learning_rate = real("lr");
    s.batch_size = u64("batch_size");
    s.epochs = u64("epochs");
    s.seed = u64("seed");
    s.validate();
    return s;
  }

  models::ModelConfig model() const {
    models::ModelConfig m;
    m.kind = models::parse_kind(str("model"));
    const auto size = u64("image_size");
    m.input_shape = {1, size, size};
    m.texture_dim = lbp().bins();
    m.num_classes = data::kNumClasses;
    m.dnn_hidden1 = u64("dnn_hidden1");
    m.dnn_hidden2 = u64("dnn_hidden2");
    m.conv1_filters = u64("conv1_filters");
    m.conv2_filters = u64("conv2_filters");
    m.cnn_hidden = u64("cnn_hidden");
    m.texture_hidden1 = u64("texture_hidden1");
    m.texture_hidden2 = u64("texture_hidden2");
    m.fusion_hidden = u64("fusion_hidden");
    m.dropout = real("dropout");
    const auto& pool = str("pooling");
    if (pool == "max")
      m.pooling = models::PoolKind::max;
    else if (pool == "avg")
      m.pooling = models::PoolKind::avg;
    else
      throw ConfigError("pooling must be max or avg, got '" + pool + "'");
    m.validate();
    return m;
  }

  data::SplitParams split() const {
    data::SplitParams p;
    p.test_fraction = real("test_fraction");
    p.speaker = str("speaker");
    p.held_out = list("held_out");
    return p;
  }

  data::Scenario scenario() const { return data::parse_scenario(str("scenario")); }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace futi::config
