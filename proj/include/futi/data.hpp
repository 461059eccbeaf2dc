#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "futi/lbp.hpp"
#include "futi/models.hpp"
#include "futi/png_io.hpp"
#include "futi/random.hpp"
#include "futi/tensor.hpp"

namespace futi::data {

inline constexpr std::size_t kNumClasses = 4;

inline const char* class_name(std::size_t c) {
  static const char* names[] = {"bilabial_labiodental", "dental_alveolar_postalveolar", "velar",
                                "alveolar_approximant"};
  return c < kNumClasses ? names[c] : "unknown";
}

// ---------------------------------------------------------------------------
// Phone table

/// Maps normalized phone labels ("p", "sh", ...) to class ids.
class PhoneTable {
 public:
  /// Built-in table; data/phones.csv carries the same rows.
  static PhoneTable standard() {
    PhoneTable t;
    for (const char* p : {"p", "b", "m", "f", "v"}) t.add(p, 0);
    for (const char* p : {"th", "dh", "t", "d", "n", "s", "z", "l", "sh", "zh", "ch", "jh"})
      t.add(p, 1);
    for (const char* p : {"k", "g", "ng"}) t.add(p, 2);
    t.add("r", 3);
    return t;
  }

  /// CSV with header "phone,class_id".
  static PhoneTable from_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open phone table " + path);
    PhoneTable t;
    std::string line;
    std::getline(f, line);
    std::size_t row = 1;
    while (std::getline(f, line)) {
      ++row;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos)
        throw std::invalid_argument(path + ":" + std::to_string(row) + ": expected phone,class_id");
      const std::size_t cls = std::stoul(line.substr(comma + 1));
      if (cls >= kNumClasses)
        throw std::invalid_argument(path + ":" + std::to_string(row) + ": class id out of range");
      t.add(line.substr(0, comma), cls);
    }
    return t;
  }

  static std::string normalize(std::string s) {
    auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && ws(s.front())) s.erase(s.begin());
    while (!s.empty() && ws(s.back())) s.pop_back();
    if (s.size() >= 2 && s.front() == '/' && s.back() == '/') s = s.substr(1, s.size() - 2);
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  }

  void add(const std::string& phone, std::size_t cls) { table_[normalize(phone)] = cls; }

  std::optional<std::size_t> find(const std::string& phone) const {
    auto it = table_.find(normalize(phone));
    if (it == table_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t map(const std::string& phone) const {
    if (auto c = find(phone)) return *c;
    throw std::invalid_argument("unknown phone label '" + phone + "'");
  }

  const std::map<std::string, std::size_t>& entries() const { return table_; }

 private:
  std::map<std::string, std::size_t> table_;
};

inline std::size_t map_phone_to_class(const std::string& phone) {
  static const PhoneTable table = PhoneTable::standard();
  return table.map(phone);
}

// ---------------------------------------------------------------------------
// Records and preprocessing

struct DatasetRecord {
  std::string image_path;
  std::string speaker_id;
  char utterance_type = 'A';
  std::string phone_label;
  std::size_t class_id = 0;
  Tensor<double> image;  // [1,S,S], values in [0,1]
  lbp::LBPFeatures texture;
};

struct PreprocessOptions {
  std::size_t image_size = 64;
  lbp::LBPConfig lbp{};
};

/// Bilinear resize with half-pixel centers and edge clamping.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& src, std::size_t out_h, std::size_t out_w) {
  require_rank(src, 2, "resize_bilinear");
  if (!out_h || !out_w) throw ShapeError("resize target must be non-empty");
  const std::size_t H = src.dim(0), W = src.dim(1);
  const double sy = static_cast<double>(H) / out_h, sx = static_cast<double>(W) / out_w;
  Tensor<T> out({out_h, out_w});
  for (std::size_t y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(H - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, H - 1);
    const double wy = fy - y0;
    for (std::size_t x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(W - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, W - 1);
      const double wx = fx - x0;
      const double top = src[y0 * W + x0] * (1 - wx) + src[y0 * W + x1] * wx;
      const double bot = src[y1 * W + x0] * (1 - wx) + src[y1 * W + x1] * wx;
      out[y * out_w + x] = static_cast<T>(top * (1 - wy) + bot * wy);
    }
  }
  return out;
}

struct Preprocessed {
  Tensor<double> image;  // [1,S,S]
  lbp::LBPFeatures texture;
};

/// Grayscale input [H,W] in [0,255]: LBP on full resolution, image resized and scaled to [0,1].
inline Preprocessed preprocess_gray(const Tensor<double>& gray, const PreprocessOptions& opt = {}) {
  require_rank(gray, 2, "preprocess");
  Preprocessed out;
  out.texture = lbp::extract_features(gray, opt.lbp);
  Tensor<double> small = resize_bilinear(gray, opt.image_size, opt.image_size);
  for (auto& v : small.values()) v = std::clamp(v / 255.0, 0.0, 1.0);
  out.image = small.reshaped({1, opt.image_size, opt.image_size});
  return out;
}

/// RGB [3,H,W] in [0,255] to the network image tensor and LBP texture features.
inline Preprocessed preprocess(const Tensor<double>& rgb, const PreprocessOptions& opt = {}) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3)
    throw ShapeError("preprocess expects a [3,H,W] RGB image, got " + shape_str(rgb.shape()));
  return preprocess_gray(lbp::to_grayscale(rgb), opt);
}

// ---------------------------------------------------------------------------
// Number formatting shared by every CSV writer

inline std::string fmt_real(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Texture cache next to an image: "<image>.lbp.csv", header bin_i, one value row.
inline std::string cache_path(const std::string& image_path) { return image_path + ".lbp.csv"; }

inline void write_feature_cache(const std::string& image_path, const lbp::LBPFeatures& f) {
  std::ofstream out(cache_path(image_path), std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + cache_path(image_path));
  for (std::size_t i = 0; i < f.histogram.size(); ++i) out << (i ? "," : "") << "bin_" << i;
  out << '\n';
  for (std::size_t i = 0; i < f.histogram.size(); ++i)
    out << (i ? "," : "") << fmt_real(f.histogram[i]);
  out << '\n';
}

inline std::optional<lbp::LBPFeatures> read_feature_cache(const std::string& image_path,
                                                          const lbp::LBPConfig& cfg) {
  std::ifstream in(cache_path(image_path));
  if (!in) return std::nullopt;
  std::string header, row;
  if (!std::getline(in, header) || !std::getline(in, row)) return std::nullopt;
  const auto cells = split_csv_line(row);
  if (cells.size() != cfg.bins()) return std::nullopt;
  lbp::LBPFeatures f{std::vector<double>(cells.size()), cfg, true};
  for (std::size_t i = 0; i < cells.size(); ++i) f.histogram[i] = std::stod(cells[i]);
  return f;
}

// ---------------------------------------------------------------------------
// Manifest loading

struct ManifestRow {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string path, speaker, utterance_type, phone;
};

struct RowError {
  std::size_t line = 0;
  std::string path;
  std::string message;
};

class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, std::vector<RowError> errors)
      : std::runtime_error(what), errors_(std::move(errors)) {}
  const std::vector<RowError>& errors() const { return errors_; }

 private:
  std::vector<RowError> errors_;
};

inline std::string describe(const std::vector<RowError>& errors) {
  std::ostringstream os;
  for (const auto& e : errors) os << "  line " << e.line << " (" << e.path << "): " << e.message << '\n';
  return os.str();
}

/// Parses "path,speaker,utterance_type,phone". Malformed rows are reported, not skipped.
inline std::vector<ManifestRow> parse_manifest(const std::string& manifest_path,
                                               std::vector<RowError>& errors) {
  std::ifstream f(manifest_path);
  if (!f) throw std::runtime_error("cannot open manifest " + manifest_path);
  std::string line;
  std::vector<ManifestRow> rows;
  if (!std::getline(f, line)) return rows;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != "path,speaker,utterance_type,phone")
    throw std::invalid_argument(manifest_path +
                                ": header must be 'path,speaker,utterance_type,phone', got '" +
                                line + "'");
  std::size_t n = 1;
  while (std::getline(f, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (line.find('"') != std::string::npos) {
      errors.push_back({n, line, "quoted fields are not supported"});
      continue;
    }
    if (cells.size() != 4) {
      errors.push_back({n, cells.empty() ? line : cells[0],
                        "expected 4 fields, got " + std::to_string(cells.size()) +
                            " (paths containing commas are rejected)"});
      continue;
    }
    rows.push_back({n, cells[0], cells[1], cells[2], cells[3]});
  }
  return rows;
}

struct LoadOptions {
  PreprocessOptions preprocess{};
  PhoneTable phones = PhoneTable::standard();
  /// Keep going past bad rows instead of failing the load.
  bool permissive = false;
  /// Read "<image>.lbp.csv" instead of recomputing when present.
  bool use_feature_cache = false;
};

struct LoadResult {
  std::vector<DatasetRecord> records;
  std::vector<RowError> errors;
};

/// Decodes and labels every manifest row, in manifest order.
inline LoadResult load_dataset(const std::string& root, const std::string& manifest,
                               const LoadOptions& opt = {}) {
  LoadResult res;
  const auto rows = parse_manifest(manifest, res.errors);
  for (const auto& row : rows) {
    const std::filesystem::path full = std::filesystem::path(root) / row.path;
    try {
      if (row.utterance_type != "A" && row.utterance_type != "B")
        throw std::invalid_argument("utterance_type must be A or B, got '" + row.utterance_type +
                                    "'");
      if (row.speaker.empty()) throw std::invalid_argument("empty speaker id");
      const auto cls = opt.phones.find(row.phone);
      if (!cls) throw std::invalid_argument("unknown phone label '" + row.phone + "'");
      if (!std::filesystem::exists(full))
        throw std::runtime_error("missing file " + full.string());
      const auto img = png::read(full.string());
      if (img.channels != 3)
        throw ShapeError("expected 3 channels, got " + std::to_string(img.channels));
      Preprocessed pp;
      std::optional<lbp::LBPFeatures> cached;
      if (opt.use_feature_cache) cached = read_feature_cache(full.string(), opt.preprocess.lbp);
      if (cached) {
        pp.image = preprocess(png::to_planar(img), opt.preprocess).image;
        pp.texture = *cached;
      } else {
        pp = preprocess(png::to_planar(img), opt.preprocess);
      }
      res.records.push_back({row.path, row.speaker, row.utterance_type[0], row.phone, *cls,
                             std::move(pp.image), std::move(pp.texture)});
    } catch (const std::exception& e) {
      res.errors.push_back({row.line, row.path, e.what()});
    }
  }
  if (!res.errors.empty() && !opt.permissive)
    throw DatasetError(manifest + ": " + std::to_string(res.errors.size()) +
                           " bad row(s)\n" + describe(res.errors),
                       res.errors);
  return res;
}

// ---------------------------------------------------------------------------
// Splits

enum class Scenario { speaker_dependent, multi_speaker, speaker_independent };

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::speaker_dependent: return "speaker_dependent";
    case Scenario::multi_speaker: return "multi_speaker";
    case Scenario::speaker_independent: return "speaker_independent";
  }
  return "unknown";
}

inline Scenario parse_scenario(const std::string& s) {
  if (s == "speaker_dependent") return Scenario::speaker_dependent;
  if (s == "multi_speaker") return Scenario::multi_speaker;
  if (s == "speaker_independent") return Scenario::speaker_independent;
  throw std::invalid_argument("unknown scenario '" + s +
                              "' (expected speaker_dependent, multi_speaker or speaker_independent)");
}

struct SplitParams {
  double test_fraction = 0.2;
  /// speaker_dependent: the speaker to use; empty picks one from the seed.
  std::string speaker;
  /// speaker_independent: test speakers; empty holds out one speaker picked from the seed.
  std::vector<std::string> held_out;
};

struct SplitPlan {
  Scenario scenario = Scenario::multi_speaker;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  std::vector<std::string> held_out_speakers;
  std::string speaker;  // speaker_dependent only
  std::uint64_t seed = 0;
};

struct SplitKey {
  std::string speaker;
  std::size_t class_id = 0;
};

inline std::vector<SplitKey> split_keys(const std::vector<DatasetRecord>& records) {
  std::vector<SplitKey> keys;
  keys.reserve(records.size());
  for (const auto& r : records) keys.push_back({r.speaker_id, r.class_id});
  return keys;
}

inline SplitPlan make_split(const std::vector<SplitKey>& keys, Scenario scenario,
                            std::uint64_t seed, const SplitParams& params = {}) {
  if (!(params.test_fraction > 0.0 && params.test_fraction < 1.0))
    throw std::invalid_argument("test fraction must lie in (0, 1)");
  std::set<std::string> speakers;
  for (const auto& k : keys) speakers.insert(k.speaker);
  const std::vector<std::string> speaker_list(speakers.begin(), speakers.end());

  Rng rng(seed, Stream::split);
  SplitPlan plan;
  plan.scenario = scenario;
  plan.seed = seed;

  auto cut = [&](std::vector<std::size_t> idx, bool keep_both_sides) {
    shuffle(idx, rng);
    auto n_test = static_cast<std::size_t>(std::llround(idx.size() * params.test_fraction));
    if (keep_both_sides) n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    plan.test_indices.insert(plan.test_indices.end(), idx.begin(), idx.begin() + n_test);
    plan.train_indices.insert(plan.train_indices.end(), idx.begin() + n_test, idx.end());
  };

  switch (scenario) {
    case Scenario::speaker_dependent: {
      if (speaker_list.empty()) throw std::invalid_argument("speaker_dependent split needs records");
      std::string who = params.speaker;
      if (who.empty()) who = speaker_list[rng.below(speaker_list.size())];
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < keys.size(); ++i)
        if (keys[i].speaker == who) idx.push_back(i);
      if (idx.size() < 2)
        throw std::invalid_argument("speaker '" + who + "' has " + std::to_string(idx.size()) +
                                    " record(s); speaker_dependent needs at least 2");
      plan.speaker = who;
      cut(std::move(idx), true);
      break;
    }
    case Scenario::multi_speaker: {
      if (speaker_list.size() < 2)
        throw std::invalid_argument("multi_speaker split needs at least 2 speakers");
      std::map<std::size_t, std::vector<std::size_t>> by_class;
      for (std::size_t i = 0; i < keys.size(); ++i) by_class[keys[i].class_id].push_back(i);
      for (auto& [cls, idx] : by_class) cut(std::move(idx), false);
      break;
    }
    case Scenario::speaker_independent: {
      if (speaker_list.size() < 2)
        throw std::invalid_argument("speaker_independent split needs at least 2 speakers");
      std::vector<std::string> held = params.held_out;
      if (held.empty()) held.push_back(speaker_list[rng.below(speaker_list.size())]);
      std::sort(held.begin(), held.end());
      held.erase(std::unique(held.begin(), held.end()), held.end());
      for (const auto& h : held)
        if (!speakers.count(h))
          throw std::invalid_argument("held-out speaker '" + h + "' has no records");
      const std::set<std::string> held_set(held.begin(), held.end());
      for (std::size_t i = 0; i < keys.size(); ++i)
        (held_set.count(keys[i].speaker) ? plan.test_indices : plan.train_indices).push_back(i);
      if (plan.train_indices.empty())
        throw std::invalid_argument("holding out every speaker leaves no training data");
      plan.held_out_speakers = std::move(held);
      break;
    }
  }
  std::sort(plan.train_indices.begin(), plan.train_indices.end());
  std::sort(plan.test_indices.begin(), plan.test_indices.end());
  return plan;
}

inline SplitPlan make_split(const std::vector<DatasetRecord>& records, Scenario scenario,
                            std::uint64_t seed, const SplitParams& params = {}) {
  return make_split(split_keys(records), scenario, seed, params);
}

/// FNV-1a, the stable per-record key used to order training.
inline std::uint64_t record_id(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

template <typename T = double>
models::LabeledSet<T> to_labeled_set(const std::vector<DatasetRecord>& records,
                                     const std::vector<std::size_t>& indices, bool with_textures) {
  models::LabeledSet<T> set;
  if (indices.empty()) return set;
  const Shape ps = records.at(indices.front()).image.shape();
  const std::size_t isz = shape_numel(ps);
  const std::size_t D = records.at(indices.front()).texture.histogram.size();
  std::vector<T> ibuf, tbuf;
  ibuf.reserve(indices.size() * isz);
  if (with_textures) tbuf.reserve(indices.size() * D);
  for (auto i : indices) {
    const auto& r = records.at(i);
    if (r.image.shape() != ps)
      throw ShapeError("record " + r.image_path + " image " + shape_str(r.image.shape()) +
                       " differs from " + shape_str(ps));
    ibuf.insert(ibuf.end(), r.image.values().begin(), r.image.values().end());
    if (with_textures) {
      if (r.texture.histogram.size() != D)
        throw ShapeError("record " + r.image_path + " texture length mismatch");
      tbuf.insert(tbuf.end(), r.texture.histogram.begin(), r.texture.histogram.end());
    }
    set.labels.push_back(r.class_id);
    set.ids.push_back(record_id(r.image_path));
  }
  Shape is{indices.size()};
  is.insert(is.end(), ps.begin(), ps.end());
  set.images = Tensor<T>(is, std::move(ibuf));
  if (with_textures) set.textures = Tensor<T>({indices.size(), D}, std::move(tbuf));
  return set;
}

// ---------------------------------------------------------------------------
// Synthetic data

enum class Signal { image_only, texture_only, both };

inline Signal parse_signal(const std::string& s) {
  if (s == "image_only") return Signal::image_only;
  if (s == "texture_only") return Signal::texture_only;
  if (s == "both") return Signal::both;
  throw std::invalid_argument("unknown synthetic signal '" + s +
                              "' (expected image_only, texture_only or both)");
}

inline const char* signal_name(Signal s) {
  switch (s) {
    case Signal::image_only: return "image_only";
    case Signal::texture_only: return "texture_only";
    case Signal::both: return "both";
  }
  return "unknown";
}

struct SynthSpec {
  std::size_t n_per_class = 10;
  /// Network input size; frames are generated at twice this resolution.
  std::size_t image_size = 16;
  Signal signal = Signal::both;
  std::size_t speakers = 9;
  lbp::LBPConfig lbp{};
};

struct SynthFrame {
  Tensor<double> gray;  // [2S,2S], integer grey levels
  std::size_t class_id = 0;
  std::string speaker_id;
  std::string name;
};

inline const char* class_phone(std::size_t c) {
  static const char* phones[] = {"/p/", "/t/", "/k/", "/r/"};
  return phones[c];
}

/// Full-resolution frames. Texture classes are +-A patterns with zero mean on
/// every aligned 2x2 block, so a 2x downscale erases them exactly; image
/// classes are a smooth bump placed in a class-specific quadrant.
inline std::vector<SynthFrame> synth_frames(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n_per_class == 0) throw std::invalid_argument("n_per_class must be at least 1");
  if (spec.image_size < 4) throw std::invalid_argument("synthetic image_size must be at least 4");
  if (spec.speakers == 0) throw std::invalid_argument("synthetic speaker count must be positive");
  const std::size_t F = 2 * spec.image_size, B = spec.image_size;
  constexpr double kAmp = 20.0, kBump = 60.0, kNoise = 6.0;
  Rng rng(seed, Stream::synth);

  // The six balanced sign arrangements of a 2x2 block, as (tl,tr,bl,br).
  static const int balanced[6][4] = {{1, -1, -1, 1}, {-1, 1, 1, -1}, {1, 1, -1, -1},
                                     {-1, -1, 1, 1}, {1, -1, 1, -1}, {-1, 1, -1, 1}};
  auto pattern = [&](std::size_t cls, bool class_texture) -> int {
    if (!class_texture) return static_cast<int>(rng.below(6));
    switch (cls) {
      case 0: return 0;  // checkerboard
      case 1: return 2;  // horizontal stripes
      case 2: return 4;  // vertical stripes
      default: return static_cast<int>(rng.below(6));
    }
  };

  const bool tex = spec.signal != Signal::image_only;
  const bool img = spec.signal != Signal::texture_only;
  std::vector<SynthFrame> frames;
  frames.reserve(kNumClasses * spec.n_per_class);
  std::size_t serial = 0;
  for (std::size_t cls = 0; cls < kNumClasses; ++cls) {
    for (std::size_t j = 0; j < spec.n_per_class; ++j, ++serial) {
      SynthFrame fr;
      fr.class_id = cls;
      fr.speaker_id = "S" + std::to_string(serial % spec.speakers + 1);
      fr.name = "synth_c" + std::to_string(cls) + "_" + std::to_string(j);
      fr.gray = Tensor<double>({F, F});
      const double base = rng.uniform(70.0, 130.0);
      const double cy = (cls / 2 == 0 ? 0.28 : 0.72) * B + rng.uniform(-1.0, 1.0);
      const double cx = (cls % 2 == 0 ? 0.28 : 0.72) * B + rng.uniform(-1.0, 1.0);
      const double sigma = B / 6.0;
      for (std::size_t by = 0; by < B; ++by) {
        for (std::size_t bx = 0; bx < B; ++bx) {
          double level = base + kNoise * rng.normal();
          if (img) {
            const double dy = by + 0.5 - cy, dx = bx + 0.5 - cx;
            level += kBump * std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
          }
          level = std::round(std::clamp(level, kAmp, 255.0 - kAmp));
          const int* signs = balanced[pattern(cls, tex)];
          for (std::size_t q = 0; q < 4; ++q) {
            const std::size_t y = 2 * by + q / 2, x = 2 * bx + q % 2;
            fr.gray[y * F + x] = level + kAmp * signs[q];
          }
        }
      }
      frames.push_back(std::move(fr));
    }
  }
  return frames;
}

inline std::vector<DatasetRecord> synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  const PreprocessOptions opt{spec.image_size, spec.lbp};
  std::vector<DatasetRecord> out;
  for (auto& fr : synth_frames(spec, seed)) {
    auto pp = preprocess_gray(fr.gray, opt);
    out.push_back({fr.name + ".png", fr.speaker_id, 'A', class_phone(fr.class_id), fr.class_id,
                   std::move(pp.image), std::move(pp.texture)});
  }
  return out;
}

}  // namespace futi::data
