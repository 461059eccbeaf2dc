#pragma once

// Batch commands behind the futi tool. Each command reads a RunConfig,
// writes fixed file names under <out>/<run_name>/ and returns an exit code.
// Run-level failures throw; row-level failures are reported and turn the
// exit code nonzero.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "futi/checkpoint.hpp"
#include "futi/config.hpp"
#include "futi/data.hpp"
#include "futi/eval.hpp"
#include "futi/lbp.hpp"
#include "futi/models.hpp"
#include "futi/png_io.hpp"

namespace futi::cli {

namespace fs = std::filesystem;
using config::RunConfig;

inline constexpr const char* kCheckpointFile = "checkpoint.futi";
inline constexpr const char* kHistoryFile = "history.csv";
inline constexpr const char* kReportFile = "report.txt";
inline constexpr const char* kConfusionFile = "confusion.csv";
inline constexpr const char* kMetaFile = "meta.txt";

inline std::string default_run_name(const RunConfig& cfg, const std::string& command) {
  if (!cfg.str("run_name").empty()) return cfg.str("run_name");
  if (command == "train" || command == "evaluate" || command == "split")
    return cfg.str("model") + "_" + cfg.str("scenario");
  if (command == "extract-lbp") return "lbp";
  if (command == "compare") return "comparison";
  return command;
}

inline fs::path run_dir(const RunConfig& cfg, const std::string& command) {
  return fs::path(cfg.str("out")) / default_run_name(cfg, command);
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + p.string());
}

inline void write_meta(const fs::path& dir, const RunConfig& cfg, const std::string& command) {
  write_text(dir / kMetaFile, "# futi " + command + "\n" + cfg.echo());
}

inline std::string history_csv(const models::History& h) {
  std::ostringstream os;
  os << "epoch,train_loss,train_acc,test_loss,test_acc\n";
  auto cell = [](double v) { return std::isnan(v) ? std::string() : data::fmt_real(v); };
  for (const auto& e : h)
    os << e.epoch << ',' << cell(e.train_loss) << ',' << cell(e.train_acc) << ','
       << cell(e.test_loss) << ',' << cell(e.test_acc) << '\n';
  return os.str();
}

inline data::LoadOptions load_options(const RunConfig& cfg) {
  data::LoadOptions opt;
  opt.preprocess = cfg.preprocess();
  opt.permissive = cfg.flag("permissive");
  opt.use_feature_cache = cfg.flag("lbp_cache");
  if (!cfg.str("phone_table").empty())
    opt.phones = data::PhoneTable::from_csv(cfg.str("phone_table"));
  return opt;
}

inline std::string dataset_root(const RunConfig& cfg) {
  if (!cfg.str("root").empty()) return cfg.str("root");
  return fs::path(cfg.str("manifest")).parent_path().string();
}

/// Loaded records plus any row-level errors (only non-empty in permissive mode).
inline data::LoadResult load_records(const RunConfig& cfg, std::ostream& log) {
  if (cfg.str("manifest").empty()) throw config::ConfigError("'manifest' is not set");
  auto res = data::load_dataset(dataset_root(cfg), cfg.str("manifest"), load_options(cfg));
  if (!res.errors.empty()) log << "skipped " << res.errors.size() << " bad row(s):\n"
                               << data::describe(res.errors);
  std::size_t per_class[data::kNumClasses] = {};
  for (const auto& r : res.records) ++per_class[r.class_id];
  log << "loaded " << res.records.size() << " records; per class:";
  for (std::size_t c = 0; c < data::kNumClasses; ++c) log << ' ' << per_class[c];
  log << '\n';
  return res;
}

// ---------------------------------------------------------------------------

/// One histogram row per image: path,bin_0,...,bin_{2^P-1}.
inline int cmd_extract_lbp(const RunConfig& cfg, std::ostream& log) {
  const auto lbp_cfg = cfg.lbp();
  const std::string input = cfg.str("input").empty() ? cfg.str("manifest") : cfg.str("input");
  if (input.empty()) throw config::ConfigError("'input' is not set");

  std::vector<std::pair<std::string, fs::path>> items;  // (label, file)
  std::vector<data::RowError> errors;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::recursive_directory_iterator(input))
      if (e.is_regular_file() && e.path().extension() == ".png")
        items.emplace_back(fs::relative(e.path(), input).generic_string(), e.path());
    std::sort(items.begin(), items.end());
  } else {
    const std::string root =
        cfg.str("root").empty() ? fs::path(input).parent_path().string() : cfg.str("root");
    for (const auto& row : data::parse_manifest(input, errors))
      items.emplace_back(row.path, fs::path(root) / row.path);
  }

  const fs::path dir = run_dir(cfg, "extract-lbp");
  fs::create_directories(dir);
  const bool maps = cfg.flag("lbp_maps");
  if (maps) fs::create_directories(dir / "lbp_maps");

  std::ostringstream csv;
  csv << "path";
  for (std::size_t b = 0; b < lbp_cfg.bins(); ++b) csv << ",bin_" << b;
  csv << '\n';
  std::size_t line = 1, written = 0;
  for (const auto& [label, file] : items) {
    ++line;
    try {
      const auto img = png::read(file.string());
      if (img.channels != 3)
        throw ShapeError("expected 3 channels, got " + std::to_string(img.channels));
      const auto gray = lbp::to_grayscale(png::to_planar(img));
      const auto codes = lbp::lbp_map(gray, lbp_cfg);
      const auto feats = lbp::lbp_histogram(codes, lbp_cfg, true);
      csv << label;
      for (double v : feats.histogram) csv << ',' << data::fmt_real(v);
      csv << '\n';
      ++written;
      if (cfg.flag("lbp_cache")) data::write_feature_cache(file.string(), feats);
      if (maps) {
        Tensor<double> vis(codes.shape());
        const double scale = 255.0 / static_cast<double>(lbp_cfg.bins() - 1);
        for (std::size_t i = 0; i < codes.size(); ++i) vis[i] = codes[i] * scale;
        std::string stem = label;
        std::replace(stem.begin(), stem.end(), '/', '_');
        png::write((dir / "lbp_maps" / stem).string(), png::from_gray(vis));
      }
    } catch (const std::exception& e) {
      errors.push_back({line, label, e.what()});
    }
  }
  write_text(dir / "lbp_features.csv", csv.str());
  write_meta(dir, cfg, "extract-lbp");
  log << "wrote " << written << " feature rows to "
      << (dir / "lbp_features.csv").string() << '\n';
  if (!errors.empty()) {
    log << errors.size() << " image(s) failed:\n" << data::describe(errors);
    return 2;
  }
  return 0;
}

inline int cmd_split(const RunConfig& cfg, std::ostream& log) {
  const auto loaded = load_records(cfg, log);
  const auto& recs = loaded.records;
  const auto plan = data::make_split(recs, cfg.scenario(), cfg.u64("seed"), cfg.split());
  const fs::path dir = run_dir(cfg, "split");
  fs::create_directories(dir);
  std::vector<const char*> side(recs.size(), "");
  for (auto i : plan.train_indices) side[i] = "train";
  for (auto i : plan.test_indices) side[i] = "test";
  std::ostringstream os;
  os << "index,path,speaker,class_id,set\n";
  for (std::size_t i = 0; i < recs.size(); ++i)
    if (*side[i]) os << i << ',' << recs[i].image_path << ',' << recs[i].speaker_id << ','
                     << recs[i].class_id << ',' << side[i] << '\n';
  write_text(dir / "split.csv", os.str());
  write_meta(dir, cfg, "split");
  log << data::scenario_name(plan.scenario) << ": " << plan.train_indices.size() << " train, "
      << plan.test_indices.size() << " test\n";
  return loaded.errors.empty() ? 0 : 2;
}

namespace detail {

template <typename T>
models::History train_and_save(const RunConfig& cfg, const std::vector<data::DatasetRecord>& recs,
                               const data::SplitPlan& plan, const fs::path& dir,
                               std::ostream& log) {
  const auto mcfg = cfg.model();
  const bool fused = mcfg.kind == models::ModelKind::fusionnet;
  auto train_set = data::to_labeled_set<T>(recs, plan.train_indices, fused);
  auto test_set = data::to_labeled_set<T>(recs, plan.test_indices, fused);
  auto model = models::build<T>(mcfg, cfg.u64("seed"));
  models::TrainHooks<T> hooks;
  if (test_set.size()) hooks.test_set = &test_set;
  hooks.on_epoch = [&](const models::EpochStats& e) {
    log << "epoch " << e.epoch << " train_loss " << e.train_loss << " train_acc " << e.train_acc;
    if (!std::isnan(e.test_acc)) log << " test_loss " << e.test_loss << " test_acc " << e.test_acc;
    log << '\n';
  };
  const auto history = models::train(model, train_set, cfg.sgd(), hooks);
  checkpoint::save(model, (dir / kCheckpointFile).string());
  return history;
}

}  // namespace detail

/// Split, train, and write checkpoint.futi, history.csv and meta.txt.
inline int cmd_train(const RunConfig& cfg, std::ostream& log) {
  const auto loaded = load_records(cfg, log);
  const auto plan = data::make_split(loaded.records, cfg.scenario(), cfg.u64("seed"), cfg.split());
  log << data::scenario_name(plan.scenario) << ": " << plan.train_indices.size() << " train, "
      << plan.test_indices.size() << " test\n";
  const fs::path dir = run_dir(cfg, "train");
  fs::create_directories(dir);
  const auto& precision = cfg.str("precision");
  models::History history;
  if (precision == "double")
    history = detail::train_and_save<double>(cfg, loaded.records, plan, dir, log);
  else if (precision == "float")
    history = detail::train_and_save<float>(cfg, loaded.records, plan, dir, log);
  else
    throw config::ConfigError("precision must be double or float, got '" + precision + "'");
  write_text(dir / kHistoryFile, history_csv(history));
  write_meta(dir, cfg, "train");
  log << "wrote " << (dir / kCheckpointFile).string() << '\n';
  return loaded.errors.empty() ? 0 : 2;
}

/// Rebuilds the configured split and scores a checkpoint on it.
inline int cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir = run_dir(cfg, "evaluate");
  const std::string ckpt =
      cfg.str("checkpoint").empty() ? (dir / kCheckpointFile).string() : cfg.str("checkpoint");
  auto model = checkpoint::load<double>(ckpt);
  const auto want = cfg.model();
  if (model.kind() != want.kind)
    throw std::invalid_argument("checkpoint " + ckpt + " holds a " +
                                models::kind_name(model.kind()) + " model but config asks for " +
                                models::kind_name(want.kind));
  if (model.config().input_shape != want.input_shape)
    throw std::invalid_argument("checkpoint " + ckpt + " expects input " +
                                shape_str(model.config().input_shape) + " but config gives " +
                                shape_str(want.input_shape));
  if (model.fused() && model.config().texture_dim != want.texture_dim)
    throw std::invalid_argument("checkpoint " + ckpt + " expects " +
                                std::to_string(model.config().texture_dim) +
                                " texture bins but config gives " +
                                std::to_string(want.texture_dim));

  const auto loaded = load_records(cfg, log);
  const auto plan = data::make_split(loaded.records, cfg.scenario(), cfg.u64("seed"), cfg.split());
  const auto& which = cfg.str("eval_split");
  if (which != "test" && which != "train")
    throw config::ConfigError("eval_split must be test or train, got '" + which + "'");
  const auto& idx = which == "test" ? plan.test_indices : plan.train_indices;
  const auto set = data::to_labeled_set<double>(loaded.records, idx, model.fused());
  auto report = eval::predict_and_report(model, set, data::kNumClasses);
  report.scenario = data::scenario_name(plan.scenario);
  report.seed = cfg.u64("seed");

  fs::create_directories(dir);
  eval::write_report(report, (dir / kReportFile).string());
  write_text(dir / kConfusionFile, eval::confusion_csv(report.confusion));
  log << "accuracy " << report.accuracy << " precision_macro " << report.precision_macro << " on "
      << report.n_samples << " " << which << " samples\n";
  for (auto k : report.never_predicted)
    log << "warning: class " << k << " (" << data::class_name(k) << ") was never predicted\n";
  return loaded.errors.empty() ? 0 : 2;
}

/// One row per report: model,scenario,accuracy,precision_macro,...
inline int cmd_compare(const RunConfig& cfg, std::ostream& log) {
  const auto paths = cfg.list("reports");
  if (paths.size() < 2) throw config::ConfigError("compare needs at least 2 reports");
  std::ostringstream os;
  os << "model,scenario,accuracy,precision_macro,precision_micro,n_samples,seed,report\n";
  for (const auto& p : paths) {
    const auto r = eval::read_report(p);
    os << r.model << ',' << r.scenario << ',' << data::fmt_real(r.accuracy) << ','
       << data::fmt_real(r.precision_macro) << ',' << data::fmt_real(r.precision_micro) << ','
       << r.n_samples << ',' << r.seed << ',' << p << '\n';
  }
  const fs::path dir = run_dir(cfg, "compare");
  fs::create_directories(dir);
  write_text(dir / "comparison.csv", os.str());
  log << "compared " << paths.size() << " reports into " << (dir / "comparison.csv").string()
      << '\n';
  return 0;
}

/// Writes synthetic RGB frames and a manifest under <out>/<run_name>/.
inline int cmd_synth(const RunConfig& cfg, std::ostream& log) {
  data::SynthSpec spec;
  spec.n_per_class = cfg.u64("synth_n_per_class");
  spec.image_size = cfg.u64("synth_image_size");
  spec.signal = data::parse_signal(cfg.str("synth_signal"));
  spec.speakers = cfg.u64("synth_speakers");
  spec.lbp = cfg.lbp();
  const fs::path dir = run_dir(cfg, "synth");
  fs::create_directories(dir / "frames");
  std::ostringstream manifest;
  manifest << "path,speaker,utterance_type,phone\n";
  for (const auto& fr : data::synth_frames(spec, cfg.u64("seed"))) {
    const std::string rel = "frames/" + fr.name + ".png";
    png::write((dir / rel).string(), png::from_gray(fr.gray, 3));
    manifest << rel << ',' << fr.speaker_id << ",A," << data::class_phone(fr.class_id) << '\n';
  }
  write_text(dir / "manifest.csv", manifest.str());
  write_meta(dir, cfg, "synth");
  log << "wrote " << spec.n_per_class * data::kNumClasses << " frames and "
      << (dir / "manifest.csv").string() << " (train with image_size = " << spec.image_size
      << ")\n";
  return 0;
}

inline int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log) {
  if (command == "extract-lbp") return cmd_extract_lbp(cfg, log);
  if (command == "split") return cmd_split(cfg, log);
  if (command == "train") return cmd_train(cfg, log);
  if (command == "evaluate") return cmd_evaluate(cfg, log);
  if (command == "compare") return cmd_compare(cfg, log);
  if (command == "synth") return cmd_synth(cfg, log);
  throw std::invalid_argument("unknown command '" + command + "'");
}

}  // namespace futi::cli
